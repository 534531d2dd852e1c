"""Index geometry: dependency blocks of the majority map, sample-set layouts
and the row-packing bijection between N^2 and N.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from ..errors import DomainError

__all__ = [
    "cone_block",
    "depth_of",
    "ELayout",
    "build_e_layout",
    "phi",
    "phi_inv",
]


def _check_arity(N, allow_one=False):
    if int(N) != N or N < 1 or N % 2 == 0:
        raise DomainError(f"arity must be an odd positive integer, got {N!r}")
    if N == 1 and not allow_one:
        raise DomainError("arity 1 has no block structure (the map is a shift)")


def cone_block(N: int, t: int) -> tuple[int, int]:
    """Closed integer interval of cells at distance exactly ``t`` from cell 0.

    ``[(N^t - 1)/(N - 1), N^t + (N^t - N)/(N - 1)]``; it has ``N^t`` cells and
    the blocks for ``t = 0, 1, 2, ...`` partition the naturals.
    """
    _check_arity(N)
    if t < 0:
        raise DomainError("t must be nonnegative")
    p = N**t
    return (p - 1) // (N - 1), p + (p - N) // (N - 1)


def depth_of(N: int, i: int) -> int:
    """Index ``t`` of the block ``cone_block(N, t)`` containing cell ``i``."""
    _check_arity(N)
    if i < 0:
        raise DomainError("cell index must be nonnegative")
    t, first = 0, 1  # first cell of block t + 1
    while i >= first:
        t += 1
        first = first * N + 1
    return t


@dataclass(frozen=True)
class ELayout:
    """Pairwise disjoint sample intervals ``E_i`` for a layered majority map.

    Cells of block ``k`` get ``growth**k`` consecutive sample cells; the sample
    region of block ``k`` starts right after both the previous region and block
    ``k + 1``, so no block ever reads samples that sit in its own next block.
    """

    N: int
    growth: int | None = None

    def __post_init__(self):
        _check_arity(self.N)
        if self.growth is None:
            object.__setattr__(self, "growth", self.N + 1)
        if self.growth < 1:
            raise DomainError("growth must be positive")

    def size(self, k: int) -> int:
        """``|E_i|`` for every cell of block ``k``."""
        return self.growth**k

    def region_start(self, k: int) -> int:
        return _region_start(self.N, self.growth, k)

    def interval(self, i: int) -> tuple[int, int]:
        """``E_i`` as a closed integer interval."""
        k = depth_of(self.N, i)
        first, _ = cone_block(self.N, k)
        s = self.size(k)
        a = self.region_start(k) + (i - first) * s
        return a, a + s - 1

    def blocks(self, depth: int):
        """Yield ``(k, first_cell, last_cell, region_start, size)`` for ``k <= depth``."""
        for k in range(depth + 1):
            lo, hi = cone_block(self.N, k)
            yield k, lo, hi, self.region_start(k), self.size(k)


@lru_cache(maxsize=None)
def _region_start(N: int, growth: int, k: int) -> int:
    nxt_hi = cone_block(N, k + 1)[1]
    if k == 0:
        return nxt_hi + 1
    prev_end = _region_start(N, growth, k - 1) + N ** (k - 1) * growth ** (k - 1) - 1
    return max(prev_end, nxt_hi) + 1


def build_e_layout(N: int, growth: int | None = None) -> ELayout:
    """Inductive sample layout; starts at ``E_0 = {N + 1}``."""
    return ELayout(N, growth)


def phi(i: int, j: int) -> int:
    """Pack row ``j``, column ``i`` into ``2^j - 1 + i 2^(j+1)``."""
    if i < 0 or j < 0:
        raise DomainError("phi takes nonnegative arguments")
    return (1 << j) - 1 + (i << (j + 1))


def phi_inv(k: int) -> tuple[int, int]:
    """Inverse of :func:`phi` via ``k + 1 = 2^j (2i + 1)``."""
    if k < 0:
        raise DomainError("phi_inv takes a nonnegative index")
    m = k + 1
    j = (m & -m).bit_length() - 1
    return (m >> (j + 1)), j
