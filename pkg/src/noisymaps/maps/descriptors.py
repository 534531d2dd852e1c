"""Procedural map descriptors.

A descriptor answers one question, "what is the local rule of cell ``i``?",
through :meth:`MapDescriptor.rule`.  Index sets are kept as arithmetic
progressions so that the row packing ``phi(., j)`` and the shifts used by
:func:`densify` stay exact and O(1) even for sample sets with billions of
cells.

Symbols on the bit-pair alphabet are encoded as ``y + 2 z`` (first layer
``y``, second layer ``z``).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Mapping, Sequence

import numpy as np

from ..errors import DomainError
from ..intervals import Interval, count_ranges
from .layout import ELayout, build_e_layout, depth_of, phi, phi_inv
from .schedules import (
    GDeltaSpec,
    IntervalSchedule,
    OpenSetSpec,
    schedule_for_open_set,
)

__all__ = [
    "BINARY",
    "PAIR",
    "Progression",
    "CellRule",
    "MapDescriptor",
    "Maj",
    "LayeredMaj",
    "Interleave",
    "GDelta",
    "Densify",
    "neighborhood",
    "rule_eval",
    "interleave",
    "build_M",
    "build_M_IE",
    "build_F",
    "densify",
    "encode",
    "decode",
    "iter_nodes",
    "is_layered",
]

BINARY = 2
PAIR = 4
DEFAULT_ROWS = 8


def encode(sym, alphabet: int) -> int:
    """Integer code of a symbol; pairs ``(y, z)`` map to ``y + 2 z``."""
    if isinstance(sym, (tuple, list)):
        y, z = sym
        code = int(y) + 2 * int(z)
    else:
        code = int(sym)
    if not 0 <= code < alphabet:
        raise DomainError(f"symbol {sym!r} is not in an alphabet of size {alphabet}")
    return code


def decode(code: int, alphabet: int):
    return (code & 1, code >> 1) if alphabet == PAIR else int(code)


@dataclass(frozen=True)
class Progression:
    """``start, start + step, ..., start + (count - 1) step`` with ``step > 0``."""

    start: int
    step: int
    count: int

    def affine(self, offset: int, scale: int) -> "Progression":
        return Progression(offset + scale * self.start, scale * self.step, self.count)

    @property
    def last(self) -> int:
        return self.start + (self.count - 1) * self.step

    def indices(self) -> np.ndarray:
        return self.start + self.step * np.arange(self.count, dtype=np.int64)

    def __contains__(self, x: int) -> bool:
        d = x - self.start
        return d >= 0 and d % self.step == 0 and d // self.step < self.count

    def __len__(self):
        return self.count


@dataclass(frozen=True)
class CellRule:
    """Local rule of one cell.

    ``kind`` is one of ``"maj"`` (majority of ``inputs``, second layer 0),
    ``"layered"`` (majority gated by the second-layer sample ``gate_cells``),
    ``"zero"`` and ``"identity"``.  ``origin`` lists the ``(row, local cell)``
    hops taken through interleaves; ``truncated`` marks a cell in a row the
    descriptor does not simulate (it behaves as the identity).
    """

    cell: int
    kind: str
    alphabet: int
    inputs: Progression | None = None
    gate_cells: Progression | None = None
    gate_intervals: tuple[Interval, ...] = ()
    depth: int | None = None
    origin: tuple[tuple[int, int], ...] = ()
    truncated: bool = False

    def remap(self, cell: int, offset: int, scale: int, hop=None) -> "CellRule":
        origin = ((hop,) if hop is not None else ()) + self.origin
        return CellRule(
            cell=cell,
            kind=self.kind,
            alphabet=self.alphabet,
            inputs=None if self.inputs is None else self.inputs.affine(offset, scale),
            gate_cells=None if self.gate_cells is None else self.gate_cells.affine(offset, scale),
            gate_intervals=self.gate_intervals,
            depth=self.depth,
            origin=origin,
            truncated=self.truncated,
        )

    @property
    def gate_size(self) -> int:
        return 0 if self.gate_cells is None else self.gate_cells.count

    @cached_property
    def gate_ranges(self) -> tuple[tuple[int, int], ...]:
        """Counts ``k`` of second-layer ones in the sample that fire the gate."""
        if self.gate_cells is None:
            return ()
        return count_ranges(self.gate_intervals, self.gate_cells.count)

    def gate_fires(self, ones: int) -> bool:
        return any(lo <= ones <= hi for lo, hi in self.gate_ranges)

    @property
    def neighborhood(self) -> np.ndarray:
        parts = [p.indices() for p in (self.inputs, self.gate_cells) if p is not None]
        if not parts:
            return np.zeros(0, dtype=np.int64)
        return np.unique(np.concatenate(parts))

    def evaluate(self, word: Mapping[int, int]) -> int:
        """Unperturbed output code given codes on the neighborhood."""
        if self.kind == "zero":
            return 0
        if self.kind == "identity":
            return word[self.cell]
        votes = sum(word[c] & 1 for c in self.inputs.indices().tolist())
        y = int(2 * votes > self.inputs.count)
        if self.kind == "layered":
            ones = sum(word[c] >> 1 for c in self.gate_cells.indices().tolist())
            if self.gate_fires(ones):
                return 0
        return y


class MapDescriptor:
    """Base class: an immutable, lazily queried continuous map."""

    alphabet: int = BINARY

    def rule(self, i: int) -> CellRule:
        raise NotImplementedError

    def children(self) -> Sequence["MapDescriptor"]:
        return ()

    def neighborhood(self, i: int) -> list[int]:
        return self.rule(i).neighborhood.tolist()


@dataclass(frozen=True)
class Maj(MapDescriptor):
    """Majority of cells ``(2n+1) i + 1 .. (2n+1) i + 2n+1``; ``n = 0`` is the shift."""

    n: int
    alphabet: int = BINARY

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 0:
            raise DomainError("n must be a nonnegative integer")
        if self.alphabet not in (BINARY, PAIR):
            raise DomainError("alphabet must have 2 or 4 symbols")

    @property
    def arity(self) -> int:
        return 2 * self.n + 1

    def rule(self, i):
        if i < 0:
            raise DomainError("cell index must be nonnegative")
        N = self.arity
        return CellRule(i, "maj", self.alphabet, inputs=Progression(N * i + 1, 1, N))


@dataclass(frozen=True)
class LayeredMaj(MapDescriptor):
    """Majority on the first layer, constant 0 on the second, and a gate that
    writes ``(0, 0)`` when twice the second-layer density on ``E_i`` falls in
    the schedule's intervals for the cell's block.
    """

    n: int
    schedule: IntervalSchedule
    layout: ELayout | None = None
    alphabet: int = field(default=PAIR, init=False)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise DomainError("layered majority needs n >= 1")
        if self.layout is None:
            object.__setattr__(self, "layout", build_e_layout(2 * self.n + 1))
        if self.layout.N != 2 * self.n + 1:
            raise DomainError("layout arity does not match the vote")

    @property
    def arity(self) -> int:
        return 2 * self.n + 1

    def rule(self, i):
        if i < 0:
            raise DomainError("cell index must be nonnegative")
        N = self.arity
        k = depth_of(N, i)
        a, b = self.layout.interval(i)
        return CellRule(
            i,
            "layered",
            PAIR,
            inputs=Progression(N * i + 1, 1, N),
            gate_cells=Progression(a, 1, b - a + 1),
            gate_intervals=self.schedule.at(k),
            depth=k,
        )


@dataclass(frozen=True)
class Interleave(MapDescriptor):
    """Row ``j`` of ``rows`` acts on cells ``phi(., j)``; deeper rows are
    truncated to the identity.
    """

    rows: tuple[MapDescriptor, ...]

    def __post_init__(self):
        rows = tuple(self.rows)
        if not rows:
            raise DomainError("interleave needs at least one row")
        alph = {r.alphabet for r in rows}
        if len(alph) != 1:
            raise DomainError("all interleaved rows must share one alphabet")
        object.__setattr__(self, "rows", rows)

    @property
    def alphabet(self):
        return self.rows[0].alphabet

    def children(self):
        return self.rows

    def rule(self, k):
        i, j = phi_inv(k)
        if j >= len(self.rows):
            return CellRule(
                k,
                "identity",
                self.alphabet,
                inputs=Progression(k, 1, 1),
                origin=((j, i),),
                truncated=True,
            )
        scale = 1 << (j + 1)
        return self.rows[j].rule(i).remap(k, (1 << j) - 1, scale, hop=(j, i))


@dataclass(frozen=True)
class GDelta(MapDescriptor):
    """Two-level interleave realizing a G-delta phase diagram.

    Outer row ``j`` carries the open-set construction for ``spec.levels[j]``;
    each of those is an interleave of ``rows`` layered majorities.
    """

    spec: GDeltaSpec
    rows: int = DEFAULT_ROWS

    @cached_property
    def expanded(self) -> MapDescriptor:
        levels = self.spec.levels
        if not levels:
            warnings.warn("empty G-delta spec: using the open set (0, 1)", stacklevel=2)
            return build_M_IE(OpenSetSpec.of((0, 1)), self.rows)
        return Interleave(tuple(build_M_IE(O, self.rows) for O in levels))

    @property
    def alphabet(self):
        return PAIR

    def children(self):
        return (self.expanded,)

    def rule(self, k):
        return self.expanded.rule(k)


@dataclass(frozen=True)
class Densify(MapDescriptor):
    """Agree with ``base`` on cells ``0..n``, write 0 on ``n+1..r``, copy cell
    ``r+1`` and run ``target`` shifted onto ``r+2, r+3, ...``.

    ``r`` is the largest index read by ``base`` on cells ``0..n``.
    """

    base: MapDescriptor
    target: MapDescriptor
    n: int

    def __post_init__(self):
        if self.n < 0:
            raise DomainError("n must be nonnegative")
        if self.base.alphabet != self.target.alphabet:
            raise DomainError("base and target must share an alphabet")

    @property
    def alphabet(self):
        return self.base.alphabet

    def children(self):
        return (self.base, self.target)

    @cached_property
    def radius(self) -> int:
        r = self.n
        for i in range(self.n + 1):
            nb = self.base.rule(i)
            for p in (nb.inputs, nb.gate_cells):
                if p is not None:
                    r = max(r, p.last)
        return r

    def rule(self, c):
        if c < 0:
            raise DomainError("cell index must be nonnegative")
        r = self.radius
        if c <= self.n:
            return self.base.rule(c)
        if c <= r:
            return CellRule(c, "zero", self.alphabet)
        if c == r + 1:
            return CellRule(c, "identity", self.alphabet, inputs=Progression(c, 1, 1))
        return self.target.rule(c - r - 2).remap(c, r + 2, 1)


def neighborhood(map: MapDescriptor, i: int) -> list[int]:
    return map.neighborhood(i)


def rule_eval(map: MapDescriptor, i: int, local_word: Mapping[int, object]):
    """Deterministic output of cell ``i`` given symbols on its neighborhood.

    Pair-alphabet symbols may be given as ``(y, z)`` tuples or codes; the
    result uses the same convention as the map's alphabet (a tuple for pairs).
    """
    rule = map.rule(i)
    nb = rule.neighborhood.tolist()
    if set(local_word) != set(nb):
        raise DomainError(f"assignment covers {sorted(local_word)} but the neighborhood of {i} is {nb}")
    word = {c: encode(v, map.alphabet) for c, v in local_word.items()}
    return decode(rule.evaluate(word), map.alphabet)


def interleave(rows: Sequence[MapDescriptor]) -> Interleave:
    return Interleave(tuple(rows))


def build_M(rows: int = DEFAULT_ROWS) -> Interleave:
    """Rows ``maj_1, maj_3, ..., maj_{2 rows - 1}`` packed by ``phi``."""
    return Interleave(tuple(Maj(j) for j in range(rows)))


def build_M_IE(O: OpenSetSpec, rows: int = DEFAULT_ROWS) -> Interleave:
    """Row 0 is the plain shift on pairs, row ``j >= 1`` the layered
    ``2j+1`` majority whose schedule realizes ``O`` union ``[l_j, 1]``.
    """
    if not isinstance(O, OpenSetSpec):
        O = OpenSetSpec(tuple(O))
    out: list[MapDescriptor] = [Maj(0, PAIR)]
    for j in range(1, rows):
        out.append(LayeredMaj(j, schedule_for_open_set(O, j)))
    return Interleave(tuple(out))


def build_F(G: GDeltaSpec, rows: int = DEFAULT_ROWS) -> GDelta:
    if not isinstance(G, GDeltaSpec):
        G = GDeltaSpec(tuple(G))
    return GDelta(G, rows)


def densify(base: MapDescriptor, target: MapDescriptor, n: int) -> Densify:
    return Densify(base, target, n)


def iter_nodes(map: MapDescriptor) -> Iterator[MapDescriptor]:
    yield map
    for c in map.children():
        yield from iter_nodes(c)


def is_layered(map: MapDescriptor) -> bool:
    return any(isinstance(m, LayeredMaj) for m in iter_nodes(map))
