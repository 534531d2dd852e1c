"""Counter-based noise: every random event is a hash of its coordinates.

An event is addressed by ``(seed, stream, sample, step, cell)``.  The value is
``mix(hs[sample] ^ hc[step, cell])`` where both halves and the final mix use
the SplitMix64 finalizer, so the same address always yields the same 64 bits
no matter how samples are chunked or scheduled.  Two trajectories that share
a :class:`NoiseStream` therefore see identical errors: that is the grand
coupling.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["NoiseStream", "mix64", "derive_seed", "Stream"]

_U = np.uint64
_M1 = _U(0xBF58476D1CE4E5B9)
_M2 = _U(0x94D049BB133111EB)
_GOLDEN = _U(0x9E3779B97F4A7C15)
_CELL_K = _U(0xD6E8FEB86659FD93)
_MASK64 = (1 << 64) - 1
_TO_UNIT = 2.0**-53


class Stream:
    NOISE = 1
    GATE = 2
    INIT_FIRST = 3
    INIT_SECOND = 4


def mix64(x: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer, elementwise on ``uint64`` arrays (wraps mod 2^64)."""
    x = np.asarray(x, dtype=np.uint64)
    x = x ^ (x >> _U(30))
    x = x * _M1
    x = x ^ (x >> _U(27))
    x = x * _M2
    return x ^ (x >> _U(31))


def _scalar_mix(x: int) -> int:
    return int(mix64(np.array([x & _MASK64], dtype=np.uint64))[0])


def derive_seed(seed: int, *tags: int) -> int:
    """Child seed for an independent sub-experiment."""
    h = _scalar_mix(int(seed) & _MASK64)
    for t in tags:
        h = _scalar_mix((h ^ (int(t) * 0x9E3779B97F4A7C15)) & _MASK64)
    return h


@dataclass(frozen=True)
class NoiseStream:
    seed: int

    def bits(self, stream: int, samples: np.ndarray, step: int, cells: np.ndarray) -> np.ndarray:
        """``uint64`` array of shape ``(len(samples), len(cells))``."""
        base = _scalar_mix((_scalar_mix(int(self.seed) & _MASK64) + stream * 0x9E3779B97F4A7C15) & _MASK64)
        s = np.asarray(samples, dtype=np.uint64)
        hs = mix64(_U(base) + s * _GOLDEN)
        step_key = _scalar_mix((int(step) * 0xC2B2AE3D27D4EB4F + 0x165667B19E3779F9) & _MASK64)
        c = np.asarray(cells, dtype=np.uint64)
        hc = mix64(_U(step_key) ^ (c * _CELL_K))
        return mix64(hs[:, None] ^ hc[None, :])

    def uniform(self, stream, samples, step, cells) -> np.ndarray:
        return (self.bits(stream, samples, step, cells) >> _U(11)).astype(np.float64) * _TO_UNIT

    def errors(self, samples, step, cells, eps: float, alphabet: int):
        """Error flags (probability ``eps``) and uniform replacement codes.

        The flag uses the top 53 bits, the replacement the lowest
        ``log2(alphabet)`` bits of the same word.
        """
        b = self.bits(Stream.NOISE, samples, step, cells)
        flag = (b >> _U(11)).astype(np.float64) * _TO_UNIT < eps
        sym = (b & _U(alphabet - 1)).astype(np.uint8)
        return flag, sym
