"""Finite unions of closed rational intervals and exact membership tests.

Gate decisions compare ``2 * k / m`` against rational endpoints.  Working with
:class:`fractions.Fraction` turns every membership question into an integer
range ``k_lo <= k <= k_hi``, so no float boundary artifacts can appear.
"""
from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable, Sequence

Interval = tuple[Fraction, Fraction]

UNIT: tuple[Interval, ...] = ((Fraction(0), Fraction(1)),)


def as_fraction(x) -> Fraction:
    """Convert ints, Fractions, decimal strings or ``(num, den)`` pairs exactly.

    Floats are converted through their shortest decimal representation, so
    ``0.2`` becomes ``1/5`` rather than the nearest binary fraction.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (tuple, list)) and len(x) == 2:
        return Fraction(int(x[0]), int(x[1]))
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


def normalize(intervals: Iterable[Sequence]) -> tuple[Interval, ...]:
    """Sort, drop empty intervals and merge overlapping or touching ones."""
    items = sorted((as_fraction(a), as_fraction(b)) for a, b in intervals)
    out: list[list[Fraction]] = []
    for a, b in items:
        if a > b:
            continue
        if out and a <= out[-1][1]:
            out[-1][1] = max(out[-1][1], b)
        else:
            out.append([a, b])
    return tuple((a, b) for a, b in out)


def contains(intervals: Sequence[Interval], x) -> bool:
    x = as_fraction(x)
    return any(a <= x <= b for a, b in intervals)


def count_ranges(intervals: Sequence[Interval], m: int) -> tuple[tuple[int, int], ...]:
    """Integer ranges of ``k`` in ``[0, m]`` such that ``2k/m`` lies in the union.

    ``2k/m`` in ``[a, b]`` iff ``a*m/2 <= k <= b*m/2``; both bounds are exact
    rationals so ceil/floor are computed without rounding.
    """
    if m < 1:
        raise ValueError("sample size must be at least 1")
    out = []
    for a, b in normalize(intervals):
        lo = max(0, math.ceil(a * m / 2))
        hi = min(m, math.floor(b * m / 2))
        if lo <= hi:
            if out and lo <= out[-1][1] + 1:
                out[-1] = (out[-1][0], max(out[-1][1], hi))
            else:
                out.append((lo, hi))
    return tuple(out)


def complement(intervals: Sequence[Interval], m: int) -> tuple[tuple[int, int], ...]:
    """Count ranges of ``[0, m]`` not covered by :func:`count_ranges`."""
    out = []
    nxt = 0
    for lo, hi in count_ranges(intervals, m):
        if lo > nxt:
            out.append((nxt, lo - 1))
        nxt = hi + 1
    if nxt <= m:
        out.append((nxt, m))
    return tuple(out)
