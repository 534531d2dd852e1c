"""Acceptance-interval schedules for layered gates, and open / G-delta set specs.

A schedule maps a block depth ``t`` to a finite union of closed rational
intervals.  Depth 0 (and any depth where ``1/t`` swamps the target) yields
the whole unit interval.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

from ..errors import DomainError
from ..intervals import UNIT, Interval, as_fraction, normalize

__all__ = [
    "OpenSetSpec",
    "GDeltaSpec",
    "IntervalSchedule",
    "TargetSchedule",
    "OpenSetSchedule",
    "schedule_for_target",
    "schedule_for_open_set",
    "threshold_fraction",
]


def _check_endpoints(a: Fraction, b: Fraction):
    if not (0 <= a <= 1 and 0 <= b <= 1):
        raise DomainError(f"interval endpoints must lie in [0, 1], got ({a}, {b})")
    if a > b:
        raise DomainError(f"interval ({a}, {b}) is reversed")


@dataclass(frozen=True)
class OpenSetSpec:
    """Finite union of open rational intervals ``(a_i, b_i)``, in listed order.

    Order matters: a schedule at depth ``t`` only uses intervals with index
    ``<= t``.
    """

    intervals: tuple[Interval, ...] = ()

    def __post_init__(self):
        ivs = tuple((as_fraction(a), as_fraction(b)) for a, b in self.intervals)
        for a, b in ivs:
            _check_endpoints(a, b)
        object.__setattr__(self, "intervals", ivs)

    @classmethod
    def of(cls, *pairs) -> "OpenSetSpec":
        return cls(tuple(pairs))

    def __contains__(self, x) -> bool:
        x = as_fraction(x)
        return any(a < x < b for a, b in self.intervals)

    def __len__(self):
        return len(self.intervals)


@dataclass(frozen=True)
class GDeltaSpec:
    """Countable intersection of ``O_j`` union ``{1}``, truncated to finitely many levels."""

    levels: tuple[OpenSetSpec, ...] = ()

    def __post_init__(self):
        object.__setattr__(
            self,
            "levels",
            tuple(lv if isinstance(lv, OpenSetSpec) else OpenSetSpec(tuple(lv)) for lv in self.levels),
        )

    def __contains__(self, x) -> bool:
        x = as_fraction(x)
        return x == 1 or all(x in lv for lv in self.levels)


class IntervalSchedule:
    """Depth ``t`` -> normalized tuple of closed rational intervals."""

    def at(self, t: int) -> tuple[Interval, ...]:
        if t < 0:
            raise DomainError("depth must be nonnegative")
        if t == 0:
            return UNIT
        return self._at(t)

    def _at(self, t: int) -> tuple[Interval, ...]:
        raise NotImplementedError


@dataclass(frozen=True)
class TargetSchedule(IntervalSchedule):
    """``t -> [eps0 - 1/t, eps0 + 1/t]`` clamped to the unit interval."""

    eps0: Fraction

    def __post_init__(self):
        e = as_fraction(self.eps0)
        if not 0 <= e <= 1:
            raise DomainError("eps0 must lie in [0, 1]")
        object.__setattr__(self, "eps0", e)

    def _at(self, t):
        w = Fraction(1, t)
        return ((max(Fraction(0), self.eps0 - w), min(Fraction(1), self.eps0 + w)),)


@dataclass(frozen=True)
class OpenSetSchedule(IntervalSchedule):
    """Inner approximation of ``O`` union ``[threshold, 1]``.

    ``t -> (union over i <= t of [a_i + 1/t, b_i - 1/t]) union [threshold - 1/t, 1]``.
    ``threshold`` stands in for the uniqueness threshold of the underlying
    majority; ``threshold_source`` records where the value came from.
    """

    open_set: OpenSetSpec
    threshold: Fraction
    threshold_source: str = field(default="mean-field lower bound", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "threshold", as_fraction(self.threshold))

    def _at(self, t):
        w = Fraction(1, t)
        pieces = [(a + w, b - w) for a, b in self.open_set.intervals[: t + 1]]
        pieces.append((max(Fraction(0), self.threshold - w), Fraction(1)))
        return normalize((max(Fraction(0), a), min(Fraction(1), b)) for a, b in pieces)


def schedule_for_target(eps0) -> TargetSchedule:
    return TargetSchedule(as_fraction(eps0))


def threshold_fraction(x: float) -> Fraction:
    """Rational proxy for a float threshold (denominator at most 1e9)."""
    return Fraction(x).limit_denominator(10**9)


def schedule_for_open_set(O: OpenSetSpec | Iterable, n: int, threshold=None) -> OpenSetSchedule:
    """Schedule realizing ``O`` union ``[l_n, 1]`` for the ``2n+1`` majority.

    ``l_n`` is replaced by :func:`noisymaps.meanfield.mf_threshold` unless an
    explicit ``threshold`` is given.
    """
    if not isinstance(O, OpenSetSpec):
        O = OpenSetSpec(tuple(O))
    if threshold is None:
        from ..meanfield import mf_threshold

        return OpenSetSchedule(O, threshold_fraction(mf_threshold(n)))
    return OpenSetSchedule(O, as_fraction(threshold), "explicit")
