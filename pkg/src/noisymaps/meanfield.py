"""Exact one-cell analysis of noisy majority votes.

For the block-disjoint majority map on ``2n+1`` cells the image of a Bernoulli
product measure is again a Bernoulli product measure, and its parameter moves
by

    h(x) = eps/2 + (1 - eps) * g(x),    g(x) = P(Bin(2n+1, x) >= n+1).

Fixed points of ``h`` (roots of ``P = h - id``) are the Bernoulli invariant
measures.  Everything here is a pure function of its arguments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import special

from .errors import DomainError
from .intervals import Interval, count_ranges

__all__ = [
    "MajorityParams",
    "FixedPoint",
    "FixedPointSet",
    "MarginalSequence",
    "eval_g",
    "eval_g_prime",
    "eval_h",
    "eval_P",
    "alpha_closed_form",
    "find_fixed_points",
    "lower_root",
    "mf_threshold",
    "marginal_recursion",
    "layered_recursion",
    "binomial_range_mass",
    "p_exact",
]

ROOT_TOL = 1e-10
THRESHOLD_TOL = 1e-9


@dataclass(frozen=True)
class MajorityParams:
    n: int
    epsilon: float

    def __post_init__(self):
        _check_n(self.n)
        _check_unit(self.epsilon, "eps")

    @property
    def arity(self) -> int:
        return 2 * self.n + 1


@dataclass(frozen=True)
class FixedPoint:
    value: float
    stable: bool
    degenerate: bool = False


@dataclass(frozen=True)
class FixedPointSet:
    params: MajorityParams
    points: tuple[FixedPoint, ...]

    @property
    def roots(self) -> list[float]:
        return [p.value for p in self.points]

    @property
    def degenerate(self) -> bool:
        return any(p.degenerate for p in self.points)

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class MarginalSequence:
    values: tuple[float, ...]

    def __getitem__(self, t):
        return self.values[t]

    def __len__(self):
        return len(self.values)

    @property
    def final(self) -> float:
        return self.values[-1]


def _check_n(n):
    if int(n) != n or n < 0:
        raise DomainError(f"n must be a nonnegative integer, got {n!r}")


def _check_unit(x, name):
    arr = np.asarray(x, dtype=float)
    if np.any(~(arr >= 0.0)) or np.any(arr > 1.0):
        raise DomainError(f"{name} must lie in [0, 1], got {x!r}")


def eval_g(n: int, x):
    """Probability that a majority of ``2n+1`` Bernoulli(x) votes are 1.

    Sums the upper binomial tail term by term in log space; ``x`` may be an
    array.
    """
    _check_n(n)
    _check_unit(x, "x")
    xa = np.asarray(x, dtype=float)
    N = 2 * n + 1
    k = np.arange(n + 1, N + 1, dtype=float)
    logc = special.gammaln(N + 1) - special.gammaln(k + 1) - special.gammaln(N - k + 1)
    xs = xa[..., None]
    with np.errstate(divide="ignore"):
        terms = np.exp(logc + special.xlogy(k, xs) + special.xlog1py(N - k, -xs))
    out = np.clip(terms.sum(axis=-1), 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def eval_g_prime(n: int, x):
    """Derivative of :func:`eval_g`: ``(2n+1) C(2n, n) x^n (1-x)^n``."""
    _check_n(n)
    xa = np.asarray(x, dtype=float)
    N = 2 * n + 1
    logc = math.log(N) + special.gammaln(2 * n + 1) - 2 * special.gammaln(n + 1)
    with np.errstate(divide="ignore"):
        out = np.exp(logc + special.xlogy(n, xa) + special.xlog1py(n, -xa))
    return float(out) if out.ndim == 0 else out


def eval_h(n: int, eps: float, x):
    """One step of the per-cell marginal: ``eps/2 + (1-eps) g_n(x)``."""
    _check_unit(eps, "eps")
    return eps / 2 + (1 - eps) * eval_g(n, x)


def eval_P(n: int, eps: float, x):
    """``h_{n,eps}(x) - x``; its roots are the Bernoulli invariant parameters."""
    out = eval_h(n, eps, x) - np.asarray(x, dtype=float)
    return float(out) if np.ndim(out) == 0 else out


def _h_prime(n, eps, x):
    return (1 - eps) * eval_g_prime(n, x)


def alpha_closed_form(eps: float) -> float:
    """Lower nontrivial fixed point of the noisy 3-majority.

    ``alpha = (1 - sqrt(1 - 2 eps / (1 - eps))) / 2``, evaluated in the
    cancellation-free form ``(eps/(1-eps)) / (1 + sqrt(r))``.
    """
    eps = float(eps)
    if not 0.0 <= eps <= 1.0 / 3.0:
        raise DomainError(f"closed form needs 0 <= eps <= 1/3, got {eps!r}")
    r = max(0.0, (1.0 - 3.0 * eps) / (1.0 - eps))
    return (eps / (1.0 - eps)) / (1.0 + math.sqrt(r))


def _bisect(f, lo, hi, flo, tol):
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _polish(n, eps, x, lo, hi):
    best, fbest = x, abs(eval_P(n, eps, x))
    for _ in range(3):
        d = _h_prime(n, eps, best) - 1.0
        if d == 0.0:
            break
        cand = best - eval_P(n, eps, best) / d
        if not lo <= cand <= hi:
            break
        fc = abs(eval_P(n, eps, cand))
        if fc >= fbest:
            break
        best, fbest = cand, fc
    return best


def find_fixed_points(n: int, eps: float, tol: float = ROOT_TOL) -> FixedPointSet:
    """All roots of ``P_n^eps`` in ``[0, 1]``, tagged by stability.

    Only ``[0, 1/2)`` is searched: ``P(1 - x) = -P(x)`` so the upper half is
    the mirror image, and ``1/2`` is always a root.  A root that lands within
    ``10 * tol`` of ``1/2`` is merged into it and flagged degenerate.
    """
    _check_n(n)
    _check_unit(eps, "eps")
    if tol <= 0:
        raise DomainError("tol must be positive")
    eps = float(eps)
    if n == 0 and eps == 0.0:
        raise DomainError("P_0^0 vanishes identically; every x is a fixed point")
    params = MajorityParams(n, eps)
    f = lambda x: eval_P(n, eps, x)

    m = max(4 * (2 * n + 1), 256)
    grid = np.linspace(0.0, 0.5, m + 1)[:-1]
    vals = np.asarray(f(grid))
    found: list[float] = []
    for i, v in enumerate(vals):
        if v == 0.0:
            found.append(float(grid[i]))
        elif i + 1 < len(vals) and vals[i + 1] != 0.0 and (v > 0) != (vals[i + 1] > 0):
            lo, hi = float(grid[i]), float(grid[i + 1])
            found.append(_polish(n, eps, _bisect(f, lo, hi, float(v), tol), lo, hi))

    slope_half = _h_prime(n, eps, 0.5) - 1.0
    degenerate_half = abs(slope_half) < 1e-12
    # A root in the last grid cell is hidden by the zero at 1/2; since P is
    # convex on [0, 1/2] it exists iff P'(1/2) > 0.  Walk towards 1/2.
    if vals[-1] > 0 and slope_half > 0 and not degenerate_half:
        lo, flo = float(grid[-1]), float(vals[-1])
        gap = 0.5 - lo
        for _ in range(60):
            gap /= 2
            x = 0.5 - gap
            fx = f(x)
            if fx < 0:
                found.append(_polish(n, eps, _bisect(f, lo, x, flo, tol), lo, x))
                break
            lo, flo = x, fx
        else:
            degenerate_half = True

    low = []
    for r in sorted(found):
        if low and r - low[-1] <= 10 * tol:
            continue
        if 0.5 - r <= 10 * tol:
            degenerate_half = True
            continue
        low.append(r)

    def point(x, degenerate=False):
        return FixedPoint(x, abs(_h_prime(n, eps, x)) < 1.0, degenerate)

    pts = [point(r) for r in low]
    pts.append(point(0.5, degenerate_half))
    pts.extend(point(1.0 - r) for r in reversed(low))
    return FixedPointSet(params, tuple(pts))


def lower_root(n: int, eps: float, tol: float = ROOT_TOL) -> float:
    """Smallest fixed point; equals 1/2 when the majority is not bistable."""
    return find_fixed_points(n, eps, tol).roots[0]


@lru_cache(maxsize=256)
def mf_threshold(n: int, tol: float = THRESHOLD_TOL) -> float:
    """Largest noise rate at which ``P_n^eps`` still has a root below 1/2.

    Bisection over eps on the predicate "a root lies below ``1/2 - 10 tol``".
    This is a lower bound for the uniqueness threshold of the majority map.
    """
    _check_n(n)
    if n < 1:
        raise DomainError("threshold is defined for n >= 1")
    if tol <= 0:
        raise DomainError("tol must be positive")

    def bistable(e):
        return find_fixed_points(n, e).roots[0] < 0.5 - 10 * tol

    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if bistable(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def marginal_recursion(n: int, eps: float, alpha0: float, t: int) -> MarginalSequence:
    """``alpha0, h(alpha0), ..., h^t(alpha0)`` for the plain majority map."""
    _check_unit(alpha0, "alpha0")
    if t < 0:
        raise DomainError("t must be nonnegative")
    vals = [float(alpha0)]
    for _ in range(t):
        vals.append(float(eval_h(n, eps, vals[-1])))
    return MarginalSequence(tuple(vals))


def layered_recursion(n: int, eps: float, p: float, alpha0: float, t: int) -> MarginalSequence:
    """Iterate ``a -> eps/2 + (1-eps)(1-p) g_n(a)`` from ``alpha0``.

    ``p`` is the probability that the cell's gate projects it to 0.
    """
    _check_unit(p, "p")
    _check_unit(alpha0, "alpha0")
    _check_unit(eps, "eps")
    if t < 0:
        raise DomainError("t must be nonnegative")
    vals = [float(alpha0)]
    for _ in range(t):
        vals.append(eps / 2 + (1 - eps) * (1 - p) * eval_g(n, vals[-1]))
    return MarginalSequence(tuple(vals))


_DIRECT_SUM_LIMIT = 1 << 20


def _binom_cdf(k, m, q):
    # P(Bin(m, q) <= k) = I_{1-q}(m - k, k + 1); float arguments avoid the
    # integer overflow of the bdtr family for m >= 2**31
    return special.betainc(float(m - k), float(k + 1), 1.0 - q)


def _binom_sf(k, m, q):
    # P(Bin(m, q) > k) = I_q(k + 1, m - k)
    return special.betainc(float(k + 1), float(m - k), q)


def binomial_range_mass(m: int, q: float, ranges: Sequence[tuple[int, int]]) -> float:
    """``P(Bin(m, q) in union of [lo, hi])`` for disjoint integer ranges.

    Sums log-space pmf terms for moderate ``m``; beyond ``2**20`` trials the
    tails come from the regularized incomplete beta function instead.
    """
    if not ranges:
        return 0.0
    q = float(q)
    if q <= 0.0 or q >= 1.0:
        point = 0 if q <= 0.0 else m
        return float(any(lo <= point <= hi for lo, hi in ranges))
    total = 0.0
    if m <= _DIRECT_SUM_LIMIT:
        lgm = special.gammaln(m + 1)
        for lo, hi in ranges:
            k = np.arange(lo, hi + 1, dtype=float)
            logp = lgm - special.gammaln(k + 1) - special.gammaln(m - k + 1)
            logp += k * math.log(q) + (m - k) * math.log1p(-q)
            total += float(np.exp(logp).sum())
    else:
        mean = m * q
        for lo, hi in ranges:
            if hi < mean:
                part = _binom_cdf(hi, m, q) - (_binom_cdf(lo - 1, m, q) if lo > 0 else 0.0)
            else:
                upper = _binom_sf(hi, m, q) if hi < m else 0.0
                part = (_binom_sf(lo - 1, m, q) if lo > 0 else 1.0) - upper
            total += float(part)
    return min(1.0, max(0.0, total))


def p_exact(sample_size: int, eps: float, intervals: Sequence[Interval]) -> float:
    """Probability that twice the mean of ``sample_size`` Bernoulli(eps/2)
    draws lands in the closed rational intervals.
    """
    _check_unit(eps, "eps")
    if sample_size < 1:
        raise DomainError("sample_size must be at least 1")
    ranges = count_ranges(intervals, sample_size)
    return binomial_range_mass(sample_size, float(eps) / 2, ranges)
