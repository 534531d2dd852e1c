"""Small interval estimators used by the Monte Carlo layer."""
from __future__ import annotations

import math

import numpy as np

Z95 = 1.959963984540054


def wilson(successes, trials, z: float = Z95):
    """Wilson score interval; works elementwise on arrays.

    Returns ``(p_hat, lo, hi)``.
    """
    k = np.asarray(successes, dtype=float)
    n = np.asarray(trials, dtype=float)
    p = k / n
    z2 = z * z
    denom = 1.0 + z2 / n
    centre = (p + z2 / (2 * n)) / denom
    half = z * np.sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / denom
    # the endpoints at k = 0 and k = n are exactly 0 and 1; rounding misses them
    lo = np.where(k == 0, 0.0, np.clip(centre - half, 0.0, 1.0))
    hi = np.where(k == n, 1.0, np.clip(centre + half, 0.0, 1.0))
    return p, lo[()], hi[()]


def wilson_sigma(successes, trials, z: float = Z95):
    """Half-width of the Wilson interval divided by ``z``: a one-sigma scale."""
    _, lo, hi = wilson(successes, trials, z)
    return (hi - lo) / (2 * z)


def newcombe_difference(k1, n1, k0, n0, z: float = Z95):
    """Newcombe's hybrid score interval for ``p1 - p0`` (independent samples)."""
    p1, l1, u1 = wilson(k1, n1, z)
    p0, l0, u0 = wilson(k0, n0, z)
    d = p1 - p0
    lo = d - np.sqrt((p1 - l1) ** 2 + (u0 - p0) ** 2)
    hi = d + np.sqrt((u1 - p1) ** 2 + (p0 - l0) ** 2)
    return d, lo, hi


def abs_interval(d: float, lo: float, hi: float) -> tuple[float, float, float]:
    """Map an interval for ``d`` to one for ``|d|``."""
    if lo >= 0:
        return abs(d), lo, hi
    if hi <= 0:
        return abs(d), -hi, -lo
    return abs(d), 0.0, max(-lo, hi)


def binom_ci_contains(successes: int, trials: int, p: float, nsigma: float = 4.0) -> bool:
    """True if ``p`` is within ``nsigma`` Wilson-sigmas of the observed frequency."""
    phat = successes / trials
    return abs(phat - p) <= nsigma * float(wilson_sigma(successes, trials)) + 1e-15


def fmt(x: float) -> str:
    return "nan" if isinstance(x, float) and math.isnan(x) else f"{x:.6g}"
