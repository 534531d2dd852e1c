import math
from fractions import Fraction
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from noisymaps.errors import DomainError
from noisymaps.intervals import complement, count_ranges
from noisymaps.meanfield import (
    alpha_closed_form,
    binomial_range_mass,
    eval_g,
    eval_g_prime,
    eval_h,
    eval_P,
    find_fixed_points,
    layered_recursion,
    lower_root,
    marginal_recursion,
    mf_threshold,
    p_exact,
)


def threshold_closed_form(n):
    # P'(1/2) = 0 <=> (1 - eps) g'(1/2) = 1, g'(1/2) = (2n+1) C(2n, n) / 4^n
    return 1 - 4**n / ((2 * n + 1) * comb(2 * n, n))


# --- g, h, P ---------------------------------------------------------------


def test_g_examples():
    assert eval_g(1, 0.5) == pytest.approx(0.5, abs=1e-15)
    assert eval_g(1, 0.0) == 0.0
    assert eval_g(1, 0.3) == pytest.approx(3 * 0.09 * 0.7 + 0.027, abs=1e-15)


@pytest.mark.parametrize("n", [0, 1, 2, 5, 17])
def test_g_matches_binomial_survival(n):
    xs = np.linspace(0, 1, 41)
    ref = stats.binom.sf(n, 2 * n + 1, xs)
    np.testing.assert_allclose(eval_g(n, xs), ref, atol=1e-13)


def test_g_prime_matches_finite_difference():
    for n in (1, 3):
        for x in (0.2, 0.5, 0.77):
            h = 1e-6
            fd = (eval_g(n, x + h) - eval_g(n, x - h)) / (2 * h)
            assert eval_g_prime(n, x) == pytest.approx(fd, rel=1e-6)


def test_h_examples():
    assert eval_h(1, 1.0, 0.9) == pytest.approx(0.5)
    assert eval_h(1, 0.0, 0.5) == pytest.approx(0.5)
    assert eval_h(1, 0.1, 0.0) == pytest.approx(0.05)


def test_P_examples():
    assert eval_P(1, 0.0, 0.0) == 0.0
    assert eval_P(1, 0.2, 0.0) == pytest.approx(0.1)


def test_P_vanishes_at_half():
    for n in range(21):
        for eps in np.linspace(0, 1, 101):
            assert abs(eval_P(n, eps, 0.5)) <= 1e-12


def test_domain_errors():
    with pytest.raises(DomainError):
        eval_g(1, 1.2)
    with pytest.raises(DomainError):
        eval_h(1, -0.1, 0.5)
    with pytest.raises(DomainError):
        alpha_closed_form(0.4)
    with pytest.raises(DomainError):
        alpha_closed_form(1.0)


@given(st.integers(0, 12), st.floats(0, 1), st.floats(0, 1))
def test_g_monotone(n, x, y):
    x, y = sorted((x, y))
    assert eval_g(n, x) <= eval_g(n, y) + 1e-15


@given(st.integers(0, 12), st.floats(0, 1), st.floats(0, 1))
def test_P_odd_symmetry(n, eps, x):
    assert eval_P(n, eps, 1 - x) == pytest.approx(-eval_P(n, eps, x), abs=1e-12)


# --- closed form and roots -----------------------------------------------------


def test_alpha_closed_form_examples():
    assert alpha_closed_form(0.0) == 0.0
    assert alpha_closed_form(Fraction(1, 3)) == pytest.approx(0.5, abs=1e-12)
    r = alpha_closed_form(0.1)
    assert r < 0.5 and abs(eval_P(1, 0.1, r)) < 1e-12


def test_roots_examples():
    assert find_fixed_points(1, 0.0).roots == pytest.approx([0.0, 0.5, 1.0], abs=1e-12)
    a = alpha_closed_form(0.2)
    assert find_fixed_points(1, 0.2).roots == pytest.approx([a, 0.5, 1 - a], abs=1e-10)
    assert find_fixed_points(1, 0.5).roots == pytest.approx([0.5])


def test_roots_half_is_unstable_when_bistable():
    fps = find_fixed_points(1, 0.2)
    assert [p.stable for p in fps.points] == [True, False, True]
    assert [p.stable for p in find_fixed_points(1, 0.5).points] == [True]


def test_degenerate_at_bifurcation():
    fps = find_fixed_points(1, Fraction(1, 3))
    assert fps.roots == pytest.approx([0.5])
    assert fps.points[0].degenerate


def test_dense_scan_confirms_single_root_above_threshold():
    xs = np.linspace(0, 1, 20000)  # 1/2 is not a grid point
    v = eval_P(1, 0.5, xs)
    assert np.count_nonzero(np.diff(np.sign(v)) != 0) == 1


@pytest.mark.parametrize("eps", np.linspace(0, 1 / 3, 40, endpoint=False))
def test_three_roots_below_one_third(eps):
    r = find_fixed_points(1, eps).roots
    assert len(r) == 3
    assert r[0] == pytest.approx(alpha_closed_form(eps), abs=1e-10)


@pytest.mark.parametrize("n", range(0, 11))
def test_roots_residual_and_symmetry(n):
    for eps in np.linspace(0.0, 1.0, 21):
        if n == 0 and eps == 0:
            continue
        roots = find_fixed_points(n, eps).roots
        assert 0.5 in roots
        for r in roots:
            assert abs(eval_P(n, eps, r)) <= 1e-10
        np.testing.assert_allclose(sorted(1 - np.array(roots)), roots, atol=1e-10)


def test_identity_majority_at_zero_noise_is_rejected():
    with pytest.raises(DomainError):
        find_fixed_points(0, 0.0)


# --- thresholds ------------------------------------------------------------------


def test_threshold_one_third():
    assert mf_threshold(1) == pytest.approx(1 / 3, abs=1e-6)


def test_threshold_matches_derivative_condition():
    # independent oracle: bistability is lost exactly when h'(1/2) = 1
    for n in range(1, 16):
        assert mf_threshold(n) == pytest.approx(threshold_closed_form(n), abs=1e-8)


def test_threshold_increasing_below_one():
    th = [mf_threshold(n) for n in range(1, 16)]
    assert all(a < b for a, b in zip(th, th[1:]))
    assert all(v < 1 for v in th)


def test_threshold_domain():
    with pytest.raises(DomainError):
        mf_threshold(0)


@pytest.mark.parametrize("n", [1, 2, 4])
def test_interval_stability(n):
    for eps in np.linspace(0.01, mf_threshold(n) - 0.01, 5):
        a = lower_root(n, eps)
        lo = np.linspace(0, a, 1000)
        hi = np.linspace(1 - a, 1, 1000)
        assert np.all(eval_h(n, eps, lo) <= a + 1e-12)
        assert np.all(eval_h(n, eps, hi) >= 1 - a - 1e-12)


# --- recursions --------------------------------------------------------------------


def test_marginal_recursion_examples():
    a = alpha_closed_form(0.1)
    np.testing.assert_allclose(marginal_recursion(1, 0.1, a, 12).values, a, atol=1e-12)
    assert marginal_recursion(1, 1.0, 0.0, 1).values == pytest.approx([0.0, 0.5])
    v = np.array(marginal_recursion(1, 0.1, 0.0, 20).values)
    assert np.all(np.diff(v) >= 0) and np.all(v <= a + 1e-12)


def test_layered_recursion_extremes():
    assert layered_recursion(1, 0.1, 0.0, 0.3, 7).values == pytest.approx(marginal_recursion(1, 0.1, 0.3, 7).values)
    v = layered_recursion(1, 0.1, 1.0, 0.9, 5).values
    assert v[1:] == pytest.approx([0.05] * 5)


def test_layered_recursion_separation_bound():
    eps, th = 0.1, 1 / 3
    eps2 = eps + (th - eps) / 2
    a2 = alpha_closed_form(eps2)
    G = eval_g(1, 1 - a2)
    p = 0.01
    assert p * 2 * G / (2 * G - 1) <= ((th - eps) / 2) / (1 - eps)
    v = layered_recursion(1, eps, p, 1.0, 10).values
    assert min(v) >= 1 - a2


# --- gate probabilities -----------------------------------------------------------


def test_p_exact_examples():
    full = ((Fraction(0), Fraction(1)),)
    assert p_exact(37, 0.3, full) == pytest.approx(1.0)
    assert p_exact(37, 0.3, ()) == 0.0
    # brute force: 0.1 <= k/8 <= 0.3 -> k in {1, 2}
    iv = ((Fraction(1, 10), Fraction(3, 10)),)
    brute = sum(comb(16, k) * 0.1**k * 0.9 ** (16 - k) for k in range(17) if Fraction(1, 10) <= Fraction(2 * k, 16) <= Fraction(3, 10))
    assert p_exact(16, 0.2, iv) == pytest.approx(brute, abs=1e-15)


def test_binomial_mass_large_trials():
    # beyond the direct-summation limit and beyond 2**31 trials
    for m, q, rng in [(2**21, 0.1, (200000, 215000)), (4**16, 0.1, (295279002, 563714457))]:
        ref = stats.binom.cdf(rng[1], m, q) - stats.binom.cdf(rng[0] - 1, m, q)
        assert binomial_range_mass(m, q, (rng,)) == pytest.approx(ref, abs=1e-12)


@settings(max_examples=60)
@given(
    st.integers(1, 400),
    st.floats(0, 1),
    st.lists(st.tuples(st.fractions(0, 1, max_denominator=20), st.fractions(0, 1, max_denominator=20)), max_size=3),
)
def test_p_exact_complement(m, eps, pairs):
    ivs = tuple((min(a, b), max(a, b)) for a, b in pairs)
    p = p_exact(m, eps, ivs)
    assert 0 <= p <= 1
    q = binomial_range_mass(m, eps / 2, complement(ivs, m))
    assert p + q == pytest.approx(1.0, abs=1e-12)
    # exact membership: every counted k really lies in the set
    for lo, hi in count_ranges(ivs, m):
        for k in (lo, hi):
            assert any(a <= Fraction(2 * k, m) <= b for a, b in ivs)
    assert math.isfinite(p)
