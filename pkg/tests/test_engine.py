import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from noisymaps.engine import (
    NoiseStream,
    ProductInit,
    couple_run,
    dependency_cone,
    derive_seed,
    initial_state,
    run,
    step,
)
from noisymaps.engine import core
from noisymaps.errors import DomainError, ResourceError, TruncationError
from noisymaps.maps import PAIR, LayeredMaj, Maj, build_M, phi, schedule_for_target
from noisymaps.meanfield import marginal_recursion
from noisymaps.oracle import layered_marginal
from noisymaps.stats import binom_ci_contains

LAYERED = LayeredMaj(1, schedule_for_target(0.2))


# --- cones -------------------------------------------------------------------


def test_cone_examples():
    c = dependency_cone(Maj(1), [0], 2)
    assert c.cells.tolist() == list(range(13))
    assert dependency_cone(Maj(1), [0], 0).cells.tolist() == [0]
    assert dependency_cone(LAYERED, [0], 1).cells.tolist() == [0, 1, 2, 3, 4]
    assert dependency_cone(LAYERED, [0], 1, refine_layers=False).cells.tolist() == [0, 1, 2, 3, 4]


@pytest.mark.parametrize("n,t", [(0, 6), (1, 6), (2, 4), (3, 3)])
def test_majority_cone_size(n, t):
    N = 2 * n + 1
    c = dependency_cone(Maj(n), [0], t)
    assert len(c) == sum(N**s for s in range(t + 1))
    assert len(c.needs[0]) == N**t


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 3), st.lists(st.integers(0, 12), min_size=1, max_size=4))
def test_cone_monotone(t, targets):
    for m in (Maj(1), LAYERED):
        a = set(dependency_cone(m, targets, t).cells.tolist())
        b = set(dependency_cone(m, targets, t + 1).cells.tolist())
        assert a <= b


def test_layer_refinement_only_drops_second_layer_reads():
    plain = set(dependency_cone(LAYERED, [0], 3, refine_layers=False).cells.tolist())
    fine = set(dependency_cone(LAYERED, [0], 3).cells.tolist())
    assert fine < plain


def test_shortcut_shrinks_cone():
    full = dependency_cone(LAYERED, [0], 4)
    short = dependency_cone(LAYERED, [0], 4, shortcut=True, init=ProductInit())
    assert len(short) < len(full)
    assert len(short) == sum(3**s for s in range(5))


def test_cone_cap():
    with pytest.raises(ResourceError) as e:
        dependency_cone(Maj(1), [0], 20, cap=1000)
    assert e.value.size > 1000


def test_truncated_row_errors():
    with pytest.raises(TruncationError):
        dependency_cone(build_M(2), [phi(0, 3)], 1)


def test_support_index():
    c = dependency_cone(Maj(1), [0], 2)
    assert c.index([0, 5, 12]).tolist() == [0, 5, 12]
    assert 7 in c and 13 not in c


# --- noise ----------------------------------------------------------------------


def test_noise_is_keyed():
    ns = NoiseStream(5)
    a = ns.bits(1, np.arange(10), 3, np.array([4, 9, 2]))
    b = ns.bits(1, np.array([7, 8, 9]), 3, np.array([2, 9]))
    assert a[7:, [2, 1]].tolist() == b.tolist()
    assert not np.array_equal(ns.bits(1, np.arange(4), 3, np.arange(4)), NoiseStream(6).bits(1, np.arange(4), 3, np.arange(4)))


def test_noise_rates():
    ns = NoiseStream(1)
    flag, sym = ns.errors(np.arange(20000), 1, np.arange(10), 0.3, PAIR)
    assert flag.mean() == pytest.approx(0.3, abs=0.005)
    counts = np.bincount(sym.ravel(), minlength=4)
    assert stats.chisquare(counts).pvalue > 0.001


def test_derive_seed_distinct():
    seeds = {derive_seed(1, k) for k in range(1000)}
    assert len(seeds) == 1000


# --- step ---------------------------------------------------------------------------


def test_step_zero_noise_majority_of_ones():
    ns = NoiseStream(0)
    s0 = initial_state(Maj(1), range(13), ProductInit(1.0), ns, np.arange(4))
    s1 = step(Maj(1), s0, 0.0, ns)
    assert s1.cells.tolist() == [0, 1, 2, 3]
    assert np.all(s1.values == 1)
    s2 = step(Maj(1), s1, 0.0, ns)
    assert s2.cells.tolist() == [0] and np.all(s2.values == 1)


def test_step_zero_noise_is_rule():
    ns = NoiseStream(0)
    s0 = initial_state(Maj(1), range(13), ProductInit(0.5), ns, np.arange(50))
    s1 = step(Maj(1), s0, 0.0, ns)
    for c in range(4):
        ins = s0.values[:, 3 * c + 1 : 3 * c + 4]
        assert np.array_equal(s1.column(c), (ins.sum(axis=1) >= 2).astype(np.uint8))


def test_step_full_noise_uniform():
    ns = NoiseStream(3)
    s0 = initial_state(LAYERED, range(60), ProductInit(1.0, 1.0), ns, np.arange(20000))
    s1 = step(LAYERED, s0, 1.0, ns)
    counts = np.bincount(s1.column(0), minlength=4)
    assert stats.chisquare(counts).pvalue > 0.001


@pytest.mark.parametrize("m,t", [(Maj(1), 3), (LAYERED, 2)])
def test_step_and_run_agree_bitwise(m, t):
    init = ProductInit(0.4, 0.3)
    samples, seed, eps = 300, 11, 0.15
    cone = dependency_cone(m, [0, 1], t, refine_layers=False)
    ns = NoiseStream(seed)
    s = initial_state(m, cone.cells, init, ns, np.arange(samples))
    for _ in range(t):
        s = step(m, s, eps, ns)
    r = run(m, init, eps, t, [0, 1], samples, seed)
    for row, c in enumerate([0, 1]):
        col = s.column(c)
        assert np.bincount(col, minlength=m.alphabet).tolist() == r.counts[row].tolist()


# --- run --------------------------------------------------------------------------


def test_run_matches_recursion():
    alpha = 0.3
    r = run(Maj(1), ProductInit(alpha), 0.1, 3, [0], 100_000, 2)
    exact = marginal_recursion(1, 0.1, alpha, 3).final
    assert binom_ci_contains(int(r.first_layer_counts()[0]), r.samples, exact)


@pytest.mark.parametrize("m", [Maj(1), Maj(2, PAIR), LAYERED, build_M(3)], ids=["maj3", "maj5pair", "layered", "M"])
def test_run_full_noise_uniform(m):
    r = run(m, ProductInit(0.8, 0.9), 1.0, 1, [0, 1, 2], 20_000, 4)
    for row in r.counts:
        assert stats.chisquare(row).pvalue > 0.001


def test_run_zero_noise_all_zero():
    for t in (0, 1, 4):
        r = run(Maj(1), ProductInit(0.0), 0.0, t, [0, 3], 500, 1)
        assert r.first_layer_counts().tolist() == [0, 0]


def test_run_deterministic_across_threads_and_chunks(monkeypatch):
    args = (LAYERED, ProductInit(0.6, 0.2), 0.2, 3, [0, 2], 3000, 9)
    a = run(*args).counts
    b = run(*args, threads=3).counts
    monkeypatch.setattr(core, "_WORK_BUDGET", 5000)
    c = run(*args).counts
    assert np.array_equal(a, b) and np.array_equal(a, c)
    assert not np.array_equal(a, run(*args[:-1], 10).counts)


def test_run_layered_matches_exact_recursion():
    init = ProductInit(1.0, 0.0)
    for depth_cell, d in ((0, 0), (4, 2)):
        exact = layered_marginal(LAYERED, 0.2, init, 4, d)[-1]
        for shortcut in (False, True):
            r = run(LAYERED, init, 0.2, 4, [depth_cell], 40_000, 21, shortcut=shortcut)
            assert binom_ci_contains(int(r.first_layer_counts()[0]), r.samples, exact)


def test_shortcut_ab():
    init = ProductInit(0.7, 0.4)
    a = run(LAYERED, init, 0.15, 4, [0, 1, 2], 10_000, 5, shortcut=False)
    b = run(LAYERED, init, 0.15, 4, [0, 1, 2], 10_000, 6, shortcut=True)
    for ka, kb in zip(a.first_layer_counts(), b.first_layer_counts()):
        sa = np.sqrt(ka * (1 - ka / a.samples)) / a.samples
        sb = np.sqrt(kb * (1 - kb / b.samples)) / b.samples
        assert abs(ka / a.samples - kb / b.samples) <= 4 * np.hypot(sa, sb) + 1e-3


def test_step_one_reads_initial_second_layer():
    # E_0 = {4}; the gate at cell 0 fires iff z_4 = 0.  With z = 1 everywhere
    # it never fires at step 1, unlike a pure-noise sample (fires w.p. 1 - eps/2).
    eps = 0.2
    for shortcut in (False, True):
        r = run(LAYERED, ProductInit(1.0, 1.0), eps, 1, [0], 20_000, 8, shortcut=shortcut)
        assert binom_ci_contains(int(r.first_layer_counts()[0]), r.samples, 1 - eps / 2)
        noise_law = eps / 2 + (1 - eps) * (eps / 2)
        assert not binom_ci_contains(int(r.first_layer_counts()[0]), r.samples, noise_law)


def test_shortcut_refused_for_plain_maps():
    with pytest.raises(DomainError):
        run(Maj(1), ProductInit(), 0.1, 2, [0], 10, 1, shortcut=True)


def test_run_validates_arguments():
    with pytest.raises(DomainError):
        run(Maj(1), ProductInit(), 1.5, 2, [0], 10, 1)
    with pytest.raises(DomainError):
        run(Maj(1), ProductInit(), 0.1, 2, [0], 0, 1)
    with pytest.raises(DomainError):
        ProductInit(1.2)


# --- couplings --------------------------------------------------------------------


def test_couple_full_noise_agrees():
    c = couple_run(LAYERED, ProductInit(0.0), ProductInit(1.0, 1.0), 1.0, 1, [0, 1, 2], 2000, 3)
    assert c.agree.tolist() == [2000, 2000, 2000]


def test_couple_zero_noise_disagrees():
    for t in (1, 3, 5):
        c = couple_run(Maj(1), ProductInit(0.0), ProductInit(1.0), 0.0, t, [0], 500, 3)
        assert c.agree.tolist() == [0]


def test_couple_legs_match_run():
    a, b = ProductInit(0.2), ProductInit(0.9)
    c = couple_run(Maj(1), a, b, 0.2, 4, [0], 10_000, 12)
    for leg, init in (("a", a), ("b", b)):
        exact = marginal_recursion(1, 0.2, init.first, 4).final
        k = int(c.leg(leg).first_layer_counts()[0])
        assert binom_ci_contains(k, c.samples, exact)


def test_couple_second_layers_coincide():
    # the engine asserts this internally; this exercises the pair alphabet path
    c = couple_run(LAYERED, ProductInit(0.0, 0.0), ProductInit(1.0, 1.0), 0.3, 3, [0, 1], 2000, 2)
    assert c.counts_a.sum() == c.counts_b.sum() == 4000


def test_couple_agreement_trend():
    # agreement only drops as eps moves into the bistable regime
    grid = [0.05, 0.15, 0.25, 0.35]
    res = [couple_run(Maj(1), ProductInit(0.0), ProductInit(1.0), e, 6, [0], 4000, 30 + i) for i, e in enumerate(grid)]
    ag = [r.agreement() for r in res]
    for (p0, lo0, hi0), (p1, lo1, hi1) in zip(ag, ag[1:]):
        assert lo0[0] <= hi1[0]


def test_wilson_endpoints_exact():
    from noisymaps.stats import wilson

    _, lo, hi = wilson([0, 20000], [100, 20000])
    assert lo[0] == 0.0 and hi[1] == 1.0
