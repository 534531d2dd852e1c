import json
import math
import xml.etree.ElementTree as ET
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from noisymaps.errors import DomainError, NotFoundError
from noisymaps.maps import PAIR, LayeredMaj, Maj, interleave, phi, schedule_for_target
from noisymaps.oracle import exact_gap
from noisymaps.scan import (
    CSV_COLUMNS,
    INCONCLUSIVE,
    MULTIPLE,
    UNIQUE,
    ScanConfig,
    bistability_gap,
    classify,
    default_witnesses,
    parse_grid,
    read_csv,
    scan,
    witness_gap_bound,
    witness_selection,
)

LAYERED = LayeredMaj(1, schedule_for_target(0.2))


# --- witnesses ------------------------------------------------------------------


def test_witness_examples():
    assert witness_selection(LAYERED, 0.1) == 88573
    assert witness_selection(LAYERED, 0.0) == 364
    assert witness_selection(LAYERED, 0.3) == 88573
    with pytest.raises(NotFoundError):
        witness_selection(LAYERED, 0.2)
    with pytest.raises(NotFoundError):
        witness_selection(LAYERED, 0.4)
    with pytest.raises(DomainError):
        witness_selection(Maj(1), 0.1)


def test_witness_gap_bound():
    assert witness_gap_bound(LAYERED, 0.1) == pytest.approx(0.7752, abs=1e-4)
    b = [witness_gap_bound(LAYERED, e) for e in (0.0, 0.1, 0.2, 0.3)]
    assert all(x > y > 0 for x, y in zip(b, b[1:]))


def test_default_witnesses():
    assert default_witnesses(Maj(1), 0.1, 8) == [0]
    assert default_witnesses(LAYERED, 0.1, 8) == [88573]
    assert default_witnesses(LAYERED, 0.2, 8) == [0]
    row = interleave([Maj(1, PAIR), LAYERED, Maj(6, PAIR)])
    # the 13-ary row is skipped: its cone at t = 8 is far above the budget
    assert default_witnesses(row, 0.1, 8) == sorted([phi(0, 0), phi(88573, 1)])


# --- labels -------------------------------------------------------------------------


def test_classify_examples():
    assert classify(0.5, 0.6, 0.0) == MULTIPLE
    assert classify(0.0, 0.01, 0.99) == UNIQUE
    assert classify(0.0, 0.07, 0.99) == INCONCLUSIVE
    assert classify(0.0, 0.01, 0.9) == INCONCLUSIVE


unit = st.floats(0, 1)


@given(unit, unit, unit, st.floats(0.01, 0.5), st.floats(0.001, 0.5))
def test_classify_invariants(a, b, agree_lo, g_star, delta):
    lo, hi = sorted((a, b))
    label = classify(lo, hi, agree_lo, g_star, delta)
    assert label in (MULTIPLE, UNIQUE, INCONCLUSIVE)
    assert (label == MULTIPLE) == (lo > g_star)
    if label == UNIQUE:
        assert agree_lo > 1 - delta and hi < g_star / 2


# --- estimators -------------------------------------------------------------------


@pytest.mark.parametrize("eps", [0.1, 0.25, 0.6])
def test_gap_interval_covers_exact(eps):
    g = bistability_gap(Maj(1), eps, 6, 20_000, 0, 3, shortcut=False)
    assert g.lo[0] - 1e-3 <= exact_gap(1, eps, 6) <= g.hi[0] + 1e-3
    assert g.lo[0] <= g.gap[0] <= g.hi[0]


def test_gap_orders_witnesses_as_given():
    g = bistability_gap(Maj(1), 0.1, 3, 500, [7, 0, 3], 3)
    assert g.witnesses == [7, 0, 3]
    assert len(g.gap) == 3


def test_parse_grid():
    assert parse_grid("0:0.5:0.1") == [Fraction(k, 10) for k in range(6)]
    assert parse_grid("0.1, 1/3") == [Fraction(1, 10), Fraction(1, 3)]
    with pytest.raises(DomainError):
        parse_grid("0:1")
    with pytest.raises(DomainError):
        parse_grid("0:1:0")


def test_config_validation():
    with pytest.raises(DomainError):
        ScanConfig(Maj(1), [0.1], 4, 50, 0)
    with pytest.raises(DomainError):
        ScanConfig(Maj(1), [1.5], 4, 500, 0)


# --- sweeps --------------------------------------------------------------------------


@pytest.fixture(scope="module")
def maj_scan():
    return scan(ScanConfig(Maj(1), parse_grid("0.1,0.5,0.9,1"), 8, 2000, 7))


def test_majority_scan_labels(maj_scan):
    labels = maj_scan.labels()
    assert labels[0.1] == MULTIPLE
    assert labels[0.9] == UNIQUE
    assert labels[1.0] == UNIQUE
    for r in maj_scan.rows:
        assert r.oracle_gap == pytest.approx(exact_gap(1, r.eps, 8))
        assert r.error is None


def test_full_noise_row_is_unique():
    res = scan(ScanConfig(Maj(1), [1], 3, 10_000, 1))
    r = res.rows[0]
    assert r.label == UNIQUE and r.agree == 1.0


def test_labels_stable_under_doubling():
    grid = "0.05,0.7"
    a = scan(ScanConfig(Maj(1), parse_grid(grid), 8, 2000, 3)).labels()
    b = scan(ScanConfig(Maj(1), parse_grid(grid), 8, 4000, 4)).labels()
    assert a == b


def test_layered_scan_uses_witness():
    res = scan(ScanConfig(LAYERED, [0.1, 0.2], 8, 1000, 5))
    r1, r2 = res.rows
    assert r1.witnesses == [88573] and r1.label == MULTIPLE
    assert r1.gap_lo >= witness_gap_bound(LAYERED, 0.1) - 0.05
    assert r2.witnesses == [0] and r2.label == UNIQUE


def test_errors_are_recorded_per_row():
    res = scan(ScanConfig(Maj(1), [0.1, 0.2], 12, 100, 0, cap=1000))
    for r in res.rows:
        assert r.label == INCONCLUSIVE
        assert r.error.startswith("ResourceError")
        assert math.isnan(r.gap)


def test_csv_round_trip(maj_scan):
    text = maj_scan.to_csv()
    assert text.startswith("# config: {")
    assert text.splitlines()[1].split(",") == CSV_COLUMNS
    back = read_csv(text)
    assert back.config == json.loads(json.dumps(maj_scan.config))
    for a, b in zip(maj_scan.rows, back.rows):
        for c in CSV_COLUMNS[:-1]:
            assert getattr(a, c) == getattr(b, c)
        assert a.label == b.label
    with pytest.raises(DomainError):
        read_csv("eps,gap\n0.1,0.2\n")


def test_json_and_svg(maj_scan, tmp_path):
    maj_scan.write(tmp_path / "s.csv", tmp_path / "s.json", tmp_path / "s.svg")
    doc = json.loads((tmp_path / "s.json").read_text())
    assert doc["config"]["seed"] == 7 and doc["config"]["grid"][0] == [1, 10]
    assert [r["label"] for r in doc["rows"]] == [r.label for r in maj_scan.rows]
    assert set(CSV_COLUMNS) <= set(doc["rows"][0])
    root = ET.fromstring((tmp_path / "s.svg").read_text())
    assert root.tag.endswith("svg")
    assert (tmp_path / "s.csv").read_text() == maj_scan.to_csv()


def test_scan_is_reproducible():
    cfg = lambda: ScanConfig(Maj(1), [0.2], 5, 500, 11)
    a, b = scan(cfg()), scan(cfg())
    assert a.to_csv() == b.to_csv()
    assert np.isfinite(a.rows[0].gap)
