"""Sweep the noise rate and label each value with bistability / coupling evidence.

For every ``eps`` two independent runs start from all-0 and all-1 first
layers and the difference of the witness marginals is the bistability gap;
a grand coupling of the same two starts gives the agreement probability.
Labels are evidence, never proof: a finite horizon stands in for
``t -> infinity``.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .engine import DEFAULT_CAP, ProductInit, couple_run, derive_seed, run
from .errors import DomainError, NoisyMapsError, NotFoundError
from .intervals import as_fraction
from .maps.descriptors import GDelta, Interleave, LayeredMaj, Maj, MapDescriptor, is_layered
from .maps.layout import phi
from .meanfield import eval_g, lower_root, mf_threshold, p_exact
from .oracle import exact_marginals
from .stats import abs_interval, newcombe_difference, wilson

__all__ = [
    "MULTIPLE",
    "UNIQUE",
    "INCONCLUSIVE",
    "ScanConfig",
    "ScanRow",
    "ScanResult",
    "GapEstimate",
    "bistability_gap",
    "classify",
    "default_witnesses",
    "witness_selection",
    "witness_gap_bound",
    "scan",
    "parse_grid",
    "read_csv",
    "CSV_COLUMNS",
]

MULTIPLE = "multiple-evidence"
UNIQUE = "unique-evidence"
INCONCLUSIVE = "inconclusive"
CSV_COLUMNS = ["eps", "gap", "gap_lo", "gap_hi", "agree", "agree_lo", "agree_hi", "oracle_gap", "label"]
MAX_WITNESS_DEPTH = 40
_WITNESS_CONE = 10**6


# ---------------------------------------------------------------------------
# witnesses


def _separation_terms(n, eps):
    th = mf_threshold(n)
    if eps >= th:
        raise NotFoundError(f"eps={eps} is not below the bistability threshold {th:.6g}")
    eps2 = eps + (th - eps) / 2
    G = float(eval_g(n, 1 - lower_root(n, eps2)))
    return th, eps2, 2 * G / (2 * G - 1), ((th - eps) / 2) / (1 - eps)


def witness_selection(map: LayeredMaj, eps: float, max_depth: int = MAX_WITNESS_DEPTH) -> int:
    """Smallest cell whose gate is rare enough for the separation argument.

    A block ``k`` qualifies when every block ``d >= k`` (up to ``max_depth``)
    has gate probability ``p_d`` with ``p_d * C <= ((l - eps)/2)/(1 - eps)``,
    ``C = 2g(1 - a')/(2g(1 - a') - 1)``, ``a'`` the lower fixed point at
    ``eps' = eps + (l - eps)/2`` and ``l`` the computed threshold.  Returns
    the first cell of that block.
    """
    if not isinstance(map, LayeredMaj):
        raise DomainError("witness selection needs a layered majority map")
    eps = float(eps)
    _, _, C, rhs = _separation_terms(map.n, eps)
    N = map.arity
    ok = [
        p_exact(map.layout.size(d), eps, map.schedule.at(d)) * C <= rhs
        for d in range(max_depth + 1)
    ]
    for k in range(max_depth + 1):
        if all(ok[k:]):
            return (N**k - 1) // (N - 1)
    raise NotFoundError(f"no witness cell up to depth {max_depth} at eps={eps}")


def witness_gap_bound(map: LayeredMaj, eps: float) -> float:
    """Separation ``(1 - a_{eps'}) - a_eps`` guaranteed at a selected witness."""
    _, eps2, _, _ = _separation_terms(map.n, float(eps))
    return (1 - lower_root(map.n, eps2)) - lower_root(map.n, float(eps))


def _cone_estimate(m: MapDescriptor, t: int) -> int:
    if isinstance(m, (Maj, LayeredMaj)):
        N = 2 * m.n + 1
        return t + 1 if N == 1 else (N ** (t + 1) - 1) // (N - 1)
    return 0


def default_witnesses(map: MapDescriptor, eps: float, t: int, budget: int = _WITNESS_CONE) -> list[int]:
    """Cells worth watching: cell 0 of plain majorities, the selected witness
    of layered rows, and the same per row of an interleave (rows whose cone
    would exceed ``budget`` cells are skipped).
    """
    if isinstance(map, LayeredMaj):
        try:
            return [witness_selection(map, eps)]
        except NotFoundError:
            return [0]
    if isinstance(map, Interleave):
        out = []
        for j, row in enumerate(map.rows):
            if _cone_estimate(row, t) > budget:
                continue
            out.extend(phi(i, j) for i in default_witnesses(row, eps, t, budget))
        return sorted(out) or [0]
    if isinstance(map, GDelta):
        return default_witnesses(map.expanded, eps, t, budget)
    return [0]


# ---------------------------------------------------------------------------
# estimators


@dataclass
class GapEstimate:
    """Per-witness gap ``|P1 - P0|`` with its interval and the raw marginals."""

    witnesses: list[int]
    gap: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    p1: np.ndarray
    p0: np.ndarray


def bistability_gap(
    map: MapDescriptor,
    eps: float,
    t: int,
    samples: int,
    witness,
    seed: int,
    *,
    second: float = 0.0,
    shortcut: bool | None = None,
    cap: int = DEFAULT_CAP,
    threads: int | None = None,
) -> GapEstimate:
    """Gap between first-layer marginals from all-1 and all-0 starts.

    The two runs are independent (derived seeds); the interval is Newcombe's
    score interval for a difference, folded onto ``|d|``.
    """
    witnesses = [int(witness)] if np.isscalar(witness) else [int(w) for w in witness]
    if shortcut is None:
        shortcut = is_layered(map)
    kw = dict(shortcut=shortcut, cap=cap, threads=threads)
    r1 = run(map, ProductInit(1.0, second), eps, t, witnesses, samples, derive_seed(seed, 1), **kw)
    r0 = run(map, ProductInit(0.0, second), eps, t, witnesses, samples, derive_seed(seed, 0), **kw)
    k1 = r1.first_layer_counts()
    k0 = r0.first_layer_counts()
    d, lo, hi = newcombe_difference(k1, samples, k0, samples)
    g, glo, ghi = zip(*(abs_interval(float(a), float(b), float(c)) for a, b, c in zip(d, lo, hi)))
    order = [r1.row(w) for w in witnesses]
    pick = lambda a: np.asarray(a)[order]
    return GapEstimate(witnesses, pick(g), pick(glo), pick(ghi), pick(k1 / samples), pick(k0 / samples))


def classify(gap_lo, gap_hi, agree_lo, g_star: float = 0.1, delta: float = 0.05) -> str:
    if gap_lo > g_star:
        return MULTIPLE
    if agree_lo > 1 - delta and gap_hi < g_star / 2:
        return UNIQUE
    return INCONCLUSIVE


def _oracle_gap(map, eps, t, witnesses, second):
    try:
        a = exact_marginals(map, eps, ProductInit(1.0, second), t, witnesses)
        b = exact_marginals(map, eps, ProductInit(0.0, second), t, witnesses)
    except NoisyMapsError:
        return float("nan")
    return float(np.max(np.abs(a - b)))


# ---------------------------------------------------------------------------
# the sweep


def parse_grid(text: str) -> list[Fraction]:
    """``"a:b:h"`` (inclusive range) or a comma list; entries are rationals."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise DomainError("a grid range is start:stop:step")
        a, b, h = (as_fraction(p) for p in parts)
        if h <= 0:
            raise DomainError("grid step must be positive")
        out, x = [], a
        while x <= b:
            out.append(x)
            x += h
        return out
    return [as_fraction(p) for p in text.split(",") if p.strip()]


@dataclass
class ScanConfig:
    map: MapDescriptor
    grid: list
    t: int
    samples: int
    seed: int
    witnesses: list[int] | None = None
    g_star: float = 0.1
    delta: float = 0.05
    second: float = 0.0
    shortcut: bool | None = None
    cap: int = DEFAULT_CAP
    threads: int | None = None
    map_ref: str | None = None

    def __post_init__(self):
        self.grid = [as_fraction(e) for e in self.grid]
        if any(not 0 <= e <= 1 for e in self.grid):
            raise DomainError("grid values must lie in [0, 1]")
        if self.samples < 100:
            raise DomainError("a scan needs at least 100 samples per point")
        if self.t < 0:
            raise DomainError("horizon must be nonnegative")

    def to_dict(self) -> dict:
        from .maps.serialize import to_dict

        return {
            "map": self.map_ref if self.map_ref is not None else to_dict(self.map),
            "grid": [[e.numerator, e.denominator] for e in self.grid],
            "t": self.t,
            "samples": self.samples,
            "seed": self.seed,
            "witnesses": self.witnesses,
            "g_star": self.g_star,
            "delta": self.delta,
            "second": self.second,
            "shortcut": self.shortcut,
            "cap": self.cap,
        }


@dataclass
class ScanRow:
    eps: float
    gap: float = float("nan")
    gap_lo: float = float("nan")
    gap_hi: float = float("nan")
    agree: float = float("nan")
    agree_lo: float = float("nan")
    agree_hi: float = float("nan")
    oracle_gap: float = float("nan")
    label: str = INCONCLUSIVE
    witnesses: list[int] = field(default_factory=list)
    error: str | None = None


@dataclass
class ScanResult:
    config: dict
    rows: list[ScanRow]

    def labels(self) -> dict[float, str]:
        return {r.eps: r.label for r in self.rows}

    def row(self, eps) -> ScanRow:
        for r in self.rows:
            if math.isclose(r.eps, float(eps), abs_tol=1e-12):
                return r
        raise KeyError(eps)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("# config: " + json.dumps(self.config, sort_keys=True) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow(["%.17g" % getattr(r, c) for c in CSV_COLUMNS[:-1]] + [r.label])
        return buf.getvalue()

    def to_json(self) -> str:
        rows = []
        for r in self.rows:
            d = asdict(r)
            for k, v in d.items():
                if isinstance(v, float) and math.isnan(v):
                    d[k] = None
            rows.append(d)
        return json.dumps({"config": self.config, "rows": rows}, indent=2)

    def to_svg(self, width: int = 640, height: int = 400) -> str:
        return _svg(self, width, height)

    def write(self, csv_path=None, json_path=None, svg_path=None):
        if csv_path:
            Path(csv_path).write_text(self.to_csv())
        if json_path:
            Path(json_path).write_text(self.to_json() + "\n")
        if svg_path:
            Path(svg_path).write_text(self.to_svg())


def read_csv(text: str) -> ScanResult:
    """Parse :meth:`ScanResult.to_csv` output back into a result."""
    lines = text.splitlines()
    config = {}
    if lines and lines[0].startswith("# config: "):
        config = json.loads(lines[0][len("# config: ") :])
        lines = lines[1:]
    reader = csv.DictReader(lines)
    if reader.fieldnames != CSV_COLUMNS:
        raise DomainError(f"unexpected scan columns {reader.fieldnames}")
    rows = [ScanRow(**{c: float(rec[c]) for c in CSV_COLUMNS[:-1]}, label=rec["label"]) for rec in reader]
    return ScanResult(config, rows)


def _scan_point(cfg: ScanConfig, eps: Fraction, index: int) -> ScanRow:
    e = float(eps)
    row = ScanRow(e)
    try:
        wit = cfg.witnesses if cfg.witnesses else default_witnesses(cfg.map, e, cfg.t)
        row.witnesses = list(wit)
        seed = derive_seed(cfg.seed, index)
        shortcut = is_layered(cfg.map) if cfg.shortcut is None else cfg.shortcut
        kw = dict(shortcut=shortcut, cap=cfg.cap, threads=cfg.threads)
        g = bistability_gap(cfg.map, e, cfg.t, cfg.samples, wit, seed, second=cfg.second, **kw)
        c = couple_run(
            cfg.map,
            ProductInit(0.0, cfg.second),
            ProductInit(1.0, cfg.second),
            e,
            cfg.t,
            wit,
            cfg.samples,
            derive_seed(seed, 2),
            **kw,
        )
        a, alo, ahi = wilson(c.agree, cfg.samples)
        # the strongest witness decides: largest gap, weakest agreement
        i = int(np.argmax(g.gap))
        row.gap, row.gap_lo, row.gap_hi = float(g.gap[i]), float(g.lo[i]), float(g.hi[i])
        j = int(np.argmin(a))
        row.agree, row.agree_lo, row.agree_hi = float(a[j]), float(alo[j]), float(ahi[j])
        row.oracle_gap = _oracle_gap(cfg.map, e, cfg.t, wit, cfg.second)
        row.label = classify(row.gap_lo, row.gap_hi, row.agree_lo, cfg.g_star, cfg.delta)
    except (NoisyMapsError, ValueError, MemoryError) as exc:
        row.error = f"{type(exc).__name__}: {exc}"
        row.label = INCONCLUSIVE
    return row


def scan(config: ScanConfig) -> ScanResult:
    """Label every grid point; failures are recorded per row."""
    rows = [_scan_point(config, e, i) for i, e in enumerate(config.grid)]
    return ScanResult(config.to_dict(), rows)


# ---------------------------------------------------------------------------
# plotting


def _svg(res: ScanResult, W: int, H: int) -> str:
    L, R, T, B = 60, 20, 20, 50
    pw, ph = W - L - R, H - T - B
    xs = lambda e: L + pw * e
    ys = lambda v: T + ph * (1 - v)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect x="{L}" y="{T}" width="{pw}" height="{ph}" fill="white" stroke="black"/>',
    ]
    for k in range(6):
        v = k / 5
        out.append(f'<text x="{L - 8}" y="{ys(v) + 4:.1f}" font-size="11" text-anchor="end">{v:.1f}</text>')
        out.append(f'<text x="{xs(v):.1f}" y="{T + ph + 16}" font-size="11" text-anchor="middle">{v:.1f}</text>')
    out.append(f'<text x="{L + pw / 2}" y="{H - 10}" font-size="12" text-anchor="middle">eps</text>')
    g_star = res.config.get("g_star", 0.1)
    delta = res.config.get("delta", 0.05)
    for v, colour, name in ((g_star, "#c0392b", "g*"), (1 - delta, "#2471a3", "1-delta")):
        out.append(
            f'<line x1="{L}" y1="{ys(v):.1f}" x2="{L + pw}" y2="{ys(v):.1f}" stroke="{colour}" stroke-dasharray="4 3"/>'
        )
        out.append(f'<text x="{L + pw - 4}" y="{ys(v) - 4:.1f}" font-size="10" text-anchor="end" fill="{colour}">{name}</text>')
    for key, colour in (("gap", "#c0392b"), ("agree", "#2471a3")):
        pts = [(r.eps, getattr(r, key)) for r in res.rows if not math.isnan(getattr(r, key))]
        if pts:
            poly = " ".join(f"{xs(e):.1f},{ys(v):.1f}" for e, v in pts)
            out.append(f'<polyline points="{poly}" fill="none" stroke="{colour}" stroke-width="1.5"/>')
        for r in res.rows:
            lo, hi = getattr(r, key + "_lo"), getattr(r, key + "_hi")
            if not math.isnan(lo):
                out.append(
                    f'<line x1="{xs(r.eps):.1f}" y1="{ys(lo):.1f}" x2="{xs(r.eps):.1f}" y2="{ys(hi):.1f}" stroke="{colour}"/>'
                )
    out.append(f'<text x="{L + 6}" y="{T + 14}" font-size="11" fill="#c0392b">gap</text>')
    out.append(f'<text x="{L + 40}" y="{T + 14}" font-size="11" fill="#2471a3">agreement</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
