"""Monte Carlo of the perturbed map on finite dependency cones.

Nothing outside the backward cone of the target cells is ever simulated:
the cone is computed per time step and per layer, then each step evaluates
the local rules of exactly the cells some later step will read.  Samples are
independent rows of a ``(samples, cells)`` array of symbol codes and are
processed in chunks; all randomness comes from a keyed :class:`NoiseStream`,
so results do not depend on chunking or thread count.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from ..errors import DomainError, ResourceError, TruncationError
from ..intervals import Interval, count_ranges
from ..maps.descriptors import PAIR, CellRule, MapDescriptor, is_layered
from ..meanfield import binomial_range_mass
from ..stats import wilson
from .rng import NoiseStream, Stream

__all__ = [
    "FIRST",
    "SECOND",
    "DEFAULT_CAP",
    "ProductInit",
    "SupportSet",
    "TrajectoryState",
    "RunResult",
    "CoupleResult",
    "dependency_cone",
    "initial_state",
    "step",
    "run",
    "couple_run",
    "second_layer_shortcut",
]

FIRST = 1
SECOND = 2
DEFAULT_CAP = 10**7
_WORK_BUDGET = 1 << 22
_MAX_CHUNK = 4096


@dataclass(frozen=True)
class ProductInit:
    """Product initial measure: each cell's first layer is 1 with probability
    ``first`` and its second layer 1 with probability ``second``.
    """

    first: float = 0.0
    second: float = 0.0

    def __post_init__(self):
        for v in (self.first, self.second):
            if not 0.0 <= float(v) <= 1.0:
                raise DomainError("initial probabilities must lie in [0, 1]")

    def sample(self, noise: NoiseStream, leg: int, samples, cells, alphabet: int) -> np.ndarray:
        y = _bernoulli(noise, Stream.INIT_FIRST + 16 * leg, samples, cells, float(self.first))
        if alphabet != PAIR:
            return y
        z = _bernoulli(noise, Stream.INIT_SECOND + 16 * leg, samples, cells, float(self.second))
        return y | (z << 1)


def _bernoulli(noise, stream, samples, cells, p):
    shape = (len(samples), len(cells))
    if p <= 0.0:
        return np.zeros(shape, dtype=np.uint8)
    if p >= 1.0:
        return np.ones(shape, dtype=np.uint8)
    return (noise.uniform(stream, samples, 0, cells) < p).astype(np.uint8)


@dataclass
class SupportSet:
    """Cells whose values are needed, per time step and per layer.

    ``needs[s]`` maps a cell to a bit mask (``FIRST``, ``SECOND``) of the
    layers read at time ``s``; ``cells`` is the sorted union.
    """

    cells: np.ndarray
    needs: list[dict[int, int]]
    rules: dict[int, CellRule] = field(default_factory=dict, repr=False)
    gate_modes: list[dict[int, str]] = field(default_factory=list, repr=False)

    def __len__(self):
        return len(self.cells)

    def __contains__(self, c):
        i = np.searchsorted(self.cells, c)
        return i < len(self.cells) and self.cells[i] == c

    def index(self, cells) -> np.ndarray:
        """Dense positions of ``cells`` in :attr:`cells`."""
        return np.searchsorted(self.cells, np.asarray(cells, dtype=np.int64))

    def at(self, s: int) -> np.ndarray:
        return np.array(sorted(self.needs[s]), dtype=np.int64)

    @property
    def size(self) -> int:
        return sum(len(d) for d in self.needs)


def _prog_hits(keys: np.ndarray, prog) -> bool:
    """Does the sorted array ``keys`` meet the progression?"""
    lo, hi = np.searchsorted(keys, [prog.start, prog.last + 1])
    if lo >= hi:
        return False
    return bool(np.any((keys[lo:hi] - prog.start) % prog.step == 0))


def _full_mask(alphabet):
    return FIRST | SECOND if alphabet == PAIR else FIRST


def dependency_cone(
    map: MapDescriptor,
    targets,
    t: int,
    *,
    refine_layers: bool = True,
    shortcut: bool = False,
    init: ProductInit | None = None,
    cap: int = DEFAULT_CAP,
) -> SupportSet:
    """Backward closure of ``targets`` over ``t`` steps.

    With ``refine_layers`` only the layers actually read are followed: a
    second-layer value at a positive time is pure noise for every rule except
    the identity, so sample cells contribute no further dependencies.
    Without it the closure is the plain union of iterated neighborhoods.

    ``shortcut`` drops sample cells read at steps >= 2 (their gate is drawn
    directly) and, for a product ``init``, the sample cells read at step 1.
    """
    if t < 0:
        raise DomainError("horizon must be nonnegative")
    targets = sorted({int(c) for c in targets})
    if not targets or targets[0] < 0:
        raise DomainError("need at least one nonnegative target cell")
    if not refine_layers:
        return _plain_closure(map, targets, t, cap)

    full = _full_mask(map.alphabet)
    needs: list[dict[int, int]] = [dict() for _ in range(t + 1)]
    modes: list[dict[int, str]] = [dict() for _ in range(t + 1)]
    needs[t] = {c: full for c in targets}
    rules: dict[int, CellRule] = {}
    total = len(targets)

    def rule_of(c):
        r = rules.get(c)
        if r is None:
            r = map.rule(c)
            if r.truncated:
                raise TruncationError(
                    f"cell {c} lies in a truncated row {r.origin}; raise the row count"
                )
            rules[c] = r
        return r

    for s in range(t, 0, -1):
        prev = needs[s - 1]
        deferred = []
        for c, mask in needs[s].items():
            r = rule_of(c)
            if r.kind == "identity":
                prev[c] = prev.get(c, 0) | mask
            elif r.kind in ("maj", "layered") and mask & FIRST:
                for x in r.inputs.indices().tolist():
                    prev[x] = prev.get(x, 0) | FIRST
                if r.kind == "layered":
                    if shortcut and s >= 2:
                        modes[s][c] = "sampled"
                    else:
                        deferred.append(r)
        if deferred:
            keys = np.array(sorted(prev), dtype=np.int64) if s == 1 else None
            for r in deferred:
                if s == 1 and shortcut and init is not None and not _prog_hits(keys, r.gate_cells):
                    modes[s][r.cell] = "init"
                    continue
                modes[s][r.cell] = "cells"
                if r.gate_cells.count > cap:
                    raise ResourceError(f"gate sample of cell {r.cell} has {r.gate_cells.count} cells", r.gate_cells.count)
                for x in r.gate_cells.indices().tolist():
                    prev[x] = prev.get(x, 0) | SECOND
        total += len(prev)
        if total > cap:
            raise ResourceError(f"dependency cone exceeds the cap of {cap} cells", total)
    cells = np.array(sorted(set().union(*needs)), dtype=np.int64)
    if len(cells) > cap:
        raise ResourceError(f"dependency cone has {len(cells)} cells (cap {cap})", len(cells))
    return SupportSet(cells, needs, rules, modes)


def _plain_closure(map, targets, t, cap):
    frontier = set(targets)
    seen = set(targets)
    for _ in range(t):
        nxt = set()
        for c in frontier:
            r = map.rule(c)
            if r.truncated:
                raise TruncationError(f"cell {c} lies in a truncated row {r.origin}")
            nxt.update(r.neighborhood.tolist())
        frontier = nxt - seen
        seen |= nxt
        if len(seen) > cap:
            raise ResourceError(f"dependency cone exceeds the cap of {cap} cells", len(seen))
    cells = np.array(sorted(seen), dtype=np.int64)
    return SupportSet(cells, [dict.fromkeys(seen, FIRST)])


# ---------------------------------------------------------------------------
# vectorized rule evaluation


@dataclass
class _Group:
    kind: str
    pos: np.ndarray  # output positions in the current time slice
    inputs: np.ndarray | None = None  # (cells, k) positions in the previous slice
    gates: np.ndarray | None = None  # (cells, m) positions of sample cells
    fire_table: np.ndarray | None = None  # fire_table[ones] for materialized gates
    fire_p: np.ndarray | None = None  # per-cell gate probability
    cells: np.ndarray | None = None  # absolute cell ids (for keyed gate draws)

    @property
    def width(self) -> int:
        w = len(self.pos)
        for a in (self.inputs, self.gates):
            if a is not None:
                w += a.size
        return w


@lru_cache(maxsize=4096)
def _fire_table(m: int, intervals: tuple[Interval, ...]) -> np.ndarray:
    table = np.zeros(m + 1, dtype=bool)
    for lo, hi in count_ranges(intervals, m):
        table[lo : hi + 1] = True
    return table


@lru_cache(maxsize=4096)
def _fire_prob(m: int, q: float, intervals: tuple[Interval, ...]) -> float:
    return binomial_range_mass(m, q, count_ranges(intervals, m))


def _build_groups(cells, needs_s, rules, modes_s, prev_cells, eps, init):
    """Group the cells of one time slice by rule shape."""
    prev_index = {int(c): i for i, c in enumerate(prev_cells)}
    buckets: dict[tuple, list] = {}
    for pos, c in enumerate(cells.tolist()):
        r = rules[c]
        mask = needs_s[c]
        if r.kind == "zero" or (r.kind in ("maj", "layered") and not mask & FIRST):
            continue
        if r.kind == "identity":
            buckets.setdefault(("identity",), []).append((pos, c, prev_index[c], None))
            continue
        inp = [prev_index[x] for x in r.inputs.indices().tolist()]
        if r.kind == "maj":
            buckets.setdefault(("maj", len(inp)), []).append((pos, c, inp, None))
            continue
        mode = modes_s[c]
        if mode == "cells":
            gate = [prev_index[x] for x in r.gate_cells.indices().tolist()]
            key = ("gate-cells", len(inp), len(gate), r.gate_intervals)
            buckets.setdefault(key, []).append((pos, c, inp, gate))
        else:
            q = eps / 2 if mode == "sampled" else float(init.second)
            p = _fire_prob(r.gate_cells.count, q, r.gate_intervals)
            buckets.setdefault(("gate-p", len(inp)), []).append((pos, c, inp, p))
    groups = []
    for key, items in buckets.items():
        pos = np.array([it[0] for it in items], dtype=np.int64)
        cid = np.array([it[1] for it in items], dtype=np.int64)
        if key[0] == "identity":
            groups.append(_Group("identity", pos, inputs=np.array([it[2] for it in items], dtype=np.int64)))
        elif key[0] == "maj":
            groups.append(_Group("maj", pos, inputs=np.array([it[2] for it in items], dtype=np.int64)))
        elif key[0] == "gate-cells":
            groups.append(
                _Group(
                    "gate-cells",
                    pos,
                    inputs=np.array([it[2] for it in items], dtype=np.int64),
                    gates=np.array([it[3] for it in items], dtype=np.int64),
                    fire_table=_fire_table(key[2], key[3]),
                )
            )
        else:
            groups.append(
                _Group(
                    "gate-p",
                    pos,
                    inputs=np.array([it[2] for it in items], dtype=np.int64),
                    fire_p=np.array([it[3] for it in items]),
                    cells=cid,
                )
            )
    return groups


def _majority(V, inputs):
    k = inputs.shape[1]
    votes = (V[:, inputs] & 1).sum(axis=2, dtype=np.int32)
    return (2 * votes > k).astype(np.uint8)


def _apply(groups, V, n_out, noise, samples, s):
    out = np.zeros((V.shape[0], n_out), dtype=np.uint8)
    for g in groups:
        if g.kind == "identity":
            out[:, g.pos] = V[:, g.inputs]
            continue
        y = _majority(V, g.inputs)
        if g.kind == "gate-cells":
            ones = (V[:, g.gates] >> 1).sum(axis=2, dtype=np.int64)
            y[g.fire_table[ones]] = 0
        elif g.kind == "gate-p":
            u = noise.uniform(Stream.GATE, samples, s, g.cells)
            y[u < g.fire_p[None, :]] = 0
        out[:, g.pos] = y
    return out


def _perturb(out, noise, samples, s, cells, eps, alphabet):
    if eps <= 0.0:
        return out
    flag, sym = noise.errors(samples, s, cells, eps, alphabet)
    return np.where(flag, sym, out)


# ---------------------------------------------------------------------------
# trajectories


@dataclass
class TrajectoryState:
    """Symbol codes of ``samples`` independent trajectories on ``cells``."""

    cells: np.ndarray
    values: np.ndarray
    time: int
    samples: np.ndarray
    alphabet: int

    def column(self, cell) -> np.ndarray:
        i = int(np.searchsorted(self.cells, cell))
        if i >= len(self.cells) or self.cells[i] != cell:
            raise KeyError(f"cell {cell} is not live at time {self.time}")
        return self.values[:, i]


def initial_state(map, cells, init: ProductInit, noise: NoiseStream, samples, leg: int = 0) -> TrajectoryState:
    cells = np.unique(np.asarray(cells, dtype=np.int64))
    samples = np.asarray(samples, dtype=np.int64)
    vals = init.sample(noise, leg, samples, cells, map.alphabet)
    return TrajectoryState(cells, vals, 0, samples, map.alphabet)


def step(map: MapDescriptor, state: TrajectoryState, eps: float, noise: NoiseStream) -> TrajectoryState:
    """One application of the perturbed map on a finite support.

    Every cell whose whole neighborhood is live gets the unperturbed rule
    output, then with probability ``eps`` a uniformly drawn symbol; the other
    cells drop out of the support.
    """
    eps = float(eps)
    live = set(state.cells.tolist())
    full = _full_mask(map.alphabet)
    keep, rules = [], {}
    for c in state.cells.tolist():
        r = map.rule(c)
        if set(r.neighborhood.tolist()) <= live:
            keep.append(c)
            rules[c] = r
    cells = np.array(keep, dtype=np.int64)
    needs = dict.fromkeys(keep, full)
    modes = {c: "cells" for c, r in rules.items() if r.kind == "layered"}
    groups = _build_groups(cells, needs, rules, modes, state.cells, eps, None)
    s = state.time + 1
    out = _apply(groups, state.values, len(cells), noise, state.samples, s)
    out = _perturb(out, noise, state.samples, s, cells, eps, map.alphabet)
    return TrajectoryState(cells, out, s, state.samples, map.alphabet)


@dataclass
class _Plan:
    alphabet: int
    t: int
    slices: list[np.ndarray]
    groups: list[list[_Group]]
    targets: np.ndarray
    target_pos: np.ndarray
    chunk: int
    check_second: np.ndarray


def _make_plan(map, targets, t, eps, init, shortcut, cap) -> _Plan:
    sup = dependency_cone(map, targets, t, shortcut=shortcut, init=init, cap=cap)
    slices = [sup.at(s) for s in range(t + 1)]
    rules = sup.rules
    for s in range(1, t + 1):
        for c in slices[s].tolist():
            if c not in rules:
                r = map.rule(c)
                if r.truncated:
                    raise TruncationError(f"cell {c} lies in a truncated row {r.origin}")
                rules[c] = r
    groups = [[]]
    width = len(slices[0])
    for s in range(1, t + 1):
        g = _build_groups(slices[s], sup.needs[s], rules, sup.gate_modes[s], slices[s - 1], eps, init)
        groups.append(g)
        width = max(width, len(slices[s]) + sum(x.width for x in g))
    tg = np.array(sorted({int(c) for c in targets}), dtype=np.int64)
    tpos = np.searchsorted(slices[t], tg)
    chunk = int(max(1, min(_MAX_CHUNK, _WORK_BUDGET // max(1, width))))
    check = np.array([t >= 1 and rules[c].kind != "identity" for c in tg.tolist()], dtype=bool)
    return _Plan(map.alphabet, t, slices, groups, tg, tpos, chunk, check)


def _simulate(plan: _Plan, legs, noise: NoiseStream, eps: float, samples: np.ndarray):
    """Final-time codes at the targets, one array per ``(init, leg)``."""
    V = [init.sample(noise, leg, samples, plan.slices[0], plan.alphabet) for init, leg, _ in legs]
    for s in range(1, plan.t + 1):
        cells = plan.slices[s]
        flag = sym = None
        if eps > 0.0:
            flag, sym = noise.errors(samples, s, cells, eps, plan.alphabet)
        for i, (_, _, groups) in enumerate(legs):
            out = _apply(groups[s], V[i], len(cells), noise, samples, s)
            V[i] = out if flag is None else np.where(flag, sym, out)
    return [v[:, plan.target_pos] for v in V]


def _threads(threads):
    if threads is None:
        threads = int(os.environ.get("NOISYMAPS_THREADS", "1") or 1)
    return max(1, int(threads))


def _chunked(fn, samples: int, chunk: int, threads: int):
    bounds = [(a, min(samples, a + chunk)) for a in range(0, samples, chunk)]
    jobs = (np.arange(a, b, dtype=np.int64) for a, b in bounds)
    if threads == 1 or len(bounds) == 1:
        return [fn(ids) for ids in jobs]
    with ThreadPoolExecutor(threads) as pool:
        return list(pool.map(fn, jobs))


@dataclass
class RunResult:
    """Symbol counts at each target cell after ``t`` steps."""

    targets: np.ndarray
    counts: np.ndarray  # (targets, alphabet)
    samples: int
    alphabet: int

    def freq(self, symbol=None):
        if symbol is None:
            return self.counts / self.samples
        return self.counts[:, symbol] / self.samples

    def first_layer_counts(self) -> np.ndarray:
        if self.alphabet == PAIR:
            return self.counts[:, 1] + self.counts[:, 3]
        return self.counts[:, 1]

    def first_layer(self):
        """``(p_hat, lo, hi)`` for the first-layer symbol 1 at each target."""
        return wilson(self.first_layer_counts(), self.samples)

    def ci(self):
        """Wilson intervals, arrays of shape ``(targets, alphabet)``."""
        return wilson(self.counts, self.samples)

    def row(self, cell) -> int:
        i = int(np.searchsorted(self.targets, cell))
        if i >= len(self.targets) or self.targets[i] != cell:
            raise KeyError(cell)
        return i

    def to_records(self) -> list[dict]:
        p, lo, hi = self.ci()
        fp, flo, fhi = self.first_layer()
        out = []
        for i, c in enumerate(self.targets.tolist()):
            rec = {"cell": c, "samples": self.samples}
            for a in range(self.alphabet):
                rec[f"freq_{a}"] = float(p[i, a])
                rec[f"lo_{a}"] = float(lo[i, a])
                rec[f"hi_{a}"] = float(hi[i, a])
            rec["first"] = float(fp[i])
            rec["first_lo"] = float(flo[i])
            rec["first_hi"] = float(fhi[i])
            out.append(rec)
        return out


@dataclass
class CoupleResult:
    """Agreement counts of two trajectories driven by the same errors."""

    targets: np.ndarray
    agree: np.ndarray
    samples: int
    counts_a: np.ndarray
    counts_b: np.ndarray
    alphabet: int

    def agreement(self):
        """``(p_hat, lo, hi)`` of ``P(X_j^t = Y_j^t)`` per target."""
        return wilson(self.agree, self.samples)

    def leg(self, which: str) -> RunResult:
        c = self.counts_a if which == "a" else self.counts_b
        return RunResult(self.targets, c, self.samples, self.alphabet)

    def to_records(self) -> list[dict]:
        p, lo, hi = self.agreement()
        return [
            {"cell": c, "samples": self.samples, "agree": float(p[i]), "agree_lo": float(lo[i]), "agree_hi": float(hi[i])}
            for i, c in enumerate(self.targets.tolist())
        ]


def _check_common(map, eps, t, samples, shortcut):
    eps = float(eps)
    if not 0.0 <= eps <= 1.0:
        raise DomainError("eps must lie in [0, 1]")
    if samples < 1:
        raise DomainError("samples must be at least 1")
    if t < 0:
        raise DomainError("horizon must be nonnegative")
    if shortcut:
        second_layer_shortcut(map, True)
    return eps


def second_layer_shortcut(map: MapDescriptor, enabled: bool) -> bool:
    """Validate the shortcut flag for ``map``; returns the flag.

    Drawing gates directly relies on sample cells whose second layer is reset
    to 0 by the rule, which only layered maps provide.
    """
    if enabled and not is_layered(map):
        raise DomainError("the second-layer shortcut only applies to layered maps")
    return bool(enabled)


def _count_symbols(vals, alphabet):
    out = np.zeros((vals.shape[1], alphabet), dtype=np.int64)
    for a in range(alphabet):
        out[:, a] = (vals == a).sum(axis=0)
    return out


def run(
    map: MapDescriptor,
    init: ProductInit,
    eps: float,
    t: int,
    targets,
    samples: int,
    seed: int,
    *,
    shortcut: bool = False,
    cap: int = DEFAULT_CAP,
    threads: int | None = None,
) -> RunResult:
    """Empirical law of the target cells after ``t`` perturbed steps."""
    eps = _check_common(map, eps, t, samples, shortcut)
    plan = _make_plan(map, targets, t, eps, init, shortcut, cap)
    noise = NoiseStream(seed)
    legs = [(init, 0, plan.groups)]

    def job(ids):
        (vals,) = _simulate(plan, legs, noise, eps, ids)
        return _count_symbols(vals, plan.alphabet)

    counts = sum(_chunked(job, samples, plan.chunk, _threads(threads)))
    return RunResult(plan.targets, counts, samples, plan.alphabet)


def couple_run(
    map: MapDescriptor,
    init_a: ProductInit,
    init_b: ProductInit,
    eps: float,
    t: int,
    targets,
    samples: int,
    seed: int,
    *,
    shortcut: bool = False,
    cap: int = DEFAULT_CAP,
    threads: int | None = None,
) -> CoupleResult:
    """Grand coupling: both legs see the same error events and gate draws.

    Initial conditions are drawn independently per leg.
    """
    eps = _check_common(map, eps, t, samples, shortcut)
    plan_a = _make_plan(map, targets, t, eps, init_a, shortcut, cap)
    plan_b = _make_plan(map, targets, t, eps, init_b, shortcut, cap)
    for sa, sb in zip(plan_a.slices, plan_b.slices):
        if not np.array_equal(sa, sb):
            raise RuntimeError("coupled legs resolved to different cones")
    noise = NoiseStream(seed)
    legs = [(init_a, 0, plan_a.groups), (init_b, 1, plan_b.groups)]
    A = plan_a.alphabet

    def job(ids):
        va, vb = _simulate(plan_a, legs, noise, eps, ids)
        if A == PAIR and plan_a.check_second.any():
            cols = plan_a.check_second
            if np.any((va[:, cols] >> 1) != (vb[:, cols] >> 1)):
                raise AssertionError("coupled second layers diverged")
        return (va == vb).sum(axis=0), _count_symbols(va, A), _count_symbols(vb, A)

    parts = _chunked(job, samples, plan_a.chunk, _threads(threads))
    agree = sum(p[0] for p in parts)
    ca = sum(p[1] for p in parts)
    cb = sum(p[2] for p in parts)
    return CoupleResult(plan_a.targets, np.asarray(agree), samples, ca, cb, A)
