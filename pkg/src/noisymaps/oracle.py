"""Exact small-scale answers: marginal recursions on concrete cells and
stationary laws of finite self-contained blocks.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .engine.core import ProductInit, _apply, _build_groups
from .errors import DomainError, ResourceError
from .intervals import count_ranges
from .maps.descriptors import Densify, Interleave, LayeredMaj, Maj, MapDescriptor
from .maps.layout import phi_inv
from .meanfield import (
    binomial_range_mass,
    eval_g,
    lower_root,
    marginal_recursion,
    mf_threshold,
    p_exact,
)

__all__ = [
    "FiniteChain",
    "Stationary",
    "finite_chain",
    "densify_block",
    "exact_finite_markov",
    "exact_marginals",
    "layered_marginal",
    "exact_gap",
    "gap_lower_bound",
    "STATE_CAP",
]

STATE_CAP = 2**20
RESIDUAL_TOL = 1e-12


# ---------------------------------------------------------------------------
# exact marginals


def _first_cell(N, d):
    return (N**d - 1) // (N - 1)


def _gate_prob(rule, eps, s, init):
    m = rule.gate_cells.count
    if s >= 2:
        return p_exact(m, eps, rule.gate_intervals)
    return binomial_range_mass(m, float(init.second), count_ranges(rule.gate_intervals, m))


def layered_marginal(map: LayeredMaj, eps: float, init: ProductInit, t: int, depth: int) -> np.ndarray:
    """``P(first layer = 1)`` at a depth-``depth`` cell for times ``0..t``.

    Cells of block ``d`` read the first layers of block ``d + 1`` and a gate
    that fires with probability ``p(d, s)``; at step 1 the gate reads the
    initial second layer, afterwards the pure-noise one.
    """
    eps = float(eps)
    N = map.arity
    rules = {d: map.rule(_first_cell(N, d)) for d in range(depth, depth + t + 1)}
    # a[d] = marginal at block d, current time
    a = {d: float(init.first) for d in rules}
    out = [a[depth]]
    for s in range(1, t + 1):
        a = {
            d: eps / 2 + (1 - eps) * (1 - _gate_prob(rules[d], eps, s, init)) * float(eval_g(map.n, a[d + 1]))
            for d in range(depth, depth + t - s + 1)
        }
        out.append(a[depth])
    return np.array(out)


def exact_marginals(map: MapDescriptor, eps: float, init: ProductInit, t: int, cells=(0,)) -> np.ndarray:
    """Exact first-layer marginals at ``cells`` after ``t`` steps.

    Valid for maps whose cells read pairwise disjoint neighborhoods with
    disjoint dependency trees (plain and layered majorities, and rows of an
    interleave of those), started from a product measure.
    """
    eps = float(eps)
    if not 0 <= eps <= 1:
        raise DomainError("eps must lie in [0, 1]")
    cells = [int(c) for c in cells]
    if isinstance(map, Maj):
        v = marginal_recursion(map.n, eps, float(init.first), t).final
        return np.full(len(cells), v)
    if isinstance(map, LayeredMaj):
        from .maps.layout import depth_of

        return np.array([layered_marginal(map, eps, init, t, depth_of(map.arity, c))[-1] for c in cells])
    if isinstance(map, Interleave):
        out = []
        for c in cells:
            i, j = phi_inv(c)
            if j >= len(map.rows):
                raise DomainError(f"cell {c} lies in a truncated row")
            out.append(exact_marginals(map.rows[j], eps, init, t, [i])[0])
        return np.array(out)
    raise DomainError(
        f"no exact marginal recursion for {type(map).__name__}: neighborhoods are not disjoint trees"
    )


def exact_gap(n: int, eps: float, t: int) -> float:
    """``h^t(1) - h^t(0)`` for the plain ``2n+1`` majority."""
    return marginal_recursion(n, eps, 1.0, t).final - marginal_recursion(n, eps, 0.0, t).final


def gap_lower_bound(n: int, eps: float) -> float:
    """Separation ``1 - 2 alpha`` kept forever by the two extreme starts."""
    th = mf_threshold(n)
    if eps > th + 1e-6:
        raise DomainError(f"eps={eps} is above the bistability threshold {th:.6g}")
    if eps >= th:
        return 0.0
    return max(0.0, 1.0 - 2.0 * lower_root(n, eps))


# ---------------------------------------------------------------------------
# finite Markov chains


@dataclass
class FiniteChain:
    """The perturbed map restricted to a self-contained finite support.

    States are symbol codes on ``cells`` in C order (the last cell varies
    fastest).  The transition is a deterministic image followed by an
    independent per-cell kernel ``(1 - eps) I + eps / |A|``.
    """

    cells: np.ndarray
    alphabet: int
    eps: float
    image: np.ndarray = field(repr=False)

    @property
    def n_states(self) -> int:
        return len(self.image)

    @property
    def shape(self):
        return (self.alphabet,) * len(self.cells)

    def kernel(self) -> np.ndarray:
        A = self.alphabet
        return (1 - self.eps) * np.eye(A) + self.eps / A

    def apply(self, pi: np.ndarray) -> np.ndarray:
        """One step of the chain on a row distribution ``pi``."""
        mu = np.bincount(self.image, weights=pi, minlength=self.n_states)
        if self.eps == 0:
            return mu
        K = self.kernel()
        T = mu.reshape(self.shape)
        for ax in range(T.ndim):
            T = np.moveaxis(np.tensordot(T, K, axes=([ax], [0])), -1, ax)
        return T.reshape(-1)

    def transition_matrix(self) -> np.ndarray:
        """Dense transition matrix (small chains only)."""
        if self.n_states > 4096:
            raise ResourceError("dense transition matrix too large", self.n_states)
        return np.array([self.apply(row) for row in np.eye(self.n_states)])

    def marginal(self, pi: np.ndarray, cell: int) -> np.ndarray:
        j = int(np.searchsorted(self.cells, cell))
        if j >= len(self.cells) or self.cells[j] != cell:
            raise KeyError(cell)
        T = pi.reshape(self.shape)
        return T.sum(axis=tuple(a for a in range(T.ndim) if a != j))


def _all_states(ncells, A):
    S = A**ncells
    idx = np.arange(S, dtype=np.int64)
    V = np.empty((S, ncells), dtype=np.uint8)
    for j in range(ncells - 1, -1, -1):
        V[:, j] = idx % A
        idx //= A
    return V


def finite_chain(map: MapDescriptor, cells, eps: float, cap: int = STATE_CAP) -> FiniteChain:
    cells = np.unique(np.asarray(list(cells), dtype=np.int64))
    A = map.alphabet
    eps = float(eps)
    if not 0 <= eps <= 1:
        raise DomainError("eps must lie in [0, 1]")
    if A ** len(cells) > cap:
        raise ResourceError(f"{A}^{len(cells)} states exceed the cap of {cap}", A ** len(cells))
    live = set(cells.tolist())
    rules = {}
    for c in cells.tolist():
        r = map.rule(c)
        if not set(r.neighborhood.tolist()) <= live:
            raise DomainError(f"support is not self-contained: cell {c} reads outside it")
        rules[c] = r
    full = 3 if A == 4 else 1
    needs = dict.fromkeys(rules, full)
    modes = {c: "cells" for c, r in rules.items() if r.kind == "layered"}
    groups = _build_groups(cells, needs, rules, modes, cells, eps, None)
    V = _all_states(len(cells), A)
    out = _apply(groups, V, len(cells), None, None, 0)
    weights = A ** np.arange(len(cells) - 1, -1, -1, dtype=np.int64)
    image = out.astype(np.int64) @ weights
    return FiniteChain(cells, A, eps, image)


def densify_block(map: Densify, eps: float, cap: int = STATE_CAP) -> FiniteChain:
    """Chain on the cells ``[0, r + 1]`` of a densified map."""
    return finite_chain(map, range(map.radius + 2), eps, cap)


@dataclass
class Stationary:
    distribution: np.ndarray
    residual: float


def exact_finite_markov(chain: FiniteChain, tol: float = RESIDUAL_TOL, max_iter: int = 100_000) -> list[Stationary]:
    """Stationary distributions of ``chain``.

    Positive noise: the unique one, by power iteration from uniform until the
    L1 residual drops below ``tol``.  Zero noise: one uniform law per cycle of
    the deterministic image (the closed classes).
    """
    S = chain.n_states
    if chain.eps > 0:
        pi = np.full(S, 1.0 / S)
        for _ in range(max_iter):
            nxt = chain.apply(pi)
            res = float(np.abs(nxt - pi).sum())
            pi = nxt / nxt.sum()
            if res < tol:
                break
        else:
            raise RuntimeError(f"power iteration did not reach {tol} (last residual {res:.3g})")
        return [Stationary(pi, float(np.abs(chain.apply(pi) - pi).sum()))]
    g = csr_matrix((np.ones(S), (np.arange(S), chain.image)), shape=(S, S))
    ncomp, labels = connected_components(g, directed=True, connection="strong")
    leaves = np.ones(ncomp, dtype=bool)
    out_edge = labels != labels[chain.image]
    leaves[np.unique(labels[out_edge])] = False
    result = []
    for k in np.flatnonzero(leaves):
        members = labels == k
        pi = members / members.sum()
        result.append(Stationary(pi, float(np.abs(chain.apply(pi) - pi).sum())))
    return result
