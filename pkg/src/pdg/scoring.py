"""Incompatibility, information deficiency, and the combined score.

For a PDG ``M`` and joint ``mu``:

    inc(M, mu)  = sum_L beta_L  E_{x~mu_X} D(mu(Y|x) || p_L(x))
    idef(M, mu) = sum_L alpha_L H_mu(Y|X) - H(mu)
    score       = inc + gamma * idef

``score_decomposed`` evaluates the same quantity as a single expectation over
worlds and is kept as an independent cross-check of ``score``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .dist import JointTable, plogp
from .model import Edge, Pdg, PdgError

INF = float("inf")


@dataclass(frozen=True, eq=False)
class EdgeIndex:
    """Per-world lookups for one edge."""

    edge: Edge
    src: np.ndarray  # source setting of each world
    pair: np.ndarray  # src * |Y| + target setting
    n_src: int
    n_tgt: int
    logp: np.ndarray  # log2 p_L(y^w | x^w), -inf on cpd zeros

    @property
    def n_pair(self) -> int:
        return self.n_src * self.n_tgt


@lru_cache(maxsize=64)
def edge_indices(pdg: Pdg) -> tuple[EdgeIndex, ...]:
    space = pdg.space
    out = []
    for e in pdg.edges:
        src, nx = space.column(e.source)
        tgt, ny = space.column(e.target)
        with np.errstate(divide="ignore"):
            logp = np.log2(e.cpd.table[src, tgt])
        out.append(EdgeIndex(e, src, src * ny + tgt, nx, ny, logp))
    return tuple(out)


def forbidden_worlds(pdg: Pdg) -> np.ndarray:
    """Boolean mask of worlds given probability 0 by some edge's cpd."""
    mask = np.zeros(pdg.space.size, dtype=bool)
    for ix in edge_indices(pdg):
        mask |= np.isneginf(ix.logp)
    return mask


def _check(pdg: Pdg, mu: JointTable) -> None:
    if mu.space != pdg.space:
        raise PdgError(
            f"distribution is over {list(mu.space.names)}, PDG world space is {list(pdg.space.names)}"
        )


def _edge_inc(ix: EdgeIndex, mu: np.ndarray) -> float:
    m = np.bincount(ix.pair, weights=mu, minlength=ix.n_pair).reshape(ix.n_src, ix.n_tgt)
    mx = m.sum(axis=1, keepdims=True)
    p = ix.edge.cpd.table
    pos = m > 0
    if np.any(p[pos] == 0):
        return INF
    cond = np.divide(m, mx, out=np.zeros_like(m), where=mx > 0)
    return float(np.sum(m[pos] * (np.log2(cond[pos]) - np.log2(p[pos]))))


def _edge_cond_entropy(ix: EdgeIndex, mu: np.ndarray) -> float:
    m = np.bincount(ix.pair, weights=mu, minlength=ix.n_pair).reshape(ix.n_src, ix.n_tgt)
    return float(-plogp(m).sum() + plogp(m.sum(axis=1)).sum())


def _weighted_sum(terms: dict[str, float], weights: dict[str, float]) -> float:
    total = 0.0
    for k, v in terms.items():
        if v == INF:
            return INF
        total += weights[k] * v
    return total


def inc(pdg: Pdg, mu: JointTable) -> float:
    _check(pdg, mu)
    total = 0.0
    for ix in edge_indices(pdg):
        d = _edge_inc(ix, mu.probs)
        if d == INF:
            return INF
        total += ix.edge.beta * d
    return total


def idef(pdg: Pdg, mu: JointTable) -> float:
    _check(pdg, mu)
    h = sum(ix.edge.alpha * _edge_cond_entropy(ix, mu.probs) for ix in edge_indices(pdg))
    return float(h + plogp(mu.probs).sum())


@dataclass(frozen=True)
class ScoreReport:
    gamma: float
    inc: float
    idef: float
    total: float
    per_edge_inc: dict[str, float] = field(default_factory=dict)
    per_edge_cond_entropy: dict[str, float] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "gamma": self.gamma,
            "inc": self.inc,
            "idef": self.idef,
            "total": self.total,
            "perEdgeInc": dict(self.per_edge_inc),
            "perEdgeCondEntropy": dict(self.per_edge_cond_entropy),
        }


def score(pdg: Pdg, mu: JointTable, gamma: float) -> ScoreReport:
    if gamma < 0:
        raise PdgError(f"gamma must be non-negative, got {gamma}")
    _check(pdg, mu)
    per_inc, per_h = {}, {}
    for ix in edge_indices(pdg):
        per_inc[ix.edge.label] = _edge_inc(ix, mu.probs)
        per_h[ix.edge.label] = _edge_cond_entropy(ix, mu.probs)
    betas = {e.label: e.beta for e in pdg.edges}
    alphas = {e.label: e.alpha for e in pdg.edges}
    i = _weighted_sum(per_inc, betas)
    d = _weighted_sum(per_h, alphas) + float(plogp(mu.probs).sum())
    total = i if gamma == 0 else i + gamma * d
    return ScoreReport(float(gamma), i, d, total, per_inc, per_h)


def score_decomposed(pdg: Pdg, mu: JointTable, gamma: float) -> float:
    """The score as one expectation over worlds of log-likelihood and regularization terms."""
    _check(pdg, mu)
    p = mu.probs
    live = p > 0
    integrand = np.zeros(int(live.sum()))
    for ix in edge_indices(pdg):
        logp = ix.logp[live]
        if np.any(np.isneginf(logp)):
            return INF
        # mu(y^w | x^w) evaluated world by world
        m_xy = np.bincount(ix.pair, weights=p, minlength=ix.n_pair)[ix.pair[live]]
        m_x = np.bincount(ix.src, weights=p, minlength=ix.n_src)[ix.src[live]]
        e = ix.edge
        integrand += e.beta * -logp + (e.alpha * gamma - e.beta) * -np.log2(m_xy / m_x)
    integrand -= gamma * -np.log2(p[live])
    return float(np.dot(p[live], integrand))


@dataclass(frozen=True)
class SdCheck:
    ok: bool
    deviation: dict[str, float]

    def __bool__(self):
        return self.ok

    def to_json(self) -> dict:
        return {"inSD": self.ok, "maxDeviation": dict(self.deviation)}


def in_sd(pdg: Pdg, mu: JointTable, tol: float = 1e-7) -> SdCheck:
    """Whether every conditional of ``mu`` along an edge matches the edge's cpd (max-norm, per row)."""
    if not tol > 0:
        raise PdgError("tol must be positive")
    _check(pdg, mu)
    dev = {}
    for ix in edge_indices(pdg):
        m = np.bincount(ix.pair, weights=mu.probs, minlength=ix.n_pair).reshape(ix.n_src, ix.n_tgt)
        mx = m.sum(axis=1)
        live = mx > 0
        if not np.any(live):
            dev[ix.edge.label] = 0.0
            continue
        cond = m[live] / mx[live, None]
        dev[ix.edge.label] = float(np.max(np.abs(cond - ix.edge.cpd.table[live])))
    return SdCheck(all(v <= tol for v in dev.values()), dev)


# batched evaluation over many candidate distributions (rows of a matrix)


def _indicator(index: np.ndarray, n: int) -> np.ndarray:
    a = np.zeros((index.size, n))
    a[np.arange(index.size), index] = 1.0
    return a


def _xlog2(x: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(x > 0, x * np.log2(np.where(x > 0, x, 1.0)), 0.0)


class BatchScorer:
    """Scores a batch of joints (one per row) against a fixed PDG."""

    def __init__(self, pdg: Pdg):
        self.pdg = pdg
        self._edges = []
        for ix in edge_indices(pdg):
            a_xy = _indicator(ix.pair, ix.n_pair)
            a_x = _indicator(ix.src, ix.n_src)
            p = ix.edge.cpd.table.reshape(-1)
            with np.errstate(divide="ignore"):
                logp = np.log2(p)
            self._edges.append((ix.edge, a_xy, a_x, logp, np.repeat(np.arange(ix.n_src), ix.n_tgt)))

    def inc(self, M: np.ndarray) -> np.ndarray:
        total = np.zeros(M.shape[0])
        for e, a_xy, a_x, logp, row_of in self._edges:
            m = M @ a_xy
            mx = (M @ a_x)[:, row_of]
            with np.errstate(divide="ignore", invalid="ignore"):
                cond = np.where(m > 0, m / np.where(mx > 0, mx, 1.0), 1.0)
                t = np.where(m > 0, m * (np.log2(cond) - logp), 0.0)
            total += e.beta * t.sum(axis=1)
        return total

    def idef(self, M: np.ndarray) -> np.ndarray:
        total = _xlog2(M).sum(axis=1)
        for e, a_xy, a_x, _, _ in self._edges:
            if e.alpha == 0:
                continue
            h = -_xlog2(M @ a_xy).sum(axis=1) + _xlog2(M @ a_x).sum(axis=1)
            total += e.alpha * h
        return total

    def score(self, M: np.ndarray, gamma: float) -> np.ndarray:
        i = self.inc(M)
        if gamma == 0:
            return i
        with np.errstate(invalid="ignore"):
            return np.where(np.isinf(i), math.inf, i + gamma * self.idef(M))
