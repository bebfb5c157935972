"""Minimizing the score over the simplex of joint distributions.

The score is minimized over the worlds that no cpd forbids (any mass on a
forbidden world gives an infinite score). Iterates stay strictly positive on
that support: every update is multiplicative, ``mu <- mu * exp(t * dz)``
renormalized, where ``dz`` is the entropic mirror-descent direction ``-grad``
or, when the local model is convex, the Newton direction expressed in
log-coordinates. Step sizes come from backtracking on the objective.

The gamma -> 0 limit is approached along a geometric gamma schedule with warm
starts.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.special import logsumexp

from .dist import JointTable, total_variation
from .model import Pdg, PdgError
from .scoring import INF, ScoreReport, edge_indices, forbidden_worlds, inc, score

log = logging.getLogger(__name__)

LN2 = math.log(2.0)
NEWTON_MAX_SUPPORT = 3000
LOG_DEAD = -600.0  # worlds below exp(-600) are frozen out of the Newton system
LOG_FLOOR = -700.0  # log-masses are clipped here so masses never underflow to 0
MAX_LOG_STEP = 10.0
# objective changes below this fraction of (1 + |f|) are treated as rounding noise
NOISE_REL = 1e-12
# smallest mass given to a world when warm-starting from a previous minimizer
WARM_FLOOR = 1e-200


class SolverError(RuntimeError):
    pass


class InfeasibleError(SolverError):
    """Every world is forbidden by some cpd zero, so every distribution scores +inf."""


@dataclass(frozen=True)
class SolveConfig:
    max_iters: int = 50000
    step_init: float = 1.0
    convergence_tol: float = 1e-9
    gamma_ratio: float = 0.5
    gamma_floor: float = 1e-8
    limit_tol: float = 1e-7
    gamma_init: float | None = None
    seed: int | None = None
    method: str = "newton"  # "newton" or "eg"

    def __post_init__(self):
        for k in ("max_iters", "step_init", "convergence_tol", "gamma_floor", "limit_tol"):
            if not getattr(self, k) > 0:
                raise ValueError(f"{k} must be positive")
        if not 0 < self.gamma_ratio < 1:
            raise ValueError("gamma_ratio must lie in (0, 1)")
        if self.method not in ("newton", "eg"):
            raise ValueError(f"unknown method {self.method!r}")


@dataclass(frozen=True)
class SolveResult:
    mu: JointTable
    score: ScoreReport
    iterations: int
    converged: bool
    forbidden: np.ndarray
    gamma: float
    history: tuple[float, ...] = ()
    info: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "gamma": self.gamma,
            "iterations": self.iterations,
            "converged": self.converged,
            "forbiddenWorlds": [int(i) for i in np.flatnonzero(self.forbidden)],
            "score": self.score.to_json(),
            "info": dict(self.info),
        }


def critical_gamma(pdg: Pdg) -> float:
    """``min beta/alpha`` over edges with ``alpha > 0``; below it the score is strictly convex."""
    ratios = [e.beta / e.alpha for e in pdg.edges if e.alpha > 0]
    return min(ratios) if ratios else INF


class ScoreProblem:
    """The score restricted to the feasible support, as a function of a positive vector.

    ``objective`` is the per-world expectation form of the score (it equals the
    score on the simplex); ``gradient`` and ``hessian`` are its exact
    derivatives on the positive orthant.
    """

    def __init__(self, pdg: Pdg, gamma: float):
        self.pdg = pdg
        self.gamma = float(gamma)
        self.forbidden = forbidden_worlds(pdg)
        self.support = np.flatnonzero(~self.forbidden)
        if self.support.size == 0:
            raise InfeasibleError("every world is forbidden by a zero in some cpd")
        n = self.n = self.support.size
        self.linear = np.zeros(n)
        self.terms = []  # (coefficient, pair index, source index, n_pair, n_src)
        for ix in edge_indices(pdg):
            e = ix.edge
            self.linear += e.beta * -ix.logp[self.support]
            coef = e.alpha * self.gamma - e.beta
            pair_u, pair = np.unique(ix.pair[self.support], return_inverse=True)
            src_u, src = np.unique(ix.src[self.support], return_inverse=True)
            if pair_u.size == src_u.size or coef == 0:
                # target is a function of the source on the support: H(Y|X) vanishes identically
                continue
            self.terms.append((coef, pair.reshape(-1), src.reshape(-1), pair_u.size, src_u.size))

    def _cond_log(self, mu, pair, src, npair, nsrc):
        m_xy = np.bincount(pair, weights=mu, minlength=npair)
        m_x = np.bincount(src, weights=mu, minlength=nsrc)
        return m_xy, m_x, np.log2(m_xy[pair]) - np.log2(m_x[src])

    def objective(self, mu: np.ndarray, logmu: np.ndarray | None = None) -> float:
        if logmu is None:
            with np.errstate(divide="ignore"):
                logmu = np.log(mu)
        val = self.linear.copy()
        for coef, pair, src, npair, nsrc in self.terms:
            val += coef * -self._cond_log(mu, pair, src, npair, nsrc)[2]
        if self.gamma:
            val += self.gamma * logmu / LN2
        live = mu > 0
        return float(np.dot(mu[live], val[live]))

    def gradient(self, mu: np.ndarray, logmu: np.ndarray | None = None) -> np.ndarray:
        if logmu is None:
            logmu = np.log(mu)
        g = self.linear.copy()
        for coef, pair, src, npair, nsrc in self.terms:
            g += coef * -self._cond_log(mu, pair, src, npair, nsrc)[2]
        if self.gamma:
            g += self.gamma * (logmu / LN2 + 1.0 / LN2)
        return g

    def hessian(self, mu: np.ndarray) -> np.ndarray:
        H = np.zeros((self.n, self.n))
        for coef, pair, src, npair, nsrc in self.terms:
            m_xy = np.bincount(pair, weights=mu, minlength=npair)
            m_x = np.bincount(src, weights=mu, minlength=nsrc)
            same_pair = pair[:, None] == pair[None, :]
            same_src = src[:, None] == src[None, :]
            H += coef * (same_src / m_x[src][:, None] - same_pair / m_xy[pair][:, None])
        if self.gamma:
            H[np.diag_indices(self.n)] += self.gamma / mu
        return H / LN2

    def full(self, mu: np.ndarray) -> np.ndarray:
        out = np.zeros(self.pdg.space.size)
        out[self.support] = mu
        return out


def _normalize_log(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    z = np.maximum(z - logsumexp(z), LOG_FLOOR)
    return np.exp(z), z


def _initial(problem: ScoreProblem, init, seed) -> np.ndarray:
    if init is None:
        if seed is None:
            return np.full(problem.n, 1.0 / problem.n)
        w = np.random.default_rng(seed).dirichlet(np.ones(problem.n))
        return 0.999 * w + 0.001 / problem.n
    else:
        w = init.probs if isinstance(init, JointTable) else np.asarray(init, dtype=float)
        if w.size == problem.pdg.space.size:
            w = w[problem.support]
        elif w.size != problem.n:
            raise PdgError(f"initial point has {w.size} entries, expected {problem.pdg.space.size}")
    w = np.asarray(w, dtype=float)
    if not w.sum() > 0:
        return np.full(problem.n, 1.0 / problem.n)
    # a warm start is kept as is, only exact zeros are lifted so logs stay finite;
    # mixing in uniform mass would undo the previous solve at tiny gamma
    w = np.maximum(w / w.sum(), WARM_FLOOR)
    return w / w.sum()


def _newton_direction(problem: ScoreProblem, mu, z, g, damping: float) -> np.ndarray | None:
    """Newton step in log-coordinates over the numerically live worlds, or None if not a descent step."""
    live = z > LOG_DEAD
    m = int(live.sum())
    H = problem.hessian(mu)[np.ix_(live, live)]
    # entropic damping shrinking with the optimality gap (regularized Newton);
    # it keeps flat directions at gamma = 0 from throwing mass onto the boundary
    H[np.diag_indices(m)] += damping / mu[live]
    K = np.zeros((m + 1, m + 1))
    K[:m, :m] = H
    K[:m, m] = K[m, :m] = 1.0
    rhs = np.concatenate([-g[live], [0.0]])
    try:
        d = np.linalg.solve(K, rhs)[:m]
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(d)):
        return None
    if g[live] @ d >= 0 or d @ H @ d <= 0:
        return None
    dz = np.zeros_like(z)
    dz[live] = np.clip(d / mu[live], -MAX_LOG_STEP, MAX_LOG_STEP)
    return dz


def _stationarity(mu: np.ndarray, g: np.ndarray) -> float:
    """Frank-Wolfe gap ``<g, mu> - min g``: zero exactly at KKT points on the simplex.

    Unlike ``max mu |g - mean g|`` it does not vanish at boundary points where
    a nearly-dead coordinate still has a descent direction.
    """
    return float(mu @ g - g.min())


def _noise(f: float) -> float:
    return NOISE_REL * (1.0 + abs(f))


def _line_search(problem: ScoreProblem, mu, z, f, g, dz, t):
    """Armijo backtracking along ``z + t dz``; None when no decrease is found."""
    for _ in range(80):
        mu_new, z_new = _normalize_log(z + t * dz)
        f_new = problem.objective(mu_new, z_new)
        decrease = g @ (mu_new - mu)
        # a decrease within rounding noise counts as no progress
        if f_new < f + 1e-4 * min(decrease, 0.0) and f - f_new > _noise(f):
            return t, mu_new, z_new, f_new
        t *= 0.5
    return None


def _mass_transfer(problem: ScoreProblem, mu, z, f, g):
    """Backtracking along the Frank-Wolfe vertex ``e_j``, ``j = argmin g``.

    Multiplicative steps cannot revive a coordinate that has underflowed far
    below its optimal value; moving a slice of mass onto it directly can.
    """
    j = int(np.argmin(g))
    slope = g[j] - mu @ g
    if not slope < 0:
        return None
    s = 0.5
    for _ in range(200):
        mu_new = (1 - s) * mu
        mu_new[j] += s
        z_new = z + math.log1p(-s)
        z_new[j] = math.log(mu_new[j])
        f_new = problem.objective(mu_new, z_new)
        if f_new < f + 1e-4 * s * slope and f - f_new > _noise(f):
            return s, mu_new, z_new, f_new
        s *= 0.5
    return None


def _noise_step(problem: ScoreProblem, mu, z, f, resid, dz):
    """Accept a step along ``dz`` that halves the gap while the objective change is below rounding noise.

    Near a flat set of Inc-minimizers with tiny gamma the curvature term is
    smaller than the rounding error of the objective, so value-based line
    searches stall well before the gradient is resolved.
    """
    noise = _noise(f)
    t = 1.0
    for _ in range(30):
        mu_new, z_new = _normalize_log(z + t * dz)
        f_new = problem.objective(mu_new, z_new)
        if f_new <= f + noise and _stationarity(mu_new, problem.gradient(mu_new, z_new)) < 0.5 * resid:
            return t, mu_new, z_new, f_new
        t *= 0.5
    return None


def _run(problem: ScoreProblem, cfg: SolveConfig, init=None) -> tuple[np.ndarray, int, bool, list, dict]:
    mu = _initial(problem, init, cfg.seed)
    mu, z = _normalize_log(np.log(mu))
    f = problem.objective(mu, z)
    history = [f]
    eta = cfg.step_init
    use_newton = cfg.method == "newton" and problem.n <= NEWTON_MAX_SUPPORT
    converged = stalled = False
    # the gap is judged in units of the gamma-weighted term, otherwise tiny-gamma
    # solves stop before the tie-breaking information deficiency is resolved
    tol = cfg.convergence_tol * (min(1.0, problem.gamma) if problem.gamma > 0 else 1.0)
    it = 0
    for it in range(1, cfg.max_iters + 1):
        g = problem.gradient(mu, z)
        gc = g - mu @ g
        resid = _stationarity(mu, g)
        if resid <= tol:
            converged = True
            it -= 1
            break
        found = dz = None
        if use_newton:
            dz = _newton_direction(problem, mu, z, g, min(max(resid, 1e-12), 1.0))
            if dz is not None:
                found = _line_search(problem, mu, z, f, g, dz, 1.0)
        if found is None:
            # exponentiated gradient, also the fallback when Newton makes no progress
            found = _line_search(problem, mu, z, f, g, -gc, eta)
            if found is not None:
                eta = min(found[0] * 2.0, 1e6)
        if found is None:
            found = _mass_transfer(problem, mu, z, f, g)
        for d in (dz, -gc):
            if found is None and d is not None:
                found = _noise_step(problem, mu, z, f, resid, d)
        if found is None:
            # no direction yields a decrease representable in floating point
            converged = stalled = True
            log.debug("no descent direction at iteration %d (gap %.3g)", it, resid)
            break
        _, mu, z, f = found
        history.append(f)
    else:
        resid = _stationarity(mu, problem.gradient(mu, z))
        converged = resid <= tol
    return mu, it, converged, history, {"stationarity": resid, "precisionLimited": stalled}


def _solve(pdg: Pdg, gamma: float, cfg: SolveConfig, init=None) -> SolveResult:
    problem = ScoreProblem(pdg, gamma)
    mu, iters, converged, history, info = _run(problem, cfg, init)
    joint = JointTable.normalized(pdg.space, problem.full(mu))
    if not converged:
        log.warning("solver did not converge in %d iterations (gamma=%g)", iters, gamma)
    return SolveResult(
        joint,
        score(pdg, joint, gamma),
        iters,
        converged,
        problem.forbidden,
        float(gamma),
        tuple(history),
        info,
    )


def minimize_score(pdg: Pdg, gamma: float, cfg: SolveConfig = SolveConfig(), init=None) -> SolveResult:
    """Minimize ``inc + gamma * idef`` over joint distributions.

    Raises InfeasibleError when every world is forbidden. A run that hits
    ``max_iters`` is returned with ``converged=False``.
    """
    if not gamma > 0:
        raise PdgError(
            "gamma must be positive; use degree_of_inconsistency or limit_distribution for gamma = 0"
        )
    if gamma > critical_gamma(pdg) * (1 + 1e-12):
        warnings.warn(
            f"gamma={gamma} exceeds min beta/alpha={critical_gamma(pdg):.4g}; the minimizer may not be unique",
            stacklevel=2,
        )
    return _solve(pdg, gamma, cfg, init)


def degree_of_inconsistency(pdg: Pdg, cfg: SolveConfig = SolveConfig()) -> float:
    """``inf_mu inc(pdg, mu)``; +inf when every world is forbidden."""
    try:
        res = _solve(pdg, 0.0, cfg)
    except InfeasibleError:
        return INF
    return max(res.score.inc, 0.0)


def limit_distribution(pdg: Pdg, cfg: SolveConfig = SolveConfig()) -> SolveResult:
    """Approximate the gamma -> 0 limit of the score minimizers.

    Solves along ``gamma_k = gamma_0 * r**k`` with warm starts and stops once
    successive minimizers agree to ``limit_tol`` in total variation.
    """
    gamma = cfg.gamma_init or critical_gamma(pdg)
    if not math.isfinite(gamma):
        gamma = 1.0
    prev = None
    rounds = 0
    all_converged = True
    reached = False
    while True:
        res = _solve(pdg, gamma, cfg, init=prev.mu if prev else None)
        rounds += 1
        all_converged &= res.converged
        if prev is not None and total_variation(res.mu, prev.mu) <= cfg.limit_tol:
            reached = True
            break
        prev = res
        if gamma * cfg.gamma_ratio < cfg.gamma_floor:
            break
        gamma *= cfg.gamma_ratio
    best_inc = degree_of_inconsistency(pdg, cfg)
    inc_here = inc(pdg, res.mu)
    info = {
        "rounds": rounds,
        "finalGamma": gamma,
        "limitReached": reached,
        "incAtResult": inc_here,
        "minimumInc": best_inc,
        "incGap": inc_here - best_inc,
    }
    report = score(pdg, res.mu, 0.0)
    return SolveResult(
        res.mu, report, res.iterations, all_converged, res.forbidden, 0.0, res.history, info
    )


# brute-force verification


def _flatten_edges(pdg: Pdg):
    pair, src_of_pair, logp, offsets, alpha, beta = [], [], [], [0], [], []
    pair_worlds = []
    for ix in edge_indices(pdg):
        pair_worlds.append(ix.pair)
        src_of_pair.append(np.repeat(np.arange(ix.n_src), ix.n_tgt))
        with np.errstate(divide="ignore"):
            logp.append(np.log2(ix.edge.cpd.table.reshape(-1)))
        offsets.append(offsets[-1] + ix.n_pair)
        alpha.append(ix.edge.alpha)
        beta.append(ix.edge.beta)
    n = pdg.space.size
    return (
        np.array(pair_worlds, dtype=np.int64).reshape(len(alpha), n),
        np.concatenate(src_of_pair).astype(np.int64) if alpha else np.zeros(0, np.int64),
        np.concatenate(logp) if alpha else np.zeros(0),
        np.array(offsets, dtype=np.int64),
        np.array(alpha, dtype=float),
        np.array(beta, dtype=float),
    )


@njit(cache=True)
def _lattice_scan(n, N, gamma, pair_worlds, src_of_pair, logp, offsets, alpha, beta):
    # every marginal of a lattice point is an integer count out of N, so logs are table lookups
    lg = np.zeros(N + 1)
    for k in range(1, N + 1):
        lg[k] = np.log2(k / N)
    n_edges = alpha.size
    width = 0
    for e in range(n_edges):
        width = max(width, offsets[e + 1] - offsets[e])
    m = np.zeros(width, dtype=np.int64)
    mx = np.zeros(width, dtype=np.int64)
    c = np.zeros(n, dtype=np.int64)
    c[0] = N
    best = c.copy()
    best_val = np.inf
    while True:
        total = 0.0
        for e in range(n_edges):
            lo = offsets[e]
            k = offsets[e + 1] - lo
            for j in range(k):
                m[j] = 0
                mx[j] = 0
            for w in range(n):
                m[pair_worlds[e, w]] += c[w]
            for j in range(k):
                mx[src_of_pair[lo + j]] += m[j]
            d = 0.0
            h = 0.0
            for j in range(k):
                if m[j] > 0:
                    lp = logp[lo + j]
                    if np.isinf(lp):
                        d = np.inf
                        break
                    lc = lg[m[j]] - lg[mx[src_of_pair[lo + j]]]
                    d += m[j] * (lc - lp)
                    h -= m[j] * lc
            if np.isinf(d):
                total = np.inf
                break
            total += (beta[e] * d + gamma * alpha[e] * h) / N
        if not np.isinf(total) and gamma != 0:
            ent = 0.0
            for w in range(n):
                if c[w] > 0:
                    ent += c[w] * lg[c[w]]
            total += gamma * ent / N
        if total < best_val:
            best_val = total
            best[:] = c
        if c[n - 1] == N:
            break
        t = c[n - 1]
        c[n - 1] = 0
        i = n - 2
        while c[i] == 0:
            i -= 1
        c[i] -= 1
        c[i + 1] = t + 1
    return best, best_val


def grid_oracle(pdg: Pdg, gamma: float, resolution: float) -> tuple[JointTable, float]:
    """Exhaustive lattice search of the simplex; for tests on tiny world spaces only."""
    n = pdg.space.size
    if n > 8:
        raise PdgError(f"grid oracle is limited to 8 worlds, this space has {n}")
    if not 0 < resolution <= 0.1:
        raise PdgError("resolution must lie in (0, 0.1]")
    N = int(round(1 / resolution))
    if n == 1:
        joint = JointTable(pdg.space, [1.0])
        return joint, score(pdg, joint, gamma).total
    best, val = _lattice_scan(n, N, float(gamma), *_flatten_edges(pdg))
    return JointTable.normalized(pdg.space, best / N), float(val)
