"""Translations between PDGs, Bayesian networks, and (weighted) factor graphs.

Every translation adds product variables the same way ``add_hyperedge`` does:
a factor or parent set over two or more variables becomes one product
variable with deterministic projections back to its components. Singleton
scopes and single parents connect directly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .dist import JointTable, lift, plogp
from .model import (
    UNIT,
    UNIT_NAME,
    Cpd,
    Pdg,
    PdgError,
    Variable,
    WorldSpace,
    add_hyperedge,
    ensure_product,
)
from .scoring import INF


# Bayesian networks


@dataclass(frozen=True)
class BayesNet:
    variables: tuple[Variable, ...]
    parents: Mapping[str, tuple[str, ...]]
    cpds: Mapping[str, Cpd]

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "parents", {k: tuple(v) for k, v in dict(self.parents).items()})
        cpds = {k: c if isinstance(c, Cpd) else Cpd(c) for k, c in dict(self.cpds).items()}
        object.__setattr__(self, "cpds", cpds)
        problems = self.violations()
        if problems:
            raise PdgError("invalid Bayesian network: " + "; ".join(problems))

    @property
    def space(self) -> WorldSpace:
        return WorldSpace(self.variables)

    def var(self, name: str) -> Variable:
        return self.space.variable(name)

    def violations(self) -> list[str]:
        names = [v.name for v in self.variables]
        out = []
        for v in self.variables:
            pa = self.parents.get(v.name, ())
            unknown = [p for p in pa if p not in names]
            if unknown:
                out.append(f"{v.name}: unknown parents {unknown}")
                continue
            if v.name not in self.cpds:
                out.append(f"{v.name}: missing cpd")
                continue
            rows = int(np.prod([len(self.var(p)) for p in pa]))
            cpd = self.cpds[v.name]
            if (cpd.source_arity, cpd.target_arity) != (rows, len(v)):
                out.append(f"{v.name}: cpd shape {cpd.table.shape}, expected {(rows, len(v))}")
            out.extend(f"{v.name}: {m}" for m in cpd.violations())
        extra = set(self.parents) | set(self.cpds)
        out.extend(f"{k}: not a declared variable" for k in sorted(extra - set(names)))
        if not out and self.topological_order() is None:
            out.append("parent graph has a cycle")
        return out

    def topological_order(self) -> list[str] | None:
        order, done, active = [], set(), set()

        def visit(n):
            if n in done:
                return True
            if n in active:
                return False
            active.add(n)
            if not all(visit(p) for p in self.parents.get(n, ())):
                return False
            active.discard(n)
            done.add(n)
            order.append(n)
            return True

        for v in self.variables:
            if not visit(v.name):
                return None
        return order


def bn_to_pdg(bn: BayesNet, beta: Mapping[str, float] | float = 1.0, projection_beta: float = 1.0) -> Pdg:
    """The PDG whose edges carry the BN's cpds, from each parent set to its child.

    ``beta`` is the confidence for each variable's cpd (a mapping or a scalar).
    Parentless variables get an edge from the unit variable.
    """
    pdg = Pdg(variables=bn.variables, name="bn")
    for v in bn.variables:
        pa = list(bn.parents.get(v.name, ()))
        b = beta.get(v.name, 1.0) if isinstance(beta, Mapping) else beta
        pdg = add_hyperedge(
            pdg, f"p[{v.name}]", pa, v.name, bn.cpds[v.name], 1.0, float(b), projection_beta
        )
    return pdg


def bn_distribution(bn: BayesNet, pdg: Pdg | None = None) -> JointTable:
    """``Pr_B`` over the BN's variables, or lifted onto ``pdg``'s world space when given."""
    space = bn.space
    probs = np.ones(space.size)
    for v in bn.variables:
        src, _ = space.column(bn.parents.get(v.name, ()))
        tgt, _ = space.column(v.name)
        probs *= bn.cpds[v.name].table[src, tgt]
    mu = JointTable(space, probs / probs.sum())
    if pdg is not None:
        mu = lift(mu, pdg.space, pdg.products)
    return mu


# factor graphs


@dataclass(frozen=True, eq=False)
class Factor:
    scope: tuple[str, ...]
    table: np.ndarray  # row-major over the scope's joint settings
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "scope", tuple(self.scope))
        t = np.array(self.table, dtype=float).reshape(-1)
        t.setflags(write=False)
        object.__setattr__(self, "table", t)


@dataclass(frozen=True)
class FactorGraph:
    variables: tuple[Variable, ...]
    factors: tuple[Factor, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        named = []
        for j, f in enumerate(self.factors):
            named.append(f if f.name else replace(f, name=f"f{j}"))
        object.__setattr__(self, "factors", tuple(named))
        problems = self.violations()
        if problems:
            raise PdgError("invalid factor graph: " + "; ".join(problems))

    @property
    def space(self) -> WorldSpace:
        return WorldSpace(self.variables)

    def violations(self) -> list[str]:
        out = []
        names = {v.name for v in self.variables}
        seen = set()
        for f in self.factors:
            if f.name in seen:
                out.append(f"{f.name}: duplicate factor name")
            seen.add(f.name)
            if not f.scope:
                out.append(f"{f.name}: empty scope")
                continue
            if len(set(f.scope)) != len(f.scope):
                out.append(f"{f.name}: repeated variable in scope")
            if not set(f.scope) <= names:
                out.append(f"{f.name}: scope mentions undeclared variables")
                continue
            size = int(np.prod([len(self.space.variable(n)) for n in f.scope]))
            if f.table.size != size:
                out.append(f"{f.name}: table has {f.table.size} entries, scope has {size} settings")
            elif np.any(f.table < 0) or not np.all(np.isfinite(f.table)):
                out.append(f"{f.name}: entries must be finite and non-negative")
            elif not np.any(f.table > 0):
                out.append(f"{f.name}: all entries are zero")
        return out

    @property
    def normalizers(self) -> tuple[float, ...]:
        """``Z_J``, the sum of each factor's table."""
        return tuple(float(f.table.sum()) for f in self.factors)

    def factor_values(self, space: WorldSpace) -> list[np.ndarray]:
        """Each factor evaluated at every world of ``space``."""
        return [f.table[space.column(f.scope)[0]] for f in self.factors]


@dataclass(frozen=True)
class WeightedFactorGraph:
    base: FactorGraph
    theta: tuple[float, ...] = field(default=())

    def __post_init__(self):
        theta = tuple(float(t) for t in self.theta) or (1.0,) * len(self.base.factors)
        if len(theta) != len(self.base.factors):
            raise PdgError(f"{len(theta)} weights for {len(self.base.factors)} factors")
        if any(not (math.isfinite(t) and t >= 0) for t in theta):
            raise PdgError("factor weights must be finite and non-negative")
        object.__setattr__(self, "theta", theta)

    @property
    def variables(self):
        return self.base.variables

    @property
    def factors(self):
        return self.base.factors


def _powered(values: np.ndarray, theta: float) -> np.ndarray:
    # 0 ** 0 is 1: a weight-0 factor is trivialized everywhere
    if theta == 0:
        return np.ones_like(values)
    return values**theta


def wfg_distribution(wfg: WeightedFactorGraph) -> JointTable:
    space = wfg.base.space
    w = np.ones(space.size)
    for vals, th in zip(wfg.base.factor_values(space), wfg.theta):
        w *= _powered(vals, th)
    if not w.sum() > 0:
        raise PdgError("the product of factors is identically zero")
    return JointTable(space, w / w.sum())


def fg_distribution(fg: FactorGraph) -> JointTable:
    return wfg_distribution(WeightedFactorGraph(fg))


def gfe(wfg: WeightedFactorGraph | FactorGraph, mu: JointTable) -> float:
    """Variational Gibbs free energy ``E_mu[sum_J theta_J log 1/phi_J] - H(mu)`` in bits.

    ``mu`` may live on any space that contains the factor graph's variables.
    """
    if isinstance(wfg, FactorGraph):
        wfg = WeightedFactorGraph(wfg)
    p = mu.probs
    live = p > 0
    energy = np.zeros(int(live.sum()))
    for vals, th in zip(wfg.base.factor_values(mu.space), wfg.theta):
        if th == 0:
            continue
        v = vals[live]
        if np.any(v == 0):
            return INF
        energy += th * -np.log2(v)
    return float(np.dot(p[live], energy) + plogp(p).sum())


def _with_unit(variables: Sequence[Variable]) -> tuple[Variable, ...]:
    names = {v.name for v in variables}
    return tuple(variables) if UNIT_NAME in names else (UNIT, *variables)


def wfg_to_pdg(wfg: WeightedFactorGraph, k: float = 1.0) -> Pdg:
    """PDG with an edge ``1 -> X_J`` per factor (normalized table, beta = k theta_J, alpha = theta_J).

    Projections get beta = k, alpha = 1. Factors with theta_J = 0 would need
    beta = 0, which is not a valid confidence, so their edges are dropped.
    """
    if not k > 0:
        raise PdgError("k must be positive")
    pdg = Pdg(variables=_with_unit(wfg.variables), name="fg")
    for f, th in zip(wfg.factors, wfg.theta):
        if len(f.scope) == 1:
            target = f.scope[0]
        else:
            pdg, target = ensure_product(pdg, f.scope, projection_beta=k)
        if th == 0:
            warnings.warn(f"factor {f.name} has weight 0; its edge is omitted", stacklevel=2)
            continue
        pdg = pdg.add_edge(f.name, UNIT_NAME, target, f.table / f.table.sum(), th, k * th)
    return pdg


def fg_to_pdg(fg: FactorGraph) -> Pdg:
    return wfg_to_pdg(WeightedFactorGraph(fg), 1.0)


def _edge_factor(pdg: Pdg, e) -> Factor:
    if e.source == e.target:
        return Factor((e.source,), np.diag(e.cpd.table), e.label)
    return Factor((e.source, e.target), e.cpd.table.reshape(-1), e.label)


def pdg_to_wfg(pdg: Pdg) -> WeightedFactorGraph:
    """One factor per edge over (source, target) holding the cpd; theta = beta, alpha is dropped."""
    fg = FactorGraph(pdg.variables, tuple(_edge_factor(pdg, e) for e in pdg.edges))
    return WeightedFactorGraph(fg, tuple(e.beta for e in pdg.edges))


def pdg_to_fg(pdg: Pdg) -> FactorGraph:
    if not pdg.is_unweighted:
        warnings.warn("PDG has non-unit weights; they are ignored in the factor graph", stacklevel=2)
    return pdg_to_wfg(pdg).base
