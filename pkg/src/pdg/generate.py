"""Random instances for property tests and experiments."""

from __future__ import annotations

import numpy as np

from .convert import BayesNet, Factor, FactorGraph, WeightedFactorGraph
from .dist import JointTable
from .model import UNIT, UNIT_NAME, Pdg, Variable, WorldSpace, add_hyperedge


def binary_vars(n: int, prefix: str = "X") -> list[Variable]:
    return [Variable(f"{prefix}{i}", ("0", "1")) for i in range(n)]


def random_cpd(rng: np.random.Generator, rows: int, cols: int, lo: float = 0.05, hi: float = 0.95) -> np.ndarray:
    """Rows with entries in ``[lo, hi]``; for two columns the first entry is drawn uniformly."""
    if cols == 2:
        a = rng.uniform(lo, hi, size=rows)
        return np.stack([a, 1 - a], axis=1)
    t = rng.dirichlet(np.ones(cols), size=rows)
    return 0.9 * t + 0.1 / cols


def random_bn(rng: np.random.Generator, n: int | None = None, max_parents: int = 3) -> BayesNet:
    n = n or int(rng.integers(3, 5))
    variables = binary_vars(n)
    order = rng.permutation(n)
    parents, cpds = {}, {}
    for pos, i in enumerate(order):
        earlier = [variables[j].name for j in order[:pos]]
        k = int(rng.integers(0, min(len(earlier), max_parents) + 1))
        pa = tuple(sorted(rng.choice(earlier, size=k, replace=False))) if k else ()
        parents[variables[i].name] = pa
        cpds[variables[i].name] = random_cpd(rng, 2 ** len(pa), 2)
    return BayesNet(tuple(variables), parents, cpds)


def random_fg(rng: np.random.Generator, n: int | None = None, n_factors: int | None = None) -> FactorGraph:
    n = n or int(rng.integers(2, 5))
    variables = binary_vars(n)
    n_factors = n_factors or int(rng.integers(1, 5))
    factors = []
    for j in range(n_factors):
        k = int(rng.integers(1, min(n, 3) + 1))
        scope = tuple(v.name for v in rng.choice(variables, size=k, replace=False))
        factors.append(Factor(scope, rng.uniform(0.1, 2.0, size=2**k), f"f{j}"))
    return FactorGraph(tuple(variables), tuple(factors))


def random_wfg(rng: np.random.Generator, **kw) -> WeightedFactorGraph:
    fg = random_fg(rng, **kw)
    return WeightedFactorGraph(fg, tuple(rng.uniform(0.2, 2.0, size=len(fg.factors))))


def random_pdg(
    rng: np.random.Generator,
    n: int | None = None,
    n_edges: int | None = None,
    hyperedges: bool = False,
    weighted: bool = False,
) -> Pdg:
    """A random PDG over binary variables plus the unit variable, with strictly positive cpds."""
    n = n or int(rng.integers(2, 5))
    variables = binary_vars(n)
    pdg = Pdg(variables=(UNIT, *variables), name="rand")
    names = [v.name for v in variables]
    n_edges = n_edges or int(rng.integers(1, 5))
    for j in range(n_edges):
        tgt = str(rng.choice(names))
        others = [x for x in names if x != tgt]
        if hyperedges and len(others) >= 2 and rng.random() < 0.3:
            srcs = sorted(rng.choice(others, size=2, replace=False))
        elif rng.random() < 0.35 or not others:
            srcs = []
        else:
            srcs = [str(rng.choice(others))]
        alpha, beta = (rng.uniform(0.2, 2.0), rng.uniform(0.2, 2.0)) if weighted else (1.0, 1.0)
        pdg = add_hyperedge(pdg, f"e{j}", srcs, tgt, random_cpd(rng, 2 ** len(srcs), 2), alpha, beta)
    return pdg


def random_consistent_pdg(rng: np.random.Generator, n: int | None = None) -> tuple[Pdg, JointTable]:
    """Edges whose cpds are read off a random joint, so that joint is in SD of the result."""
    n = n or int(rng.integers(2, 5))
    variables = binary_vars(n)
    space = WorldSpace((UNIT, *variables))
    mu = JointTable(space, rng.dirichlet(np.ones(space.size)) * 0.9 + 0.1 / space.size)
    from .dist import conditional

    pdg = Pdg(variables=space.variables, name="consistent")
    names = [v.name for v in variables]
    for j in range(int(rng.integers(1, 5))):
        tgt = str(rng.choice(names))
        others = [x for x in names if x != tgt]
        src = UNIT_NAME if rng.random() < 0.35 or not others else str(rng.choice(others))
        pdg = pdg.add_edge(f"e{j}", src, tgt, conditional(mu, tgt, src).cpd)
    return pdg, mu


def random_joint(rng: np.random.Generator, space: WorldSpace, support: np.ndarray | None = None) -> JointTable:
    w = rng.dirichlet(np.ones(space.size))
    if support is not None:
        w = np.where(support, w, 0.0)
    return JointTable.normalized(space, w)
