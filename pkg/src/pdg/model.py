"""PDG syntax: variables, cpds, weighted edges, and the graph operations.

A PDG is a directed multigraph over finite variables. Each edge carries a cpd
(a row-stochastic table from source settings to target distributions) and two
confidence weights: ``alpha`` (belief in the functional dependence) and
``beta`` (belief in the cpd itself).

Product variables are ordinary variables whose values are the tuples of their
components' values; the link back to the components is carried only by
deterministic projection edges, so every scoring formula stays uniform.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

ROW_TOL = 1e-9
MAX_WORLDS = 2**22

UNIT_NAME = "1"
UNIT_VALUE = "⋆"


class PdgError(ValueError):
    """Raised when a construction would produce an invalid PDG."""


@dataclass(frozen=True)
class Variable:
    name: str
    values: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(str(v) for v in self.values))

    def __len__(self):
        return len(self.values)

    def index(self, value: str) -> int:
        try:
            return self.values.index(str(value))
        except ValueError:
            raise PdgError(f"{value!r} is not a value of {self.name}") from None

    @property
    def is_unit(self) -> bool:
        return len(self.values) == 1


UNIT = Variable(UNIT_NAME, (UNIT_VALUE,))


@dataclass(frozen=True, eq=False)
class Cpd:
    """Row-stochastic table; row ``i`` is the target distribution given source setting ``i``."""

    table: np.ndarray

    def __post_init__(self):
        t = np.array(self.table, dtype=float)
        if t.ndim == 1:
            t = t[None, :]
        if t.ndim != 2:
            raise PdgError(f"cpd table must be 2-d, got shape {t.shape}")
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    @property
    def source_arity(self) -> int:
        return self.table.shape[0]

    @property
    def target_arity(self) -> int:
        return self.table.shape[1]

    def row(self, i: int) -> np.ndarray:
        return self.table[i]

    def violations(self) -> list[str]:
        out = []
        if not np.all(np.isfinite(self.table)):
            out.append("non-finite entry")
        if np.any(self.table < 0):
            r, c = np.argwhere(self.table < 0)[0]
            out.append(f"negative entry at row {r}, column {c}")
        sums = self.table.sum(axis=1)
        for i in np.flatnonzero(np.abs(sums - 1.0) > ROW_TOL):
            out.append(f"row {i} sums to {sums[i]:.12g}, not 1")
        return out

    def is_deterministic(self) -> bool:
        t = self.table
        return bool(np.all((t == 0) | (t == 1)) and np.all(t.sum(axis=1) == 1))

    def __eq__(self, other):
        if not isinstance(other, Cpd):
            return NotImplemented
        return self.table.shape == other.table.shape and np.array_equal(self.table, other.table)

    def __hash__(self):
        return hash((self.table.shape, self.table.tobytes()))

    @classmethod
    def point(cls, n: int, index: int) -> "Cpd":
        t = np.zeros((1, n))
        t[0, index] = 1.0
        return cls(t)

    @classmethod
    def uniform(cls, rows: int, cols: int) -> "Cpd":
        return cls(np.full((rows, cols), 1.0 / cols))


@dataclass(frozen=True)
class Edge:
    label: str
    source: str
    target: str
    cpd: Cpd
    alpha: float = 1.0
    beta: float = 1.0


@dataclass(frozen=True)
class WorldSpace:
    """Mixed-radix indexing of joint settings; the first variable is most significant."""

    variables: tuple[Variable, ...]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    @property
    def radices(self) -> tuple[int, ...]:
        return tuple(len(v) for v in self.variables)

    @property
    def size(self) -> int:
        return int(np.prod(self.radices, dtype=np.int64)) if self.variables else 1

    def position(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise PdgError(f"unknown variable {name!r}") from None

    def variable(self, name: str) -> Variable:
        return self.variables[self.position(name)]

    def encode(self, setting: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(setting), self.radices)) if self.variables else 0

    def decode(self, index: int) -> tuple[int, ...]:
        if not self.variables:
            return ()
        return tuple(int(i) for i in np.unravel_index(index, self.radices))

    @cached_property
    def value_indices(self) -> np.ndarray:
        """Array of shape (size, n_vars): the value index of each variable in each world."""
        if self.size > MAX_WORLDS:
            raise PdgError(f"world space has {self.size} worlds, above the cap of {MAX_WORLDS}")
        if not self.variables:
            return np.zeros((1, 0), dtype=np.int64)
        grids = np.unravel_index(np.arange(self.size), self.radices)
        return np.stack(grids, axis=1).astype(np.int64)

    def column(self, names: str | Sequence[str]) -> tuple[np.ndarray, int]:
        """Per-world joint index of ``names`` (row-major) and the joint arity."""
        if isinstance(names, str):
            names = (names,)
        idx = np.zeros(self.size, dtype=np.int64)
        arity = 1
        for n in names:
            p = self.position(n)
            r = self.radices[p]
            idx = idx * r + self.value_indices[:, p]
            arity *= r
        return idx, arity

    def subspace(self, names: Sequence[str]) -> "WorldSpace":
        return WorldSpace(tuple(self.variable(n) for n in names))


def product_variable(components: Sequence[Variable], name: str | None = None) -> Variable:
    name = name or "×".join(c.name for c in components)
    values = tuple(",".join(t) for t in itertools.product(*(c.values for c in components)))
    return Variable(name, values)


def projection_cpd(components: Sequence[Variable], which: int) -> Cpd:
    radices = [len(c) for c in components]
    rows = int(np.prod(radices))
    settings = np.stack(np.unravel_index(np.arange(rows), radices), axis=1)
    t = np.zeros((rows, radices[which]))
    t[np.arange(rows), settings[:, which]] = 1.0
    return Cpd(t)


def projection_label(product: str, component: str) -> str:
    return f"{product}->>{component}"


@dataclass(frozen=True)
class Pdg:
    variables: tuple[Variable, ...] = ()
    edges: tuple[Edge, ...] = ()
    products: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "edges", tuple(self.edges))
        object.__setattr__(self, "products", {k: tuple(v) for k, v in dict(self.products).items()})

    def __hash__(self):
        return hash((self.variables, self.edges, tuple(self.products.items()), self.name))

    # lookup

    @cached_property
    def _var_index(self) -> dict[str, Variable]:
        return {v.name: v for v in self.variables}

    def var(self, name: str) -> Variable:
        try:
            return self._var_index[name]
        except KeyError:
            raise PdgError(f"unknown variable {name!r}") from None

    def has_var(self, name: str) -> bool:
        return name in self._var_index

    def edge(self, label: str) -> Edge:
        for e in self.edges:
            if e.label == label:
                return e
        raise PdgError(f"unknown edge {label!r}")

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(e.label for e in self.edges)

    @cached_property
    def space(self) -> WorldSpace:
        return WorldSpace(self.variables)

    # construction

    def with_variable(self, v: Variable) -> "Pdg":
        if self.has_var(v.name):
            if self.var(v.name) != v:
                raise PdgError(f"variable {v.name!r} already declared with different values")
            return self
        check_variable(v)
        return replace(self, variables=self.variables + (v,))

    def with_edge(self, edge: Edge) -> "Pdg":
        problems = edge_violations(self, edge)
        if edge.label in self.labels:
            problems.insert(0, f"duplicate edge label {edge.label!r}")
        if problems:
            raise PdgError(f"edge {edge.label!r}: " + "; ".join(problems))
        if edge.alpha > 1:
            warnings.warn(f"edge {edge.label!r} has alpha={edge.alpha} > 1", stacklevel=2)
        return replace(self, edges=self.edges + (edge,))

    def add_edge(
        self, label: str, source: str, target: str, cpd, alpha: float = 1.0, beta: float = 1.0
    ) -> "Pdg":
        if not isinstance(cpd, Cpd):
            cpd = Cpd(cpd)
        return self.with_edge(Edge(label, source, target, cpd, float(alpha), float(beta)))

    def without_edge(self, label: str) -> "Pdg":
        self.edge(label)
        return replace(self, edges=tuple(e for e in self.edges if e.label != label))

    def with_unit(self) -> "Pdg":
        return self.with_variable(UNIT)

    def renamed(self, name: str) -> "Pdg":
        return replace(self, name=name)

    @property
    def is_unweighted(self) -> bool:
        return all(e.alpha == 1 and e.beta == 1 for e in self.edges)

    def weighted(self, alpha=None, beta=None) -> "Pdg":
        """Copy with per-edge weights replaced; each argument is a mapping label -> value or a scalar."""

        def pick(src, e, cur):
            if src is None:
                return cur
            if isinstance(src, Mapping):
                return float(src.get(e.label, cur))
            return float(src)

        edges = tuple(
            replace(e, alpha=pick(alpha, e, e.alpha), beta=pick(beta, e, e.beta)) for e in self.edges
        )
        out = replace(self, edges=edges)
        problems = validate(out)
        if problems:
            raise PdgError("; ".join(str(p) for p in problems))
        return out


@dataclass(frozen=True)
class Violation:
    where: str
    message: str

    def __str__(self):
        return f"{self.where}: {self.message}"


def check_variable(v: Variable) -> None:
    if not v.values:
        raise PdgError(f"variable {v.name!r} has no values")
    if len(set(v.values)) != len(v.values):
        raise PdgError(f"variable {v.name!r} has repeated values")


def edge_violations(pdg: Pdg, e: Edge) -> list[str]:
    out = []
    for role, n in (("source", e.source), ("target", e.target)):
        if not pdg.has_var(n):
            out.append(f"{role} {n!r} is not a declared variable")
    if not out:
        want = (len(pdg.var(e.source)), len(pdg.var(e.target)))
        got = (e.cpd.source_arity, e.cpd.target_arity)
        if want != got:
            out.append(f"cpd shape {got} does not match variable arities {want}")
    out.extend(e.cpd.violations())
    if not (np.isfinite(e.alpha) and e.alpha >= 0):
        out.append(f"alpha must be a non-negative real, got {e.alpha}")
    if not (np.isfinite(e.beta) and e.beta > 0):
        out.append(f"beta must be a positive real, got {e.beta}")
    return out


def validate(pdg: Pdg) -> list[Violation]:
    """Every violated invariant of ``pdg``; empty iff the PDG is valid."""
    out: list[Violation] = []
    seen = set()
    for v in pdg.variables:
        if v.name in seen:
            out.append(Violation(f"variable {v.name}", "declared twice"))
        seen.add(v.name)
        if not v.values:
            out.append(Violation(f"variable {v.name}", "has no values"))
        elif len(set(v.values)) != len(v.values):
            out.append(Violation(f"variable {v.name}", "has repeated values"))
    labels = set()
    for e in pdg.edges:
        if e.label in labels:
            out.append(Violation(f"edge {e.label}", "duplicate label"))
        labels.add(e.label)
        out.extend(Violation(f"edge {e.label}", m) for m in edge_violations(pdg, e))
    for prod, comps in pdg.products.items():
        if not pdg.has_var(prod) or not all(pdg.has_var(c) for c in comps):
            out.append(Violation(f"product {prod}", "references an undeclared variable"))
            continue
        expect = product_variable([pdg.var(c) for c in comps], prod)
        if expect.values != pdg.var(prod).values:
            out.append(Violation(f"product {prod}", "values are not the product of its components"))
    return out


def ensure_product(pdg: Pdg, components: Sequence[str], projection_beta: float = 1.0) -> tuple[Pdg, str]:
    """Declare the product of ``components`` (if needed) with its projection edges."""
    comps = [pdg.var(c) for c in components]
    prod = product_variable(comps)
    if pdg.has_var(prod.name) and pdg.products.get(prod.name) != tuple(components):
        raise PdgError(f"variable {prod.name!r} exists but is not the product of {list(components)}")
    out = pdg.with_variable(prod)
    if prod.name not in out.products:
        out = replace(out, products={**out.products, prod.name: tuple(components)})
    for i, c in enumerate(comps):
        label = projection_label(prod.name, c.name)
        if label not in out.labels:
            out = out.add_edge(label, prod.name, c.name, projection_cpd(comps, i), 1.0, projection_beta)
    return out, prod.name


def add_hyperedge(
    pdg: Pdg,
    label: str,
    sources: Sequence[str],
    target: str,
    cpd,
    alpha: float = 1.0,
    beta: float = 1.0,
    projection_beta: float = 1.0,
) -> Pdg:
    """Attach ``cpd`` from the joint setting of ``sources`` to ``target``.

    Two or more sources are joined through a product variable with projection
    edges back to each source; a single source gets a plain edge, and no
    sources means the unit variable.
    """
    if not isinstance(cpd, Cpd):
        cpd = Cpd(cpd)
    for n in (*sources, target):
        pdg.var(n)
    if len(set(sources)) != len(sources):
        raise PdgError(f"repeated source in {list(sources)}")
    arity = int(np.prod([len(pdg.var(s)) for s in sources]))
    if cpd.source_arity != arity:
        raise PdgError(f"cpd has {cpd.source_arity} rows but sources have {arity} joint settings")
    if label in pdg.labels:
        raise PdgError(f"duplicate edge label {label!r}")
    if not sources:
        pdg, src = pdg.with_unit(), UNIT_NAME
    elif len(sources) == 1:
        src = sources[0]
    else:
        pdg, src = ensure_product(pdg, sources, projection_beta)
    return pdg.add_edge(label, src, target, cpd, alpha, beta)


def union(a: Pdg, b: Pdg) -> Pdg:
    """Variables merged by name; edges concatenated, with colliding labels from ``b`` suffixed."""
    out = a
    for v in b.variables:
        if a.has_var(v.name) and a.var(v.name) != v:
            raise PdgError(f"variable {v.name!r} has different values in the two PDGs")
        out = out.with_variable(v)
    products = dict(a.products)
    for k, comps in b.products.items():
        if k in products and products[k] != comps:
            raise PdgError(f"product {k!r} has different components in the two PDGs")
        products[k] = comps
    taken = set(a.labels)
    edges = list(a.edges)
    suffix = b.name or "b"
    for e in b.edges:
        label = e.label
        if label in taken:
            label = f"{e.label}@{suffix}"
            n = 2
            while label in taken:
                label = f"{e.label}@{suffix}{n}"
                n += 1
        taken.add(label)
        edges.append(replace(e, label=label))
    return replace(out, edges=tuple(edges), products=products)


def restrict(pdg: Pdg, keep: Iterable[str]) -> Pdg:
    keep = set(keep)
    for n in keep:
        pdg.var(n)
    variables = tuple(v for v in pdg.variables if v.name in keep)
    edges = tuple(e for e in pdg.edges if e.source in keep and e.target in keep)
    products = {
        k: comps for k, comps in pdg.products.items() if k in keep and all(c in keep for c in comps)
    }
    return replace(pdg, variables=variables, edges=edges, products=products)


def build(
    variables: Mapping[str, Sequence[str]] | Iterable[Variable],
    edges: Iterable = (),
    name: str = "",
) -> Pdg:
    """Convenience constructor.

    ``variables`` maps names to value lists; each edge is a tuple
    ``(label, sources, target, cpd[, alpha[, beta]])`` where ``sources`` is a
    variable name or a list of names (hyperedge).
    """
    if isinstance(variables, Mapping):
        variables = [Variable(k, tuple(v)) for k, v in variables.items()]
    pdg = Pdg(name=name)
    for v in variables:
        pdg = pdg.with_variable(v)
    for spec in edges:
        label, sources, target, cpd, *w = spec
        if isinstance(sources, str):
            if not pdg.has_var(sources) and sources == UNIT_NAME:
                pdg = pdg.with_unit()
            pdg = pdg.add_edge(label, sources, target, cpd, *w)
        else:
            pdg = add_hyperedge(pdg, label, list(sources), target, cpd, *w)
    return pdg
