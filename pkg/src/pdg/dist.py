"""Dense joint distributions over a world space and the information functionals.

All logarithms are base 2. Extended reals follow the usual conventions:
``0 log 0 = 0``, ``0 * inf = 0``, and ``p log(p/0) = inf`` for ``p > 0``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import Cpd, PdgError, Variable, WorldSpace

SUM_TOL = 1e-9

Names = str | Sequence[str]


def _names(x: Names) -> tuple[str, ...]:
    return (x,) if isinstance(x, str) else tuple(x)


def plogp(p: np.ndarray) -> np.ndarray:
    """Elementwise ``p log2 p`` with ``0 log 0 = 0``."""
    p = np.asarray(p, dtype=float)
    out = np.zeros_like(p)
    pos = p > 0
    out[pos] = p[pos] * np.log2(p[pos])
    return out


@dataclass(frozen=True, eq=False)
class JointTable:
    space: WorldSpace
    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float).reshape(-1)
        if p.size != self.space.size:
            raise PdgError(f"{p.size} probabilities for a space of {self.space.size} worlds")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise PdgError("probabilities must be finite and non-negative")
        if abs(p.sum() - 1.0) > SUM_TOL:
            raise PdgError(f"probabilities sum to {p.sum():.12g}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def normalized(cls, space: WorldSpace, weights) -> "JointTable":
        w = np.asarray(weights, dtype=float).reshape(-1)
        total = w.sum()
        if not total > 0:
            raise PdgError("cannot normalize an all-zero weight vector")
        return cls(space, w / total)

    @classmethod
    def uniform(cls, space: WorldSpace) -> "JointTable":
        return cls(space, np.full(space.size, 1.0 / space.size))

    @classmethod
    def over(cls, variables: Sequence[Variable], probs) -> "JointTable":
        return cls(WorldSpace(tuple(variables)), probs)

    @property
    def names(self) -> tuple[str, ...]:
        return self.space.names

    def tensor(self) -> np.ndarray:
        return self.probs.reshape(self.space.radices) if self.space.variables else self.probs

    def prob(self, **setting: str) -> float:
        """Marginal probability of a partial assignment given by value labels."""
        mask = np.ones(self.space.size, dtype=bool)
        for name, value in setting.items():
            p = self.space.position(name)
            mask &= self.space.value_indices[:, p] == self.space.variables[p].index(value)
        return float(self.probs[mask].sum())

    def __repr__(self):
        return f"JointTable({list(self.names)}, {np.array2string(self.probs, precision=4)})"


def marginal(mu: JointTable, names: Names) -> JointTable:
    """Marginal on ``names``, in the order given."""
    names = _names(names)
    pos = [mu.space.position(n) for n in names]
    if len(set(pos)) != len(pos):
        raise PdgError(f"repeated variable in {list(names)}")
    if not mu.space.variables:
        return JointTable(mu.space, mu.probs)
    others = tuple(i for i in range(len(mu.space.variables)) if i not in pos)
    t = mu.tensor().sum(axis=others) if others else mu.tensor()
    # after summation the kept axes are in space order; permute to the requested order
    kept = sorted(pos)
    t = np.transpose(t, [kept.index(p) for p in pos])
    return JointTable(mu.space.subspace(names), t.reshape(-1))


def pair_table(mu: JointTable, target: Names, given: Names) -> np.ndarray:
    """Matrix of joint masses ``m[x, y]`` with rows indexed by ``given`` settings."""
    xi, nx = mu.space.column(_names(given))
    yi, ny = mu.space.column(_names(target))
    return np.bincount(xi * ny + yi, weights=mu.probs, minlength=nx * ny).reshape(nx, ny)


@dataclass(frozen=True)
class Conditional:
    """A cpd estimated from a joint, with a flag for rows whose conditioning event has mass 0."""

    cpd: Cpd
    defined: np.ndarray

    @property
    def table(self) -> np.ndarray:
        return self.cpd.table


def conditional(mu: JointTable, target: Names, given: Names) -> Conditional:
    m = pair_table(mu, target, given)
    mx = m.sum(axis=1)
    defined = mx > 0
    rows = np.full(m.shape, 1.0 / m.shape[1])
    rows[defined] = m[defined] / mx[defined, None]
    return Conditional(Cpd(rows), defined)


def entropy(mu: JointTable | np.ndarray) -> float:
    p = mu.probs if isinstance(mu, JointTable) else np.asarray(mu, dtype=float)
    return float(-plogp(p).sum())


def cond_entropy(mu: JointTable, target: Names, given: Names = ()) -> float:
    """``H(target | given)`` in bits; ``given=()`` gives the marginal entropy."""
    m = pair_table(mu, target, given)
    return float(-plogp(m).sum() + plogp(m.sum(axis=1)).sum())


def kl(p, q) -> float:
    """Relative entropy ``D(p || q)`` in bits; ``inf`` when ``p`` puts mass where ``q`` has none."""
    p = np.asarray(p, dtype=float).reshape(-1)
    q = np.asarray(q, dtype=float).reshape(-1)
    if p.shape != q.shape:
        raise PdgError(f"shape mismatch {p.shape} vs {q.shape}")
    s = p > 0
    if np.any(q[s] <= 0):
        return float("inf")
    return float(np.sum(p[s] * (np.log2(p[s]) - np.log2(q[s]))))


def mutual_info(mu: JointTable, x: Names, y: Names, given: Names = ()) -> float:
    """Conditional mutual information ``I(x; y | given)`` in bits."""
    x, y, z = _names(x), _names(y), _names(given)

    def h(names):
        return -plogp(marginal(mu, names).probs).sum() if names else 0.0

    return float(h(x + z) + h(y + z) - h(x + y + z) - h(z))


def total_variation(p, q) -> float:
    p = p.probs if isinstance(p, JointTable) else np.asarray(p, dtype=float)
    q = q.probs if isinstance(q, JointTable) else np.asarray(q, dtype=float)
    return float(0.5 * np.abs(p - q).sum())


def lift(mu: JointTable, space: WorldSpace, products: dict[str, tuple[str, ...]]) -> JointTable:
    """Extend ``mu`` to ``space``, fixing product variables by their components.

    Variables of ``space`` absent from ``mu`` must be products of variables
    that are present, or single-valued.
    """
    base = mu.space
    src = np.zeros(space.size, dtype=np.int64)
    ok = np.ones(space.size, dtype=bool)
    vi = space.value_indices
    for v in base.variables:
        src = src * len(v) + vi[:, space.position(v.name)]
    for i, v in enumerate(space.variables):
        if v.name in base.names or len(v) == 1:
            continue
        comps = products.get(v.name)
        if comps is None or any(c not in base.names for c in comps):
            raise PdgError(f"cannot determine variable {v.name!r} from {list(base.names)}")
        joint, _ = space.column(comps)
        ok &= vi[:, i] == joint
    return JointTable(space, np.where(ok, mu.probs[src], 0.0))
