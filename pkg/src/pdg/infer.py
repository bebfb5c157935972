"""Conditioning, soft-evidence updates, and conditional queries."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dist import Conditional, conditional
from .model import UNIT_NAME, Cpd, Pdg, PdgError
from .solve import SolveConfig, degree_of_inconsistency, limit_distribution


@dataclass(frozen=True, eq=False)
class Evidence:
    """A point observation (``value``) or a soft distribution (``dist``) on one variable."""

    variable: str
    value: str | None = None
    dist: np.ndarray | None = None
    beta: float = 1.0

    def __post_init__(self):
        if (self.value is None) == (self.dist is None):
            raise PdgError("evidence needs exactly one of value or dist")
        if self.dist is not None:
            q = np.asarray(self.dist, dtype=float).reshape(-1)
            if np.any(q < 0) or abs(q.sum() - 1) > 1e-9:
                raise PdgError("soft evidence must be a normalized distribution")
            object.__setattr__(self, "dist", q)
        if not self.beta > 0:
            raise PdgError("evidence beta must be positive")

    def cpd(self, pdg: Pdg) -> Cpd:
        var = pdg.var(self.variable)
        if self.value is not None:
            return Cpd.point(len(var), var.index(self.value))
        if self.dist.size != len(var):
            raise PdgError(f"soft evidence has {self.dist.size} entries, {self.variable} has {len(var)} values")
        return Cpd(self.dist[None, :])


def observation_label(pdg: Pdg, variable: str) -> str:
    label, n = f"obs[{variable}]", 2
    while label in pdg.labels:
        label, n = f"obs[{variable}]#{n}", n + 1
    return label


def add_observation(pdg: Pdg, ev: Evidence, label: str | None = None) -> Pdg:
    """Add an edge ``1 -> Y`` carrying the evidence; delete that edge to undo it."""
    cpd = ev.cpd(pdg)
    out = pdg.with_unit()
    return out.add_edge(label or observation_label(out, ev.variable), UNIT_NAME, ev.variable, cpd, 1.0, ev.beta)


def retract(pdg: Pdg, label: str) -> Pdg:
    return pdg.without_edge(label)


def query(pdg: Pdg, target: str, given: str, cfg: SolveConfig = SolveConfig()) -> Conditional:
    """``mu*(target | given)`` for the limit distribution ``mu*``; rows of zero mass are flagged undefined."""
    if target == given:
        raise PdgError("target and given must differ")
    pdg.var(target), pdg.var(given)
    mu = limit_distribution(pdg, cfg).mu
    return conditional(mu, target, given)


def inconsistency_of_candidate(
    pdg: Pdg, target: str, given: str, candidate: Cpd, cfg: SolveConfig = SolveConfig()
) -> float:
    """Degree of inconsistency after adding ``candidate`` as an edge given -> target with alpha = 0."""
    if not isinstance(candidate, Cpd):
        candidate = Cpd(candidate)
    label, n = f"cand[{target}|{given}]", 2
    while label in pdg.labels:
        label, n = f"cand[{target}|{given}]#{n}", n + 1
    return degree_of_inconsistency(pdg.add_edge(label, given, target, candidate, 0.0, 1.0), cfg)
