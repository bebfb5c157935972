"""Probabilistic dependency graphs: scoring, optimization, translations, inference."""

from .convert import (
    BayesNet,
    Factor,
    FactorGraph,
    WeightedFactorGraph,
    bn_distribution,
    bn_to_pdg,
    fg_distribution,
    fg_to_pdg,
    gfe,
    pdg_to_fg,
    pdg_to_wfg,
    wfg_distribution,
    wfg_to_pdg,
)
from .dist import JointTable, conditional, cond_entropy, entropy, kl, lift, marginal, mutual_info, total_variation
from .infer import Evidence, add_observation, inconsistency_of_candidate, query, retract
from .model import (
    UNIT,
    UNIT_NAME,
    Cpd,
    Edge,
    Pdg,
    PdgError,
    Variable,
    WorldSpace,
    add_hyperedge,
    build,
    restrict,
    union,
    validate,
)
from .scoring import ScoreReport, idef, in_sd, inc, score, score_decomposed
from .solve import (
    InfeasibleError,
    SolveConfig,
    SolveResult,
    SolverError,
    critical_gamma,
    degree_of_inconsistency,
    grid_oracle,
    limit_distribution,
    minimize_score,
)

__all__ = [name for name in dir() if not name.startswith("_")]
