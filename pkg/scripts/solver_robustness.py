"""Stress the solver on random PDGs and summarize convergence, agreement, and timing.

Run with ``python3 scripts/solver_robustness.py --solves 300 --limits 40``.
"""

from __future__ import annotations

import argparse
import json
import time
import warnings

import numpy as np

from pdg.dist import total_variation
from pdg.generate import random_pdg
from pdg.solve import SolveConfig, critical_gamma, degree_of_inconsistency, limit_distribution, minimize_score


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--solves", type=int, default=300)
    ap.add_argument("--limits", type=int, default=40)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    warnings.simplefilter("ignore", UserWarning)
    rng = np.random.default_rng(args.seed)

    below = {"runs": 0, "failed": 0, "maxStartTV": 0.0, "maxMethodTV": 0.0, "seconds": 0.0}
    above = {"runs": 0, "failed": 0}
    for _ in range(args.solves):
        pdg = random_pdg(rng, hyperedges=True, weighted=bool(rng.random() < 0.5))
        crit = critical_gamma(pdg)
        gamma = float(rng.uniform(0.05, 2.0))
        if np.isfinite(crit) and gamma > crit:
            above["runs"] += 1
            above["failed"] += not minimize_score(pdg, gamma).converged
            continue
        t = time.perf_counter()
        a = minimize_score(pdg, gamma, SolveConfig(seed=1))
        b = minimize_score(pdg, gamma, SolveConfig(seed=2))
        c = minimize_score(pdg, gamma, SolveConfig(method="eg"))
        below["seconds"] += time.perf_counter() - t
        below["runs"] += 1
        below["failed"] += not (a.converged and b.converged and c.converged)
        below["maxStartTV"] = max(below["maxStartTV"], total_variation(a.mu, b.mu))
        below["maxMethodTV"] = max(below["maxMethodTV"], total_variation(a.mu, c.mu))

    limits = {"runs": 0, "failed": 0, "notReached": 0, "maxIncGap": 0.0, "maxRatioTV": 0.0, "seconds": 0.0}
    for _ in range(args.limits):
        pdg = random_pdg(rng, hyperedges=True, weighted=bool(rng.random() < 0.5))
        t = time.perf_counter()
        a = limit_distribution(pdg, SolveConfig(gamma_ratio=0.5))
        b = limit_distribution(pdg, SolveConfig(gamma_ratio=0.7))
        limits["seconds"] += time.perf_counter() - t
        limits["runs"] += 1
        limits["failed"] += not (a.converged and b.converged)
        limits["notReached"] += not a.info["limitReached"]
        limits["maxIncGap"] = max(limits["maxIncGap"], abs(a.info["incGap"]))
        limits["maxRatioTV"] = max(limits["maxRatioTV"], total_variation(a.mu, b.mu))
        degree_of_inconsistency(pdg)

    print(json.dumps({"belowCritical": below, "aboveCritical": above, "limits": limits}, indent=2))


if __name__ == "__main__":
    main()
