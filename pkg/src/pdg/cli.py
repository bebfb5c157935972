"""Command-line interface: every command reads model files and prints one JSON object.

Exit status: 0 success, 2 invalid input (schema or model), 3 solver did not
converge, 4 infeasible (every world forbidden, or infinite inconsistency),
1 anything else. Failures print ``{"error": {...}}`` to standard output.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import io
from .convert import (
    BayesNet,
    FactorGraph,
    WeightedFactorGraph,
    bn_to_pdg,
    pdg_to_fg,
    pdg_to_wfg,
    wfg_to_pdg,
)
from .infer import Evidence, add_observation, query
from .model import Pdg, PdgError, restrict, union
from .scoring import in_sd, score
from .solve import (
    InfeasibleError,
    SolveConfig,
    SolveResult,
    degree_of_inconsistency,
    limit_distribution,
    minimize_score,
)

CONFIG_ENV = "PDG_SOLVER_CONFIG"

EXIT_OK, EXIT_ERROR, EXIT_INPUT, EXIT_NONCONVERGED, EXIT_INFEASIBLE = 0, 1, 2, 3, 4

# config-file keys and the SolveConfig fields they set
CONFIG_KEYS = {
    "maxIters": "max_iters",
    "stepInit": "step_init",
    "convergenceTol": "convergence_tol",
    "gammaScheduleRatio": "gamma_ratio",
    "gammaFloor": "gamma_floor",
    "limitTol": "limit_tol",
    "gammaInit": "gamma_init",
    "seed": "seed",
    "method": "method",
}


class CliError(Exception):
    def __init__(self, code: int, kind: str, message: str, **extra):
        super().__init__(message)
        self.code, self.kind, self.extra = code, kind, extra

    def to_json(self) -> dict:
        return {"error": {"type": self.kind, "message": str(self), **self.extra}}


# loading


def _load(path: str):
    try:
        return io.load(path)
    except OSError as exc:
        raise CliError(EXIT_INPUT, "FileError", f"{path}: {exc.strerror or exc}") from None
    except io.FormatError as exc:
        raise CliError(EXIT_INPUT, "SchemaError", f"{path}: {exc.detail}", path=exc.path) from None
    except io.ModelError as exc:
        raise CliError(EXIT_INPUT, "ModelError", f"{path}: {exc}", problems=exc.problems) from None


def _load_as(path: str, kind: type, what: str):
    model = _load(path)
    if not isinstance(model, kind):
        raise CliError(EXIT_INPUT, "SchemaError", f"{path}: expected a {what} file")
    return model


def _pdg(path: str) -> Pdg:
    return _load_as(path, Pdg, "pdg")


def solve_config(args) -> SolveConfig:
    """Defaults, then the config file (``--config`` or the environment variable), then flags."""
    values = {}
    path = args.config or os.environ.get(CONFIG_ENV)
    if path:
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(EXIT_INPUT, "ConfigError", f"{path}: {exc}") from None
        if not isinstance(raw, dict):
            raise CliError(EXIT_INPUT, "ConfigError", f"{path}: expected a JSON object")
        unknown = sorted(set(raw) - set(CONFIG_KEYS))
        if unknown:
            raise CliError(EXIT_INPUT, "ConfigError", f"{path}: unknown keys {unknown}")
        values = {CONFIG_KEYS[k]: v for k, v in raw.items()}
    flags = {
        "max_iters": args.max_iters,
        "convergence_tol": args.tol,
        "gamma_ratio": args.gamma_ratio,
        "gamma_floor": args.gamma_floor,
        "seed": args.seed,
    }
    values.update({k: v for k, v in flags.items() if v is not None})
    try:
        return SolveConfig(**values)
    except (TypeError, ValueError) as exc:
        raise CliError(EXIT_INPUT, "ConfigError", str(exc)) from None


def _joint_json(mu) -> dict:
    return io.to_document(mu)["body"]


def _result_json(res: SolveResult) -> dict:
    out = res.to_json()
    out["mu"] = _joint_json(res.mu)
    return out


def _require_converged(res: SolveResult, report: dict) -> dict:
    if not res.converged:
        raise CliError(EXIT_NONCONVERGED, "NonConvergence", "solver did not converge", result=report)
    return report


# commands


def cmd_score(args):
    pdg = _pdg(args.pdg)
    mu = io.resolve_joint(_load_as(args.joint, (io.JointSpec,), "joint"), pdg)
    return score(pdg, mu, args.gamma).to_json()


def cmd_solve(args):
    pdg = _pdg(args.pdg)
    res = minimize_score(pdg, args.gamma, solve_config(args))
    return _require_converged(res, _result_json(res))


def cmd_limit(args):
    res = limit_distribution(_pdg(args.pdg), solve_config(args))
    return _require_converged(res, _result_json(res))


def cmd_inc(args):
    value = degree_of_inconsistency(_pdg(args.pdg), solve_config(args))
    if value == float("inf"):
        raise CliError(EXIT_INFEASIBLE, "Infeasible", "every world is forbidden; the inconsistency is infinite")
    return {"degreeOfInconsistency": value}


def cmd_check(args):
    pdg = _pdg(args.pdg)
    mu = io.resolve_joint(_load_as(args.joint, (io.JointSpec,), "joint"), pdg)
    return in_sd(pdg, mu, args.tol).to_json()


def cmd_convert(args):
    src = _load(args.file)
    kinds = {"bn": BayesNet, "fg": FactorGraph, "wfg": WeightedFactorGraph, "pdg": Pdg}
    want = kinds[args.source]
    # a weighted factor graph is not a plain factor graph, and vice versa
    if not isinstance(src, want) or (args.source == "fg" and isinstance(src, WeightedFactorGraph)):
        raise CliError(EXIT_INPUT, "SchemaError", f"{args.file}: expected a {args.source} file")
    if args.target == "pdg":
        if isinstance(src, BayesNet):
            out = bn_to_pdg(src)
        elif isinstance(src, WeightedFactorGraph):
            out = wfg_to_pdg(src, args.k)
        elif isinstance(src, FactorGraph):
            out = wfg_to_pdg(WeightedFactorGraph(src), args.k)
        else:
            out = src
    elif args.source != "pdg":
        raise CliError(EXIT_INPUT, "UsageError", f"conversion {args.source} -> {args.target} is not supported")
    elif args.target == "fg":
        out = pdg_to_fg(src)
    else:
        out = pdg_to_wfg(src)
    return io.to_document(out)


def cmd_query(args):
    pdg = _pdg(args.pdg)
    cfg = solve_config(args)
    cond = query(pdg, args.target, args.given, cfg)
    return {
        "target": args.target,
        "given": args.given,
        "givenValues": list(pdg.var(args.given).values),
        "targetValues": list(pdg.var(args.target).values),
        "cpd": cond.table.tolist(),
        "defined": [bool(d) for d in cond.defined],
    }


def cmd_observe(args):
    pdg = _pdg(args.pdg)
    if (args.value is None) == (args.dist is None):
        raise CliError(EXIT_INPUT, "UsageError", "give exactly one of --value and --dist")
    dist = None
    if args.dist is not None:
        try:
            dist = np.asarray(json.loads(Path(args.dist).read_text(encoding="utf-8")), dtype=float)
        except (OSError, json.JSONDecodeError, ValueError, TypeError) as exc:
            raise CliError(EXIT_INPUT, "FileError", f"{args.dist}: {exc}") from None
    ev = Evidence(args.var, value=args.value, dist=dist, beta=args.beta)
    return io.to_document(add_observation(pdg, ev, args.label))


def cmd_union(args):
    return io.to_document(union(_pdg(args.a), _pdg(args.b)))


def cmd_restrict(args):
    keep = [k.strip() for k in args.keep.split(",") if k.strip()]
    return io.to_document(restrict(_pdg(args.pdg), keep))


# parser


def _solver_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("solver")
    g.add_argument("--max-iters", type=int)
    g.add_argument("--tol", type=float, help="convergence tolerance")
    g.add_argument("--gamma-ratio", type=float, help="ratio of the geometric gamma schedule")
    g.add_argument("--gamma-floor", type=float)
    g.add_argument("--seed", type=int, help="random initial point (default: uniform)")
    g.add_argument("--config", help=f"JSON solver config (default: ${CONFIG_ENV})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pdg", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log solver progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="score a joint distribution")
    p.add_argument("pdg")
    p.add_argument("joint")
    p.add_argument("--gamma", type=float, default=1.0)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("solve", help="minimize the score at a fixed gamma")
    p.add_argument("pdg")
    p.add_argument("--gamma", type=float, required=True)
    _solver_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("limit", help="the gamma -> 0 limit distribution")
    p.add_argument("pdg")
    _solver_flags(p)
    p.set_defaults(func=cmd_limit)

    p = sub.add_parser("inc", help="degree of inconsistency")
    p.add_argument("pdg")
    _solver_flags(p)
    p.set_defaults(func=cmd_inc)

    p = sub.add_parser("check", help="whether a joint matches every cpd")
    p.add_argument("pdg")
    p.add_argument("joint")
    p.add_argument("--tol", type=float, default=1e-7)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("convert", help="translate between model kinds")
    p.add_argument("--from", dest="source", choices=["bn", "fg", "wfg", "pdg"], required=True)
    p.add_argument("--to", dest="target", choices=["pdg", "fg", "wfg"], required=True)
    p.add_argument("--k", type=float, default=1.0, help="confidence scale for factor graphs")
    p.add_argument("file")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("query", help="conditional distribution under the limit distribution")
    p.add_argument("pdg")
    p.add_argument("--target", required=True)
    p.add_argument("--given", required=True)
    _solver_flags(p)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("observe", help="add an observation edge")
    p.add_argument("pdg")
    p.add_argument("--var", required=True)
    p.add_argument("--value")
    p.add_argument("--dist", help="JSON file holding the soft-evidence distribution")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--label")
    p.set_defaults(func=cmd_observe)

    p = sub.add_parser("union", help="merge two PDGs")
    p.add_argument("a")
    p.add_argument("b")
    p.set_defaults(func=cmd_union)

    p = sub.add_parser("restrict", help="keep only some variables")
    p.add_argument("pdg")
    p.add_argument("--keep", required=True, help="comma-separated variable names")
    p.set_defaults(func=cmd_restrict)
    return parser


def run(argv: list[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, stream=sys.stderr)
    try:
        report = args.func(args)
        code = EXIT_OK
    except CliError as exc:
        report, code = exc.to_json(), exc.code
    except InfeasibleError as exc:
        report, code = CliError(EXIT_INFEASIBLE, "Infeasible", str(exc)).to_json(), EXIT_INFEASIBLE
    except PdgError as exc:
        report, code = CliError(EXIT_INPUT, "InvalidInput", str(exc)).to_json(), EXIT_INPUT
    out.write(io.dumps(report) + "\n")
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
