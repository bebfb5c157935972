"""The ``pdg-json/1`` file format: schema validation, parsing, canonical output.

Every file is an envelope ``{"formatVersion": "pdg-json/1", "kind", "body"}``
checked against the bundled JSON schema before any model is built. Canonical
output lists variables, values, and edges in declaration order and writes every
non-integer number with 17 significant digits, so parsing it back is exact.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Union

import numpy as np
from jsonschema import Draft202012Validator

from .convert import BayesNet, Factor, FactorGraph, WeightedFactorGraph
from .dist import JointTable, lift
from .model import (
    UNIT_NAME,
    Cpd,
    Edge,
    Pdg,
    PdgError,
    Variable,
    WorldSpace,
    add_hyperedge,
    validate,
)

FORMAT_VERSION = "pdg-json/1"
SCHEMA_FILE = "pdg-json-1.schema.json"
INLINE_WIDTH = 100  # small objects of scalars are written on one line


class FormatError(PdgError):
    """A document that is not valid JSON or fails the schema; ``path`` locates the problem."""

    def __init__(self, message: str, path: str = "$"):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.detail = message


class ModelError(PdgError):
    """A schema-valid document describing an invalid model (bad row sums, unknown names, ...)."""

    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = list(problems)


@dataclass(frozen=True, eq=False)
class JointSpec:
    """A joint as written in a file; value lists may be left to the PDG it is used with."""

    variable_order: tuple[str, ...]
    probs: np.ndarray
    variables: tuple[Variable, ...] | None = None

    def table(self) -> JointTable:
        if self.variables is None:
            raise PdgError("joint file has no value lists; it can only be read against a PDG")
        return JointTable(WorldSpace(self.variables), self.probs)


Model = Union[Pdg, BayesNet, FactorGraph, WeightedFactorGraph, JointSpec, JointTable]


# schema


@lru_cache(maxsize=1)
def schema() -> dict:
    text = resources.files("pdg").joinpath("schema", SCHEMA_FILE).read_text(encoding="utf-8")
    return json.loads(text)


def _json_path(parts) -> str:
    out = "$"
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else f".{p}"
    return out


def check_schema(doc: Any) -> None:
    validator = Draft202012Validator(schema())
    errors = list(validator.iter_errors(doc))
    if not errors:
        return
    # report the deepest error: it names the offending field, not just the failing branch
    err = max(errors, key=lambda e: len(e.absolute_path))
    while err.context:
        err = max(err.context, key=lambda e: len(e.absolute_path))
    raise FormatError(err.message, _json_path(err.absolute_path))


# parsing


def _variables(items) -> list[Variable]:
    return [Variable(v["name"], tuple(v["values"])) for v in items]


def _parse_pdg(body: Mapping) -> Pdg:
    products = {p["name"]: tuple(p["components"]) for p in body.get("products", [])}
    pdg = Pdg(tuple(_variables(body["variables"])), (), products, body.get("name", ""))
    problems = [str(v) for v in validate(pdg)]
    if problems:
        raise ModelError(problems)
    edges: list[Edge] = []
    for i, e in enumerate(body["edges"]):
        alpha, beta = float(e.get("alpha", 1.0)), float(e.get("beta", 1.0))
        if "sources" in e:
            # expand through a product variable; this checks the edge eagerly
            current = Pdg(pdg.variables, tuple(edges), pdg.products, pdg.name)
            try:
                staged = add_hyperedge(current, e["label"], list(e["sources"]), e["target"], e["cpd"], alpha, beta)
            except PdgError as exc:
                raise ModelError([f"edge {e['label']}: {exc}"]) from None
            pdg, edges = Pdg(staged.variables, (), staged.products, staged.name), list(staged.edges)
            continue
        if e["source"] == UNIT_NAME and not pdg.has_var(UNIT_NAME):
            pdg = pdg.with_unit()
        try:
            cpd = Cpd(e["cpd"])
        except (PdgError, ValueError) as exc:
            raise FormatError(str(exc), f"$.body.edges[{i}].cpd") from None
        edges.append(Edge(e["label"], e["source"], e["target"], cpd, alpha, beta))
    pdg = Pdg(pdg.variables, tuple(edges), pdg.products, pdg.name)
    problems = [str(v) for v in validate(pdg)]
    if problems:
        raise ModelError(problems)
    return pdg


def _parse_bn(body: Mapping) -> BayesNet:
    parents, cpds = {}, {}
    for c in body["cpds"]:
        if c["variable"] in cpds:
            raise ModelError([f"cpd for {c['variable']}: given twice"])
        parents[c["variable"]] = tuple(c["parents"])
        try:
            cpds[c["variable"]] = Cpd(c["table"])
        except (PdgError, ValueError) as exc:
            raise ModelError([f"cpd for {c['variable']}: {exc}"]) from None
    return BayesNet(tuple(_variables(body["variables"])), parents, cpds)


def _parse_factors(body: Mapping) -> FactorGraph:
    factors = tuple(Factor(tuple(f["scope"]), f["table"], f.get("name", "")) for f in body["factors"])
    return FactorGraph(tuple(_variables(body["variables"])), factors)


def _parse_joint(body: Mapping) -> JointSpec:
    order = tuple(body["variableOrder"])
    variables = None
    if "variables" in body:
        by_name = {v.name: v for v in _variables(body["variables"])}
        if set(by_name) != set(order) or len(by_name) != len(body["variables"]):
            raise ModelError(["joint: variables must list exactly the names in variableOrder"])
        variables = tuple(by_name[n] for n in order)
        size = int(np.prod([len(v) for v in variables]))
        if size != len(body["probs"]):
            raise ModelError([f"joint: {len(body['probs'])} probabilities for {size} worlds"])
    probs = np.asarray(body["probs"], dtype=float)
    if abs(probs.sum() - 1.0) > 1e-9:
        raise ModelError([f"joint: probabilities sum to {probs.sum():.12g}, not 1"])
    return JointSpec(order, probs, variables)


_PARSERS = {"pdg": _parse_pdg, "bn": _parse_bn, "fg": _parse_factors, "joint": _parse_joint}


def parse_document(doc: Any) -> Model:
    check_schema(doc)
    kind, body = doc["kind"], doc["body"]
    try:
        if kind == "wfg":
            fg = _parse_factors(body)
            return WeightedFactorGraph(fg, tuple(float(f["theta"]) for f in body["factors"]))
        return _PARSERS[kind](body)
    except ModelError:
        raise
    except PdgError as exc:
        raise ModelError([str(exc)]) from None


def parse(data: bytes | str) -> Model:
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"not UTF-8: {exc}") from None
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc}") from None
    return parse_document(doc)


def load(path: str | Path) -> Model:
    return parse(Path(path).read_bytes())


def resolve_joint(spec: JointSpec | JointTable, pdg: Pdg) -> JointTable:
    """Read a joint against ``pdg``'s world space.

    The joint may list the variables in any order and may omit the unit
    variable and product variables, which are then filled in deterministically.
    """
    if isinstance(spec, JointTable):
        spec = JointSpec(spec.names, spec.probs, spec.space.variables)
    base = []
    for i, n in enumerate(spec.variable_order):
        v = pdg.var(n)
        if spec.variables is not None and spec.variables[i] != v:
            raise PdgError(f"joint lists different values for {n!r} than the PDG")
        base.append(v)
    space = WorldSpace(tuple(base))
    if spec.probs.size != space.size:
        raise PdgError(f"{spec.probs.size} probabilities for a space of {space.size} worlds")
    order = [n for n in pdg.space.names if n in spec.variable_order]
    tensor = spec.probs.reshape(space.radices) if base else spec.probs.reshape(())
    perm = [spec.variable_order.index(n) for n in order]
    sub = pdg.space.subspace(order)
    mu = JointTable(sub, np.transpose(tensor, perm).reshape(-1))
    if len(order) == len(pdg.variables):
        return mu
    return lift(mu, pdg.space, pdg.products)


# canonical output


def _number(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return '"NaN"'
    if math.isinf(x):
        return '"Infinity"' if x > 0 else '"-Infinity"'
    return format(x, ".17g")


def _scalar(x) -> str | None:
    if x is None:
        return "null"
    if isinstance(x, str):
        return json.dumps(x, ensure_ascii=False)
    if isinstance(x, (bool, int, float, np.bool_, np.integer, np.floating)):
        return _number(x)
    return None


def dumps(obj: Any, indent: int = 0) -> str:
    """Deterministic JSON text; lists of scalars stay on one line, infinities become strings."""
    s = _scalar(obj)
    if s is not None:
        return s
    pad, inner = "  " * indent, "  " * (indent + 1)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, Mapping):
        if not obj:
            return "{}"
        pairs = [(json.dumps(str(k), ensure_ascii=False), dumps(v, indent + 1)) for k, v in obj.items()]
        inline = "{" + ", ".join(f"{k}: {v}" for k, v in pairs) + "}"
        if "\n" not in inline and len(inline) <= INLINE_WIDTH:
            return inline
        return "{\n" + ",\n".join(f"{inner}{k}: {v}" for k, v in pairs) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        flat = [_scalar(x) for x in obj]
        if all(f is not None for f in flat):
            return "[" + ", ".join(flat) + "]"
        return "[\n" + ",\n".join(inner + dumps(x, indent + 1) for x in obj) + "\n" + pad + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _var_doc(v: Variable) -> dict:
    return {"name": v.name, "values": list(v.values)}


def _pdg_body(pdg: Pdg) -> dict:
    body: dict = {}
    if pdg.name:
        body["name"] = pdg.name
    body["variables"] = [_var_doc(v) for v in pdg.variables]
    if pdg.products:
        body["products"] = [{"name": k, "components": list(c)} for k, c in pdg.products.items()]
    body["edges"] = [
        {
            "label": e.label,
            "source": e.source,
            "target": e.target,
            "cpd": e.cpd.table.tolist(),
            "alpha": e.alpha,
            "beta": e.beta,
        }
        for e in pdg.edges
    ]
    return body


def _factor_doc(f: Factor, theta: float | None) -> dict:
    d = {"name": f.name, "scope": list(f.scope), "table": f.table.tolist()}
    if theta is not None:
        d["theta"] = theta
    return d


def to_document(model: Model) -> dict:
    if isinstance(model, Pdg):
        kind, body = "pdg", _pdg_body(model)
    elif isinstance(model, BayesNet):
        kind = "bn"
        body = {
            "variables": [_var_doc(v) for v in model.variables],
            "cpds": [
                {
                    "variable": v.name,
                    "parents": list(model.parents.get(v.name, ())),
                    "table": model.cpds[v.name].table.tolist(),
                }
                for v in model.variables
            ],
        }
    elif isinstance(model, WeightedFactorGraph):
        kind = "wfg"
        body = {
            "variables": [_var_doc(v) for v in model.variables],
            "factors": [_factor_doc(f, th) for f, th in zip(model.factors, model.theta)],
        }
    elif isinstance(model, FactorGraph):
        kind = "fg"
        body = {
            "variables": [_var_doc(v) for v in model.variables],
            "factors": [_factor_doc(f, None) for f in model.factors],
        }
    elif isinstance(model, (JointTable, JointSpec)):
        kind = "joint"
        if isinstance(model, JointTable):
            order, variables, probs = model.names, model.space.variables, model.probs
        else:
            order, variables, probs = model.variable_order, model.variables, model.probs
        body = {"variableOrder": list(order)}
        if variables is not None:
            body["variables"] = [_var_doc(v) for v in variables]
        body["probs"] = np.asarray(probs).tolist()
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    return {"formatVersion": FORMAT_VERSION, "kind": kind, "body": body}


def serialize(model: Model) -> bytes:
    return (dumps(to_document(model)) + "\n").encode("utf-8")


def canonicalize(data: bytes | str) -> bytes:
    return serialize(parse(data))
