"""Configuration documents: model files, graph sources, strict validation.

Model files are JSON. Syntax errors surface with the parser's line/column;
schema errors carry a dotted pointer to the offending key. Unknown keys are
rejected everywhere.
"""

from __future__ import annotations

import copy
import json
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .graphs import (
    ContactGraph,
    complete_bipartite,
    cycle_graph,
    grid_graph,
    path_graph,
    read_edge_list,
)
from .models import (
    BoxDomain,
    CellModel,
    ConstantStage,
    HillParams,
    HillStage,
    LinearStage,
    cascade_model,
    notch_mimo_model,
    notch_restricted_domain,
)

__all__ = [
    "load_model_file", "build_model", "build_restriction",
    "period_two_candidates", "parse_generator", "resolve_graph",
    "set_model_parameter", "MODEL_FILE_KEYS",
]

MODEL_FILE_KEYS = {"model", "restriction", "period_two_candidates"}
_MODEL_KEYS = {
    "cascade": {"type", "gammas", "stages"},
    "notch_mimo": {"type", "beta", "gamma", "k", "g"},
}
_STAGE_KEYS = {
    "hill": {"type", "a", "K", "p", "direction"},
    "linear": {"type", "slope"},
    "constant": {"type", "value"},
}


def load_model_file(path) -> dict:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", line=exc.lineno) from exc
    if not isinstance(doc, dict):
        raise ConfigError("model file must hold a JSON object")
    _reject_unknown(doc, MODEL_FILE_KEYS, "")
    if "model" not in doc:
        raise ConfigError("missing required key", pointer="model")
    return doc


def _reject_unknown(mapping: dict, allowed: set[str], where: str) -> None:
    for key in mapping:
        if key not in allowed:
            pointer = f"{where}.{key}" if where else key
            raise ConfigError("unknown key", pointer=pointer)


def _need(mapping: dict, key: str, where: str):
    if key not in mapping:
        raise ConfigError("missing required key",
                          pointer=f"{where}.{key}" if where else key)
    return mapping[key]


def _number(value, pointer: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", pointer=pointer)
    return float(value)


def build_model(doc: dict) -> CellModel:
    spec = _need(doc, "model", "")
    if not isinstance(spec, dict):
        raise ConfigError("model must be an object", pointer="model")
    kind = _need(spec, "type", "model")
    if kind not in _MODEL_KEYS:
        raise ConfigError(f"unknown model type {kind!r} "
                          f"(expected one of {sorted(_MODEL_KEYS)})",
                          pointer="model.type")
    _reject_unknown(spec, _MODEL_KEYS[kind], "model")
    if kind == "cascade":
        gammas = _need(spec, "gammas", "model")
        if not isinstance(gammas, list) or not gammas:
            raise ConfigError("gammas must be a non-empty array",
                              pointer="model.gammas")
        gammas = [_number(v, f"model.gammas[{i}]") for i, v in enumerate(gammas)]
        raw_stages = _need(spec, "stages", "model")
        if not isinstance(raw_stages, list) or len(raw_stages) != len(gammas):
            raise ConfigError(f"stages must be an array of length {len(gammas)}",
                              pointer="model.stages")
        stages = [_build_stage(s, f"model.stages[{i}]")
                  for i, s in enumerate(raw_stages)]
        return cascade_model(gammas, stages)
    beta = _number(_need(spec, "beta", "model"), "model.beta")
    gamma = _number(_need(spec, "gamma", "model"), "model.gamma")
    k = _number(_need(spec, "k", "model"), "model.k")
    g = _build_stage(_need(spec, "g", "model"), "model.g")
    return notch_mimo_model(beta, gamma, k, g)


def _build_stage(raw, pointer: str):
    if not isinstance(raw, dict):
        raise ConfigError("stage must be an object", pointer=pointer)
    kind = raw.get("type", "hill")
    if kind not in _STAGE_KEYS:
        raise ConfigError(f"unknown stage type {kind!r}", pointer=f"{pointer}.type")
    _reject_unknown(raw, _STAGE_KEYS[kind], pointer)
    if kind == "hill":
        direction = _need(raw, "direction", pointer)
        if direction not in ("activating", "inhibiting"):
            raise ConfigError(f"direction must be activating or inhibiting, "
                              f"got {direction!r}", pointer=f"{pointer}.direction")
        return HillStage(HillParams(
            amplitude=_number(_need(raw, "a", pointer), f"{pointer}.a"),
            threshold=_number(_need(raw, "K", pointer), f"{pointer}.K"),
            exponent=_number(_need(raw, "p", pointer), f"{pointer}.p"),
            direction=direction,
        ))
    if kind == "linear":
        return LinearStage(_number(_need(raw, "slope", pointer), f"{pointer}.slope"))
    return ConstantStage(_number(_need(raw, "value", pointer), f"{pointer}.value"))


def build_restriction(doc: dict, model: CellModel) -> BoxDomain | None:
    raw = doc.get("restriction")
    if raw is None:
        return None
    if raw == "default":
        if model.name != "notch_mimo":
            raise ConfigError("only the notch model has a default restriction",
                              pointer="restriction")
        return notch_restricted_domain(model)
    if not isinstance(raw, list) or len(raw) != model.state_dim:
        raise ConfigError(
            f"restriction must be \"default\" or an array of "
            f"{model.state_dim} per-coordinate objects", pointer="restriction")
    lower, upper, open_lo, open_hi = [], [], [], []
    base = model.sampling_domain
    for i, entry in enumerate(raw):
        pointer = f"restriction[{i}]"
        if entry is None:
            entry = {}
        if not isinstance(entry, dict):
            raise ConfigError("expected an object or null", pointer=pointer)
        _reject_unknown(entry, {"min", "max", "pin", "strict_min", "strict_max"},
                        pointer)
        if "pin" in entry:
            if "min" in entry or "max" in entry:
                raise ConfigError("pin excludes min/max", pointer=pointer)
            val = _number(entry["pin"], f"{pointer}.pin")
            lower.append(val)
            upper.append(val)
            open_lo.append(False)
            open_hi.append(False)
            continue
        lower.append(_number(entry.get("min", base.lower[i]), f"{pointer}.min"))
        upper.append(_number(entry.get("max", base.upper[i]), f"{pointer}.max"))
        open_lo.append(bool(entry.get("strict_min", False)))
        open_hi.append(bool(entry.get("strict_max", False)))
    return BoxDomain(tuple(lower), tuple(upper), open_lower=tuple(open_lo),
                     open_upper=tuple(open_hi),
                     constraints=model.sampling_domain.constraints)


def period_two_candidates(doc: dict, io_dim: int):
    raw = doc.get("period_two_candidates")
    if raw is None:
        return None
    if not isinstance(raw, dict):
        raise ConfigError("expected an object with u1 and u2",
                          pointer="period_two_candidates")
    _reject_unknown(raw, {"u1", "u2"}, "period_two_candidates")
    pair = []
    for key in ("u1", "u2"):
        arr = _need(raw, key, "period_two_candidates")
        if not isinstance(arr, list) or len(arr) != io_dim:
            raise ConfigError(f"must be an array of {io_dim} numbers",
                              pointer=f"period_two_candidates.{key}")
        pair.append(np.array([_number(v, f"period_two_candidates.{key}[{i}]")
                              for i, v in enumerate(arr)]))
    return pair[0], pair[1]


# -- graph sources -----------------------------------------------------------

_GENERATORS = {
    "path": (1, lambda a: path_graph(a[0])),
    "cycle": (1, lambda a: cycle_graph(a[0])),
    "grid": (2, lambda a: grid_graph(a[0], a[1])),
    "complete_bipartite": (2, lambda a: complete_bipartite(a[0], a[1])),
}


def parse_generator(spec: str) -> ContactGraph:
    """Build a graph from a generator spec like ``cycle:4`` or ``grid:2,3``."""
    name, sep, rest = spec.partition(":")
    name = name.strip()
    if name not in _GENERATORS:
        raise ConfigError(f"unknown generator {name!r} "
                          f"(expected one of {sorted(_GENERATORS)})",
                          pointer="generator")
    arity, builder = _GENERATORS[name]
    if not sep:
        raise ConfigError(f"generator {name} needs {arity} integer argument(s), "
                          f"e.g. {name}:{','.join(['4'] * arity)}",
                          pointer="generator")
    try:
        args = [int(part) for part in rest.split(",")]
    except ValueError:
        raise ConfigError(f"generator arguments must be integers, got {rest!r}",
                          pointer="generator")
    if len(args) != arity:
        raise ConfigError(f"generator {name} takes {arity} argument(s), "
                          f"got {len(args)}", pointer="generator")
    return builder(args)


def resolve_graph(graph_file, generator_spec) -> tuple[ContactGraph, dict]:
    """Load the graph from a file or a generator spec; returns it with a
    provenance description for reports."""
    if (graph_file is None) == (generator_spec is None):
        raise ConfigError("exactly one of --graph and --generator is required",
                          pointer="graph")
    if graph_file is not None:
        g = read_edge_list(graph_file)
        return g, {"source": "file", "path": str(graph_file)}
    g = parse_generator(generator_spec)
    return g, {"source": "generator", "spec": generator_spec}


# -- parameter sweeps -----------------------------------------------------------

def set_model_parameter(doc: dict, dotted: str, value: float) -> dict:
    """Copy the document with one scalar model parameter replaced.

    The path is relative to the ``model`` object, e.g. ``stages.0.a``,
    ``g.K``, or ``beta``.
    """
    new_doc = copy.deepcopy(doc)
    node = new_doc["model"]
    parts = dotted.split(".")
    trail = "model"
    for part in parts[:-1]:
        trail += f".{part}"
        if isinstance(node, list):
            try:
                node = node[int(part)]
            except (ValueError, IndexError):
                raise ConfigError("bad sweep path segment", pointer=trail)
        elif isinstance(node, dict) and part in node:
            node = node[part]
        else:
            raise ConfigError("bad sweep path segment", pointer=trail)
    leaf = parts[-1]
    trail += f".{leaf}"
    if isinstance(node, list):
        try:
            node[int(leaf)] = value
        except (ValueError, IndexError):
            raise ConfigError("bad sweep path segment", pointer=trail)
    elif isinstance(node, dict) and leaf in node:
        if not isinstance(node[leaf], (int, float)) or isinstance(node[leaf], bool):
            raise ConfigError("sweep target is not a scalar", pointer=trail)
        node[leaf] = value
    else:
        raise ConfigError("bad sweep path segment", pointer=trail)
    return new_doc
