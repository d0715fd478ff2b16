"""Report assembly, JSON schemas, and deterministic file writers.

All outputs are plain JSON/CSV so regression runs can be diffed byte for
byte: keys are sorted, floats are written with round-trip repr, and nothing
time- or host-dependent is embedded.
"""

from __future__ import annotations

import csv
import dataclasses
import json
from pathlib import Path

import numpy as np
from jsonschema import validate as _validate_schema

from . import __version__ as _version
from .analysis import StabilityVerdict
from .errors import LatpatError
from .monotone import AssumptionReport

__all__ = [
    "jsonable", "write_json", "write_csv", "validate_report",
    "tool_stamp", "verdict_dict", "assumption_dict",
    "ANALYZE_SCHEMA", "CERTIFY_SCHEMA", "SNAPSHOT_SCHEMA", "ENSEMBLE_SCHEMA",
    "SWEEP_COLUMNS", "ERROR_SCHEMA",
]


def jsonable(value):
    """Recursively convert numpy scalars/arrays and dataclasses to JSON types."""
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        if np.iscomplexobj(value):
            return [{"re": float(v.real), "im": float(v.imag)} for v in value.ravel()]
        return [jsonable(v) for v in value.tolist()]
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {k: jsonable(v) for k, v in dataclasses.asdict(value).items()}
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, float) and not np.isfinite(value):
        return repr(value)   # "inf"/"nan" are not valid JSON numbers
    return value


def tool_stamp() -> dict:
    return {"name": "latpat", "version": _version}


def write_json(path, doc: dict, schema: dict | None = None) -> None:
    doc = jsonable(doc)
    if schema is not None:
        validate_report(doc, schema)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def format_float(value) -> str:
    return repr(float(value))


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_float(v) if isinstance(v, (float, np.floating))
                             else v for v in row])


def validate_report(doc: dict, schema: dict) -> None:
    try:
        _validate_schema(doc, schema)
    except Exception as exc:   # jsonschema.ValidationError
        raise LatpatError(f"report failed schema validation: {exc}") from exc


def verdict_dict(verdict: StabilityVerdict, include_modes: bool = True) -> dict:
    doc = {
        "criterion": verdict.criterion,
        "threshold": verdict.threshold,
        "verdict": verdict.verdict,
        "margin": verdict.margin,
        "numerically_unstable": verdict.numerically_unstable,
    }
    if include_modes:
        doc["mode_table"] = [
            {"mode_value": row.mode_value, "max_real": row.max_real,
             "eigenvalues": jsonable(row.eigenvalues)}
            for row in verdict.mode_table
        ]
    return doc


def assumption_dict(report: AssumptionReport) -> dict:
    doc = {
        "model": report.model_name,
        "stability_evidence": jsonable(report.stability),
        "monotonicity": {
            "certified": report.monotonicity_certified,
            "failure": report.sign_pattern_failure,
        },
        "strong_interaction": {
            "channels": [jsonable(c) for c in report.channels],
            "chosen_channel": report.chosen_channel,
            "failure": report.incidence_failure,
            "certified": report.strong_interaction_certified,
        },
        "certified": report.monotonicity_certified,
    }
    if report.sign_pattern is not None:
        doc["monotonicity"].update({
            "epsilon": list(report.sign_pattern.epsilon),
            "delta": list(report.sign_pattern.delta),
            "mu": list(report.sign_pattern.mu),
            "mode": report.sign_pattern.mode,
            "sample_count": report.sign_pattern.sample_count,
        })
    if report.incidence is not None:
        doc["strong_interaction"]["incidence_edges"] = [
            list(edge) for edge in report.incidence.edges]
    return doc


# -- schemas -------------------------------------------------------------------

_NUMBER = {"type": "number"}
_STRING = {"type": "string"}
_BOOL = {"type": "boolean"}
_TOOL = {
    "type": "object",
    "required": ["name", "version"],
    "properties": {"name": _STRING, "version": _STRING},
}
_VERDICT = {
    "type": "object",
    "required": ["criterion", "threshold", "verdict", "margin"],
    "properties": {
        "criterion": _NUMBER,
        "threshold": _NUMBER,
        "verdict": {"enum": ["unstable", "stable", "criterion_not_met",
                             "inconclusive"]},
        "margin": _NUMBER,
        "numerically_unstable": {"type": ["boolean", "null"]},
        "mode_table": {"type": "array"},
    },
}

ANALYZE_SCHEMA = {
    "type": "object",
    "required": ["tool", "config", "graph", "homogeneous", "instability"],
    "properties": {
        "tool": _TOOL,
        "config": {"type": "object"},
        "graph": {
            "type": "object",
            "required": ["nodes", "edges", "bipartite", "eigenvalues"],
            "properties": {
                "nodes": {"type": "integer"},
                "edges": {"type": "integer"},
                "bipartite": _BOOL,
                "eigenvalues": {"type": "array", "items": _NUMBER},
                "lambda_min": _NUMBER,
            },
        },
        "homogeneous": {
            "type": "object",
            "required": ["u_star", "x_star", "rho"],
            "properties": {
                "u_star": {"type": "array", "items": _NUMBER},
                "x_star": {"type": "array", "items": _NUMBER},
                "rho": _NUMBER,
            },
        },
        "instability": _VERDICT,
        "orbit": {"type": ["object", "null"]},
        "orbit_note": {"type": ["string", "null"]},
        "checkerboard": {"type": ["object", "null"]},
    },
}

CERTIFY_SCHEMA = {
    "type": "object",
    "required": ["tool", "config", "certificate"],
    "properties": {
        "tool": _TOOL,
        "config": {"type": "object"},
        "certificate": {
            "type": "object",
            "required": ["model", "monotonicity", "strong_interaction",
                         "certified"],
            "properties": {
                "model": _STRING,
                "monotonicity": {"type": "object"},
                "strong_interaction": {"type": "object"},
                "certified": _BOOL,
            },
        },
    },
}

SNAPSHOT_SCHEMA = {
    "type": "object",
    "required": ["tool", "config", "converged", "residual", "final_time"],
    "properties": {
        "tool": _TOOL,
        "config": {"type": "object"},
        "classification": {"type": ["string", "null"]},
        "distance": {"type": ["number", "null"]},
        "converged": _BOOL,
        "residual": _NUMBER,
        "final_time": _NUMBER,
        "steps": {"type": "integer"},
    },
}

ENSEMBLE_SCHEMA = {
    "type": "object",
    "required": ["tool", "config", "trials", "converged", "fraction_converged",
                 "histogram"],
    "properties": {
        "tool": _TOOL,
        "config": {"type": "object"},
        "trials": {"type": "integer"},
        "converged": {"type": "integer"},
        "fraction_converged": _NUMBER,
        "histogram": {"type": "object"},
        "max_residual": _NUMBER,
        "failures": {"type": "array"},
    },
}

ERROR_SCHEMA = {
    "type": "object",
    "required": ["error", "message"],
    "properties": {
        "error": _STRING,
        "message": _STRING,
        "pointer": {"type": ["string", "null"]},
    },
}

SWEEP_COLUMNS = [
    "value", "u_star", "rho", "lambda_min", "criterion", "unstable",
    "orbit_found", "orbit_u1", "orbit_u2", "rho_product", "checkerboard_stable",
]
