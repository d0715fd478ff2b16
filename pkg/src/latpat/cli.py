"""Command-line front end: analyze, certify, simulate, sweep.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 certification failure. Errors also land as JSON on stderr. All outputs
are deterministic under a fixed seed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    build_checkerboard,
    checkerboard_stability_test,
    find_homogeneous_fixed_point,
    find_period_two,
    instability_test,
    verify_period_two,
)
from .config import (
    build_model,
    build_restriction,
    load_model_file,
    period_two_candidates,
    resolve_graph,
    set_model_parameter,
)
from .errors import CertificationError, ConfigError, LatpatError
from .graphs import bipartition, spectrum
from .models import Characteristic
from .monotone import assumption_report
from .reporting import (
    ANALYZE_SCHEMA,
    CERTIFY_SCHEMA,
    ENSEMBLE_SCHEMA,
    SNAPSHOT_SCHEMA,
    SWEEP_COLUMNS,
    assumption_dict,
    format_float,
    jsonable,
    tool_stamp,
    verdict_dict,
    write_csv,
    write_json,
)
from .sim import PatternReferences, ensemble_converge, integrate, perturbed_homogeneous_start
from .tolerances import Tolerances

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_CERTIFICATION = 4


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        _emit_error(exc)
        return EXIT_CONFIG
    except CertificationError as exc:
        _emit_error(exc)
        return EXIT_CERTIFICATION
    except LatpatError as exc:
        _emit_error(exc)
        return EXIT_NUMERIC


def _emit_error(exc: Exception) -> None:
    doc = {"error": type(exc).__name__, "message": str(exc)}
    pointer = getattr(exc, "pointer", None)
    if pointer is not None:
        doc["pointer"] = pointer
    sys.stderr.write(json.dumps(doc, sort_keys=True) + "\n")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="latpat",
        description="Lateral-inhibition pattern analysis on cell-contact graphs",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, graph=True):
        p.add_argument("--model", required=True, help="model config JSON file")
        if graph:
            p.add_argument("--graph", help="edge-list file (first line 'N E')")
            p.add_argument("--generator",
                           help="generator spec, e.g. cycle:4 or grid:2,3")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--tol", action="append", default=[], metavar="KEY=VAL",
                       help="tolerance override (repeatable)")

    p_analyze = sub.add_parser("analyze", help="spectrum, fixed point, verdicts, "
                                               "orbit, checkerboards")
    common(p_analyze)
    p_analyze.set_defaults(func=cmd_analyze)

    p_certify = sub.add_parser("certify", help="monotonicity and interaction "
                                               "structure certificates")
    common(p_certify, graph=False)
    p_certify.add_argument("--samples", type=int, default=4096)
    p_certify.set_defaults(func=cmd_certify)

    p_sim = sub.add_parser("simulate", help="integrate the network (single "
                                            "run or ensemble)")
    common(p_sim)
    p_sim.add_argument("--horizon", type=float, default=200.0)
    p_sim.add_argument("--dt", type=float, default=0.01)
    p_sim.add_argument("--method", choices=["rk4", "rkf45"], default="rk4")
    p_sim.add_argument("--delta", type=float, default=1e-4,
                       help="perturbation size for the single-run start")
    p_sim.add_argument("--trials", type=int, default=0,
                       help="ensemble size (0 = single perturbed run)")
    p_sim.set_defaults(func=cmd_simulate)

    p_sweep = sub.add_parser("sweep", help="criterion values along one model "
                                           "parameter")
    common(p_sweep)
    p_sweep.add_argument("--sweep", required=True, metavar="KEY=LO:HI:STEPS",
                         help="model parameter path and range, e.g. "
                              "stages.0.a=1:12:23")
    p_sweep.set_defaults(func=cmd_sweep)
    return parser


def _setup(args, need_graph=True):
    tol = Tolerances.from_pairs(args.tol)
    doc = load_model_file(args.model)
    model = build_model(doc)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    graph = graph_desc = None
    if need_graph:
        graph, graph_desc = resolve_graph(args.graph, args.generator)
    resolved = {
        "model": doc,
        "graph": graph_desc,
        "seed": args.seed,
        "tolerances": jsonable(tol),
    }
    return tol, doc, model, graph, out_dir, resolved


# -- analyze -------------------------------------------------------------------

def _orbit_and_checkerboard(graph, bp, c, hs, doc, tol):
    """Period-two orbit and checkerboard section shared by analyze/simulate."""
    orbit = None
    note = None
    if bp is None:
        note = "graph is not bipartite; checkerboard analysis skipped"
    elif c.model.io_dim == 1:
        orbit = find_period_two(c, tol, hs=hs)
        if orbit is None:
            note = "no period-two orbit found on [0, T(0)]"
    else:
        candidates = period_two_candidates(doc, c.model.io_dim)
        if candidates is None:
            note = ("multi-input orbit search is not bracketed; supply "
                    "period_two_candidates to verify a pair")
        else:
            orbit = verify_period_two(c, candidates[0], candidates[1], tol,
                                      refine=True)
    checkerboard = stability = None
    if orbit is not None:
        checkerboard = build_checkerboard(graph, bp, orbit, c, tol)
        stability = checkerboard_stability_test(orbit, spectrum(graph), tol)
    return orbit, note, checkerboard, stability


def cmd_analyze(args) -> int:
    tol, doc, model, graph, out_dir, resolved = _setup(args)
    spec = spectrum(graph)
    bp = bipartition(graph)
    c = Characteristic(model, tol)
    hs = find_homogeneous_fixed_point(c, tol)
    verdict = instability_test(spec, hs, tol)
    orbit, note, checkerboard, cb_verdict = _orbit_and_checkerboard(
        graph, bp, c, hs, doc, tol)

    report = {
        "tool": tool_stamp(),
        "config": resolved,
        "graph": {
            "nodes": graph.node_count,
            "edges": graph.edge_count,
            "bipartite": bp is not None,
            "sets": None if bp is None else [list(bp.set_a), list(bp.set_b)],
            "eigenvalues": jsonable(spec.eigenvalues),
            "lambda_min": spec.lambda_min,
        },
        "homogeneous": {
            "u_star": jsonable(hs.u_star),
            "x_star": jsonable(hs.x_star),
            "rho": hs.rho,
            "gain": jsonable(hs.gain_at_star),
        },
        "instability": verdict_dict(verdict),
        "orbit": None if orbit is None else {
            "u1": jsonable(orbit.u1),
            "u2": jsonable(orbit.u2),
            "x1": jsonable(orbit.x1),
            "x2": jsonable(orbit.x2),
            "rho_product": orbit.rho_product,
        },
        "orbit_note": note,
        "checkerboard": None if checkerboard is None else {
            "residual_a": checkerboard.residual_a,
            "residual_b": checkerboard.residual_b,
            "states_a": jsonable(checkerboard.states_a),
            "states_b": jsonable(checkerboard.states_b),
            "stability": verdict_dict(cb_verdict),
        },
    }
    write_json(out_dir / "report.json", report, schema=ANALYZE_SCHEMA)
    (out_dir / "summary.txt").write_text(_analyze_summary(report))
    return EXIT_OK


def _analyze_summary(report: dict) -> str:
    g = report["graph"]
    h = report["homogeneous"]
    ins = report["instability"]
    lines = [
        f"latpat analyze v{report['tool']['version']}",
        f"graph: {g['nodes']} nodes, {g['edges']} edges, "
        f"{'bipartite' if g['bipartite'] else 'not bipartite'}, "
        f"lambda_min = {format_float(g['lambda_min'])}",
        f"fixed point: u* = {h['u_star']}, rho(T'(u*)) = {format_float(h['rho'])}",
        f"instability criterion: {format_float(ins['criterion'])} vs -1 -> "
        f"{ins['verdict']} (margin {format_float(ins['margin'])}, "
        f"numerically unstable: {ins['numerically_unstable']})",
    ]
    if report["orbit"] is not None:
        orbit = report["orbit"]
        lines.append(f"period-two orbit: u1 = {orbit['u1']}, u2 = {orbit['u2']}, "
                     f"rho(T'(u1)T'(u2)) = {format_float(orbit['rho_product'])}")
    if report["orbit_note"]:
        lines.append(f"note: {report['orbit_note']}")
    if report["checkerboard"] is not None:
        cb = report["checkerboard"]
        lines.append(f"checkerboard residuals: {format_float(cb['residual_a'])} / "
                     f"{format_float(cb['residual_b'])}; "
                     f"stability: {cb['stability']['verdict']}")
    return "\n".join(lines) + "\n"


# -- certify -------------------------------------------------------------------

def cmd_certify(args) -> int:
    tol, doc, model, _graph, out_dir, resolved = _setup(args, need_graph=False)
    restriction = build_restriction(doc, model)
    report = assumption_report(model, restriction=restriction,
                               samples=args.samples, seed=args.seed, tol=tol)
    body = {
        "tool": tool_stamp(),
        "config": resolved,
        "certificate": assumption_dict(report),
    }
    write_json(out_dir / "certificate.json", body, schema=CERTIFY_SCHEMA)
    cert = body["certificate"]
    lines = [
        f"latpat certify v{__version__}",
        f"model: {cert['model']}",
        f"monotonicity certified: {cert['monotonicity']['certified']}"
        + (f" (epsilon={cert['monotonicity'].get('epsilon')}, "
           f"mode={cert['monotonicity'].get('mode')})"
           if cert["monotonicity"]["certified"] else
           f" ({cert['monotonicity']['failure']})"),
        f"strong interaction channel: {cert['strong_interaction']['chosen_channel']}",
    ]
    (out_dir / "summary.txt").write_text("\n".join(lines) + "\n")
    return EXIT_OK if cert["certified"] else EXIT_CERTIFICATION


# -- simulate -------------------------------------------------------------------

def _references(graph, bp, c, hs, doc, tol):
    refs = PatternReferences(
        homogeneous=np.tile(hs.x_star, (graph.node_count, 1)))
    try:
        orbit, _note, checkerboard, _verdict = _orbit_and_checkerboard(
            graph, bp, c, hs, doc, tol)
    except LatpatError:
        return refs
    if checkerboard is None:
        return refs
    return PatternReferences(homogeneous=refs.homogeneous,
                             checkerboard_a=checkerboard.states_a,
                             checkerboard_b=checkerboard.states_b)


def cmd_simulate(args) -> int:
    tol, doc, model, graph, out_dir, resolved = _setup(args)
    resolved["options"] = {"horizon": args.horizon, "dt": args.dt,
                           "method": args.method, "delta": args.delta,
                           "trials": args.trials}
    spec = spectrum(graph)
    bp = bipartition(graph)
    c = Characteristic(model, tol)
    hs = find_homogeneous_fixed_point(c, tol)
    references = _references(graph, bp, c, hs, doc, tol)

    if args.trials > 0:
        stats = ensemble_converge(graph, model, trials=args.trials,
                                  seed=args.seed, horizon=args.horizon,
                                  method=args.method, dt=args.dt,
                                  references=references, tol=tol)
        write_json(out_dir / "ensemble.json", {
            "tool": tool_stamp(),
            "config": resolved,
            "trials": stats.trials,
            "converged": stats.converged,
            "fraction_converged": stats.fraction_converged,
            "histogram": stats.histogram,
            "max_residual": stats.max_residual,
            "failures": [list(f) for f in stats.failures],
        }, schema=ENSEMBLE_SCHEMA)
        return EXIT_OK

    x0 = perturbed_homogeneous_start(spec, hs.x_star, delta=args.delta)
    result = integrate(graph, model, x0, horizon=args.horizon,
                       method=args.method, dt=args.dt, references=references,
                       tol=tol)
    _write_trajectory(out_dir / "trajectory.csv", model, result)
    _write_snapshot(out_dir / "snapshot.csv", model, result.final_state)
    write_json(out_dir / "snapshot.json", {
        "tool": tool_stamp(),
        "config": resolved,
        "classification": result.classification,
        "distance": result.distance,
        "converged": result.converged,
        "residual": result.residual,
        "final_time": result.final_time,
        "steps": result.steps,
    }, schema=SNAPSHOT_SCHEMA)
    return EXIT_OK


def _write_trajectory(path, model, result) -> None:
    header = ["time", "cell"] + [f"x{j}" for j in range(model.state_dim)]
    rows = []
    for t, state in zip(result.times, result.states):
        for cell in range(state.shape[0]):
            rows.append([float(t), cell] + [float(v) for v in state[cell]])
    write_csv(path, header, rows)


def _write_snapshot(path, model, final_state) -> None:
    header = ["cell"] + [f"x{j}" for j in range(model.state_dim)]
    rows = [[cell] + [float(v) for v in final_state[cell]]
            for cell in range(final_state.shape[0])]
    write_csv(path, header, rows)


# -- sweep ---------------------------------------------------------------------

def _parse_sweep(raw: str):
    key, sep, rng = raw.partition("=")
    if not sep:
        raise ConfigError("expected KEY=LO:HI:STEPS", pointer="sweep")
    parts = rng.split(":")
    if len(parts) != 3:
        raise ConfigError("expected KEY=LO:HI:STEPS", pointer="sweep")
    try:
        lo, hi = float(parts[0]), float(parts[1])
        steps = int(parts[2])
    except ValueError:
        raise ConfigError(f"bad sweep range {rng!r}", pointer="sweep")
    if steps < 1:
        raise ConfigError("sweep needs at least one step", pointer="sweep")
    return key.strip(), np.linspace(lo, hi, steps)


def cmd_sweep(args) -> int:
    tol, doc, _model, graph, out_dir, resolved = _setup(args)
    key, values = _parse_sweep(args.sweep)
    resolved["options"] = {"sweep": args.sweep}
    spec = spectrum(graph)
    bp = bipartition(graph)
    rows = []
    for value in values:
        swept = set_model_parameter(doc, key, float(value))
        model = build_model(swept)
        c = Characteristic(model, tol)
        hs = find_homogeneous_fixed_point(c, tol)
        criterion = spec.lambda_min * hs.rho
        row = {
            "value": float(value),
            "u_star": ";".join(format_float(v) for v in hs.u_star),
            "rho": hs.rho,
            "lambda_min": spec.lambda_min,
            "criterion": criterion,
            "unstable": int(criterion < -1.0 - tol.margin_tol),
            "orbit_found": "",
            "orbit_u1": "",
            "orbit_u2": "",
            "rho_product": "",
            "checkerboard_stable": "",
        }
        if bp is not None and model.io_dim == 1:
            orbit = find_period_two(c, tol, hs=hs)
            row["orbit_found"] = int(orbit is not None)
            if orbit is not None:
                row["orbit_u1"] = format_float(orbit.u1[0])
                row["orbit_u2"] = format_float(orbit.u2[0])
                row["rho_product"] = format_float(orbit.rho_product)
                verdict = checkerboard_stability_test(orbit, tol=tol)
                row["checkerboard_stable"] = int(verdict.verdict == "stable")
        rows.append([row[col] for col in SWEEP_COLUMNS])
    write_csv(out_dir / "sweep.csv", SWEEP_COLUMNS, rows)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
