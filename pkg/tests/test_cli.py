import json
import subprocess
import sys

from jsonschema import validate

from latpat.cli import main
from latpat.reporting import (
    ANALYZE_SCHEMA,
    CERTIFY_SCHEMA,
    ENSEMBLE_SCHEMA,
    ERROR_SCHEMA,
    SNAPSHOT_SCHEMA,
)

CASCADE9 = {
    "model": {
        "type": "cascade",
        "gammas": [1.0, 1.0],
        "stages": [
            {"type": "hill", "a": 9.0, "K": 1.0, "p": 2.0,
             "direction": "inhibiting"},
            {"type": "linear", "slope": 1.0},
        ],
    },
}

NOTCH = {
    "model": {
        "type": "notch_mimo",
        "beta": 1.0, "gamma": 1.0, "k": 1.0,
        "g": {"a": 1.0, "K": 1.0, "p": 2.0, "direction": "inhibiting"},
    },
    "restriction": "default",
}

EVEN_CASCADE = {
    "model": {
        "type": "cascade",
        "gammas": [1.0, 1.0],
        "stages": [
            {"type": "hill", "a": 2.0, "K": 1.0, "p": 1.0,
             "direction": "activating"},
            {"type": "hill", "a": 2.0, "K": 1.0, "p": 1.0,
             "direction": "activating"},
        ],
    },
}


def write_model(tmp_path, doc, name="model.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def read_json(path):
    return json.loads(path.read_text())


def test_analyze_cycle4_unstable_with_orbit(tmp_path):
    model = write_model(tmp_path, CASCADE9)
    out = tmp_path / "out"
    assert main(["analyze", "--model", model, "--generator", "cycle:4",
                 "--out", str(out)]) == 0
    report = read_json(out / "report.json")
    validate(report, ANALYZE_SCHEMA)
    assert report["graph"]["bipartite"] is True
    assert report["instability"]["verdict"] == "unstable"
    assert report["orbit"] is not None
    assert report["checkerboard"]["stability"]["verdict"] == "stable"
    assert (out / "summary.txt").exists()


def test_analyze_cycle3_skips_checkerboard(tmp_path):
    model = write_model(tmp_path, CASCADE9)
    out = tmp_path / "out3"
    assert main(["analyze", "--model", model, "--generator", "cycle:3",
                 "--out", str(out)]) == 0
    report = read_json(out / "report.json")
    assert report["graph"]["bipartite"] is False
    assert abs(report["graph"]["lambda_min"] + 0.5) <= 1e-9
    assert report["orbit"] is None
    assert report["checkerboard"] is None
    assert "not bipartite" in report["orbit_note"]
    assert report["instability"]["verdict"] == "criterion_not_met"


def test_analyze_notch_verifies_supplied_candidates(tmp_path):
    doc = {
        "model": {
            "type": "notch_mimo",
            "beta": 10.0, "gamma": 1.0, "k": 2.0,
            "g": {"a": 10.0, "K": 0.05, "p": 4.0, "direction": "inhibiting"},
        },
        "period_two_candidates": {
            "u1": [7.266090028731130e-10, 2.0],
            "u2": [2.0, 9.99999998546782],
        },
    }
    model = write_model(tmp_path, doc)
    out = tmp_path / "outn"
    assert main(["analyze", "--model", model, "--generator", "grid:2,3",
                 "--out", str(out)]) == 0
    report = read_json(out / "report.json")
    assert report["instability"]["verdict"] == "unstable"
    assert abs(report["orbit"]["rho_product"] - 0.64) <= 1e-6
    assert report["checkerboard"]["stability"]["verdict"] == "stable"


def test_analyze_malformed_config_exit_2(tmp_path, capsys):
    model = tmp_path / "bad.json"
    model.write_text(json.dumps({"model": {"gammas": [1.0]}}))
    code = main(["analyze", "--model", str(model), "--generator", "cycle:4",
                 "--out", str(tmp_path / "o")])
    assert code == 2
    err = json.loads(capsys.readouterr().err)
    validate(err, ERROR_SCHEMA)
    assert err["pointer"] == "model.type"


def test_analyze_unknown_key_exit_2(tmp_path, capsys):
    doc = json.loads(json.dumps(CASCADE9))
    doc["model"]["extra"] = 1
    code = main(["analyze", "--model", write_model(tmp_path, doc),
                 "--generator", "cycle:4", "--out", str(tmp_path / "o")])
    assert code == 2
    assert json.loads(capsys.readouterr().err)["pointer"] == "model.extra"


def test_analyze_requires_exactly_one_graph_source(tmp_path, capsys):
    model = write_model(tmp_path, CASCADE9)
    assert main(["analyze", "--model", model, "--out", str(tmp_path / "o")]) == 2
    capsys.readouterr()
    assert main(["analyze", "--model", model, "--generator", "cycle:4",
                 "--graph", "x.txt", "--out", str(tmp_path / "o")]) == 2


def test_analyze_reads_graph_file(tmp_path):
    model = write_model(tmp_path, CASCADE9)
    graph = tmp_path / "g.txt"
    graph.write_text("# 4-cycle\n4 4\n0 1\n1 2\n2 3\n0 3\n")
    out = tmp_path / "gout"
    assert main(["analyze", "--model", model, "--graph", str(graph),
                 "--out", str(out)]) == 0
    assert read_json(out / "report.json")["graph"]["bipartite"] is True


def test_certify_notch_exit_0(tmp_path):
    model = write_model(tmp_path, NOTCH)
    out = tmp_path / "cert"
    assert main(["certify", "--model", model, "--out", str(out)]) == 0
    body = read_json(out / "certificate.json")
    validate(body, CERTIFY_SCHEMA)
    cert = body["certificate"]
    assert cert["monotonicity"]["epsilon"] == [1, 1, 0]
    assert cert["monotonicity"]["delta"] == [0, 0]
    assert cert["monotonicity"]["mu"] == [1, 1]
    assert cert["strong_interaction"]["chosen_channel"] == 0
    edges = {tuple(e[:2]) for e in cert["strong_interaction"]["incidence_edges"]}
    assert edges == {("u0", "x0"), ("u1", "x1"), ("x0", "x1"), ("x0", "y1"),
                     ("x1", "y0")}


def test_certify_even_cascade_exit_4(tmp_path):
    model = write_model(tmp_path, EVEN_CASCADE)
    out = tmp_path / "cert4"
    assert main(["certify", "--model", model, "--out", str(out)]) == 4
    cert = read_json(out / "certificate.json")["certificate"]
    assert cert["certified"] is False
    assert "GaugeViolation" in cert["monotonicity"]["failure"]


def test_certify_constant_stage_notes_reachability_failure(tmp_path):
    doc = {
        "model": {
            "type": "cascade",
            "gammas": [1.0, 1.0],
            "stages": [
                {"type": "hill", "a": 2.0, "K": 1.0, "p": 1.0,
                 "direction": "inhibiting"},
                {"type": "constant", "value": 1.0},
            ],
        },
    }
    out = tmp_path / "certc"
    assert main(["certify", "--model", write_model(tmp_path, doc),
                 "--out", str(out)]) == 0
    cert = read_json(out / "certificate.json")["certificate"]
    assert cert["monotonicity"]["certified"] is True
    assert cert["strong_interaction"]["chosen_channel"] is None


def test_simulate_unstable_classifies_checkerboard(tmp_path):
    model = write_model(tmp_path, CASCADE9)
    out = tmp_path / "sim"
    assert main(["simulate", "--model", model, "--generator", "cycle:4",
                 "--out", str(out), "--horizon", "150", "--seed", "3"]) == 0
    snap = read_json(out / "snapshot.json")
    validate(snap, SNAPSHOT_SCHEMA)
    assert snap["classification"] in ("checkerboard_a", "checkerboard_b")
    assert snap["converged"] is True
    lines = (out / "trajectory.csv").read_text().splitlines()
    assert lines[0] == "time,cell,x0,x1"
    assert len((out / "snapshot.csv").read_text().splitlines()) == 5


def test_simulate_deterministic_outputs(tmp_path):
    model = write_model(tmp_path, CASCADE9)
    out_a = tmp_path / "da"
    out_b = tmp_path / "db"
    for out in (out_a, out_b):
        assert main(["simulate", "--model", model, "--generator", "cycle:4",
                     "--out", str(out), "--horizon", "120", "--seed", "9"]) == 0
    for name in ("trajectory.csv", "snapshot.csv", "snapshot.json"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes()


def test_simulate_ensemble(tmp_path):
    model = write_model(tmp_path, NOTCH)
    out = tmp_path / "ens"
    assert main(["simulate", "--model", model, "--generator", "grid:2,3",
                 "--out", str(out), "--trials", "4", "--horizon", "80",
                 "--seed", "2"]) == 0
    stats = read_json(out / "ensemble.json")
    validate(stats, ENSEMBLE_SCHEMA)
    assert stats["trials"] == 4
    assert stats["histogram"].get("homogeneous") == 4


def test_sweep_brackets_instability_crossing(tmp_path):
    model = write_model(tmp_path, CASCADE9)
    out = tmp_path / "sweep"
    # 8 points over [1, 3] keep the exact bifurcation value a = 2 off the grid
    assert main(["sweep", "--model", model, "--generator", "cycle:4",
                 "--out", str(out), "--sweep", "stages.0.a=1:3:8"]) == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    header = lines[0].split(",")
    rows = [dict(zip(header, line.split(","))) for line in lines[1:]]
    assert len(rows) == 8
    rhos = [float(r["rho"]) for r in rows]
    assert rhos == sorted(rhos)   # monotone in the swept amplitude
    unstable = [int(r["unstable"]) for r in rows]
    assert unstable[0] == 0 and unstable[-1] == 1
    flip = unstable.index(1)
    # the instability crossing is bracketed by a sign change of rho - 1
    assert rhos[flip - 1] < 1.0 < rhos[flip]
    assert rows[flip]["orbit_found"] == "1"
    assert rows[0]["orbit_u1"] == ""


def test_sweep_single_point_and_non_bipartite(tmp_path):
    model = write_model(tmp_path, CASCADE9)
    out1 = tmp_path / "sw1"
    assert main(["sweep", "--model", model, "--generator", "cycle:4",
                 "--out", str(out1), "--sweep", "stages.0.a=9:9:1"]) == 0
    assert len((out1 / "sweep.csv").read_text().splitlines()) == 2
    out2 = tmp_path / "sw2"
    assert main(["sweep", "--model", model, "--generator", "cycle:3",
                 "--out", str(out2), "--sweep", "stages.0.a=1:9:3"]) == 0
    lines = (out2 / "sweep.csv").read_text().splitlines()
    header = lines[0].split(",")
    for line in lines[1:]:
        row = dict(zip(header, line.split(",")))
        assert row["orbit_found"] == ""     # non-bipartite: orbit columns empty
        assert row["criterion"] != ""


def test_tolerance_override_rejects_unknown_key(tmp_path, capsys):
    model = write_model(tmp_path, CASCADE9)
    code = main(["analyze", "--model", model, "--generator", "cycle:4",
                 "--out", str(tmp_path / "o"), "--tol", "nope=1"])
    assert code == 2


def test_json_syntax_error_reports_line(tmp_path, capsys):
    bad = tmp_path / "syntax.json"
    bad.write_text('{\n  "model": {\n')
    code = main(["analyze", "--model", str(bad), "--generator", "cycle:4",
                 "--out", str(tmp_path / "o")])
    assert code == 2
    err = json.loads(capsys.readouterr().err)
    assert "line" in err["message"]


def test_numerical_failure_exits_3(tmp_path, capsys):
    doc = json.loads(json.dumps(NOTCH))
    del doc["restriction"]
    doc["period_two_candidates"] = {"u1": [0.9, 0.9], "u2": [0.1, 0.1]}
    code = main(["analyze", "--model", write_model(tmp_path, doc),
                 "--generator", "cycle:4", "--out", str(tmp_path / "o")])
    assert code == 3
    err = json.loads(capsys.readouterr().err)
    validate(err, ERROR_SCHEMA)
    assert err["error"] == "FixedPointIterationError"


def test_console_entry_point_runs():
    proc = subprocess.run([sys.executable, "-m", "latpat.cli", "--version"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.strip() == "0.1.0"


def test_shipped_configs_are_valid():
    from pathlib import Path

    from latpat.config import build_model, build_restriction, load_model_file

    config_dir = Path(__file__).resolve().parent.parent / "configs"
    paths = sorted(config_dir.glob("*.json"))
    assert paths, "shipped configs missing"
    for path in paths:
        doc = load_model_file(path)
        model = build_model(doc)
        build_restriction(doc, model)


def test_reports_embed_tool_and_config(tmp_path):
    model = write_model(tmp_path, CASCADE9)
    out = tmp_path / "prov"
    assert main(["analyze", "--model", model, "--generator", "cycle:4",
                 "--out", str(out), "--seed", "5"]) == 0
    report = read_json(out / "report.json")
    assert report["tool"] == {"name": "latpat", "version": "0.1.0"}
    assert report["config"]["seed"] == 5
    assert report["config"]["model"]["model"]["type"] == "cascade"
    assert report["config"]["tolerances"]["fp_tol"] == 1e-10
