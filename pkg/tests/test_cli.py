import csv
import json
import math

import pytest

from closednet.cli import main
from closednet.config import bundled, bundled_path


def write_cfg(tmp_path, name="tree", **net_changes):
    d = json.loads(bundled_path(name).read_text())
    d["network"].update(net_changes)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(d))
    return path


def small_cfg(tmp_path):
    d = json.loads(bundled_path("shared_hub_erlang2").read_text())
    d["network"]["N_i"] = [50, 50]
    d["sim"]["n_reps"] = 3
    d["grid"] = {"t_max": 2.0, "points": 5}
    d["sim"]["horizon"] = 2.0
    d["analyses"] = ["simulate", "crossings"]
    path = tmp_path / "small.json"
    path.write_text(json.dumps(d))
    return path


def read_csv(path):
    with open(path) as f:
        return list(csv.DictReader(f))


def test_validate_tree_has_two_components(tmp_path, capsys):
    assert main(["validate", "--config", str(bundled_path("tree"))]) == 0
    out = json.loads(capsys.readouterr().out)
    assert len(out["components"]) == 2


def test_validate_row_sum(tmp_path, capsys):
    path = write_cfg(tmp_path, p=[[0.5, 0.4, 0, 0], [0, 0, 0.5, 0.5]])
    assert main(["validate", "--config", str(path)]) == 1
    assert "ROW_NOT_STOCHASTIC" in capsys.readouterr().out


def test_empty_file_is_parse_error(tmp_path):
    path = tmp_path / "empty.json"
    path.write_text("")
    assert main(["validate", "--config", str(path)]) == 2


def test_malformed_json_reports_location(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{"network": {\n  "N_i": [1,]\n}}')
    assert main(["validate", "--config", str(path)]) == 2
    assert "bad.json:2:" in capsys.readouterr().err


def test_missing_file_is_io_error(tmp_path):
    assert main(["validate", "--config", str(tmp_path / "nope.json")]) == 3


def test_unknown_flag_is_parse_error():
    assert main(["simulate", "--bogus"]) == 2


def test_fluid_critical_load_q_is_zero(tmp_path):
    assert main(["fluid", "--config", str(bundled_path("critical_bottleneck")), "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "fluid_curves.csv")
    assert all(float(r["q"]) == 0.0 for r in rows)


def test_fluid_first_row_and_spot_value(tmp_path):
    assert main(["fluid", "--config", str(bundled_path("markov_one_server")), "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "fluid_curves.csv")
    first = rows[0]
    assert first["occ_1"] == "1"
    assert all(float(v) == 0.0 for k, v in first.items() if k not in ("occ_1", "rho_1"))
    assert float(first["rho_1"]) == 0.5
    row = next(r for r in rows if float(r["t"]) == 3.0)
    q = 0.5 * (1 - math.exp(-6.0))
    assert float(row["q"]) == pytest.approx(q, rel=1e-15)
    assert float(row["rho_1"]) == pytest.approx(0.5 * (1 - q), rel=1e-15)
    assert float(row["int_q"]) == pytest.approx(0.5 * (3 + math.expm1(-6.0) / 2), rel=1e-15)


def test_fluid_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    cfg = str(bundled_path("shared_hub_erlang2"))
    assert main(["fluid", "--config", cfg, "--out", str(a)]) == 0
    assert main(["fluid", "--config", cfg, "--out", str(b)]) == 0
    assert (a / "fluid_curves.csv").read_bytes() == (b / "fluid_curves.csv").read_bytes()


def test_fluid_without_bottleneck_fails(tmp_path):
    path = write_cfg(tmp_path, mu=[1.0, 1.0, 1.0, 1.0])
    assert main(["fluid", "--config", str(path), "--out", str(tmp_path)]) == 1


def test_simulate_outputs(tmp_path):
    cfg = small_cfg(tmp_path)
    out = tmp_path / "run"
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    rows = read_csv(out / "trajectories.csv")
    assert len(rows) == 3 * 5
    crossings = read_csv(out / "crossings.csv")
    assert crossings and all(r["identity_holds"] == "1" for r in crossings)
    lines = (out / "predeparture.jsonl").read_text().splitlines()
    assert len(lines) == 3 * 4
    rec = json.loads(lines[0])
    assert len(rec["epochs"]) == len(rec["queue_before"])
    schema = json.loads((out / "schema.json").read_text())
    assert "trajectories.csv" in schema
    summary = json.loads((out / "summary.json").read_text())
    assert summary["n_reps"] == 3 and summary["crossing_identity_failures"] == 0


def test_simulate_is_deterministic_and_seed_sensitive(tmp_path):
    cfg = str(small_cfg(tmp_path))
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert main(["simulate", "--config", cfg, "--out", str(a)]) == 0
    assert main(["simulate", "--config", cfg, "--out", str(b), "--threads", "2"]) == 0
    assert main(["simulate", "--config", cfg, "--out", str(c), "--seed", "99"]) == 0
    for f in ("summary.json", "trajectories.csv", "predeparture.jsonl", "crossings.csv"):
        assert (a / f).read_bytes() == (b / f).read_bytes()
    assert (a / "summary.json").read_bytes() != (c / "summary.json").read_bytes()


def test_reps_override(tmp_path):
    cfg = str(small_cfg(tmp_path))
    out = tmp_path / "r"
    assert main(["simulate", "--config", cfg, "--out", str(out), "--reps", "2"]) == 0
    assert len(read_csv(out / "trajectories.csv")) == 2 * 5


def test_crossings_command(tmp_path):
    out = tmp_path / "x"
    assert main(["crossings", "--config", str(small_cfg(tmp_path)), "--out", str(out)]) == 0
    assert read_csv(out / "crossings.csv")


def test_unknown_check_rejected(tmp_path):
    d = json.loads(bundled_path("tree").read_text())
    d["analyses"] = ["astrology"]
    path = tmp_path / "c.json"
    path.write_text(json.dumps(d))
    assert main(["validate", "--config", str(path)]) == 1


def test_check_needs_parameters(tmp_path):
    d = json.loads(bundled_path("tree").read_text())
    d["analyses"] = [{"check": "theorem1", "t": 3.0}]
    path = tmp_path / "c.json"
    path.write_text(json.dumps(d))
    assert main(["validate", "--config", str(path)]) == 1


def test_check_time_must_be_on_grid(tmp_path):
    d = json.loads(bundled_path("tree").read_text())
    d["analyses"] = [{"check": "corollary2", "t": 3.05}]
    path = tmp_path / "c.json"
    path.write_text(json.dumps(d))
    assert main(["validate", "--config", str(path)]) == 1


def test_verify_fast_checks_pass(tmp_path):
    assert main(["verify", "--only", "11", "12", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["passed"] and [c["number"] for c in rep["criteria"]] == [11, 12]


def test_verify_negative_control_fails(tmp_path):
    code = main(["verify", "--only", "5", "--rho-scale", "1.5", "--out", str(tmp_path)])
    assert code == 1
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["failures"] == [5]
    # far outside sampling noise, not a marginal miss
    assert rep["criteria"][0]["value"] > 3 * rep["criteria"][0]["threshold"]


def test_bundled_scenarios_load():
    for name in ("tree", "full_mesh", "no_common_hub", "shared_hub_erlang2",
                 "markov_one_server", "critical_bottleneck"):
        assert bundled(name).network.k >= 2
