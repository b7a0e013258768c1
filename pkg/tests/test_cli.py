"""Command-line behavior: exit codes, run-directory contract, determinism."""

import json
import os

import numpy as np
import pytest

from satsync.cli import main

SHORT_SCENARIO = {
    "name": "clidemo",
    "model": {"preset": "example1"},
    "sim": {"dt": 0.01, "horizon": 6.0},
    "analysis": {"tol": 0.01, "window": 2.0},
}


@pytest.fixture
def scenario_file(tmp_path):
    path = tmp_path / "sc.json"
    path.write_text(json.dumps(SHORT_SCENARIO))
    return str(path)


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def test_simulate_writes_exact_run_directory(scenario_file, tmp_path):
    out = tmp_path / "run"
    assert main(["simulate", "--scenario", scenario_file, "--out", str(out)]) == 0
    names = sorted(os.listdir(out))
    assert names == ["clidemo.csv", "manifest.json", "scenario.json", "summary.json"]
    manifest = read_json(out / "manifest.json")
    assert manifest["format"] == "satsync-manifest"
    # the manifest lists exactly the other files in the directory
    assert sorted(manifest["run"]["outputs"] + ["manifest.json"]) == names
    assert "clidemo" in manifest["run"]["results"]
    assert isinstance(manifest["wall_clock_s"], float)


def test_simulate_rerun_is_byte_identical(scenario_file, tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", "--scenario", scenario_file, "--out", str(out1)]) == 0
    assert main(["simulate", "--scenario", scenario_file, "--out", str(out2)]) == 0
    for name in ("clidemo.csv", "scenario.json", "summary.json"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
    # wall clock may differ; the run section must not
    m1, m2 = read_json(out1 / "manifest.json"), read_json(out2 / "manifest.json")
    assert m1["run"] == m2["run"]


def test_simulate_exit_zero_even_without_convergence(scenario_file, tmp_path, capsys):
    # short horizon: completion is success, convergence is data
    rc = main(["simulate", "--scenario", scenario_file, "--out", str(tmp_path / "r")])
    assert rc == 0
    summary = read_json(tmp_path / "r" / "summary.json")
    assert summary["runs"][0]["converged"] is False


def test_simulate_overrides_change_echo(scenario_file, tmp_path):
    out = tmp_path / "r"
    assert main(["simulate", "--scenario", scenario_file, "--out", str(out),
                 "--dt", "0.02", "--rho", "2.0"]) == 0
    echo = read_json(out / "scenario.json")
    assert echo["sim"]["dt"] == 0.02
    assert echo["protocol"]["rho"] == 2.0


def test_verify_passes_good_scenario(scenario_file, capsys):
    assert main(["verify", "--scenario", scenario_file]) == 0
    out = capsys.readouterr().out
    assert "model class: double_integrator" in out
    assert "[pass] rootset_reachable" in out
    assert "verification passed" in out


def test_verify_fails_broken_gains(tmp_path, capsys):
    doc = json.loads(json.dumps(SHORT_SCENARIO))
    doc["protocol"] = {"kind": "P4", "gains": {"k": [[-10, -2]], "f": [[0], [0]]}}
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    assert main(["verify", "--scenario", str(path)]) == 1
    out = capsys.readouterr().out
    assert "[FAIL] f_stabilizes_observer" in out
    assert "verification FAILED" in out


def test_verify_fails_empty_rootset(tmp_path, capsys):
    doc = json.loads(json.dumps(SHORT_SCENARIO))
    doc["graph"] = {"n": 3, "edges": [{"from": 1, "to": 2}, {"from": 2, "to": 3}],
                    "roots": []}
    path = tmp_path / "rootless.json"
    path.write_text(json.dumps(doc))
    assert main(["verify", "--scenario", str(path)]) == 1
    assert "[FAIL] rootset_reachable" in capsys.readouterr().out


def test_synthesize_prints_gains(scenario_file, capsys):
    assert main(["synthesize", "--scenario", scenario_file]) == 0
    out = capsys.readouterr().out
    assert "kind P4" in out
    assert "f =" in out and "k =" in out


def test_sweep_rho_table_and_outputs(scenario_file, tmp_path, capsys):
    out = tmp_path / "sw"
    rc = main(["sweep", "--scenario", scenario_file, "--rho", "1,2",
               "--out", str(out), "--jobs", "2"])
    assert rc == 0
    text = capsys.readouterr().out
    assert "rho=1" in text and "rho=2" in text
    names = sorted(os.listdir(out))
    assert names == ["clidemo-rho1.csv", "clidemo-rho2.csv", "manifest.json",
                     "scenario.json", "summary.json"]


def test_sweep_n_controller_digest_is_size_free(scenario_file, tmp_path, capsys):
    out = tmp_path / "sw"
    rc = main(["sweep", "--scenario", scenario_file, "--n", "2,4",
               "--out", str(out), "--seed", "1"])
    assert rc == 0
    manifest = read_json(out / "manifest.json")
    digests = list(manifest["run"]["sweep"].values())
    assert len(digests) == 2 and digests[0] == digests[1]


def test_sweep_requires_exactly_one_axis(scenario_file, tmp_path):
    with pytest.raises(SystemExit) as err:
        main(["sweep", "--scenario", scenario_file, "--out", str(tmp_path / "x")])
    assert err.value.code == 2
    with pytest.raises(SystemExit) as err:
        main(["sweep", "--scenario", scenario_file, "--rho", "1", "--n", "3",
              "--out", str(tmp_path / "y")])
    assert err.value.code == 2


def test_sweep_empty_axis_is_an_error(scenario_file, tmp_path, capsys):
    rc = main(["sweep", "--scenario", scenario_file, "--rho", "", "--out",
               str(tmp_path / "x")])
    assert rc == 1
    assert "empty" in capsys.readouterr().err


def test_reproduce_unknown_preset_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as err:
        main(["reproduce", "nope", "--out", str(tmp_path / "x")])
    assert err.value.code == 2


def test_reproduce_writes_both_networks(tmp_path, capsys):
    out = tmp_path / "rep"
    # short horizon keeps this fast; nonzero exit reports non-convergence
    rc = main(["reproduce", "example1", "--out", str(out),
               "--horizon", "6", "--dt", "0.01"])
    assert rc == 1
    names = sorted(os.listdir(out))
    assert names == [
        "example1-net10-scenario.json", "example1-net10.csv",
        "example1-net3-scenario.json", "example1-net3.csv",
        "manifest.json", "summary.json",
    ]
    assert "NOT converged" in capsys.readouterr().out
    echo10 = read_json(out / "example1-net10-scenario.json")
    assert echo10["graph"]["n"] == 10


def test_missing_scenario_file_is_runtime_error(tmp_path, capsys):
    rc = main(["simulate", "--scenario", str(tmp_path / "absent.json"),
               "--out", str(tmp_path / "r")])
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_invalid_scenario_content_is_runtime_error(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"model": {"preset": "example1"}, "sim": {"dt": -1}}))
    rc = main(["simulate", "--scenario", str(path), "--out", str(tmp_path / "r")])
    assert rc == 1
    assert "sim.dt" in capsys.readouterr().err
