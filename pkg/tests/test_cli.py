import copy
import hashlib
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from splitstate.cli import main
from splitstate.tomography import correlations_from_csv

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def load(name):
    return json.loads((CONFIGS / f"{name}.json").read_text())


def write_config(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def run(command, config, out, *extra):
    return main([command, "--config", config, "--out", str(out), *extra])


def read_outputs(directory):
    return {p.name: p.read_bytes() for p in sorted(Path(directory).iterdir())}


@pytest.mark.parametrize(
    "n, expected",
    [
        (1, {"total": 1, "real": 1, "imag": 0, "min_output_ports": 1}),
        (3, {"total": 6, "real": 5, "imag": 1, "min_output_ports": 5}),
        (4, {"total": 24, "real": 17, "imag": 7, "min_output_ports": 7}),
    ],
)
def test_params(n, expected, capsys):
    assert main(["params", "--photons", str(n)]) == 0
    assert json.loads(capsys.readouterr().out) == expected


def test_params_rejects_zero(capsys):
    assert main(["params", "--photons", "0"]) == 2


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "splitstate", "params", "--photons", "2"], capture_output=True, text=True, check=False
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["min_output_ports"] == 3


def test_simulate_outputs(tmp_path):
    assert run("simulate", str(CONFIGS / "simulate_3pss_one_layer.json"), tmp_path) == 0
    assert set(read_outputs(tmp_path)) == {"correlations.csv", "measurement_matrix.csv", "state.json", "manifest.json"}
    gamma = correlations_from_csv((tmp_path / "correlations.csv").read_text(), 5, 3)
    assert gamma.shape == (10,) and np.all(gamma >= 0)
    state = json.loads((tmp_path / "state.json").read_text())
    assert state["condition_number"] == pytest.approx(4.1, rel=0.05)
    assert state["measurement"]["convention"] == "free-vector/pair-factor-2"


def test_hom_simulation(tmp_path):
    assert run("simulate", str(CONFIGS / "simulate_hom.json"), tmp_path) == 0
    gamma = correlations_from_csv((tmp_path / "correlations.csv").read_text(), 2, 2)
    assert abs(gamma[0]) < 1e-12


def test_simulate_then_reconstruct(tmp_path):
    sim = tmp_path / "sim"
    assert run("simulate", str(CONFIGS / "simulate_3pss_one_layer.json"), sim) == 0
    cfg = load("reconstruct_3pss_one_layer")
    cfg["correlations_csv"] = str(sim / "correlations.csv")
    rec = tmp_path / "rec"
    assert run("reconstruct", write_config(tmp_path, cfg), rec) == 0
    doc = json.loads((rec / "reconstruction.json").read_text())
    assert doc["fidelity"] == pytest.approx(1.0, abs=1e-8)
    expected = json.loads((sim / "state.json").read_text())["free_vector"]
    assert np.allclose(doc["free_vector"], expected, atol=1e-10)


def test_reconstruct_inline_correlations(tmp_path):
    sim = tmp_path / "sim"
    run("simulate", str(CONFIGS / "simulate_3pss_one_layer.json"), sim)
    gamma = correlations_from_csv((sim / "correlations.csv").read_text(), 5, 3)
    cfg = load("reconstruct_3pss_one_layer")
    del cfg["correlations_csv"], cfg["truth"]
    cfg["correlations"] = gamma.tolist()
    assert run("reconstruct", write_config(tmp_path, cfg), tmp_path / "rec") == 0
    cfg["correlations"] = gamma.tolist()[:5]
    assert run("reconstruct", write_config(tmp_path, cfg), tmp_path / "bad") == 2


def test_design_outputs_and_rerun_is_identical(tmp_path):
    cfg = load("design_3pss_one_layer")
    cfg["starts"] = 2
    config = write_config(tmp_path, cfg)
    assert run("design", config, tmp_path / "a") == 0
    assert run("design", config, tmp_path / "b") == 0
    first, second = read_outputs(tmp_path / "a"), read_outputs(tmp_path / "b")
    assert set(first) == {"design.json", "circuit.json", "manifest.json"}
    assert first == second


def test_seed_override_changes_design(tmp_path):
    cfg = load("design_3pss_one_layer")
    cfg["starts"] = 1
    config = write_config(tmp_path, cfg)
    run("design", config, tmp_path / "a")
    run("design", config, tmp_path / "b", "--seed", "7")
    manifest = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert manifest["seed"] == 7
    assert (tmp_path / "a" / "design.json").read_bytes() != (tmp_path / "b" / "design.json").read_bytes()


def test_manifest_contents(tmp_path):
    config = str(CONFIGS / "simulate_3pss_one_layer.json")
    run("simulate", config, tmp_path)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["command"] == "simulate"
    assert manifest["config"] == load("simulate_3pss_one_layer")
    canonical = json.dumps(manifest["config"], sort_keys=True, separators=(",", ":"))
    assert manifest["config_sha256"] == hashlib.sha256(canonical.encode()).hexdigest()
    assert manifest["outputs"] == ["correlations.csv", "measurement_matrix.csv", "state.json"]
    assert {"splitstate", "numpy", "python"} <= set(manifest["versions"])


def test_sweep_outputs(tmp_path):
    cfg = load("sweep_2pss")
    cfg.update(starts=2, lengths=[0.0, 0.5, 1.0])
    assert run("sweep", write_config(tmp_path, cfg), tmp_path / "out") == 0
    rows = json.loads((tmp_path / "out" / "sweep.json").read_text())
    assert [r["total_length"] for r in rows] == [0.0, 0.5, 1.0]
    assert rows[0]["condition_number"] is None and rows[0]["error"]
    assert rows[2]["condition_number"] > 2.0


def test_noise_and_tolerance_outputs(tmp_path):
    noise = load("noise_3pss_one_layer")
    noise["trials"] = 20
    assert run("noise", write_config(tmp_path, noise, "n.json"), tmp_path / "noise") == 0
    summary = json.loads((tmp_path / "noise" / "summary.json").read_text())
    assert summary["trials"] == 20 and 0.9 < summary["mean"] <= 1.0
    tol = load("tolerance_3pss_one_layer")
    tol["trials"] = 10
    assert run("tolerance", write_config(tmp_path, tol, "t.json"), tmp_path / "tol") == 0
    lines = (tmp_path / "tol" / "summary.csv").read_text().splitlines()
    assert len(lines) == 7


def test_threads_do_not_change_outputs(tmp_path):
    tol = load("tolerance_3pss_one_layer")
    tol["trials"] = 12
    config = write_config(tmp_path, tol)
    run("tolerance", config, tmp_path / "a")
    run("tolerance", config, tmp_path / "b", "--threads", "3")
    assert read_outputs(tmp_path / "a") == read_outputs(tmp_path / "b")


@pytest.mark.parametrize(
    "mutate",
    [
        lambda c: c.update(unexpected=1),
        lambda c: c.pop("circuit"),
        lambda c: c["circuit"].update(m="five"),
        lambda c: c["state"].update(overlaps=[[[1, 0], [2, 0]], [[2, 0], [1, 0]]]),
    ],
)
def test_invalid_configs_exit_2(tmp_path, mutate):
    cfg = copy.deepcopy(load("simulate_3pss_one_layer"))
    mutate(cfg)
    assert run("simulate", write_config(tmp_path, cfg), tmp_path / "out") == 2


def test_unreadable_config_exits_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run("simulate", str(bad), tmp_path / "out") == 2
    assert run("simulate", str(tmp_path / "missing.json"), tmp_path / "out") == 2


def test_infeasible_exits_3(tmp_path):
    cfg = load("simulate_3pss_one_layer")
    cfg["circuit"]["input_ports"] = [0, 2]
    assert run("simulate", write_config(tmp_path, cfg, "a.json"), tmp_path / "a") == 3
    noise = load("noise_3pss_one_layer")
    noise["circuit"]["section_lengths"] = [0.0, 0.0]
    noise["trials"] = 2
    assert run("noise", write_config(tmp_path, noise, "b.json"), tmp_path / "b") == 3
    design = load("design_3pss_one_layer")
    design.update(m=3, input_ports=[0, 1, 2], starts=1)
    assert run("design", write_config(tmp_path, design, "c.json"), tmp_path / "c") == 3
