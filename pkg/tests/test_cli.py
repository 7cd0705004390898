"""
Test Suite: Command-Line Interface

This test module runs every subcommand end to end on a tiny simulated dataset:
- Exit codes: 0 on success, 1 on operational failures, 2 on usage errors
- Each command leaves exactly one run record next to its artifacts
- Config files merge with flags and hash independently of key order
"""

import json

import pandas as pd
import pytest

from spiketex.aer.events import EventStream
from spiketex.aer.io import write_events
from spiketex.cli import load_config, run_command
from spiketex.cli.main import MODEL_FILE, NETWORK_FILE
from spiketex.snn.network import LayerSpec, NetworkSpec

SMALL_NETWORK = NetworkSpec(
    layers=(LayerSpec.conv(2), LayerSpec.spiking(), LayerSpec.pooling(4), LayerSpec.linear(10)),
    input_shape=(1, 20, 20),
)

MANIFEST = {
    "name": "cli-slide",
    "motion": {"kind": "Slide", "duration_ms": 100.0, "slide_distance_mm": 30.0},
    "textures": [1, 2],
    "trials_per_texture": 5,
    "random_start": True,
    "seed": 8,
    "test_fraction": 0.4,
}


def _records(directory):
    return sorted(p.name for p in directory.glob("run-*.json"))


def _record(directory, command):
    return json.loads((directory / f"run-{command}.json").read_text())


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Dataset plus a one-epoch model, produced through the CLI itself"""
    root = tmp_path_factory.mktemp("cli")
    network = root / "network.json"
    network.write_text(SMALL_NETWORK.model_dump_json())
    config = root / "config.json"
    config.write_text(
        json.dumps({"network": str(network), "hyperparams": {"batch_size": 4, "val_fraction": 0.0}})
    )
    manifest = root / "manifest.json"
    manifest.write_text(json.dumps(MANIFEST))

    data, model = root / "data", root / "model"
    assert run_command(["gen-dataset", "--manifest", str(manifest), "--out", str(data), "--jobs", "1"]) == 0
    assert run_command(
        ["train", "--data", str(data), "--out", str(model), "--epochs", "1", "--config", str(config), "--jobs", "1"]
    ) == 0
    return {"root": root, "config": config, "data": data, "model": model}


# =====================
# Usage and Failures
# =====================

def test_unknown_subcommand_is_a_usage_error():
    assert run_command(["frobnicate"]) == 2


def test_unknown_flag_is_a_usage_error(tmp_path):
    assert run_command(["inspect", str(tmp_path / "x.aer"), "--frobnicate"]) == 2


def test_missing_required_option_is_a_usage_error(tmp_path):
    assert run_command(["eval", "--data", str(tmp_path), "--out", str(tmp_path / "out")]) == 2


def test_missing_file_is_an_operational_failure(tmp_path):
    assert run_command(["inspect", str(tmp_path / "absent.aer")]) == 1


def test_help_exits_cleanly():
    assert run_command(["--help"]) == 0


# =====================
# Inspect
# =====================

def test_inspect_empty_stream(tmp_path, capsys):
    path = tmp_path / "empty.aer"
    write_events(EventStream.empty(640, 480, 1_000_000), path)
    capsys.readouterr()

    assert run_command(["inspect", str(path), "--log-level", "ERROR"]) == 0
    description = json.loads(capsys.readouterr().out)
    assert description["events"] == 0
    assert description["format"] == "events"
    assert description["t_range_us"] is None


def test_inspect_writes_record_with_out(tmp_path):
    path = tmp_path / "empty.aer"
    write_events(EventStream.empty(20, 20, 1000), path)
    out = tmp_path / "report"
    assert run_command(["inspect", str(path), "--out", str(out)]) == 0
    assert _records(out) == ["run-inspect.json"]
    assert _record(out, "inspect")["artifacts"] == ["inspect.json"]


def test_inspect_without_out_writes_no_record(tmp_path):
    path = tmp_path / "empty.aer"
    write_events(EventStream.empty(20, 20, 1000), path)
    assert run_command(["inspect", str(path), "--log-level", "ERROR"]) == 0
    assert _records(tmp_path) == []


# =====================
# Pipeline
# =====================

def test_gen_dataset_outputs(workspace):
    data = workspace["data"]
    record = _record(data, "gen-dataset")
    assert record["exit_code"] == 0
    assert record["seed"] == 8
    assert "index.json" in record["artifacts"]
    assert len([a for a in record["artifacts"] if a.startswith("trials/")]) == 10
    assert _records(data) == ["run-gen-dataset.json"]


def test_train_outputs(workspace):
    model = workspace["model"]
    for name in (MODEL_FILE, NETWORK_FILE, "train_log.csv", "train_log.json"):
        assert (model / name).exists(), f"❌ Missing {name}"
    assert NetworkSpec.model_validate_json((model / NETWORK_FILE).read_text()) == SMALL_NETWORK
    assert len(pd.read_csv(model / "train_log.csv")) == 1
    assert _records(model) == ["run-train.json"]


def test_eval_outputs(workspace, tmp_path):
    out = tmp_path / "eval"
    argv = ["eval", "--model", str(workspace["model"]), "--data", str(workspace["data"]), "--out", str(out)]
    assert run_command(argv + ["--jobs", "1"]) == 0

    summary = json.loads((out / "summary.json").read_text())
    assert summary["trials"] == 4
    assert 0.0 <= summary["accuracy"] <= 1.0
    assert len(pd.read_csv(out / "predictions.csv")) == 4
    assert pd.read_csv(out / "confusion.csv").shape == (10, 11)
    assert _records(out) == ["run-eval.json"]


def test_curve_outputs(workspace, tmp_path):
    out = tmp_path / "curve"
    argv = ["curve", "--model", str(workspace["model"]), "--data", str(workspace["data"]), "--out", str(out)]
    assert run_command(argv + ["--step", "50", "--jobs", "1"]) == 0

    curve = pd.read_csv(out / "curve.csv")
    assert list(curve.columns) == ["length_ms", "accuracy", "n"]
    assert len(curve) == 20
    assert curve["length_ms"].iloc[-1] == 1000.0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["curve"]["motion"] == "Slide"
    assert summary["convergence"]["band"] == 0.05
    assert (out / "curve.dat").exists()
    assert sorted(_record(out, "curve")["artifacts"]) == ["curve.csv", "curve.dat", "summary.json"]


def test_sweep_outputs(workspace, tmp_path):
    out = tmp_path / "sweep"
    argv = ["sweep", "--model", str(workspace["model"]), "--data", str(workspace["data"]), "--out", str(out)]
    assert run_command(argv + ["--min-count", "2", "--jobs", "1"]) == 0

    cells = pd.read_csv(out / "sweep.csv")
    assert cells["n"].sum() == 4
    assert {"depth_mm", "speed", "accuracy", "n"} <= set(cells.columns)
    assert (out / "marginal_depth_mm.csv").exists()
    assert json.loads((out / "summary.json").read_text())["trials"] == 4


def test_power_report_outputs(workspace, tmp_path):
    out = tmp_path / "power"
    argv = ["power-report", "--model", str(workspace["model"]), "--data", str(workspace["data"]), "--out", str(out)]
    assert run_command(argv + ["--jobs", "1"]) == 0

    table = pd.read_csv(out / "power.csv")
    assert list(table["motion"]) == ["Slide"]
    assert table.loc[0, "reference_mw"] == 7.01
    model = json.loads((out / "power_model.json").read_text())
    assert model["idle_mw"] == 2.42
    assert len(pd.read_csv(out / "devices.csv")) == 3
    assert _records(out) == ["run-power-report.json"]


def test_eval_with_missing_model_fails(workspace, tmp_path):
    out = tmp_path / "eval"
    argv = ["eval", "--model", str(tmp_path / "nothing.snnp"), "--data", str(workspace["data"]), "--out", str(out)]
    assert run_command(argv) == 1
    assert _record(out, "eval")["exit_code"] == 1


def test_eval_with_malformed_network_spec_fails(workspace, tmp_path):
    model = tmp_path / "model"
    model.mkdir()
    (model / MODEL_FILE).write_bytes((workspace["model"] / MODEL_FILE).read_bytes())
    (model / NETWORK_FILE).write_text(json.dumps({"layers": [{"kind": "linear", "out_features": 3}]}))
    out = tmp_path / "eval"
    argv = ["eval", "--model", str(model), "--data", str(workspace["data"]), "--out", str(out), "--jobs", "1"]
    assert run_command(argv) == 1
    assert _record(out, "eval")["exit_code"] == 1


def test_train_with_malformed_network_spec_fails(workspace, tmp_path):
    network = tmp_path / "bad_network.json"
    network.write_text("{\"layers\": \"conv\"}")
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"network": str(network)}))
    out = tmp_path / "model"
    argv = ["train", "--data", str(workspace["data"]), "--out", str(out), "--config", str(config)]
    assert run_command(argv + ["--epochs", "1", "--jobs", "1"]) == 1
    record = _record(out, "train")
    assert record["exit_code"] == 1
    assert record["artifacts"] == []


def test_power_report_with_malformed_power_model_fails(workspace, tmp_path):
    power_model = tmp_path / "power_model.json"
    power_model.write_text(json.dumps({"idle_mw": -1.0}))
    out = tmp_path / "power"
    argv = ["power-report", "--model", str(workspace["model"]), "--data", str(workspace["data"]), "--out", str(out)]
    assert run_command(argv + ["--power-model", str(power_model), "--jobs", "1"]) == 1
    assert _record(out, "power-report")["exit_code"] == 1


def test_trained_time_stride_travels_with_the_model(workspace, tmp_path):
    model = tmp_path / "strided"
    argv = ["train", "--data", str(workspace["data"]), "--out", str(model), "--config", str(workspace["config"])]
    assert run_command(argv + ["--epochs", "1", "--time-stride", "4", "--jobs", "1"]) == 0
    spec = NetworkSpec.model_validate_json((model / NETWORK_FILE).read_text())
    assert spec.time_stride == 4
    assert spec.layers == SMALL_NETWORK.layers

    out = tmp_path / "eval"
    argv = ["eval", "--model", str(model), "--data", str(workspace["data"]), "--out", str(out), "--jobs", "1"]
    assert run_command(argv) == 0
    assert json.loads((out / "summary.json").read_text())["trials"] == 4


# =====================
# Configuration
# =====================

def test_flags_override_config(workspace):
    config = load_config(workspace["config"]).merged({"epochs": 3, "seed": 9, "jobs": None})
    assert config.hyperparams.epochs == 3
    assert config.hyperparams.seed == 9
    assert config.hyperparams.batch_size == 4


def test_config_hash_ignores_key_order(tmp_path):
    first, second = tmp_path / "a.json", tmp_path / "b.json"
    first.write_text(json.dumps({"step_ms": 25.0, "band": 0.1, "hyperparams": {"lr": 0.01, "epochs": 2}}))
    second.write_text(json.dumps({"hyperparams": {"epochs": 2, "lr": 0.01}, "band": 0.1, "step_ms": 25.0}))
    assert load_config(first).config_hash() == load_config(second).config_hash()
    assert load_config(first).config_hash() != load_config(None).config_hash()


def test_invalid_config_is_a_usage_error(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"unknown_key": 1}))
    assert run_command(["inspect", str(path), "--config", str(path)]) == 2
