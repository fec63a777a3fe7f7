import json
import subprocess
import sys

import numpy as np
import pandas as pd
import pytest

from mobgp.cli import EXIT_DATA, EXIT_MISMATCH, EXIT_OK, EXIT_USAGE, main
from mobgp.gp import MultiTaskGP, TrainingSet
from mobgp.gp.likelihood import Evaluation
from mobgp.io import read_dataset

FAST = ["--n-iter", "15"]


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def simulated(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert run("simulate", "--weeks", 30, "--seed", 3, "--out-dir", out) == EXIT_OK
    return out


@pytest.fixture(scope="module")
def fitted(simulated, tmp_path_factory):
    out = tmp_path_factory.mktemp("fit")
    assert run("fit", "--data", simulated / "dataset.csv", "--out-dir", out, *FAST) == EXIT_OK
    return out


def test_simulate_outputs(simulated):
    for name in ("states.csv", "dataset.csv", "spec.json", "truth.csv", "manifest.json"):
        assert (simulated / name).exists()
    manifest = json.loads((simulated / "manifest.json").read_text())
    assert manifest["status"] == "ok" and manifest["seed"] == 3
    assert len(manifest["config_digest"]) == 64
    assert len(pd.read_csv(simulated / "dataset.csv")) == 168


def test_simulate_is_reproducible(simulated, tmp_path):
    assert run("simulate", "--weeks", 30, "--seed", 3, "--out-dir", tmp_path) == EXIT_OK
    for name in ("states.csv", "dataset.csv", "spec.json", "truth.csv"):
        assert (tmp_path / name).read_bytes() == (simulated / name).read_bytes()


def test_fit_is_reproducible(simulated, fitted, tmp_path):
    assert run("fit", "--data", simulated / "dataset.csv", "--out-dir", tmp_path, *FAST) == EXIT_OK
    for name in ("model.json", "loss.csv", "constraints.json"):
        assert (tmp_path / name).read_bytes() == (fitted / name).read_bytes()


def test_fit_prints_row_count(simulated, tmp_path, capsys):
    run("fit", "--data", simulated / "states.csv", "--bins-per-hour", 4, "--out-dir", tmp_path,
        "--n-iter", 3, "--constraints", "off")
    assert "training rows: 672" in capsys.readouterr().out


def test_loss_log_columns(fitted):
    loss = pd.read_csv(fitted / "loss.csv")
    assert list(loss.columns) == ["iteration", "stage", "penalty_weight", "objective"]
    assert sorted(loss["stage"].unique()) == [0, 1, 2, 3]
    assert sorted(loss["penalty_weight"].unique()) == [100.0, 1e3, 1e4, 1e5]


def test_dense_and_structured_agree(simulated, fitted):
    model = MultiTaskGP.from_json((fitted / "model.json").read_text())
    data = TrainingSet.from_dataset(read_dataset(simulated / "dataset.csv"))
    dense = Evaluation(model.hyper, data, "dense").nll()
    fast = Evaluation(model.hyper, data, "structured").nll()
    assert fast == pytest.approx(dense, rel=1e-4)


def test_predict_and_evaluate(simulated, fitted, tmp_path):
    assert run("predict", "--model", fitted / "model.json", "--out-dir", tmp_path) == EXIT_OK
    pred = pd.read_csv(tmp_path / "predictions.csv")
    assert len(pred) == 168 and "var_mp" in pred.columns
    assert (pred.filter(like="var_") >= 0).all().all()
    ev = tmp_path / "ev"
    assert run("evaluate", "--model", fitted / "model.json", "--truth", simulated / "spec.json",
               "--out-dir", ev) == EXIT_OK
    metrics = json.loads((ev / "metrics.json").read_text())
    table = pd.read_csv(ev / "predictions.csv", float_precision="round_trip")
    for name, m in metrics["tasks"].items():
        err = table[f"mean_{name}"] - table[f"ref_{name}"]
        assert m["rmse"] == pytest.approx(np.sqrt(np.mean(err ** 2)), abs=1e-12)
        assert m["mae"] == pytest.approx(np.mean(np.abs(err)), abs=1e-12)
    svg = (ev / "posterior.svg").read_text()
    assert "<text" in svg and "pause to move" in svg
    assert (ev / "constraint_summary.svg").exists()


def test_predict_at_custom_queries(fitted, tmp_path):
    (tmp_path / "q.csv").write_text("hour\n0.25\n100.5\n")
    assert run("predict", "--model", fitted / "model.json", "--queries", tmp_path / "q.csv",
               "--include-noise", "--out-dir", tmp_path) == EXIT_OK
    assert pd.read_csv(tmp_path / "predictions.csv")["hour"].tolist() == [0.25, 100.5]


def test_exit_codes(simulated, fitted, tmp_path):
    assert run("simulate", "--weeks", 0, "--out-dir", tmp_path) == EXIT_USAGE
    assert run("fit", "--data", simulated / "dataset.csv", "--constraints", "uniform:0",
               "--out-dir", tmp_path, *FAST) == EXIT_USAGE
    assert run("fit", "--data", tmp_path / "nope.csv", "--out-dir", tmp_path) == EXIT_DATA
    empty = tmp_path / "empty.csv"
    empty.write_text("person_id,timestamp,state\n")
    assert run("fit", "--data", empty, "--out-dir", tmp_path) == EXIT_DATA
    assert run("evaluate", "--model", fitted / "model.json", "--truth", simulated / "spec.json",
               "--bins-per-hour", 2, "--out-dir", tmp_path) == EXIT_MISMATCH
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["status"] == "error" and "bins per hour" in manifest["error"]


def test_degenerate_data_exit(tmp_path):
    # a single week of two alternating entries leaves most tasks without data
    (tmp_path / "s.csv").write_text("person_id,timestamp,state\na,345600,P\na,349200,M\n")
    assert run("fit", "--data", tmp_path / "s.csv", "--out-dir", tmp_path) == EXIT_DATA


def test_bench_command(tmp_path):
    assert run("bench", "--sizes", "64,128", "--operations", "matvec,solve",
               "--out-dir", tmp_path) == EXIT_OK
    df = pd.read_csv(tmp_path / "bench_timings.csv")
    assert list(df.columns) == ["operation", "structure", "n", "median_ms", "speedup_vs_dense"]
    assert run("bench", "--sizes", "8", "--out-dir", tmp_path) == EXIT_USAGE


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "mobgp.cli", "--version"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "mobgp" in res.stdout


@pytest.mark.slow
def test_constant_pipeline_recovers_truth(tmp_path):
    sim = tmp_path / "sim"
    assert run("simulate", "--preset", "constant", "--a-pm", 0.6, "--a-mp", 0.4, "--weeks", 2000,
               "--steps-per-hour", 1, "--seed", 8, "--out-dir", sim) == EXIT_OK
    assert run("fit", "--data", sim / "dataset.csv", "--out-dir", tmp_path / "fit") == EXIT_OK
    assert run("evaluate", "--model", tmp_path / "fit" / "model.json", "--truth",
               sim / "spec.json", "--out-dir", tmp_path / "ev") == EXIT_OK
    table = pd.read_csv(tmp_path / "ev" / "predictions.csv")
    for name in ("pp", "pm", "mm", "mp"):
        assert np.all(np.abs(table[f"mean_{name}"] - table[f"ref_{name}"]) < 0.03)
