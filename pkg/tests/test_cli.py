import hashlib
import json

import pandas as pd
import pytest

from zotnet.cli import main
from zotnet.config import SimulationConfig
from zotnet.synth import DATASET_COLUMNS


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    cfg = SimulationConfig(duration_s=600, dev_duration_s=1800, dev_users_per_persona=2, min_bucket_samples=5)
    cfg.save(d / "c.json")
    return d


def test_gen_data(workdir):
    assert main(["gen-data", "--config", str(workdir / "c.json"), "--seed", "7", "--out", str(workdir / "a.csv")]) == 0
    assert main(["gen-data", "--config", str(workdir / "c.json"), "--seed", "7", "--out", str(workdir / "b.csv")]) == 0
    assert sha(workdir / "a.csv") == sha(workdir / "b.csv")
    df = pd.read_csv(workdir / "a.csv")
    assert len(df) == 4 * 2 * 1800


def test_gen_data_row_count_default_users(tmp_path):
    # default persona and user counts, short duration
    (tmp_path / "c.json").write_text('{"dev_duration_s": 60}')
    assert main(["gen-data", "--config", str(tmp_path / "c.json"), "--out", str(tmp_path / "d.csv")]) == 0
    cfg = SimulationConfig()
    assert len(pd.read_csv(tmp_path / "d.csv")) == 4 * cfg.dev_users_per_persona * 60


def test_missing_config(tmp_path, capsys):
    assert main(["gen-data", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path / "x.csv")]) == 2
    err = capsys.readouterr().err
    assert err.startswith("zotnet: error:") and err.count("\n") == 1


def test_usage_errors(capsys):
    assert main(["frobnicate"]) == 1
    assert main(["gen-data"]) == 1
    assert main(["gen-data", "--seed", "x", "--out", "y"]) == 1
    assert "usage error" in capsys.readouterr().err


def test_train_and_retrain(workdir, capsys):
    data = str(workdir / "a.csv")
    assert main(["train", data, "--config", str(workdir / "c.json"), "--out", str(workdir / "m1.json")]) == 0
    report = json.loads(capsys.readouterr().out)
    assert {"phase1_accuracy", "phase2_rmse"} <= set(report)
    assert main(["train", data, "--config", str(workdir / "c.json"), "--out", str(workdir / "m2.json")]) == 0
    assert sha(workdir / "m1.json") == sha(workdir / "m2.json")


def test_train_empty_dataset(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    assert main(["train", str(path), "--out", str(tmp_path / "m.json")]) == 2
    header_only = tmp_path / "header.csv"
    header_only.write_text(",".join(DATASET_COLUMNS) + "\n")
    assert main(["train", str(header_only), "--out", str(tmp_path / "m.json")]) == 2


def test_simulate_and_compare(workdir, capsys):
    cfg = str(workdir / "c.json")
    if not (workdir / "m1.json").exists():
        main(["train", str(workdir / "a.csv"), "--config", cfg, "--out", str(workdir / "m1.json")])
    assert main(["simulate", "--config", cfg, "--model", str(workdir / "m1.json"), "--out", str(workdir / "pr")]) == 0
    assert main(["simulate", "--config", cfg, "--policy", "baseline", "--out", str(workdir / "np")]) == 0
    capsys.readouterr()
    rec = pd.read_csv(workdir / "pr" / "results.csv")
    assert len(rec) == 600 * 3
    summary = json.loads((workdir / "pr" / "summary.json").read_text())
    assert summary["total_provided_mbits"] == pytest.approx(rec["qos_p_mbps"].sum())

    # argument order does not matter: the baseline run is detected
    assert main(["compare", str(workdir / "np"), str(workdir / "pr"), "--out", str(workdir / "cmp")]) == 0
    rep = json.loads((workdir / "cmp.json").read_text())
    assert main(["compare", str(workdir / "pr"), str(workdir / "np"), "--out", str(workdir / "cmp2")]) == 0
    assert rep == json.loads((workdir / "cmp2.json").read_text())
    hourly = pd.read_csv(workdir / "cmp_hourly.csv")
    assert len(hourly) == 1  # 600 s fits in one hour bin
    assert rep["total_saved_mbits"] == pytest.approx(hourly["saved_mbits"].sum())

    assert main(["compare", str(workdir / "pr"), str(workdir / "pr"), "--out", str(workdir / "self")]) == 0
    assert json.loads((workdir / "self.json").read_text())["total_saved_mbits"] == 0.0


def test_simulate_personalized_without_model(workdir):
    assert main(["simulate", "--config", str(workdir / "c.json"), "--out", str(workdir / "x")]) == 1


def test_compare_missing_run(tmp_path):
    assert main(["compare", str(tmp_path / "a"), str(tmp_path / "b"), "--out", str(tmp_path / "c")]) == 2


def test_module_entry_point():
    import subprocess
    import sys
    out = subprocess.run([sys.executable, "-m", "zotnet", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "gen-data" in out.stdout
