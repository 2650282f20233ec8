from __future__ import annotations

import json
import subprocess
import sys

import numpy as np
import pandas as pd
import pytest

from mstar.cli import COMMANDS, resolve, run, thread_count
from mstar.errors import ValidationError
from mstar.forecast_app import synthetic_panel, write_volume_csv
from mstar.io import write_series_csv
from mstar.simulate import gen_model_banded, simulate_series


@pytest.fixture(scope="module")
def inputs(tmp_path_factory):
    root = tmp_path_factory.mktemp("inputs")
    series = simulate_series(gen_model_banded(5, 5, 1, 1, 0), 300, seed=1)
    write_series_csv(series, root / "series.csv")
    write_series_csv(np.zeros((20, 3, 3)), root / "zeros.csv")
    panel = synthetic_panel(gen_model_banded(4, 3, 1, 1, 2), 30, seed=3)
    write_volume_csv(panel, root / "volume.csv")
    return root


APP = ["--fit-window", "20", "--L", "5", "--eval-start", "26"]


def _argv(command, inputs):
    return {
        "simulate": ["simulate", "--kind", "diag", "--p", "3", "--q", "3", "--n", "100,200", "--reps", "2", "--seed", "7"],
        "fit-diag": ["fit-diag", "--input", str(inputs / "series.csv")],
        "fit-banded": ["fit-banded", "--input", str(inputs / "series.csv"), "--K", "2"],
        "select-bandwidth": ["select-bandwidth", "--input", str(inputs / "series.csv"), "--K", "2"],
        "forecast": ["forecast", "--input", str(inputs / "volume.csv"), "--method", "diag_star", *APP],
        "backtest-pov": ["backtest-pov", "--input", str(inputs / "volume.csv"), "--method", "sma", *APP],
        "report": ["report", "--input", str(inputs / "volume.csv"), "--methods", "sma,adj_sma,diag_star", *APP],
    }[command]


def _snapshot(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir())}


@pytest.mark.parametrize("command", list(COMMANDS))
def test_subcommand_is_byte_deterministic(command, inputs, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(_argv(command, inputs) + ["--out", str(a), "--threads", "1"]) == 0
    assert run(_argv(command, inputs) + ["--out", str(b), "--threads", "1"]) == 0
    snap = _snapshot(a)
    assert {"config.json", "manifest.json"} <= set(snap)
    assert snap == _snapshot(b)


def test_simulate_report_columns(inputs, tmp_path):
    assert run(_argv("simulate", inputs) + ["--out", str(tmp_path)]) == 0
    frame = pd.read_csv(tmp_path / "report.csv")
    assert list(frame["n"]) == [100, 200]
    assert {"err0_mean", "err0_sd", "err1_mean", "err1_sd"} <= set(frame.columns)


def test_select_bandwidth_json(inputs, tmp_path):
    assert run(_argv("select-bandwidth", inputs) + ["--out", str(tmp_path)]) == 0
    sel = json.loads((tmp_path / "selection.json").read_text())
    assert {"kA_hat", "kB_hat"} <= set(sel)


def test_config_roundtrip_reproduces_outputs(inputs, tmp_path):
    first = tmp_path / "first"
    assert run(_argv("fit-banded", inputs) + ["--out", str(first), "--seed", "3"]) == 0
    second = tmp_path / "second"
    assert run(["fit-banded", "--config", str(first / "config.json"), "--out", str(second)]) == 0
    assert _snapshot(first) == _snapshot(second)


def test_manifest_lists_digests(inputs, tmp_path):
    assert run(_argv("fit-diag", inputs) + ["--out", str(tmp_path)]) == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["command"] == "fit-diag"
    assert set(manifest["files"]) == {"model.json", "coefficients.csv", "config.json"}


def test_flag_overrides_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"K": 3, "omega_factor": 0.5}))
    out = resolve("select-bandwidth", {"K": 2, "input": "x.csv"}, str(cfg))
    assert out["K"] == 2 and out["omega_factor"] == 0.5
    cfg.write_text(json.dumps({"bogus": 1}))
    with pytest.raises(ValidationError):
        resolve("select-bandwidth", {"input": "x.csv"}, str(cfg))


def test_threads_fallback(monkeypatch):
    monkeypatch.setenv("MSTAR_THREADS", "3")
    assert thread_count(None) == 3
    assert thread_count(2) == 2


def test_exit_codes(inputs, tmp_path, capsys):
    assert run(["simulate", "--no-such-flag", "1"]) == 1
    assert "usage" in capsys.readouterr().err.lower()
    assert run(["fit-diag", "--input", str(tmp_path / "missing.csv"), "--out", str(tmp_path)]) == 1
    assert run(["fit-banded", "--input", str(inputs / "series.csv"), "--kA", "9", "--kB", "1", "--out", str(tmp_path)]) == 1
    # all-zero data: the normal equations are singular
    assert run(["fit-diag", "--input", str(inputs / "zeros.csv"), "--out", str(tmp_path)]) == 2
    assert run([]) == 1


def test_console_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "mstar.cli", "simulate", "--p", "2", "--q", "2", "--n", "50", "--reps", "1", "--out", str(tmp_path)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "report.json").exists()
