import csv
import json

import numpy as np
import pytest

from spsc import cli
from spsc.data import load_matrix_csv, save_matrix_csv, synth_blobs
from spsc.engine import FitTrace, TraceRow
from spsc.errors import NonFiniteObjective


@pytest.fixture()
def blob_csv(tmp_path):
    X, _ = synth_blobs(8, 3, 12, 6, 0.0, seed=0)
    path = tmp_path / "blobs.csv"
    save_matrix_csv(path, X.values, X.labels)
    return path


def fit_args(data, out, **extra):
    args = [
        "fit", "--data", str(data), "--out", str(out),
        "--r", "5", "--variant", "sample", "--beta", "0.05",
        "--alpha", "0.2", "--gamma", "0.2", "--max-outer-iters", "6", "--seed", "1",
    ]
    for key, value in extra.items():
        flag = "--" + key.replace("_", "-")
        if value is None:
            args.append(flag)
        else:
            args.extend([flag, str(value)])
    return args


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_fit_writes_run_directory(blob_csv, tmp_path):
    out = tmp_path / "run"
    assert cli.main(fit_args(blob_csv, out, has_labels=None)) == 0
    assert (out / "B.csv").is_file()
    assert (out / "S.csv").is_file()
    assert (out / "config-echo.json").is_file()
    assert (out / "fit_summary.png").is_file()
    rows = read_rows(out / "trace.csv")
    assert len(rows) >= 1
    for t in range(len(rows)):
        assert (out / f"V_iter_{t}.csv").is_file()
    echo = json.loads((out / "config-echo.json").read_text())
    assert echo["r"] == 5 and echo["seed"] == 1 and echo["variant"] == "sample"


def test_fit_missing_data_no_run_dir(tmp_path, capsys):
    out = tmp_path / "ghost"
    rc = cli.main(["fit", "--data", str(tmp_path / "nope.csv"), "--out", str(out)])
    assert rc != 0
    assert not out.exists()
    assert "not found" in capsys.readouterr().err


def test_fit_deterministic_rerun(blob_csv, tmp_path):
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    assert cli.main(fit_args(blob_csv, out1)) == 0
    assert cli.main(fit_args(blob_csv, out2)) == 0
    assert (out1 / "trace.csv").read_bytes() == (out2 / "trace.csv").read_bytes()
    assert (out1 / "B.csv").read_bytes() == (out2 / "B.csv").read_bytes()


def test_fit_rerun_from_config_echo(blob_csv, tmp_path):
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    assert cli.main(fit_args(blob_csv, out1)) == 0
    rc = cli.main(["fit", "--config", str(out1 / "config-echo.json"), "--out", str(out2)])
    assert rc == 0
    assert (out1 / "trace.csv").read_bytes() == (out2 / "trace.csv").read_bytes()


def test_fit_flag_overrides_config_file(blob_csv, tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"data": str(blob_csv), "r": 5, "beta": 0.05, "seed": 4,
                                    "max_outer_iters": 4}))
    out = tmp_path / "run"
    rc = cli.main(["fit", "--config", str(cfg_path), "--out", str(out), "--seed", "9"])
    assert rc == 0
    echo = json.loads((out / "config-echo.json").read_text())
    assert echo["seed"] == 9  # flag beats the file
    assert echo["r"] == 5  # file beats the default


def test_env_seed_used_as_last_resort(blob_csv, tmp_path, monkeypatch):
    monkeypatch.setenv("SPSC_SEED", "123")
    out = tmp_path / "run"
    rc = cli.main([
        "fit", "--data", str(blob_csv), "--out", str(out),
        "--r", "5", "--beta", "0.05", "--max-outer-iters", "3",
    ])
    assert rc == 0
    assert json.loads((out / "config-echo.json").read_text())["seed"] == 123


def test_fit_emits_round_trippable_matrices(blob_csv, tmp_path):
    out = tmp_path / "run"
    assert cli.main(fit_args(blob_csv, out, rho="0.4", has_labels=None)) == 0
    B = load_matrix_csv(out / "B.csv").values
    S = load_matrix_csv(out / "S.csv").values
    noise = load_matrix_csv(out / "noise.csv").values
    V0 = load_matrix_csv(out / "V_iter_0.csv").values
    assert B.shape[0] == 12 and S.shape[1] == 24
    assert noise.shape == (1, 24)
    assert V0.shape == (1, 24)  # sample-variant snapshots are a single row


def test_fit_partial_trace_preserved_on_abort(blob_csv, tmp_path, monkeypatch):
    partial = FitTrace(
        rows=[
            TraceRow(0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.5, 0.5, 2.0, 1.5, 1.2, 1.0,
                     np.ones(3))
        ]
    )

    def explode(*args, **kwargs):
        raise NonFiniteObjective("boom", trace=partial)

    monkeypatch.setattr(cli, "fit_spsc", explode)
    out = tmp_path / "run"
    rc = cli.main(fit_args(blob_csv, out))
    assert rc == 1
    assert (out / "trace.csv").is_file()
    assert len(read_rows(out / "trace.csv")) == 1


def test_sweep_minimal(blob_csv, tmp_path):
    out = tmp_path / "sweep"
    rc = cli.main([
        "sweep", "--data", str(blob_csv), "--out", str(out),
        "--r", "5", "--beta", "0.05", "--repeats", "3", "--seed", "0",
        "--rho-list", "0", "--methods", "os,sc", "--max-outer-iters", "4",
    ])
    assert rc == 0
    rows = read_rows(out / "results.csv")
    assert [row["method"] for row in rows] == ["os", "sc"]
    assert all(row["rho"] == "0.0" for row in rows)
    assert all(0.0 <= float(row["acc_mean"]) <= 1.0 for row in rows)
    assert (out / "acc_vs_rho.png").is_file()
    assert (out / "nmi_vs_rho.png").is_file()


def test_sweep_is_deterministic(blob_csv, tmp_path):
    outs = []
    for name in ("s1", "s2"):
        out = tmp_path / name
        rc = cli.main([
            "sweep", "--data", str(blob_csv), "--out", str(out),
            "--r", "5", "--beta", "0.05", "--repeats", "2", "--seed", "3",
            "--rho-list", "0,0.4", "--methods", "os,sc", "--max-outer-iters", "3",
            "--no-figures",
        ])
        assert rc == 0
        outs.append((out / "results.csv").read_bytes())
    assert outs[0] == outs[1]


def test_sweep_continues_past_failing_method(blob_csv, tmp_path, capsys):
    out = tmp_path / "sweep"
    rc = cli.main([
        "sweep", "--data", str(blob_csv), "--out", str(out),
        "--r", "5", "--beta", "0.05", "--repeats", "2", "--seed", "0",
        "--rho-list", "0", "--methods", "nonsense,os", "--max-outer-iters", "3",
        "--no-figures",
    ])
    assert rc == 0
    assert "nonsense" in capsys.readouterr().err
    rows = read_rows(out / "results.csv")
    assert [row["method"] for row in rows] == ["os"]


def test_sweep_full_method_set(blob_csv, tmp_path):
    out = tmp_path / "sweep"
    rc = cli.main([
        "sweep", "--data", str(blob_csv), "--out", str(out),
        "--r", "5", "--beta", "0.05", "--repeats", "2", "--seed", "0",
        "--rho-list", "0.2", "--max-outer-iters", "3", "--no-figures",
    ])
    assert rc == 0
    rows = read_rows(out / "results.csv")
    assert [row["method"] for row in rows] == cli.ALL_METHODS


def test_trace_command(blob_csv, tmp_path):
    out = tmp_path / "run"
    assert cli.main(fit_args(blob_csv, out, rho="0.5")) == 0
    rc = cli.main(["trace", str(out)])
    assert rc == 0
    rows = read_rows(out / "weight_trace.csv")
    trace_rows = read_rows(out / "trace.csv")
    assert len(rows) == len(trace_rows)
    assert rows[0]["lambda"] == trace_rows[0]["lambda"]
    assert (out / "weight_trace.png").is_file()
    for row in rows:
        assert 0.0 <= float(row["mean_weight"]) <= 1.0
        if row["pearson"]:
            assert -1.0 <= float(row["pearson"]) <= 1.0


def test_trace_zero_variance_emits_empty_cells(blob_csv, tmp_path):
    # feature-wise weights are constant per sample: correlations are undefined
    out = tmp_path / "run"
    assert cli.main(fit_args(blob_csv, out, rho="0.5", variant="feature")) == 0
    assert cli.main(["trace", str(out), "--no-figures"]) == 0
    rows = read_rows(out / "weight_trace.csv")
    assert all(row["pearson"] == "" and row["spearman"] == "" for row in rows)


def test_trace_missing_artifacts(blob_csv, tmp_path, capsys):
    out = tmp_path / "run"
    assert cli.main(fit_args(blob_csv, out)) == 0  # rho 0: no noise sidecar
    rc = cli.main(["trace", str(out)])
    assert rc == 1
    assert "noise.csv" in capsys.readouterr().err


def test_fit_hypergraph_export(blob_csv, tmp_path):
    out = tmp_path / "run"
    assert cli.main(fit_args(blob_csv, out, has_labels=None, export_hypergraph=None)) == 0
    I = load_matrix_csv(out / "I.csv").values
    W = load_matrix_csv(out / "W.csv").values
    L = load_matrix_csv(out / "L.csv").values
    assert I.shape == (24, 24) and W.shape == (24, 24)
    assert np.abs(L - (np.eye(24) - W)).max() <= 1e-15


def test_fit_drops_zero_columns(tmp_path, capsys):
    rng = np.random.default_rng(0)
    values = rng.standard_normal((5, 8))
    values[:, 2] = 0.0
    path = tmp_path / "zeros.csv"
    save_matrix_csv(path, values)
    out = tmp_path / "run"
    rc = cli.main([
        "fit", "--data", str(path), "--out", str(out),
        "--r", "4", "--beta", "0.05", "--knn-k", "2", "--max-outer-iters", "3", "--seed", "0",
        "--no-figures",
    ])
    assert rc == 0
    assert "dropping 1" in capsys.readouterr().err
    S = load_matrix_csv(out / "S.csv").values
    assert S.shape[1] == 7  # the zero sample is gone


def test_synth_command(tmp_path):
    out = tmp_path / "data.csv"
    rc = cli.main([
        "synth", "--out", str(out), "--n-per-class", "5", "--classes", "2",
        "--m", "6", "--r-true", "4", "--noise-frac", "0.2", "--seed", "3",
    ])
    assert rc == 0
    X = load_matrix_csv(out, has_labels=True)
    assert X.values.shape == (6, 10)
    assert (tmp_path / "data_corrupted_indices.csv").is_file()
