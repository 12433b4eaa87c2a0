import json

import numpy as np
import pytest

from dynqr.cli import main, validate_config
from dynqr.fitter import unpack_coefficients
from dynqr.io import dumps_json, read_csv_table, read_series_csv, write_json


def _write_config(path, payload):
    path.write_text(json.dumps(payload))
    return str(path)


def _run(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def _simulate(tmp_path, capsys, n_reps=2, n_obs=40, process="qar1", seed=5):
    tmp_path.mkdir(parents=True, exist_ok=True)
    cfg = _write_config(tmp_path / "sim.json", {
        "n_replications": n_reps,
        "dgp": {"design": "y1", "process": process, "n_obs": n_obs},
        "seed": seed,
    })
    out = tmp_path / "simout"
    code, stdout, stderr = _run(["simulate", "--config", cfg, "--out", str(out)], capsys)
    assert code == 0, stderr
    return out


# ---------------------------------------------------------------------------
# config validation
# ---------------------------------------------------------------------------

def test_unknown_keys_rejected():
    with pytest.raises(ValueError, match="unknown keys"):
        validate_config("simulate", {"n_replications": 1, "bogus": True})
    with pytest.raises(ValueError, match="unknown keys"):
        validate_config("fit", {"data": {"path": "x.csv", "wat": 1}})


def test_estimator_entries_validated():
    with pytest.raises(ValueError):
        validate_config("montecarlo", {"estimators": [{"penalty_weight": 1.0}]})
    with pytest.raises(ValueError):
        validate_config("montecarlo", {"estimators": [{"name": "a", "x": 1}]})


def test_missing_data_path_rejected():
    with pytest.raises(ValueError):
        validate_config("fit", {})


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def test_simulate_writes_expected_files(tmp_path, capsys):
    out = _simulate(tmp_path, capsys, n_reps=2, n_obs=50)
    header, rows = read_csv_table(out / "replication_000.csv")
    assert header == ["t", "y", "x_exog"]
    assert len(rows) == 50
    truth = json.loads((out / "truth.json").read_text())
    assert len(truth["beta"]) == 9
    assert all(row == [0.0] for row in truth["theta"])   # qar1 truth


def test_simulate_byte_identical_reruns(tmp_path, capsys):
    out1 = _simulate(tmp_path / "a", capsys, seed=9)
    out2 = _simulate(tmp_path / "b", capsys, seed=9)
    for name in ("replication_000.csv", "replication_001.csv", "truth.json"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_seed_flag_overrides_config(tmp_path, capsys):
    out1 = _simulate(tmp_path / "a", capsys, seed=1)
    cfg = _write_config(tmp_path / "sim.json", {
        "n_replications": 2, "dgp": {"design": "y1", "process": "qar1",
                                     "n_obs": 40}, "seed": 2,
    })
    out2 = tmp_path / "b"
    code, _, _ = _run(["simulate", "--config", cfg, "--seed", "1",
                       "--out", str(out2)], capsys)
    assert code == 0
    assert (out1 / "replication_000.csv").read_bytes() == \
        (out2 / "replication_000.csv").read_bytes()


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------

def _fit_config(tmp_path, data_csv, emit_plots=False, quantile_lags=0):
    return _write_config(tmp_path / "fit.json", {
        "data": {"path": str(data_csv), "exog_columns": ["x_exog"]},
        "model": {"lag_y": 1, "quantile_lags": quantile_lags},
        "grid_levels": [0.1, 0.5, 0.9],
        "penalty_weight": 1.0,
        "optim": {"max_iters": 30},
        "emit_plots": emit_plots,
    })


def test_fit_outputs_round_trip(tmp_path, capsys):
    out = _simulate(tmp_path, capsys)
    cfg = _fit_config(tmp_path, out / "replication_000.csv")
    fit_out = tmp_path / "fitout"
    code, _, err = _run(["fit", "--config", cfg, "--out", str(fit_out)], capsys)
    assert code == 0, err
    payload = json.loads((fit_out / "coefficients.json").read_text())
    packed = np.array(payload["packed"])
    coeffs = unpack_coefficients(packed, 3, 3, 0)
    assert np.allclose(coeffs.beta, np.array(payload["beta"]))
    header, rows = read_csv_table(fit_out / "fitted_paths.csv")
    assert header == ["t", "q_0.1", "q_0.5", "q_0.9"]
    assert len(rows) == 40
    assert not (fit_out / "fit_fan.svg").exists()


def test_fit_emits_svg_when_asked(tmp_path, capsys):
    out = _simulate(tmp_path, capsys)
    cfg = _fit_config(tmp_path, out / "replication_000.csv", emit_plots=True)
    fit_out = tmp_path / "fitout"
    code, _, _ = _run(["fit", "--config", cfg, "--out", str(fit_out)], capsys)
    assert code == 0
    svg = (fit_out / "fit_fan.svg").read_bytes()
    assert svg.startswith(b"<?xml")


def test_fit_malformed_csv_reports_location(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("t,y,x_exog\n0,1.0,0.5\n1,not_a_number,0.5\n")
    cfg = _fit_config(tmp_path, bad)
    code, _, err = _run(["fit", "--config", cfg, "--out", str(tmp_path / "o")], capsys)
    assert code == 1
    payload = json.loads(err)
    assert "row 3" in payload["message"] and "'y'" in payload["message"]


def test_fit_rejects_nonfinite_values(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("t,y,x_exog\n0,1.0,0.5\n1,inf,0.5\n")
    cfg = _fit_config(tmp_path, bad)
    code, _, err = _run(["fit", "--config", cfg, "--out", str(tmp_path / "o")], capsys)
    assert code == 1
    assert "non-finite" in json.loads(err)["message"]


# ---------------------------------------------------------------------------
# montecarlo
# ---------------------------------------------------------------------------

def _mc_config(tmp_path, **overrides):
    payload = {
        "n_replications": 2,
        "processes": ["qar1"],
        "designs": ["y1"],
        "sample_sizes": [30],
        "estimators": [
            {"name": "dynqr_pw1", "penalty_weight": 1.0},
            {"name": "dynqr_pw0", "penalty_weight": 0.0},
            {"name": "caviar_nm", "optimizer": "nelder_mead",
             "penalty_weight": 0.0},
        ],
        "grid_levels": [0.1, 0.5, 0.9],
        "optim": {"max_iters": 25},
        "seed": 3,
    }
    payload.update(overrides)
    return _write_config(tmp_path / "mc.json", payload)


def test_montecarlo_schema_and_ordering(tmp_path, capsys):
    cfg = _mc_config(tmp_path)
    out = tmp_path / "mc"
    code, _, err = _run(["montecarlo", "--config", cfg, "--out", str(out)], capsys)
    assert code == 0, err
    header, rows = read_csv_table(out / "bias.csv")
    assert header == ["process", "design", "T", "estimator", "init",
                      "penalty_weight", "tau", "bias"]
    assert len(rows) == 3 * 3          # three estimators, three report levels
    header, rows = read_csv_table(out / "crossing.csv")
    pcts = [float(r[header.index("crossing_pct")]) for r in rows]
    assert all(0.0 <= p <= 100.0 for p in pcts)
    weights = [float(r[header.index("penalty_weight")]) for r in rows]
    assert weights == sorted(weights)  # ascending penalty order in the output


def test_montecarlo_byte_identical_reruns(tmp_path, capsys):
    cfg = _mc_config(tmp_path)
    out1, out2 = tmp_path / "m1", tmp_path / "m2"
    assert _run(["montecarlo", "--config", cfg, "--out", str(out1)], capsys)[0] == 0
    assert _run(["montecarlo", "--config", cfg, "--out", str(out2)], capsys)[0] == 0
    for name in ("bias.csv", "bias.json", "crossing.csv", "crossing.json"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


# ---------------------------------------------------------------------------
# backtest
# ---------------------------------------------------------------------------

def test_backtest_counts_and_report_shape(tmp_path, capsys):
    out = _simulate(tmp_path, capsys, n_reps=1, n_obs=48, seed=12)
    cfg = _write_config(tmp_path / "bt.json", {
        "data": {"path": str(out / "replication_000.csv"),
                 "exog_columns": ["x_exog"]},
        "model": {"lag_y": 1, "quantile_lags": 0},
        "grid_levels": [0.25, 0.5, 0.75],
        "optim": {"max_iters": 20, "pop_size": 50},
        "backtest": {"initial_window": 40},
    })
    bt_out = tmp_path / "bt"
    code, _, err = _run(["backtest", "--config", cfg, "--out", str(bt_out)], capsys)
    assert code == 0, err
    header, rows = read_csv_table(bt_out / "forecasts.csv")
    assert len(rows) == 48 - 40 - 1
    assert header[:2] == ["origin_index", "realized"]
    scores = json.loads((bt_out / "scores.json").read_text())
    assert set(scores["unsorted"]) == {"uniform", "centre", "left_tail", "right_tail"}
    assert set(scores["sorted"]) == {"uniform", "centre", "left_tail", "right_tail"}
    assert scores["sorted"]["uniform"] <= scores["unsorted"]["uniform"]


def test_backtest_rejects_short_series(tmp_path, capsys):
    out = _simulate(tmp_path, capsys, n_reps=1, n_obs=30)
    cfg = _write_config(tmp_path / "bt.json", {
        "data": {"path": str(out / "replication_000.csv"),
                 "exog_columns": ["x_exog"]},
        "backtest": {"initial_window": 40},
    })
    code, _, err = _run(["backtest", "--config", cfg, "--out", str(tmp_path / "o")],
                        capsys)
    assert code == 1
    assert json.loads(err)["error"] == "ConfigError"


# ---------------------------------------------------------------------------
# serialization helpers
# ---------------------------------------------------------------------------

def test_dumps_json_17_digit_floats():
    text = dumps_json({"x": 0.1, "v": [1.0, 2.5]})
    assert "0.10000000000000001" in text
    assert json.loads(text) == {"x": 0.1, "v": [1.0, 2.5]}


def test_series_round_trip(tmp_path):
    from dynqr.core import SeriesData
    from dynqr.io import write_series_csv
    rng = np.random.default_rng(0)
    data = SeriesData(y=rng.normal(size=17), exog=rng.uniform(size=(17, 1)),
                      exog_names=["x_exog"])
    path = tmp_path / "series.csv"
    write_series_csv(path, data)
    back = read_series_csv(path, exog_columns=["x_exog"])
    assert np.array_equal(back.y, data.y)
    assert np.array_equal(back.exog, data.exog)
