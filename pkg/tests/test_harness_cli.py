import json

import numpy as np
import pytest

from lsforecast.cli import main
from lsforecast.harness import (evaluate_series, method_matrix, parse_methods,
                                run_moving_window, run_simulation_study, _bw_key)
from lsforecast.predictors import MethodDescriptor
from lsforecast.series import GeneratorKind, GeneratorSpec, generate

FAST = ["MB-LC-P", "MB-LL-F", "MF-LLM-P", "LMF-LC-F"]
BW = {"MB-LC": 40, "MB-LL": 40, "MF-LLM": 40, "MF-LC": 40, "LMF-LC": 40}


def test_method_matrix_rows():
    ms = method_matrix()
    names = [m.name for m in ms]
    assert len(ms) == 28
    assert len(set(names)) == 28
    assert sum(n.endswith("-P") for n in names) == 14
    assert "LMF-LLM-ARMA-F" in names


def test_parse_methods_expands_residual_types():
    names = [m.name for m in parse_methods(["mb-ll", "mf-lc-f"])]
    assert names == ["MB-LL-P", "MB-LL-F", "MF-LC-F"]


def test_lmf_shares_mf_bandwidth():
    a = MethodDescriptor.parse("mf-llm-p")
    b = MethodDescriptor.parse("lmf-llm-p")
    assert _bw_key(a) == _bw_key(b)


def test_simulation_smoke():
    res = run_simulation_study("AR5", parse_methods(FAST), R=2, n=200, seed=1, bandwidths=BW,
                               M=100)
    assert set(res.rows) == set(FAST)
    assert all(v == 0 for v in res.excluded.values())
    header = res.to_csv().splitlines()[0].split(",")
    assert header[:3] == ["method", "residuals", "bias"]


def test_study_identical_across_workers():
    kw = dict(R=3, n=200, seed=2, bandwidths=BW, M=100)
    a = run_simulation_study("TAR1", parse_methods(FAST), workers=1, **kw)
    b = run_simulation_study("TAR1", parse_methods(FAST), workers=2, **kw)
    assert a.to_csv() == b.to_csv()


def test_moving_window_smoke():
    y = generate(GeneratorSpec(GeneratorKind.AR5_SINE, 120, seed=3)).values
    res = run_moving_window(y, window_w=100, eval_count=2, methods=parse_methods(["MB-LC-P"]),
                            bandwidths={"MB-LC": 30})
    assert set(res.rows) == {"MB-LC-P", "RAMPFIT"}
    assert res.rows["MB-LC-P"].n_realizations == 2
    assert "RAMPFIT," in res.to_csv()
    with pytest.raises(ValueError):
        run_moving_window(y, window_w=119, eval_count=5)


def test_local_linear_beats_constant_on_trend():
    # directional: under a strong linear trend the one-sided LC fit lags behind
    rng = np.random.default_rng(4)
    t = np.arange(300.0)
    y = 0.05 * t + 0.1 * rng.standard_normal(300)
    ms = parse_methods(["MB-LC-P", "MB-LL-P"])
    bw = {_bw_key(m): 40.0 for m in ms}
    errs = {m.name: [] for m in ms}
    for k in range(250, 300):
        res = evaluate_series(y[:k], ms, bw, None, 0)
        for m in ms:
            errs[m.name].append((res[m.name][0] - y[k]) ** 2)
    assert np.mean(errs["MB-LL-P"]) < np.mean(errs["MB-LC-P"])


def test_no_look_ahead():
    y = generate(GeneratorSpec(GeneratorKind.AR5_SINE, 150, seed=5)).values
    ms = parse_methods(FAST)
    bw = {_bw_key(m): 40.0 for m in ms}
    a = evaluate_series(y[:-1], ms, bw, None, 7, M=100)
    z = y.copy()
    z[-1] += 100.0
    b = evaluate_series(z[:-1], ms, bw, None, 7, M=100)
    for m in ms:
        assert a[m.name][0] == b[m.name][0]


def test_failures_are_recorded_not_raised():
    ms = parse_methods(["MB-LC-P"])
    res = evaluate_series(np.arange(3.0), ms, {_bw_key(ms[0]): 40.0}, None, 0)
    assert isinstance(res["MB-LC-P"], Exception)


# --- CLI ---------------------------------------------------------------------

@pytest.fixture
def series_csv(tmp_path):
    path = tmp_path / "y.csv"
    assert main(["simulate", "--design", "ar5", "--n", "160", "--seed", "9", "--out",
                 str(path)]) == 0
    return path


def test_cli_simulate_deterministic(capsys):
    main(["simulate", "--design", "tar1", "--n", "50", "--seed", "3"])
    a = capsys.readouterr().out
    main(["simulate", "--design", "tar1", "--n", "50", "--seed", "3"])
    assert capsys.readouterr().out == a
    assert len(a.strip().splitlines()) >= 50


def test_cli_predict(series_csv, capsys):
    capsys.readouterr()
    rc = main(["predict", "--input", str(series_csv), "--method", "mf-llm", "--b", "40",
               "--seed", "1"])
    rec = json.loads(capsys.readouterr().out)
    assert rc == 0
    assert rec["schema"] == 1
    assert rec["method"] == "MF-LLM-P"
    assert np.isfinite(rec["point"])


def test_cli_interval(series_csv, capsys, tmp_path):
    capsys.readouterr()
    roots = tmp_path / "roots.csv"
    rc = main(["interval", "--input", str(series_csv), "--method", "mb-lc", "--b", "40",
               "--B", "20", "--seed", "1", "--out", str(roots)])
    assert rc == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["interval"][0] <= rec["interval"][1]
    assert len(roots.read_text().splitlines()) == 21


def test_cli_unknown_method_exit_2(series_csv, capsys):
    rc = main(["predict", "--input", str(series_csv), "--method", "zz-lc", "--seed", "1"])
    assert rc == 2
    assert "usage" in capsys.readouterr().err


def test_cli_numeric_failure_exit_1(tmp_path, capsys):
    path = tmp_path / "one.csv"
    path.write_text("value\n1.0\n")
    rc = main(["predict", "--input", str(path), "--method", "mb-lc", "--b", "10", "--seed", "1"])
    assert rc == 1
    rec = json.loads(capsys.readouterr().out)
    assert rec["schema"] == 1 and "error" in rec


def test_cli_evaluate_writes_table(tmp_path, capsys):
    out = tmp_path / "table.csv"
    rc = main(["evaluate", "--design", "ar5", "-R", "2", "--n", "150", "--methods", "mb-lc-p",
               "--bandwidth", "MB-LC=30", "--seed", "1", "--out", str(out)])
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("method,residuals,bias,mse,cvr")
    assert lines[1].startswith("MB-LC,P,")


def test_cli_diagnose_files(series_csv, tmp_path):
    d = tmp_path / "diag"
    assert main(["diagnose", "--input", str(series_csv), "--b", "40", "--out-dir", str(d),
                 "--max-lag", "10"]) == 0
    for f in ("ks.csv", "sw_z.csv", "acf_z.csv", "acf_epsilon.csv", "qq_z.csv", "qq_epsilon.csv"):
        assert (d / f).exists()
    assert len((d / "acf_z.csv").read_text().splitlines()) == 12


def test_cli_rampfit_and_bandwidth(series_csv, capsys):
    capsys.readouterr()
    assert main(["rampfit", "--input", str(series_csv), "--max-iter", "5"]) == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["t1"] < rec["t2"]
    assert main(["bandwidth", "--input", str(series_csv), "--method", "mb-ll",
                 "--grid", "20", "40"]) == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["b"] in (20.0, 40.0)
