import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest

from tzlasso.cli import main
from tzlasso.inference import select_high_value_t
from tzlasso.lasso import LassoOptions, fit_lasso, null_penalty

DATA = Path(__file__).parent / "data"


def write_csv(path, X, y, response="resp", sep=","):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, delimiter=sep)
        writer.writerow([f"c{j}" for j in range(X.shape[1])] + [response])
        for i in range(X.shape[0]):
            writer.writerow(list(X[i]) + [y[i]])


def from_safe(v):
    if v == "inf":
        return math.inf
    if v == "-inf":
        return -math.inf
    return v


def test_golden_report_from_dual_path_oracle(tmp_path):
    golden = json.loads((DATA / "golden_report.json").read_text())
    rc = main([
        "analyze", str(DATA / "fixture.csv"),
        "--response", "outcome",
        "--lambda", str(golden["lambda_per_obs"]),
        "--method", "tz-v,tz-m,tz-ms",
        "--alpha", str(golden["alpha"]),
        "--sigma", f"known:{golden['sigma']}",
        "--no-intercept",
        "--out", str(tmp_path),
    ])
    assert rc == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["metadata"]["selected"] == golden["selected"]
    got = {(r["name"], r["method"]): r for r in report["results"]}
    assert len(got) == len(golden["rows"])
    for row in golden["rows"]:
        mine = got[(row["name"], row["method"])]
        assert mine["z_obs"] == pytest.approx(row["z_obs"], abs=1e-9)
        assert mine["sigma_eta"] == pytest.approx(row["sigma_eta"], abs=1e-9)
        for side in ("lower", "upper"):
            ref = from_safe(row[side])
            val = from_safe(mine[side])
            if math.isinf(ref):
                assert math.isinf(val) and (val > 0) == (ref > 0)
            else:
                assert val == pytest.approx(ref, abs=1e-6)
        assert mine["p_value"] == pytest.approx(row["p_value"], abs=1e-5)


def test_report_csv_schema_stable(tmp_path):
    golden = json.loads((DATA / "golden_report.json").read_text())
    main([
        "analyze", str(DATA / "fixture.csv"), "--response", "outcome",
        "--lambda", str(golden["lambda_per_obs"]), "--method", "naive,tz-ms",
        "--sigma", "known:1.0", "--no-intercept", "--out", str(tmp_path),
    ])
    lines = (tmp_path / "report.csv").read_text().splitlines()
    assert lines[0] == (
        "variable,name,method,target,high_value,z_obs,sigma_eta,estimate,"
        "lower,upper,level,p_value,truncation,flags"
    )
    assert len(lines) == 1 + 2 * len(golden["selected"])


def test_report_json_validates_against_schema(tmp_path):
    jsonschema = pytest.importorskip("jsonschema")
    golden = json.loads((DATA / "golden_report.json").read_text())
    main([
        "analyze", str(DATA / "fixture.csv"), "--response", "outcome",
        "--lambda", str(golden["lambda_per_obs"]),
        "--method", "naive,bonferroni,tz-v,tz-m,tz-ms",
        "--sigma", "known:1.0", "--no-intercept", "--out", str(tmp_path),
    ])
    schema = json.loads(
        (Path(__file__).parents[1] / "docs" / "report.schema.json").read_text()
    )
    report = json.loads((tmp_path / "report.json").read_text())
    jsonschema.validate(report, schema)


def test_analyze_deterministic_given_flags(tmp_path):
    golden = json.loads((DATA / "golden_report.json").read_text())
    args = [
        "analyze", str(DATA / "fixture.csv"), "--response", "outcome",
        "--lambda", "cv", "--method", "tz-ms", "--sigma", "reid",
        "--seed", "7",
    ]
    main(args + ["--out", str(tmp_path / "a")])
    main(args + ["--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "report.json").read_text() == (
        tmp_path / "b" / "report.json"
    ).read_text()


def test_null_penalty_gives_empty_report(tmp_path):
    rng = np.random.default_rng(0)
    X = rng.standard_normal((30, 5))
    y = rng.standard_normal(30)
    write_csv(tmp_path / "d.csv", X, y)
    lam = null_penalty(X, y) / 30 * 1.5
    rc = main([
        "analyze", str(tmp_path / "d.csv"), "--response", "resp",
        "--lambda", str(lam), "--sigma", "known:1.0", "--no-intercept",
        "--out", str(tmp_path / "rep"),
    ])
    assert rc == 0
    report = json.loads((tmp_path / "rep" / "report.json").read_text())
    assert report["results"] == []


def test_prostate_shaped_stable_t_partition(tmp_path):
    """(97, 8) run with known sigma: high/low split matches the screener."""
    rng = np.random.default_rng(97)
    n, p = 97, 8
    X = rng.standard_normal((n, p))
    beta = np.array([0.6, 0.5, 0.4, 0.0, 0.0, 0.08, 0.0, 0.0])
    y = X @ beta + 0.7 * rng.standard_normal(n)
    write_csv(tmp_path / "prost.csv", X, y, response="lpsa")
    lam_obs = 0.033
    rc = main([
        "analyze", str(tmp_path / "prost.csv"), "--response", "lpsa",
        "--lambda", str(lam_obs), "--method", "tz-stab-t",
        "--target", "stable-t", "--sigma", "known:0.70",
        "--cutoff", "2.49", "--no-intercept",
        "--out", str(tmp_path / "rep"),
    ])
    assert rc == 0
    report = json.loads((tmp_path / "rep" / "report.json").read_text())
    fit = fit_lasso(X, y, LassoOptions(penalty=lam_obs * n))
    H = set(select_high_value_t(X, y, fit.active_set, 0.70, 2.49))
    assert len(fit.active_set) >= 4
    assert H and H < set(fit.active_set)
    for row in report["results"]:
        j = int(row["name"][1:])
        assert row["high_value"] == (j in H)


def test_tab_delimited_input(tmp_path):
    rng = np.random.default_rng(3)
    X = rng.standard_normal((40, 4))
    y = X[:, 0] * 2 + rng.standard_normal(40)
    write_csv(tmp_path / "d.tsv", X, y, sep="\t")
    rc = main([
        "analyze", str(tmp_path / "d.tsv"), "--response", "resp",
        "--lambda", "0.3", "--sigma", "known:1.0", "--no-intercept",
        "--out", str(tmp_path / "rep"),
    ])
    assert rc == 0


def test_exit_codes_input_errors(tmp_path):
    rc = main(["analyze", str(tmp_path / "missing.csv"), "--response", "y"])
    assert rc == 2

    rng = np.random.default_rng(1)
    X = rng.standard_normal((20, 3))
    y = rng.standard_normal(20)
    write_csv(tmp_path / "d.csv", X, y)
    rc = main([
        "analyze", str(tmp_path / "d.csv"), "--response", "absent",
        "--out", str(tmp_path / "r"),
    ])
    assert rc == 2

    with open(tmp_path / "text.csv", "w") as fh:
        fh.write("a,b,resp\nx,1,2\ny,3,4\n")
    rc = main([
        "analyze", str(tmp_path / "text.csv"), "--response", "resp",
        "--out", str(tmp_path / "r"),
    ])
    assert rc == 2

    rc = main([
        "analyze", str(tmp_path / "d.csv"), "--response", "resp",
        "--method", "tz-zz", "--out", str(tmp_path / "r"),
    ])
    assert rc == 2


def test_exit_code_numerical_abort(tmp_path, monkeypatch):
    import tzlasso.cli as cli_mod
    from tzlasso.simulation import StudyAbortError

    rc = main([
        "simulate", str(tmp_path / "nonexistent.json"),
        "--out", str(tmp_path / "s"),
    ])
    assert rc == 2
    (tmp_path / "bad.json").write_text(json.dumps({"n": 10}))
    rc = main(["simulate", str(tmp_path / "bad.json"), "--out", str(tmp_path / "s")])
    assert rc == 2  # p missing

    cfg = {
        "n": 20, "p": 3, "k_signals": 1, "signal": 1.0, "lambda_rule": 0.2,
        "methods": ["tz_v"], "replications": 5, "seed": 1,
    }
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))

    def exploding(*args, **kwargs):
        raise StudyAbortError("synthetic abort")

    monkeypatch.setattr(cli_mod, "run_study", exploding)
    rc = main(["simulate", str(tmp_path / "cfg.json"), "--out", str(tmp_path / "s")])
    assert rc == 3


def test_simulate_reproducible_and_thread_invariant(tmp_path):
    cfg = {
        "n": 50, "p": 10, "k_signals": 2, "signal": 0.8,
        "lambda_rule": 0.25, "methods": ["naive", "tz_ms"],
        "replications": 6, "seed": 9,
    }
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))
    for out, threads in (("s1", "1"), ("s2", "1"), ("s3", "2")):
        rc = main([
            "simulate", str(tmp_path / "cfg.json"), "--out",
            str(tmp_path / out), "--threads", threads, "--svg",
        ])
        assert rc == 0
    s1 = (tmp_path / "s1" / "study.json").read_text()
    assert s1 == (tmp_path / "s2" / "study.json").read_text()
    assert s1 == (tmp_path / "s3" / "study.json").read_text()
    assert (tmp_path / "s1" / "lengths.svg").exists()
    assert (tmp_path / "s1" / "study.csv").read_text().startswith("method,")


def test_simulate_study_json_validates_against_schema(tmp_path):
    jsonschema = pytest.importorskip("jsonschema")
    cfg = {
        "n": 40, "p": 8, "k_signals": 2, "signal": 0.9,
        "lambda_rule": 0.3, "methods": ["tz_v"], "replications": 4, "seed": 2,
    }
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))
    main(["simulate", str(tmp_path / "cfg.json"), "--out", str(tmp_path / "s")])
    schema = json.loads(
        (Path(__file__).parents[1] / "docs" / "study.schema.json").read_text()
    )
    study = json.loads((tmp_path / "s" / "study.json").read_text())
    jsonschema.validate(study, schema)


def test_calibrate_prints_constants(capsys):
    rc = main(["calibrate", "--n", "100", "--p", "250", "--reps", "150", "--seed", "4"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "lambda_universal (per-observation) = 0.3323" in out
    assert "delta_low" in out and "delta_high" in out


def test_replications_override(tmp_path):
    cfg = {
        "n": 40, "p": 8, "k_signals": 2, "signal": 0.9,
        "lambda_rule": 0.3, "methods": ["naive"], "replications": 50, "seed": 2,
    }
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))
    rc = main([
        "simulate", str(tmp_path / "cfg.json"), "--replications", "3",
        "--out", str(tmp_path / "s"),
    ])
    assert rc == 0
    study = json.loads((tmp_path / "s" / "study.json").read_text())
    assert study["replications_run"] == 3
