import math

import numpy as np
import pytest
from scipy.stats import norm

from tzlasso.geometry import LineDecomposition
from tzlasso.inference import (
    AnalyzeOptions,
    SigmaSpec,
    analyze,
    analyze_with_fit,
    bonferroni_interval,
    build_target,
    default_cutoff,
    default_lambda_high,
    estimate_sigma_reid,
    naive_interval,
    select_high_value_t,
    universal_lambda,
)
from tzlasso.lasso import LassoOptions, fit_lasso, null_penalty
from tzlasso.validation import ValidationError

from oracles import (
    gauss_instance,
    quad_tg_interval,
    simple_model_sign_polyhedron,
)

ALL_METHODS = ("naive", "bonferroni", "tz_v", "tz_m", "tz_ms", "tz_stab_t", "tz_stab_l1")


# ------------------------------------------------------------------ targets


def test_target_contrasts_reproduce_unit_coordinates():
    X, y, _ = gauss_instance(0, 30, 6)
    full = build_target(X, "full", 2)
    assert np.allclose(X.T @ full.eta, np.eye(6)[:, 2], atol=1e-8)

    M = (0, 2, 4)
    part = build_target(X, "partial", 2, active=M)
    assert np.allclose(X[:, list(M)].T @ part.eta, [0, 1, 0], atol=1e-8)
    assert part.context == M

    high = build_target(X, "stable_t", 3, high=(0, 2))
    assert high.context == (0, 2, 3)
    assert high.high_value is False
    XC = X[:, [0, 2, 3]]
    assert np.allclose(XC.T @ high.eta, [0, 0, 1], atol=1e-8)

    hv = build_target(X, "stable_t", 2, high=(0, 2))
    assert hv.context == (0, 2)
    assert hv.high_value is True


def test_target_validation():
    X, y, _ = gauss_instance(0, 10, 20)
    with pytest.raises(ValidationError):
        build_target(X, "full", 0)
    with pytest.raises(ValidationError):
        build_target(X, "nope", 0)


# ------------------------------------------------------------------- sigma


def test_select_high_value_t_extremes():
    X, y, _ = gauss_instance(1, 40, 8, k=3, signal=1.0)
    M = fit_lasso(X, y, LassoOptions(penalty=0.2 * 40)).active_set
    assert M
    assert select_high_value_t(X, y, M, 1.0, 0.0) == M
    assert select_high_value_t(X, y, M, 1.0, 1e9) == ()


def test_high_value_cutoff_formula():
    # 90% intervals with p = 8 -> threshold 2.49; p = 210 -> 3.5
    assert default_cutoff(0.1, 8) == pytest.approx(2.49, abs=0.01)
    assert default_cutoff(0.1, 210) == pytest.approx(3.5, abs=0.01)


def test_sigma_reid_noiseless_is_tiny():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((60, 5))
    y = X @ np.array([1.0, -0.5, 0, 0, 0])  # exactly in the column span
    # residuals inherit the smallest grid penalty's shrinkage, nothing more
    assert estimate_sigma_reid(X, y, seed=0) < 0.01


def test_sigma_reid_recovers_noise_scale():
    vals = []
    for seed in range(30):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((200, 10))
        y = 0.8 * rng.standard_normal(200)
        vals.append(estimate_sigma_reid(X, y, seed=seed))
    med = float(np.median(vals))
    assert abs(med - 0.8) / 0.8 < 0.15


def test_universal_lambda_values():
    assert universal_lambda(100, 250) == pytest.approx(0.33, abs=0.005)
    assert universal_lambda(100, 50) == pytest.approx(0.28, abs=0.005)
    assert universal_lambda(100, 1250) == pytest.approx(0.38, abs=0.005)


def test_default_lambda_high_rule():
    n, p = 100, 250
    univ_sum = universal_lambda(n, p) * n
    assert default_lambda_high(0.5 * univ_sum, n, p) == pytest.approx(univ_sum)
    assert default_lambda_high(univ_sum, n, p) == pytest.approx(1.25 * univ_sum)


# ------------------------------------------------------- plain intervals


def test_naive_and_bonferroni_intervals():
    est = naive_interval(0.0, 1.0, 0.1)
    assert est.lower == pytest.approx(-1.6449, abs=1e-3)
    assert est.upper == pytest.approx(1.6449, abs=1e-3)
    assert bonferroni_interval(0.0, 1.0, 0.1, 1).lower == pytest.approx(
        est.lower, abs=1e-12
    )
    wide = bonferroni_interval(0.0, 1.0, 0.1, 210)
    assert wide.upper == pytest.approx(3.5, abs=0.01)


# ------------------------------------------------------------------ analyze


def test_analyze_empty_active_set():
    X, y, _ = gauss_instance(3, 25, 6)
    lam = null_penalty(X, y) * 1.2
    assert analyze(X, y, lam, methods=("tz_v",), sigma=1.0) == []


def test_analyze_naive_rows_match_closed_form():
    X, y, _ = gauss_instance(4, 50, 10, k=2, signal=1.0)
    lam = 0.25 * 50
    res = analyze(X, y, lam, methods=("naive",), sigma=1.0, alpha=0.1)
    assert res
    q = norm.ppf(0.95)
    for r in res:
        assert r.interval.lower == pytest.approx(r.z_obs - q * r.sigma_eta, abs=1e-6)
        assert r.interval.upper == pytest.approx(r.z_obs + q * r.sigma_eta, abs=1e-6)
        assert r.point_estimate == r.z_obs


def test_analyze_rows_ordered_and_complete():
    X, y, _ = gauss_instance(5, 60, 12, k=3, signal=0.8)
    lam = 0.2 * 60
    fit, sigma, res = analyze_with_fit(
        X, y, lam, methods=ALL_METHODS, sigma=1.0
    )
    assert sigma == 1.0
    expected = [(j, m) for j in fit.active_set for m in ALL_METHODS]
    assert [(r.variable, r.method) for r in res] == expected
    for r in res:
        if r.truncation is not None and not r.failed:
            assert r.truncation.contains(r.z_obs, tol=1e-8 * r.sigma_eta)


def test_analyze_tz_ms_matches_independent_oracle_path():
    """Dual-path check: independent polyhedron + slice + plain inversion."""
    X, y, _ = gauss_instance(6, 100, 50, k=5, signal=0.62)
    n = 100
    lam = 0.14 * n
    fit, sigma, res = analyze_with_fit(
        X, y, lam, methods=("tz_ms",), target_kind="full", sigma=1.0, alpha=0.1
    )
    assert fit.active_set
    A, b = simple_model_sign_polyhedron(X, fit.active_set, fit.signs, lam)
    gram = X.T @ X
    checked = 0
    for r in res:
        eta = X @ np.linalg.solve(gram, np.eye(50)[:, r.variable])
        line = LineDecomposition.from_contrast(y, eta)
        Ac = A @ line.c
        resid = b - A @ line.nu
        pos, neg = Ac > 1e-12, Ac < -1e-12
        v_plus = (resid[pos] / Ac[pos]).min() if pos.any() else math.inf
        v_minus = (resid[neg] / Ac[neg]).max() if neg.any() else -math.inf
        got = r.truncation.intervals[0]
        if math.isfinite(v_minus):
            assert got[0] == pytest.approx(v_minus, abs=1e-7)
        if math.isfinite(v_plus):
            assert got[1] == pytest.approx(v_plus, abs=1e-7)
        lo, up = quad_tg_interval(
            r.z_obs, r.sigma_eta, [(v_minus, v_plus)], 0.1
        )
        if lo is not None and not r.interval.lower_infinite:
            assert r.interval.lower == pytest.approx(lo, abs=1e-6)
            checked += 1
        if up is not None and not r.interval.upper_infinite:
            assert r.interval.upper == pytest.approx(up, abs=1e-6)
    assert checked >= 3


def test_analyze_stable_targets_partition_actives():
    X, y, _ = gauss_instance(7, 97, 8, k=3, signal=0.8, sigma=0.7)
    lam = 0.05 * 97
    cutoff = 2.49
    fit, sigma, res = analyze_with_fit(
        X,
        y,
        lam,
        methods=("tz_stab_t",),
        sigma=0.7,
        alpha=0.1,
        options=AnalyzeOptions(cutoff=cutoff),
    )
    H = select_high_value_t(X, y, fit.active_set, 0.7, cutoff)
    assert res
    for r in res:
        assert r.target.high_value == (r.variable in H)
        expected_ctx = tuple(sorted(set(H) | {r.variable}))
        assert r.target.context == expected_ctx


def test_analyze_per_variable_isolation():
    # a rank-deficient stable context cannot kill sibling rows
    X, y, _ = gauss_instance(8, 40, 10, k=2, signal=1.0)
    lam = 0.2 * 40
    res = analyze(
        X, y, lam, methods=("naive", "tz_ms"), sigma=1.0,
        options=AnalyzeOptions(max_segments=10_000),
    )
    assert all(not r.failed for r in res)
    # sanity: a method list with an unknown name is rejected up front
    with pytest.raises(ValidationError):
        analyze(X, y, lam, methods=("tz_q",), sigma=1.0)


def test_analyze_auto_target_rule():
    X, y, _ = gauss_instance(9, 40, 10, k=2, signal=1.0)
    res = analyze(X, y, 0.2 * 40, methods=("tz_v",), sigma=1.0)
    assert all(r.target.kind == "full" for r in res)
    X, y, _ = gauss_instance(10, 30, 60, k=2, signal=1.2)
    res = analyze(X, y, 0.35 * 30, methods=("tz_v",), sigma=1.0)
    assert all(r.target.kind == "partial" for r in res)
    assert all("partial-target-interpretation" in r.flags for r in res)


def test_analyze_intercept_centering():
    rng = np.random.default_rng(11)
    X = rng.standard_normal((80, 6))
    beta = np.array([1.0, -1.0, 0, 0, 0, 0])
    y = 5.0 + X @ beta + 0.5 * rng.standard_normal(80)
    res = analyze(
        X, y, 0.1 * 80, methods=("tz_v",), sigma=0.5,
        options=AnalyzeOptions(include_intercept=True),
    )
    sel = {r.variable for r in res}
    assert {0, 1} <= sel
