"""Monte Carlo harness: coverage and interval-length studies.

A study draws fresh data per replication, runs the inference pipeline with
the configured methods, and tallies, per method, the empirical coverage of
each method's own realized target, interval lengths, and the proportion of
flagged-infinite intervals.  Everything is reproducible from the config
seed regardless of worker parallelism.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from joblib import Parallel, delayed
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .cv import cv_lambda
from .inference import (
    METHODS,
    AnalyzeOptions,
    InferenceResult,
    SigmaSpec,
    TargetSpec,
    analyze,
    default_lambda_high,
    universal_lambda,
)
from .validation import ValidationError

DESIGN_KINDS = ("independent", "block_equicorr", "toeplitz")
NOISE_KINDS = ("normal", "student_t", "skew_normal")
SIGNAL_LEVELS = ("null", "low", "high")


class StudyAbortError(RuntimeError):
    """Replication failures exceeded the study's failure budget."""


@dataclass(frozen=True)
class DesignScheme:
    kind: str = "independent"
    rho: float = 0.0
    blocks: int = 5

    def __post_init__(self):
        if self.kind not in DESIGN_KINDS:
            raise ValidationError(f"design kind must be one of {DESIGN_KINDS}")
        if not 0.0 <= self.rho < 1.0:
            raise ValidationError("design rho must lie in [0, 1)")
        if self.blocks < 1:
            raise ValidationError("blocks must be positive")


@dataclass(frozen=True)
class NoiseScheme:
    kind: str = "normal"
    sigma: float = 1.0
    dof: float = 3.0
    skewness: float = 10.0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValidationError(f"noise kind must be one of {NOISE_KINDS}")
        if self.sigma < 0:
            raise ValidationError("noise sigma must be nonnegative")
        if self.kind == "student_t" and self.dof <= 2:
            raise ValidationError("student_t noise needs dof > 2 for finite variance")


@dataclass(frozen=True)
class StudyConfig:
    n: int
    p: int
    k_signals: int = 5
    signal: str | float = "null"  # "null" | "low" | "high" | explicit value
    design: DesignScheme = DesignScheme()
    noise: NoiseScheme = NoiseScheme()
    lambda_rule: str | float = "universal"  # "universal" | "cv_median" | per-obs value
    methods: tuple[str, ...] = ("tz_v", "tz_m", "tz_ms")
    target_kind: str = "auto"
    alpha: float = 0.1
    replications: int = 100
    seed: int = 0
    sigma_mode: str = "known"  # known (= noise.sigma) | reid plug-in
    lambda_high: float | None = None  # per-obs; default rule applies when None
    cutoff: float | None = None
    calibration_reps: int = 1000
    cv_calibration_reps: int = 50

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise ValidationError("invalid study config: " + "; ".join(problems))

    def problems(self) -> list[str]:
        issues = []
        if self.n < 2:
            issues.append("n must be at least 2")
        if self.p < 1:
            issues.append("p must be at least 1")
        if not 0 <= self.k_signals <= self.p:
            issues.append("k_signals must lie in [0, p]")
        if isinstance(self.signal, str) and self.signal not in SIGNAL_LEVELS:
            issues.append(f"signal must be a number or one of {SIGNAL_LEVELS}")
        if isinstance(self.lambda_rule, str) and self.lambda_rule not in (
            "universal",
            "cv_median",
        ):
            issues.append("lambda_rule must be a number, 'universal' or 'cv_median'")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            issues.append(f"unknown methods {bad}")
        if not 0 < self.alpha < 1:
            issues.append("alpha must be in (0, 1)")
        if self.replications < 1:
            issues.append("replications must be at least 1")
        if self.sigma_mode not in ("known", "reid"):
            issues.append("sigma_mode must be 'known' or 'reid'")
        if self.design.kind == "block_equicorr" and self.p % self.design.blocks:
            issues.append("blocks must divide p for block_equicorr designs")
        return issues

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, payload: dict) -> "StudyConfig":
        payload = dict(payload)
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(payload) - known)
        if unknown:
            raise ValidationError(f"invalid study config: unknown fields {unknown}")
        missing = sorted({"n", "p"} - set(payload))
        if missing:
            raise ValidationError(
                f"invalid study config: missing required fields {missing}"
            )
        try:
            if "design" in payload and isinstance(payload["design"], dict):
                payload["design"] = DesignScheme(**payload["design"])
            if "noise" in payload and isinstance(payload["noise"], dict):
                payload["noise"] = NoiseScheme(**payload["noise"])
        except TypeError as err:
            raise ValidationError(f"invalid study config: {err}")
        if "methods" in payload:
            payload["methods"] = tuple(payload["methods"])
        return cls(**payload)

    @classmethod
    def from_json(cls, text: str) -> "StudyConfig":
        return cls.from_dict(json.loads(text))


def gen_design(n: int, p: int, scheme: DesignScheme, seed) -> np.ndarray:
    """Draw a design matrix under the configured correlation structure."""
    rng = _as_rng(seed)
    if scheme.kind == "independent":
        return rng.standard_normal((n, p))
    if scheme.kind == "block_equicorr":
        if p % scheme.blocks:
            raise ValidationError("blocks must divide p")
        size = p // scheme.blocks
        rho = scheme.rho
        cols = np.empty((n, p))
        for b in range(scheme.blocks):
            lead = rng.standard_normal(n)
            block = np.empty((n, size))
            block[:, 0] = lead
            if size > 1:
                eps = rng.standard_normal((n, size - 1))
                block[:, 1:] = rho * lead[:, None] + math.sqrt(1 - rho**2) * eps
            cols[:, b * size : (b + 1) * size] = block
        return cols
    # toeplitz: cov[i, j] = rho^|i-j|, sampled through its Cholesky factor
    if scheme.rho >= 1.0:
        raise ValidationError("toeplitz rho must be < 1 for a valid covariance")
    idx = np.arange(p)
    cov = scheme.rho ** np.abs(idx[:, None] - idx[None, :])
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as err:
        raise ValidationError("toeplitz covariance not positive definite") from err
    return rng.standard_normal((n, p)) @ chol.T


def signal_positions(scheme: DesignScheme, p: int, k: int, rng) -> np.ndarray:
    """Where the nonzero coefficients live, matched to the design structure."""
    if k == 0:
        return np.empty(0, dtype=int)
    if scheme.kind == "block_equicorr":
        if k > scheme.blocks:
            raise ValidationError("block designs carry one signal per block")
        size = p // scheme.blocks
        return np.arange(k) * size
    if scheme.kind == "toeplitz":
        return np.sort(rng.choice(p, size=k, replace=False))
    return np.arange(k)


def gen_response(X, beta, noise: NoiseScheme, seed) -> np.ndarray:
    """``y = X beta + sigma * eps`` with eps standardized to unit variance."""
    rng = _as_rng(seed)
    n = X.shape[0]
    if noise.kind == "normal":
        eps = rng.standard_normal(n)
    elif noise.kind == "student_t":
        eps = rng.standard_t(noise.dof, size=n) * math.sqrt(
            (noise.dof - 2.0) / noise.dof
        )
    else:
        delta = noise.skewness / math.sqrt(1.0 + noise.skewness**2)
        u0 = rng.standard_normal(n)
        u1 = rng.standard_normal(n)
        raw = delta * np.abs(u0) + math.sqrt(1.0 - delta**2) * u1
        mean = delta * math.sqrt(2.0 / math.pi)
        sd = math.sqrt(1.0 - 2.0 * delta**2 / math.pi)
        eps = (raw - mean) / sd
    return X @ np.asarray(beta, dtype=float) + noise.sigma * eps


def calibrate_delta(
    n: int,
    p: int,
    design: DesignScheme = DesignScheme(),
    reps: int = 1000,
    seed: int = 0,
) -> tuple[float, float]:
    """Signal sizes from the null distribution of ``max_j |x_j^T y| / n``.

    Returns the median (a signal hard to tell from noise) and the 99th
    percentile plus 0.25 (comfortably past the noise level).
    """
    if reps < 100:
        raise ValidationError("delta calibration needs at least 100 draws")
    rng = _as_rng(seed)
    stats = np.empty(reps)
    for r in range(reps):
        X = gen_design(n, p, design, rng)
        y = rng.standard_normal(n)
        stats[r] = np.abs(X.T @ y).max() / n
    return float(np.median(stats)), float(np.quantile(stats, 0.99) + 0.25)


def calibrate_lambda_cv(
    n: int,
    p: int,
    design: DesignScheme,
    noise: NoiseScheme,
    signal_value: float,
    k_signals: int,
    reps: int = 50,
    seed: int = 0,
) -> float:
    """Median 10-fold CV penalty choice over fresh datasets (per-obs scale)."""
    if reps < 10:
        raise ValidationError("cv calibration needs at least 10 repetitions")
    rng = _as_rng(seed)
    picks = np.empty(reps)
    for r in range(reps):
        X = gen_design(n, p, design, rng)
        pos = signal_positions(design, p, k_signals, rng)
        beta = np.zeros(p)
        beta[pos] = signal_value
        y = gen_response(X, beta, noise, rng)
        picks[r] = cv_lambda(X, y, rng)
    return float(np.median(picks))


def realized_target(X, beta_true, target: TargetSpec) -> float:
    """Value of the target functional under the replication's truth.

    The covered parameter is recomputed from the realized context (active
    set or high-value set), matching the conditional guarantee.
    """
    mu = X @ np.asarray(beta_true, dtype=float)
    C = list(target.context)
    XC = X[:, C]
    try:
        cf = cho_factor(XC.T @ XC)
    except LinAlgError as err:
        raise ValidationError(f"target context {C} is rank deficient") from err
    theta = cho_solve(cf, XC.T @ mu)
    return float(theta[C.index(target.variable)])


@dataclass(frozen=True)
class MethodSummary:
    method: str
    n_intervals: int
    coverage: float
    median_length: float  # infinite-flag intervals enter as +inf
    median_length_finite: float
    infinite_proportion: float
    failed_rows: int

    def as_dict(self) -> dict:
        d = asdict(self)
        for key in ("median_length", "median_length_finite"):
            if math.isinf(d[key]):
                d[key] = "inf"
            elif math.isnan(d[key]):
                d[key] = None
        if math.isnan(d["coverage"]):
            d["coverage"] = None
        return d


@dataclass(frozen=True)
class StudyReport:
    config: StudyConfig
    lambda_per_obs: float
    lambda_high_per_obs: float
    delta_low: float | None
    delta_high: float | None
    signal_value: float
    methods: tuple[MethodSummary, ...]
    replications_run: int
    failed_replications: int
    mean_active_size: float
    reps_with_selection: int
    # raw per-method interval lengths; populated on request for plotting,
    # never serialized
    raw_lengths: dict | None = None

    def summary_for(self, method: str) -> MethodSummary:
        for s in self.methods:
            if s.method == method:
                return s
        raise KeyError(method)

    def to_dict(self) -> dict:
        return {
            "config": asdict(self.config),
            "calibration": {
                "lambda_per_obs": self.lambda_per_obs,
                "lambda_sum": self.lambda_per_obs * self.config.n,
                "lambda_high_per_obs": self.lambda_high_per_obs,
                "delta_low": self.delta_low,
                "delta_high": self.delta_high,
                "signal_value": self.signal_value,
            },
            "methods": [s.as_dict() for s in self.methods],
            "replications_run": self.replications_run,
            "failed_replications": self.failed_replications,
            "mean_active_size": self.mean_active_size,
            "reps_with_selection": self.reps_with_selection,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        cols = (
            "method,n_intervals,coverage,median_length,median_length_finite,"
            "infinite_proportion,failed_rows"
        )
        lines = [cols]
        for s in self.methods:
            d = s.as_dict()
            lines.append(
                ",".join(
                    str(d[c]) for c in cols.split(",")
                )
            )
        return "\n".join(lines) + "\n"


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _resolve_signal(cfg: StudyConfig, deltas) -> float:
    if isinstance(cfg.signal, (int, float)):
        return float(cfg.signal)
    if cfg.signal == "null":
        return 0.0
    return deltas[0] if cfg.signal == "low" else deltas[1]


def _rep_rows(cfg, seed_seq, lam_sum, lam_high_sum, signal_value):
    """One replication: fresh data, analyze, per-row coverage records."""
    rng = np.random.default_rng(seed_seq)
    X = gen_design(cfg.n, cfg.p, cfg.design, rng)
    pos = signal_positions(cfg.design, cfg.p, cfg.k_signals, rng)
    beta = np.zeros(cfg.p)
    beta[pos] = signal_value
    y = gen_response(X, beta, cfg.noise, rng)

    if cfg.sigma_mode == "known":
        sigma = SigmaSpec("known", cfg.noise.sigma)
    else:
        sigma = SigmaSpec("reid")
    options = AnalyzeOptions(
        lambda_high=lam_high_sum,
        cutoff=cfg.cutoff,
        seed=int(rng.integers(2**31 - 1)),
    )
    results = analyze(
        X,
        y,
        lam_sum,
        methods=cfg.methods,
        target_kind=cfg.target_kind,
        sigma=sigma,
        alpha=cfg.alpha,
        options=options,
    )
    rows = []
    n_active = len({r.variable for r in results})
    for r in results:
        if r.failed or r.interval is None or r.target is None:
            rows.append((r.method, math.nan, False, False, True))
            continue
        theta = realized_target(X, beta, r.target)
        covered = r.interval.lower <= theta <= r.interval.upper
        infinite = r.interval.any_infinite
        length = math.inf if infinite else r.interval.length
        rows.append((r.method, length, covered, infinite, False))
    return rows, n_active


def run_study(
    cfg: StudyConfig,
    n_jobs: int = 1,
    verbose: int = 0,
    keep_lengths: bool = False,
) -> StudyReport:
    """Execute all replications and aggregate the per-method tallies.

    Replications get derived seeds from the config seed and are aggregated
    in replication order, so reports are identical for any worker count.
    Individual replication failures are tolerated up to a 1% budget.
    """
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.replications + 2)
    aux, rep_seeds = children[:2], children[2:]

    deltas = None
    if cfg.signal in ("low", "high"):
        deltas = calibrate_delta(
            cfg.n, cfg.p, cfg.design, cfg.calibration_reps, aux[0]
        )
    signal_value = _resolve_signal(cfg, deltas)

    if isinstance(cfg.lambda_rule, (int, float)):
        lam_obs = float(cfg.lambda_rule)
    elif cfg.lambda_rule == "universal":
        lam_obs = universal_lambda(cfg.n, cfg.p)
    else:
        lam_obs = calibrate_lambda_cv(
            cfg.n,
            cfg.p,
            cfg.design,
            cfg.noise,
            signal_value,
            cfg.k_signals,
            reps=cfg.cv_calibration_reps,
            seed=aux[1],
        )
    lam_sum = lam_obs * cfg.n
    if cfg.lambda_high is not None:
        lam_high_sum = float(cfg.lambda_high) * cfg.n
    else:
        lam_high_sum = default_lambda_high(lam_sum, cfg.n, cfg.p)

    def one(seed_seq):
        try:
            return _rep_rows(cfg, seed_seq, lam_sum, lam_high_sum, signal_value)
        except Exception as err:
            return ("replication-failed", repr(err))

    if n_jobs == 1:
        outcomes = [one(s) for s in rep_seeds]
    else:
        outcomes = Parallel(n_jobs=n_jobs, verbose=verbose)(
            delayed(one)(s) for s in rep_seeds
        )

    failures = 0
    per_method: dict[str, dict[str, list]] = {
        m: {"length": [], "covered": [], "infinite": [], "failed": 0}
        for m in cfg.methods
    }
    active_sizes = []
    for outcome in outcomes:
        if outcome and outcome[0] == "replication-failed":
            failures += 1
            continue
        rows, n_active = outcome
        active_sizes.append(n_active)
        for method, length, covered, infinite, failed in rows:
            slot = per_method[method]
            if failed:
                slot["failed"] += 1
                continue
            slot["length"].append(length)
            slot["covered"].append(covered)
            slot["infinite"].append(infinite)

    budget = max(1, int(0.01 * cfg.replications))
    if failures > budget:
        raise StudyAbortError(
            f"{failures} replications failed (budget {budget}) in study "
            f"seed={cfg.seed}"
        )

    summaries = []
    for m in cfg.methods:
        slot = per_method[m]
        lengths = np.asarray(slot["length"], dtype=float)
        finite = lengths[np.isfinite(lengths)]
        n_int = lengths.size
        summaries.append(
            MethodSummary(
                method=m,
                n_intervals=int(n_int),
                coverage=float(np.mean(slot["covered"])) if n_int else math.nan,
                median_length=float(np.median(lengths)) if n_int else math.nan,
                median_length_finite=(
                    float(np.median(finite)) if finite.size else math.nan
                ),
                infinite_proportion=(
                    float(np.mean(slot["infinite"])) if n_int else math.nan
                ),
                failed_rows=int(slot["failed"]),
            )
        )

    return StudyReport(
        config=cfg,
        lambda_per_obs=lam_obs,
        lambda_high_per_obs=lam_high_sum / cfg.n,
        delta_low=deltas[0] if deltas else None,
        delta_high=deltas[1] if deltas else None,
        signal_value=signal_value,
        methods=tuple(summaries),
        replications_run=cfg.replications,
        failed_replications=failures,
        mean_active_size=float(np.mean(active_sizes)) if active_sizes else 0.0,
        reps_with_selection=int(sum(1 for a in active_sizes if a > 0)),
        raw_lengths=(
            {m: tuple(per_method[m]["length"]) for m in cfg.methods}
            if keep_lengths
            else None
        ),
    )
