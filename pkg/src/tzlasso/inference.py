"""End-to-end post-selection inference for lasso-selected variables.

``analyze`` runs the full pipeline: fit the lasso, form a target contrast
per selected variable, build the truncation set matching the requested
conditioning strategy, and invert the truncated-Gaussian pivot into a point
estimate, confidence interval, and p-value.

Methods:

==============  =====================================================
``naive``       standard Z interval, ignores selection
``bonferroni``  naive at level ``alpha / p``
``tz_v``        conditions on {variable j selected}
``tz_m``        conditions on {active set = observed}
``tz_ms``       conditions on {active set and signs = observed}
``tz_stab_t``   conditions on {j selected} and {high-t subset = observed}
``tz_stab_l1``  conditions on {j selected} and {high-penalty active set
                = observed}
==============  =====================================================
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.special import ndtr, ndtri

from .cv import cv_lambda
from .geometry import (
    LineDecomposition,
    RankDeficiencyError,
    _line_bounds_for_model_signs,
    default_z_range,
    full_target_truncation,
    line_partition,
    model_truncation,
    stable_l1_truncation,
    stable_t_truncation,
    variable_truncation,
)
from .intervals import TruncationSet
from .lasso import LassoFit, LassoOptions, fit_lasso
from .truncgauss import (
    IntervalEstimate,
    locate_in_support,
    tg_interval,
    tg_mle,
    tg_pvalue,
)
from .validation import ValidationError, check_pair

METHODS = (
    "naive",
    "bonferroni",
    "tz_v",
    "tz_m",
    "tz_ms",
    "tz_stab_t",
    "tz_stab_l1",
)

TARGET_KINDS = ("auto", "full", "partial")


@dataclass(frozen=True)
class TargetSpec:
    """Which linear functional of the mean is being inferred.

    ``context`` lists the columns of the model defining the coefficient;
    ``eta`` is the contrast vector with ``eta @ mu`` equal to the target.
    For stabilized targets ``high_value`` records whether the variable made
    the high-value subset (and hence whether ``context`` includes it by
    right or by adjunction).
    """

    kind: str
    variable: int
    context: tuple[int, ...]
    eta: np.ndarray
    high_value: bool | None = None


def build_target(
    X,
    kind: str,
    j: int,
    active=None,
    high=None,
    gram: np.ndarray | None = None,
) -> TargetSpec:
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    j = int(j)

    if kind == "full":
        if n < p:
            raise ValidationError("full target requires n >= p")
        if gram is None:
            gram = X.T @ X
        try:
            cf = cho_factor(gram)
        except LinAlgError as err:
            raise RankDeficiencyError("X^T X is singular") from err
        eta = X @ cho_solve(cf, np.eye(p)[:, j])
        return TargetSpec(kind, j, tuple(range(p)), eta)

    if kind == "partial":
        context = tuple(sorted(int(v) for v in active))
        high_value = None
    elif kind in ("stable_t", "stable_l1"):
        hset = set(int(v) for v in high)
        high_value = j in hset
        context = tuple(sorted(hset | {j}))
    else:
        raise ValidationError(f"unknown target kind {kind!r}")

    if j not in context:
        raise ValidationError(f"variable {j} missing from its target context")
    XC = X[:, context]
    try:
        cf = cho_factor(XC.T @ XC)
    except LinAlgError as err:
        raise RankDeficiencyError(
            f"columns {context} are rank deficient"
        ) from err
    pos = context.index(j)
    eta = XC @ cho_solve(cf, np.eye(len(context))[:, pos])
    return TargetSpec(kind, j, context, eta, high_value)


@dataclass(frozen=True)
class SigmaSpec:
    """How the noise standard deviation enters the analysis."""

    mode: str  # known | ols_full | reid
    value: float | None = None

    def __post_init__(self):
        if self.mode not in ("known", "ols_full", "reid"):
            raise ValidationError(f"unknown sigma mode {self.mode!r}")
        if self.mode == "known" and not (self.value and self.value > 0):
            raise ValidationError("known sigma requires a positive value")


def estimate_sigma_ols(X, y, include_intercept: bool = False) -> float:
    """Residual standard deviation of least squares on all columns."""
    X, y = check_pair(X, y)
    n, p = X.shape
    dof = n - p - (1 if include_intercept else 0)
    if dof <= 0:
        raise ValidationError("OLS sigma estimate requires n > p")
    if include_intercept:
        X = X - X.mean(axis=0)
        y = y - y.mean()
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    return float(math.sqrt(resid @ resid / dof))


def estimate_sigma_reid(
    X, y, seed: int = 0, n_folds: int = 10, include_intercept: bool = False
) -> float:
    """Plug-in noise scale from the cross-validated lasso fit.

    ``sigma^2 = RSS(lasso at CV lambda) / (n - #selected)``; the CV fold
    shuffle is seeded, so the estimate is reproducible.
    """
    X, y = check_pair(X, y)
    n = X.shape[0]
    rng = np.random.default_rng(seed)
    lam_obs = cv_lambda(X, y, rng, n_folds=n_folds, include_intercept=include_intercept)
    fit = fit_lasso(
        X, y, LassoOptions(penalty=lam_obs * n, include_intercept=include_intercept)
    )
    k = len(fit.active_set)
    if k >= n:
        raise ValidationError(
            f"selected model has {k} >= n={n} variables; no residual dof"
        )
    pred = X @ fit.coefficients
    if include_intercept:
        pred = pred + fit.intercept
    resid = y - pred
    return float(math.sqrt(resid @ resid / (n - k)))


def resolve_sigma(X, y, sigma, seed: int = 0, include_intercept: bool = False) -> float:
    if isinstance(sigma, (int, float)):
        sigma = SigmaSpec("known", float(sigma))
    if isinstance(sigma, str):
        sigma = SigmaSpec(sigma)
    if sigma.mode == "known":
        return float(sigma.value)
    if sigma.mode == "ols_full":
        return estimate_sigma_ols(X, y, include_intercept)
    return estimate_sigma_reid(X, y, seed=seed, include_intercept=include_intercept)


def select_high_value_t(X, y, M, sigma: float, cutoff: float):
    """Active variables whose OLS |t| on the selected model exceeds cutoff."""
    X, y = check_pair(X, y)
    M = [int(v) for v in M]
    if not M:
        return ()
    if X.shape[0] <= len(M):
        raise ValidationError("t-based screening requires n > |M|")
    XM = X[:, M]
    try:
        cf = cho_factor(XM.T @ XM)
    except LinAlgError as err:
        raise RankDeficiencyError(f"X_M^T X_M singular for M={M}") from err
    beta_m = cho_solve(cf, XM.T @ y)
    ginv_diag = np.diag(cho_solve(cf, np.eye(len(M))))
    t = beta_m / (sigma * np.sqrt(ginv_diag))
    return tuple(j for j, tj in zip(M, t) if abs(tj) > cutoff)


def naive_interval(z_obs: float, sigma_eta: float, alpha: float) -> IntervalEstimate:
    if sigma_eta <= 0:
        raise ValidationError("sigma_eta must be positive")
    q = float(-ndtri(alpha / 2.0)) * sigma_eta
    return IntervalEstimate(z_obs - q, z_obs + q, 1.0 - alpha)


def bonferroni_interval(
    z_obs: float, sigma_eta: float, alpha: float, p: int
) -> IntervalEstimate:
    if sigma_eta <= 0:
        raise ValidationError("sigma_eta must be positive")
    q = float(-ndtri(alpha / (2.0 * p))) * sigma_eta
    return IntervalEstimate(z_obs - q, z_obs + q, 1.0 - alpha)


def universal_lambda(n: int, p: int) -> float:
    """Per-observation penalty ``sqrt(2 log p / n)``."""
    return math.sqrt(2.0 * math.log(p) / n)


def default_cutoff(alpha: float, p: int) -> float:
    return float(-ndtri(alpha / (2.0 * p)))


def default_lambda_high(penalty_sum: float, n: int, p: int) -> float:
    """Sum-scale stabilization penalty: the universal threshold, or 1.25x
    the working penalty when that is already at least universal."""
    univ = universal_lambda(n, p) * n
    return univ if penalty_sum < univ else 1.25 * penalty_sum


@dataclass(frozen=True)
class AnalyzeOptions:
    include_intercept: bool = False
    cutoff: float | None = None  # stable-t threshold; default Phi^-1(1-alpha/2p)
    lambda_high: float | None = None  # sum scale; default via default_lambda_high
    range_sds: float = 20.0
    convergence_tol: float = 1e-8
    active_tol: float = 1e-9
    max_iterations: int = 100_000
    max_segments: int = 10_000
    seed: int = 0  # feeds the Reid sigma estimate when used


@dataclass(frozen=True)
class InferenceResult:
    """Per-variable, per-method inference row.

    ``flags`` collects degeneracies (clamping, infinite sides, per-row
    failures); a failed row keeps NaN statistics rather than aborting its
    siblings.
    """

    variable: int
    name: str
    method: str
    target: TargetSpec | None
    z_obs: float
    sigma_eta: float
    truncation: TruncationSet | None
    point_estimate: float
    interval: IntervalEstimate | None
    p_value: float
    flags: tuple[str, ...] = ()

    @property
    def failed(self) -> bool:
        return any(f.startswith("failed:") for f in self.flags)


def _failure_row(j, name, method, err) -> InferenceResult:
    return InferenceResult(
        variable=j,
        name=name,
        method=method,
        target=None,
        z_obs=float("nan"),
        sigma_eta=float("nan"),
        truncation=None,
        point_estimate=float("nan"),
        interval=None,
        p_value=float("nan"),
        flags=(f"failed:{type(err).__name__}:{err}",),
    )


def _truncated_row(
    j, name, method, target, line, sigma_eta, support, alpha, extra_flags=()
) -> InferenceResult:
    variance = sigma_eta**2
    boundary_tol = 1e-8 * sigma_eta
    z_eff, clamped = locate_in_support(line.z_obs, support, boundary_tol)
    flags = list(extra_flags)
    if clamped:
        flags.append("clamped-to-support")
    mle = tg_mle(z_eff, variance, support)
    if mle.at_bracket_edge:
        flags.append("mle-at-bracket-edge")
    interval = tg_interval(z_eff, variance, support, alpha)
    if interval.lower_infinite:
        flags.append("infinite-lower")
    if interval.upper_infinite:
        flags.append("infinite-upper")
    p_value = tg_pvalue(z_eff, 0.0, variance, support, "two-sided")
    return InferenceResult(
        variable=j,
        name=name,
        method=method,
        target=target,
        z_obs=line.z_obs,
        sigma_eta=sigma_eta,
        truncation=support,
        point_estimate=mle.value,
        interval=interval,
        p_value=p_value,
        flags=tuple(flags),
    )


def _plain_row(
    j, name, method, target, line, sigma_eta, alpha, p_cols
) -> InferenceResult:
    z = line.z_obs
    if method == "naive":
        interval = naive_interval(z, sigma_eta, alpha)
    else:
        interval = bonferroni_interval(z, sigma_eta, alpha, p_cols)
    p_value = float(2.0 * ndtr(-abs(z) / sigma_eta))
    return InferenceResult(
        variable=j,
        name=name,
        method=method,
        target=target,
        z_obs=z,
        sigma_eta=sigma_eta,
        truncation=TruncationSet.whole_line(),
        point_estimate=z,
        interval=interval,
        p_value=min(1.0, p_value),
    )


class _VariableWorkspace:
    """Lazy per-variable caches: targets, lines, partitions.

    Partitions are the expensive objects; methods sharing a contrast
    direction share the partition built on that line.
    """

    def __init__(self, engine: "_Engine", j: int):
        self.engine = engine
        self.j = j
        self._cache: dict = {}

    def _line_for(self, key: str, target: TargetSpec):
        eng = self.engine
        line = LineDecomposition.from_contrast(eng.y, target.eta)
        self._cache[key] = (target, line)
        return target, line

    def base(self):
        if "base" not in self._cache:
            eng = self.engine
            target = build_target(
                eng.X,
                eng.base_kind,
                self.j,
                active=eng.fit.active_set,
                gram=eng.gram,
            )
            return self._line_for("base", target)
        return self._cache["base"]

    def stable(self, kind: str, high):
        key = f"stable:{kind}"
        if key not in self._cache:
            target = build_target(
                self.engine.X, kind, self.j, high=high, gram=self.engine.gram
            )
            return self._line_for(key, target)
        return self._cache[key]

    def partition(self, key: str, line: LineDecomposition, lam: float):
        pkey = f"part:{key}:{lam}"
        if pkey not in self._cache:
            eng = self.engine
            zr = default_z_range(line, eng.sigma, eng.options.range_sds)
            self._cache[pkey] = line_partition(
                eng.X,
                line,
                lam,
                zr,
                solver=eng.solver,
                gram=eng.gram,
                max_segments=eng.options.max_segments,
                init=eng.fit.coefficients,
            )
        return self._cache[pkey]


class _Engine:
    def __init__(self, X, y, penalty, methods, target_kind, sigma, alpha, options, names):
        self.methods = list(methods)
        unknown = [m for m in self.methods if m not in METHODS]
        if unknown:
            raise ValidationError(f"unknown methods {unknown}; choose from {METHODS}")
        if target_kind not in TARGET_KINDS:
            raise ValidationError(
                f"target_kind must be one of {TARGET_KINDS}, got {target_kind!r}"
            )
        if not 0 < alpha < 1:
            raise ValidationError("alpha must be in (0, 1)")

        X, y = check_pair(X, y)
        self.options = options or AnalyzeOptions()
        if self.options.include_intercept:
            X = X - X.mean(axis=0)
            y = y - y.mean()
        self.X, self.y = X, y
        self.n, self.p = X.shape
        self.alpha = alpha
        self.penalty = float(penalty)
        self.names = (
            list(names) if names is not None else [f"x{j}" for j in range(self.p)]
        )
        if len(self.names) != self.p:
            raise ValidationError("names must have one entry per column")

        self.solver = LassoOptions(
            penalty=self.penalty,
            convergence_tol=self.options.convergence_tol,
            active_tol=self.options.active_tol,
            max_iterations=self.options.max_iterations,
        )
        self.fit = fit_lasso(X, y, self.solver)
        self.base_kind = target_kind
        if target_kind == "auto":
            self.base_kind = "full" if self.n > self.p else "partial"

        self.sigma = resolve_sigma(
            X, y, sigma, seed=self.options.seed, include_intercept=False
        )
        self.gram = X.T @ X
        self.cutoff = (
            self.options.cutoff
            if self.options.cutoff is not None
            else default_cutoff(alpha, self.p)
        )
        self.lambda_high = (
            self.options.lambda_high
            if self.options.lambda_high is not None
            else default_lambda_high(self.penalty, self.n, self.p)
        )

        self._high_t = None
        self._high_l1 = None
        self._xtc_cache: dict = {}

    def high_t(self):
        if self._high_t is None:
            self._high_t = select_high_value_t(
                self.X, self.y, self.fit.active_set, self.sigma, self.cutoff
            )
        return self._high_t

    def high_l1(self):
        if self._high_l1 is None:
            opts = replace(self.solver, penalty=self.lambda_high)
            self._high_l1 = fit_lasso(self.X, self.y, opts).active_set
        return self._high_l1

    def _row(self, ws: _VariableWorkspace, method: str) -> InferenceResult:
        j = ws.j
        name = self.names[j]
        base_flags = ("degenerate-selection-boundary",) if self.fit.degenerate else ()

        if method in ("naive", "bonferroni"):
            target, line = ws.base()
            sigma_eta = self.sigma * line.eta_norm
            return _plain_row(
                j, name, method, target, line, sigma_eta, self.alpha, self.p
            )

        if method in ("tz_v", "tz_m", "tz_ms"):
            target, line = ws.base()
            sigma_eta = self.sigma * line.eta_norm
            flags = base_flags
            if method == "tz_v":
                if self.base_kind == "full":
                    support = full_target_truncation(
                        self.X, self.y, j, self.penalty,
                        solver=self.solver, gram=self.gram,
                    )
                else:
                    part = ws.partition("base", line, self.penalty)
                    support = variable_truncation(part, j)
                    flags = flags + ("partial-target-interpretation",)
            elif method == "tz_m":
                part = ws.partition("base", line, self.penalty)
                support = model_truncation(part, self.fit.active_set)
            else:
                v_minus, v_plus = _line_bounds_for_model_signs(
                    self.gram,
                    self.X.T @ line.c,
                    self.X.T @ line.nu,
                    self.fit.active_set,
                    self.fit.signs,
                    self.penalty,
                )
                support = TruncationSet(((v_minus, v_plus),))
            return _truncated_row(
                j, name, method, target, line, sigma_eta, support, self.alpha, flags
            )

        if method == "tz_stab_t":
            high = self.high_t()
            target, line = ws.stable("stable_t", high)
            sigma_eta = self.sigma * line.eta_norm
            part = ws.partition("stable_t", line, self.penalty)
            support = stable_t_truncation(
                part, self.X, line, j, high, self.cutoff, self.sigma,
                gram=self.gram,
            )
            return _truncated_row(
                j, name, method, target, line, sigma_eta, support, self.alpha,
                base_flags,
            )

        if method == "tz_stab_l1":
            high = self.high_l1()
            target, line = ws.stable("stable_l1", high)
            sigma_eta = self.sigma * line.eta_norm
            part_low = ws.partition("stable_l1", line, self.penalty)
            part_high = ws.partition("stable_l1", line, self.lambda_high)
            support = stable_l1_truncation(
                self.X, line, j, self.penalty, self.lambda_high, high,
                z_range=part_low.z_range, solver=self.solver, gram=self.gram,
                part_low=part_low, part_high=part_high,
            )
            return _truncated_row(
                j, name, method, target, line, sigma_eta, support, self.alpha,
                base_flags,
            )

        raise AssertionError(f"unhandled method {method}")

    def run(self) -> list[InferenceResult]:
        results = []
        for j in self.fit.active_set:
            ws = _VariableWorkspace(self, j)
            for method in self.methods:
                try:
                    results.append(self._row(ws, method))
                except Exception as err:  # per-variable isolation
                    results.append(_failure_row(j, self.names[j], method, err))
        return results


def analyze(
    X,
    y,
    penalty: float,
    methods=("tz_v",),
    target_kind: str = "auto",
    sigma=SigmaSpec("reid"),
    alpha: float = 0.1,
    options: AnalyzeOptions | None = None,
    names=None,
) -> list[InferenceResult]:
    """Run selection-adjusted inference for every lasso-selected variable.

    ``penalty`` is on the sum scale (multiply per-observation values by n).
    Returns one row per (selected variable, method), ordered by variable
    then by the requested method order; an empty active set gives an empty
    list.  Per-variable numerical failures are flagged on their own rows.
    """
    engine = _Engine(X, y, penalty, methods, target_kind, sigma, alpha, options, names)
    return engine.run()


def analyze_with_fit(
    X, y, penalty, methods=("tz_v",), target_kind="auto",
    sigma=SigmaSpec("reid"), alpha=0.1, options=None, names=None,
) -> tuple[LassoFit, float, list[InferenceResult]]:
    """``analyze`` plus the underlying fit and resolved sigma."""
    engine = _Engine(X, y, penalty, methods, target_kind, sigma, alpha, options, names)
    return engine.fit, engine.sigma, engine.run()
