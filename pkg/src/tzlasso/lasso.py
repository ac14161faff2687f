"""Sum-form lasso solver with KKT certificates and warm starts.

The objective is ``0.5*||y - b0 - X @ b||**2 + lam*sum(|b_j|)``.  The
penalty is on the *sum* scale throughout this module; callers working with
per-observation penalties multiply by ``n`` first.  Every fit returned here
carries a verified bound on its KKT violation, so the reported active set
and signs can be trusted by the selection-region geometry built on top.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._solver import lasso_cd
from .validation import ValidationError, check_pair


class ConvergenceError(RuntimeError):
    """Coordinate descent exhausted its pass budget before certifying KKT."""

    def __init__(self, message: str, kkt_violation: float):
        super().__init__(message)
        self.kkt_violation = kkt_violation


@dataclass(frozen=True)
class LassoOptions:
    """Solver configuration.  ``penalty`` is the sum-scale lambda."""

    penalty: float
    include_intercept: bool = False
    convergence_tol: float = 1e-8
    active_tol: float = 1e-9
    max_iterations: int = 100_000

    def __post_init__(self):
        if self.penalty < 0:
            raise ValidationError("penalty must be nonnegative")
        if self.convergence_tol <= 0 or self.active_tol <= 0:
            raise ValidationError("tolerances must be positive")
        if self.max_iterations < 1:
            raise ValidationError("max_iterations must be at least 1")


@dataclass(frozen=True)
class LassoFit:
    """Converged lasso solution with its selection event.

    ``coefficients[j]`` is exactly zero for every ``j`` outside
    ``active_set``; ``signs`` aligns with ``active_set``.  ``degenerate``
    marks fits where an inactive score sits on the selection boundary
    (within ``active_tol`` of the penalty), which downstream geometry treats
    as a boundary landing.
    """

    coefficients: np.ndarray
    intercept: float | None
    active_set: tuple[int, ...]
    signs: tuple[int, ...]
    kkt_violation: float
    penalty: float
    degenerate: bool = False
    n_passes: int = 0

    @property
    def active_array(self) -> np.ndarray:
        return np.asarray(self.active_set, dtype=int)


@dataclass(frozen=True)
class KKTReport:
    """Per-coordinate stationarity scores ``x_j^T (X b - y)`` and gaps.

    For active coordinates the gap is the absolute stationarity violation
    ``|score_j + lam*sign(b_j)|``; for inactive coordinates it is the signed
    slack ``|score_j| - lam`` (nonpositive when feasible).
    """

    scores: np.ndarray
    gaps: np.ndarray
    max_violation: float


def kkt_report(X, y, beta, lam: float, active_tol: float = 1e-9) -> KKTReport:
    X, y = check_pair(X, y)
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (X.shape[1],):
        raise ValidationError(
            f"beta has shape {beta.shape}, expected ({X.shape[1]},)"
        )
    scores = X.T @ (X @ beta - y)
    gaps = np.empty_like(scores)
    nz = np.abs(beta) > active_tol
    gaps[nz] = np.abs(scores[nz] + lam * np.sign(beta[nz]))
    gaps[~nz] = np.abs(scores[~nz]) - lam
    max_violation = 0.0
    if nz.any():
        max_violation = float(gaps[nz].max())
    if (~nz).any():
        max_violation = max(max_violation, float(max(0.0, gaps[~nz].max())))
    return KKTReport(scores=scores, gaps=gaps, max_violation=max_violation)


def _finalize(beta, intercept, kkt_scores, opts: LassoOptions, n_passes) -> LassoFit:
    beta = beta.copy()
    beta[np.abs(beta) <= opts.active_tol] = 0.0
    active = tuple(int(j) for j in np.flatnonzero(beta))
    signs = tuple(int(np.sign(beta[j])) for j in active)

    lam = opts.penalty
    nz = beta != 0.0
    viol = 0.0
    if nz.any():
        viol = float(np.abs(kkt_scores[nz] + lam * np.sign(beta[nz])).max())
    if (~nz).any():
        viol = max(viol, float(max(0.0, (np.abs(kkt_scores[~nz]) - lam).max())))

    degenerate = False
    if (~nz).any():
        slack = np.abs(np.abs(kkt_scores[~nz]) - lam)
        degenerate = bool(slack.min() <= opts.active_tol)
    # hard-zeroing a boundary-thin coefficient can nudge the certificate
    degenerate = degenerate or viol > opts.convergence_tol

    return LassoFit(
        coefficients=beta,
        intercept=intercept,
        active_set=active,
        signs=signs,
        kkt_violation=viol,
        penalty=lam,
        degenerate=degenerate,
        n_passes=n_passes,
    )


def _solve(X, y, opts: LassoOptions, beta0: np.ndarray, strict: bool = True) -> LassoFit:
    if opts.include_intercept:
        x_mean = X.mean(axis=0)
        y_mean = float(y.mean())
        Xw = np.ascontiguousarray(X - x_mean)
        yw = y - y_mean
    else:
        Xw = np.ascontiguousarray(X)
        yw = y

    beta = beta0.astype(float).copy()
    n_passes, viol, converged = lasso_cd(
        Xw, yw, float(opts.penalty), beta,
        int(opts.max_iterations), float(opts.convergence_tol),
    )
    if not converged and strict:
        # non-strict callers (cross-validation) accept the iterate: its
        # predictions are fine even when the certificate is not
        raise ConvergenceError(
            f"lasso did not reach KKT tolerance {opts.convergence_tol:g} in "
            f"{opts.max_iterations} passes (violation {viol:.3e})",
            kkt_violation=float(viol),
        )

    intercept = None
    if opts.include_intercept:
        intercept = y_mean - float(x_mean @ beta)
    scores = Xw.T @ (Xw @ beta - yw)
    return _finalize(beta, intercept, scores, opts, n_passes)


def fit_lasso(X, y, opts: LassoOptions) -> LassoFit:
    """Solve the lasso from a cold start (all-zero coefficients)."""
    X, y = check_pair(X, y)
    return _solve(X, y, opts, np.zeros(X.shape[1]))


def fit_lasso_warm(X, y, opts: LassoOptions, warm_start: LassoFit | np.ndarray) -> LassoFit:
    """Solve the lasso starting from a previous solution.

    The warm start affects speed only: the convex program has a unique KKT
    certificate at the tolerances used here, so the fixed point matches a
    cold solve.
    """
    X, y = check_pair(X, y)
    beta0 = (
        warm_start.coefficients
        if isinstance(warm_start, LassoFit)
        else np.asarray(warm_start, dtype=float)
    )
    if beta0.shape != (X.shape[1],):
        raise ValidationError(
            f"warm start has shape {beta0.shape}, expected ({X.shape[1]},)"
        )
    return _solve(X, y, opts, beta0)


def null_penalty(X, y, include_intercept: bool = False) -> float:
    """Smallest sum-scale penalty with an all-zero solution: ||X^T y||_inf."""
    X, y = check_pair(X, y)
    if include_intercept:
        X = X - X.mean(axis=0)
        y = y - y.mean()
    return float(np.abs(X.T @ y).max())
