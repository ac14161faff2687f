"""Distribution computations for a Gaussian truncated to a union of intervals.

All interval masses are computed through complementary-tail routines in log
space (``scipy.special.log_ndtr`` plus ``log1p``), so supports sitting far
into a tail keep full relative precision instead of cancelling to zero.
That regime is exactly the one that produces flagged "infinite" confidence
bounds, which are treated as data here, never as exceptions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr, ndtr

from .intervals import TruncationSet

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def _logsumexp(vals: np.ndarray) -> float:
    """Scalar logsumexp for small 1-D arrays (scipy's carries overhead)."""
    m = float(np.max(vals))
    if m == -np.inf:
        return -np.inf
    return m + math.log(float(np.sum(np.exp(vals - m))))


def _signed_logsumexp(vals: np.ndarray, signs: np.ndarray) -> tuple[float, float]:
    m = float(np.max(vals))
    if m == -np.inf:
        return -np.inf, 0.0
    s = float(np.sum(signs * np.exp(vals - m)))
    if s == 0.0:
        return -np.inf, 0.0
    return m + math.log(abs(s)), math.copysign(1.0, s)


class DegenerateSupportError(ArithmeticError):
    """Total support probability mass underflowed to zero."""


class SupportViolationError(ValueError):
    """Observed statistic lies outside its own conditioning set.

    This signals a geometry bug upstream, not a statistical event.
    """


def norm_interval_logmass(a, b) -> np.ndarray:
    """Elementwise ``log P(a <= Z <= b)`` for standard normal ``Z``.

    Stable for intervals deep in either tail.  Pairs with ``a > b`` (or
    degenerate infinite pairs) get ``-inf``.
    """
    a, b = np.broadcast_arrays(
        np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    )
    out = np.full(a.shape, -np.inf)
    valid = (a <= b) & (b > -np.inf) & (a < np.inf)

    with np.errstate(divide="ignore", invalid="ignore"):
        m = valid & (b <= 0)
        if m.any():
            la, lb = log_ndtr(a[m]), log_ndtr(b[m])
            out[m] = lb + np.log1p(-np.exp(np.minimum(la - lb, 0.0)))
        m = valid & (a >= 0) & (b > 0)
        if m.any():
            la, lb = log_ndtr(-b[m]), log_ndtr(-a[m])
            out[m] = lb + np.log1p(-np.exp(np.minimum(la - lb, 0.0)))
        m = valid & (a < 0) & (b > 0)
        if m.any():
            out[m] = np.log1p(-(ndtr(a[m]) + ndtr(-b[m])))
    return out


def _log_norm_pdf(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.full(x.shape, -np.inf)
    finite = np.isfinite(x)
    out[finite] = -0.5 * x[finite] * x[finite] - _LOG_SQRT_2PI
    return out


def _log_total_mass(a: np.ndarray, b: np.ndarray) -> float:
    total = _logsumexp(norm_interval_logmass(a, b))
    if total == -np.inf or math.isnan(total):
        raise DegenerateSupportError(
            "support carries no representable probability mass"
        )
    return total


def _cdf_core(t: float, a: np.ndarray, b: np.ndarray) -> float:
    """CDF at standardized point ``t`` of N(0,1) truncated to ``[a_i, b_i]``."""
    total = _log_total_mass(a, b)
    num = _logsumexp(norm_interval_logmass(a, np.minimum(b, t)))
    if num == -np.inf:
        return 0.0
    return min(1.0, math.exp(num - total))


def _truncated_mean_core(a: np.ndarray, b: np.ndarray) -> float:
    """Mean of N(0,1) truncated to ``[a_i, b_i]``, in standardized units."""
    total = _log_total_mass(a, b)
    vals = np.concatenate([_log_norm_pdf(a), _log_norm_pdf(b)])
    signs = np.concatenate([np.ones(a.size), -np.ones(b.size)])
    num, sign = _signed_logsumexp(vals, signs)
    if num == -np.inf:
        return 0.0
    return sign * math.exp(num - total)


@dataclass(frozen=True)
class TruncatedGaussian:
    """``N(mean, variance)`` restricted to ``support``."""

    mean: float
    variance: float
    support: TruncationSet

    def __post_init__(self):
        if not self.variance > 0:
            raise ValueError("variance must be positive")
        if self.support.is_empty:
            raise ValueError("support must be nonempty")

    @property
    def sd(self) -> float:
        return math.sqrt(self.variance)

    def _standardized_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        arr = np.asarray(self.support.intervals, dtype=float).reshape(-1, 2)
        a = (arr[:, 0] - self.mean) / self.sd
        b = (arr[:, 1] - self.mean) / self.sd
        return a, b

    def log_total_mass(self) -> float:
        a, b = self._standardized_bounds()
        return _log_total_mass(a, b)

    def cdf(self, x: float) -> float:
        """``P(Z <= x | Z in support)``, monotone nondecreasing in ``x``."""
        a, b = self._standardized_bounds()
        return _cdf_core((float(x) - self.mean) / self.sd, a, b)

    def truncated_mean(self) -> float:
        """Mean of the truncated law (drives the MLE root-finding)."""
        a, b = self._standardized_bounds()
        return self.mean + self.sd * _truncated_mean_core(a, b)


@dataclass(frozen=True)
class IntervalEstimate:
    """Confidence bounds; a side that failed to invert is ``+-inf`` + flag."""

    lower: float
    upper: float
    level: float
    lower_infinite: bool = False
    upper_infinite: bool = False

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError("interval lower bound exceeds upper bound")

    @property
    def length(self) -> float:
        return self.upper - self.lower

    @property
    def any_infinite(self) -> bool:
        return self.lower_infinite or self.upper_infinite


@dataclass(frozen=True)
class MLEEstimate:
    value: float
    at_bracket_edge: bool = False


def locate_in_support(
    z: float, support: TruncationSet, boundary_tol: float
) -> tuple[float, bool]:
    """Clamp ``z`` onto the support if within ``boundary_tol`` of it.

    Returns ``(effective_z, clamped)``; raises if ``z`` is farther away,
    since that means the conditioning event did not actually occur.
    """
    if support.contains(z):
        return z, False
    nearest = support.nearest_point(z)
    if abs(nearest - z) <= boundary_tol:
        return nearest, True
    raise SupportViolationError(
        f"z_obs={z:.6g} lies {abs(nearest - z):.3g} outside the truncation set"
    )


def tg_cdf(x: float, dist: TruncatedGaussian) -> float:
    return dist.cdf(x)


def tg_pivot(
    z_obs: float,
    mean_hypothesis: float,
    variance: float,
    support: TruncationSet,
    boundary_tol: float | None = None,
) -> float:
    """CDF of the truncated law at ``z_obs``; uniform under the true mean."""
    sd = math.sqrt(variance)
    if boundary_tol is None:
        boundary_tol = 1e-8 * sd
    z_eff, _ = locate_in_support(z_obs, support, boundary_tol)
    return TruncatedGaussian(mean_hypothesis, variance, support).cdf(z_eff)


def tg_pvalue(
    z_obs: float,
    mean0: float,
    variance: float,
    support: TruncationSet,
    alternative: str = "two-sided",
    boundary_tol: float | None = None,
) -> float:
    pivot = tg_pivot(z_obs, mean0, variance, support, boundary_tol)
    if alternative == "less":
        return pivot
    if alternative == "greater":
        return 1.0 - pivot
    if alternative == "two-sided":
        return min(1.0, 2.0 * min(pivot, 1.0 - pivot))
    raise ValueError(f"unknown alternative {alternative!r}")


def tg_interval(
    z_obs: float,
    variance: float,
    support: TruncationSet,
    alpha: float,
    bracket_sds: float = 30.0,
    boundary_tol: float | None = None,
) -> IntervalEstimate:
    """Invert the pivot into a ``1 - alpha`` interval for the mean.

    Each side is found by monotone bisection over the mean.  A side whose
    target pivot value is not bracketed within ``bracket_sds`` standard
    deviations of ``z_obs`` is reported infinite (flag set, no exception):
    at working precision that side is genuinely unbounded.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must be in (0, 1)")
    sd = math.sqrt(variance)
    if boundary_tol is None:
        boundary_tol = 1e-8 * sd
    z_eff, _ = locate_in_support(z_obs, support, boundary_tol)
    arr = np.asarray(support.intervals, dtype=float).reshape(-1, 2)
    lo_z, hi_z = arr[:, 0], arr[:, 1]

    def pivot(mu: float) -> float:
        return _cdf_core((z_eff - mu) / sd, (lo_z - mu) / sd, (hi_z - mu) / sd)

    lo_mu, hi_mu = z_eff - bracket_sds * sd, z_eff + bracket_sds * sd
    p_lo, p_hi = pivot(lo_mu), pivot(hi_mu)
    tol = 1e-6 * sd

    def solve(target: float) -> float | None:
        # pivot is strictly decreasing in mu on the bracket
        if not (p_lo >= target >= p_hi):
            return None
        a, b = lo_mu, hi_mu
        while b - a > tol:
            mid = 0.5 * (a + b)
            if pivot(mid) >= target:
                a = mid
            else:
                b = mid
        return 0.5 * (a + b)

    lower = solve(1.0 - alpha / 2.0)
    upper = solve(alpha / 2.0)
    return IntervalEstimate(
        lower=-np.inf if lower is None else lower,
        upper=np.inf if upper is None else upper,
        level=1.0 - alpha,
        lower_infinite=lower is None,
        upper_infinite=upper is None,
    )


def tg_mle(
    z_obs: float,
    variance: float,
    support: TruncationSet,
    bracket_sds: float = 30.0,
    grad_tol: float = 1e-6,
    boundary_tol: float | None = None,
) -> MLEEstimate:
    """Maximize the truncated-Gaussian likelihood of ``z_obs`` over the mean.

    The log-likelihood is concave in the mean; its derivative is
    ``(z - truncated_mean(mu)) / variance``, so a sign-change bisection
    suffices.  A likelihood that is monotone across the whole bracket gets
    the bracket edge with ``at_bracket_edge`` set.
    """
    sd = math.sqrt(variance)
    if boundary_tol is None:
        boundary_tol = 1e-8 * sd
    z_eff, _ = locate_in_support(z_obs, support, boundary_tol)
    arr = np.asarray(support.intervals, dtype=float).reshape(-1, 2)
    lo_z, hi_z = arr[:, 0], arr[:, 1]

    def grad(mu: float) -> float:
        tm = mu + sd * _truncated_mean_core((lo_z - mu) / sd, (hi_z - mu) / sd)
        return (z_eff - tm) / variance

    lo, hi = z_eff - bracket_sds * sd, z_eff + bracket_sds * sd
    g_lo, g_hi = grad(lo), grad(hi)
    if g_lo <= 0.0:
        return MLEEstimate(value=lo, at_bracket_edge=True)
    if g_hi >= 0.0:
        return MLEEstimate(value=hi, at_bracket_edge=True)
    mid, g_mid = 0.5 * (lo + hi), None
    min_width = 1e-13 * sd
    while hi - lo > min_width:
        mid = 0.5 * (lo + hi)
        g_mid = grad(mid)
        if abs(g_mid) < grad_tol:
            return MLEEstimate(value=mid)
        if g_mid > 0.0:
            lo = mid
        else:
            hi = mid
    return MLEEstimate(value=mid)
