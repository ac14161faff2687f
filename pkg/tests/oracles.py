"""Independent reference implementations used only to check the package.

Everything here deliberately avoids the package's own numerical routes:
brute-force sign-pattern enumeration for the lasso, dense grid scans with
cold solves for selection events, adaptive quadrature for truncated-normal
masses, an LP solver for line slices, and plain-ratio CDF inversion.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq, linprog
from scipy.stats import norm

from tzlasso.lasso import LassoOptions, fit_lasso


def lasso_objective(X, y, beta, lam: float) -> float:
    r = y - X @ beta
    return 0.5 * float(r @ r) + lam * float(np.abs(beta).sum())


def sign_pattern_lasso(X, y, lam: float) -> np.ndarray:
    """Exact lasso solve by checking every sign pattern (p small).

    For each pattern, solve the stationarity equalities and keep the one
    whose signs and inactive subgradients are feasible; KKT feasibility
    certifies the optimum of the convex program.
    """
    n, p = X.shape
    for pattern in itertools.product((-1.0, 0.0, 1.0), repeat=p):
        s = np.asarray(pattern)
        active = np.flatnonzero(s != 0)
        beta = np.zeros(p)
        if active.size:
            XA = X[:, active]
            try:
                bA = np.linalg.solve(XA.T @ XA, XA.T @ y - lam * s[active])
            except np.linalg.LinAlgError:
                continue
            if np.any(np.sign(bA) != s[active]):
                continue
            beta[active] = bA
        grads = X.T @ (y - X @ beta)
        inactive = np.flatnonzero(s == 0)
        if inactive.size and np.any(np.abs(grads[inactive]) > lam + 1e-9):
            continue
        return beta
    raise AssertionError("no KKT-feasible sign pattern found")


def scan_line_fits(X, line, lam: float, zs):
    """Cold lasso solves along the line: list of (active, signs) per z."""
    opts = LassoOptions(penalty=lam)
    out = []
    for z in zs:
        fit = fit_lasso(X, line.point(z), opts)
        out.append((fit.active_set, fit.signs))
    return out


def indicator_mismatches(zs, flags, truncation, exclude_tol: float) -> int:
    """Count grid points whose event flag disagrees with the analytic set.

    Points within ``exclude_tol`` of any analytic endpoint are skipped:
    at grid resolution, disagreement there is expected.
    """
    endpoints = [v for pair in truncation.intervals for v in pair if math.isfinite(v)]
    bad = 0
    for z, flag in zip(zs, flags):
        if any(abs(z - e) <= exclude_tol for e in endpoints):
            continue
        if truncation.contains(z) != flag:
            bad += 1
    return bad


def runs_to_intervals(zs, flags):
    """Maximal True runs of the scan, as (z_first, z_last) pairs."""
    out = []
    start = None
    for z, f in zip(zs, flags):
        if f and start is None:
            start = z
        elif not f and start is not None:
            out.append((start, prev))
            start = None
        prev = z
    if start is not None:
        out.append((start, zs[-1]))
    return out


def lp_extremes_z(A, b, nu, c):
    """min and max of z over {A (nu + c z) <= b} via HiGHS."""
    Ac = (A @ c).reshape(-1, 1)
    rhs = b - A @ nu
    lo = linprog(c=[1.0], A_ub=Ac, b_ub=rhs, bounds=[(None, None)], method="highs")
    hi = linprog(c=[-1.0], A_ub=Ac, b_ub=rhs, bounds=[(None, None)], method="highs")
    z_lo = -math.inf if lo.status == 3 else (math.inf if lo.status == 2 else lo.fun)
    z_hi = math.inf if hi.status == 3 else (-math.inf if hi.status == 2 else -hi.fun)
    return z_lo, z_hi


def quad_tg_cdf(x, mean, sd, intervals) -> float:
    """Truncated-normal CDF by adaptive quadrature of the density."""

    def mass(lo, hi):
        if hi <= lo:
            return 0.0
        val, _ = quad(
            lambda t: norm.pdf(t, loc=mean, scale=sd),
            lo,
            hi,
            epsabs=0.0,
            epsrel=1e-11,
            limit=300,
        )
        return val

    total = sum(mass(lo, hi) for lo, hi in intervals)
    part = sum(mass(lo, min(hi, x)) for lo, hi in intervals if lo < x)
    return part / total


def plain_tg_cdf(x, mean, sd, intervals) -> float:
    """Textbook ratio-of-Phi truncated CDF (NaN where the masses underflow)."""
    total = 0.0
    part = 0.0
    for lo, hi in intervals:
        m = norm.cdf(hi, mean, sd) - norm.cdf(lo, mean, sd)
        total += m
        if x >= hi:
            part += m
        elif x > lo:
            part += norm.cdf(x, mean, sd) - norm.cdf(lo, mean, sd)
    if total <= 0.0:
        return math.nan
    return part / total


def plain_tg_interval(z, sd, intervals, alpha, bracket_sds=30.0):
    """Invert the plain-ratio pivot with brentq; None marks a failed side.

    The plain formula underflows for means far from the support, so each
    target is first bracketed by a grid walk over means where the pivot is
    finite, then refined.
    """

    def pivot(mu):
        return plain_tg_cdf(z, mu, sd, intervals)

    grid = z + np.arange(-bracket_sds, bracket_sds + 1e-12, 0.05) * sd
    vals = np.array([pivot(m) for m in grid])

    def solve(target):
        for i in range(len(grid) - 1):
            v1, v2 = vals[i], vals[i + 1]
            if math.isnan(v1) or math.isnan(v2):
                continue
            if (v1 - target) >= 0.0 >= (v2 - target):
                return brentq(
                    lambda mu: pivot(mu) - target,
                    grid[i],
                    grid[i + 1],
                    xtol=1e-11,
                )
        return None

    return solve(1 - alpha / 2), solve(alpha / 2)


def quad_tg_interval(z, sd, intervals, alpha, bracket_sds=30.0):
    """Invert the quadrature pivot with brentq; None marks a failed side.

    Quadrature keeps relative precision however far the mean sits from the
    support, unlike the plain-ratio formula.
    """

    def pivot(mu):
        return quad_tg_cdf(z, mu, sd, intervals)

    lo_mu, hi_mu = z - bracket_sds * sd, z + bracket_sds * sd
    p_lo, p_hi = pivot(lo_mu), pivot(hi_mu)

    def solve(target):
        if not (p_lo >= target >= p_hi):
            return None
        return brentq(lambda mu: pivot(mu) - target, lo_mu, hi_mu, xtol=1e-10)

    return solve(1 - alpha / 2), solve(alpha / 2)


def simple_model_sign_polyhedron(X, M, s, lam: float):
    """(A, b) for {active set = M, signs = s} via pinv and dense projectors."""
    n, p = X.shape
    M = list(M)
    if not M:
        A = np.vstack([X.T, -X.T])
        return A, np.full(2 * p, lam)
    XM = X[:, M]
    pinv = np.linalg.pinv(XM)  # (X_M^T X_M)^{-1} X_M^T
    P = XM @ pinv
    S = np.diag(np.asarray(s, dtype=float))
    A1 = -S @ pinv
    b1 = -lam * S @ np.linalg.pinv(XM.T @ XM) @ np.asarray(s, dtype=float)
    rest = [j for j in range(p) if j not in M]
    if not rest:
        return A1, b1
    Xr = X[:, rest]
    A2 = Xr.T @ (np.eye(n) - P)
    t = Xr.T @ pinv.T @ np.asarray(s, dtype=float)
    A = np.vstack([A1, A2, -A2])
    b = np.concatenate([b1, lam * (1 - t), lam * (1 + t)])
    return A, b


def gauss_instance(seed, n, p, k=3, signal=0.6, sigma=1.0):
    """A standard synthetic regression draw used across the tests."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    beta = np.zeros(p)
    beta[:k] = signal
    y = X @ beta + sigma * rng.standard_normal(n)
    return X, y, beta
