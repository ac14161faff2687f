"""Selection-region geometry for lasso conditioning events.

Everything here answers one question: for a contrast direction ``eta`` and a
conditioning strategy, which Z-statistic values are compatible with the
event?  The answers come back as :class:`~tzlasso.intervals.TruncationSet`
objects, produced by

* the closed two-ray form for the "variable j was selected" event under the
  full-regression contrast,
* one-dimensional slices of the model-and-signs polyhedron,
* an exact sweep of the line into maximal constant active-set/sign segments
  (with warm-started re-solves), from which model / variable / stabilized
  events are assembled, and
* a generic grid-plus-bisection fallback for blackbox selectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .intervals import INF, EmptyTruncationError, TruncationSet
from .lasso import LassoFit, LassoOptions, _solve, fit_lasso
from .validation import ValidationError, check_pair


class RankDeficiencyError(ValueError):
    """A required Gram submatrix is singular."""


class EmptySliceError(ValueError):
    """The line misses the polyhedron entirely."""


class IncompatibleLineError(ValueError):
    """The off-line component violates a line-constant constraint."""


class PartitionError(RuntimeError):
    """The line sweep could not be completed (degenerate or pathological)."""


@dataclass(frozen=True)
class Polyhedron:
    """The region ``{y : A @ y <= b}``."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        if self.A.ndim != 2 or self.b.shape != (self.A.shape[0],):
            raise ValidationError("polyhedron needs A (m x n) and b (m,)")
        if not (np.all(np.isfinite(self.A)) and np.all(np.isfinite(self.b))):
            raise ValidationError("polyhedron entries must be finite")

    def contains(self, y, tol: float = 0.0) -> bool:
        return bool(np.all(self.A @ y <= self.b + tol))


@dataclass(frozen=True)
class LineDecomposition:
    """Split of ``y`` into its component along ``eta`` and the rest.

    ``y = nu + c * z_obs`` with ``c = eta / ||eta||^2`` and ``nu``
    orthogonal to ``eta``; varying ``z`` traces the line of responses that
    agree with ``y`` off the contrast direction.
    """

    eta: np.ndarray
    c: np.ndarray
    nu: np.ndarray
    z_obs: float

    @classmethod
    def from_contrast(cls, y, eta) -> "LineDecomposition":
        eta = np.asarray(eta, dtype=float)
        y = np.asarray(y, dtype=float)
        nsq = float(eta @ eta)
        if nsq <= 0.0:
            raise ValidationError("eta must be nonzero")
        z = float(eta @ y)
        c = eta / nsq
        return cls(eta=eta, c=c, nu=y - c * z, z_obs=z)

    @property
    def eta_norm(self) -> float:
        return float(np.linalg.norm(self.eta))

    def point(self, z: float) -> np.ndarray:
        return self.nu + self.c * z


def default_z_range(line: LineDecomposition, sigma: float, width_sds: float = 20.0):
    """Working range ``z_obs +- width_sds * sigma * ||eta||``.

    Tail mass beyond 20 standard deviations of the Z-statistic is
    numerically nil, so events out there never affect p-values.
    """
    half = width_sds * sigma * line.eta_norm
    return (line.z_obs - half, line.z_obs + half)


def polyhedron_for_model_signs(X, M, s, lam: float) -> Polyhedron:
    """``{y : A y <= b}`` equal to the event ``{active set = M, signs = s}``.

    Rows are obtained by eliminating the active coefficients from the KKT
    stationarity system: sign constraints on the active block and two-sided
    subgradient constraints on the inactive block.
    """
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    M = [int(j) for j in M]
    s = np.asarray(s, dtype=float)
    if len(M) != s.shape[0]:
        raise ValidationError("signs must align with the active index list")
    if not M:
        A = np.vstack([X.T, -X.T])
        b = np.full(2 * p, float(lam))
        return Polyhedron(A, b)

    XM = X[:, M]
    G = XM.T @ XM
    try:
        cf = cho_factor(G)
    except LinAlgError as err:
        raise RankDeficiencyError(f"X_M^T X_M singular for M={M}") from err
    ginv_xmt = cho_solve(cf, XM.T)
    ginv_s = cho_solve(cf, s)

    A1 = -(s[:, None] * ginv_xmt)
    b1 = -lam * (s * ginv_s)

    rest = [j for j in range(p) if j not in set(M)]
    if not rest:
        return Polyhedron(A1, b1)
    Xr = X[:, rest]
    cross = Xr.T @ XM
    A2 = Xr.T - cross @ ginv_xmt
    t = cross @ ginv_s
    A = np.vstack([A1, A2, -A2])
    b = np.concatenate([b1, lam * (1.0 - t), lam * (1.0 + t)])
    return Polyhedron(A, b)


def _ray_bounds(Ac, resid, ray_tol: float | None):
    if Ac.size == 0:
        return -INF, INF, INF
    if ray_tol is None:
        ray_tol = 1e-11 * max(1.0, float(np.abs(Ac).max()))
    pos = Ac > ray_tol
    neg = Ac < -ray_tol
    zero = ~pos & ~neg
    v_plus = float((resid[pos] / Ac[pos]).min()) if pos.any() else INF
    v_minus = float((resid[neg] / Ac[neg]).max()) if neg.any() else -INF
    v_zero = float(resid[zero].min()) if zero.any() else INF
    return v_minus, v_plus, v_zero


def truncation_interval(
    poly: Polyhedron, line: LineDecomposition, ray_tol: float | None = None
):
    """Slice the polyhedron along the line: ``(V_minus, V_plus, V_zero)``.

    ``z`` is feasible iff ``V_minus <= z <= V_plus``; ``V_zero >= 0`` is the
    compatibility requirement on the off-line component.  Rows exactly
    constant along the line (``|A c| <= ray_tol``) contribute only to
    ``V_zero``; empty candidate sets yield the infinite sentinels.
    """
    Ac = poly.A @ line.c
    resid = poly.b - poly.A @ line.nu
    v_minus, v_plus, v_zero = _ray_bounds(Ac, resid, ray_tol)
    b_scale = 1.0 + float(np.abs(poly.b).max()) if poly.b.size else 1.0
    if v_zero < -1e-9 * b_scale:
        raise IncompatibleLineError(
            f"off-line component violates a constant row by {-v_zero:.3g}"
        )
    if v_minus > v_plus:
        raise EmptySliceError(
            f"line misses the polyhedron (V-={v_minus:.6g} > V+={v_plus:.6g})"
        )
    return v_minus, v_plus, v_zero


def _line_bounds_for_model_signs(gram, xtc, xtnu, M, signs, lam: float):
    """``(V_minus, V_plus)`` of the (M, s) region along the line.

    Same mathematics as ``truncation_interval(polyhedron_for_model_signs(...))``
    but assembled from the precomputed Gram matrix and the line's projected
    coordinates ``X^T c`` / ``X^T nu``, so the per-segment cost during a
    sweep is independent of n.
    """
    p = gram.shape[0]
    M = list(M)
    if not M:
        Ac = np.concatenate([xtc, -xtc])
        resid = np.concatenate([lam - xtnu, lam + xtnu])
        return _ray_bounds(Ac, resid, None)[:2]
    s = np.asarray(signs, dtype=float)
    GM = gram[np.ix_(M, M)]
    try:
        cf = cho_factor(GM)
    except LinAlgError as err:
        raise RankDeficiencyError(f"X_M^T X_M singular for M={M}") from err
    u = cho_solve(cf, xtc[M])
    w = cho_solve(cf, xtnu[M])
    gis = cho_solve(cf, s)

    A1c = -(s * u)
    resid1 = -lam * (s * gis) + s * w

    rest = np.setdiff1d(np.arange(p), M, assume_unique=False)
    if rest.size:
        cross = gram[np.ix_(rest, M)]
        A2c = xtc[rest] - cross @ u
        A2nu = xtnu[rest] - cross @ w
        t = cross @ gis
        Ac = np.concatenate([A1c, A2c, -A2c])
        resid = np.concatenate([resid1, lam * (1.0 - t) - A2nu, lam * (1.0 + t) + A2nu])
    else:
        Ac, resid = A1c, resid1
    return _ray_bounds(Ac, resid, None)[:2]


@dataclass(frozen=True)
class Segment:
    """Maximal interval of the line with constant active set and signs."""

    lo: float
    hi: float
    active: tuple[int, ...]
    signs: tuple[int, ...]

    @property
    def key(self):
        return (self.active, self.signs)

    @property
    def midpoint(self) -> float:
        if math.isinf(self.lo) and math.isinf(self.hi):
            return 0.0
        if math.isinf(self.lo):
            return self.hi - 1.0
        if math.isinf(self.hi):
            return self.lo + 1.0
        return 0.5 * (self.lo + self.hi)


@dataclass(frozen=True)
class LinePartition:
    segments: tuple[Segment, ...]
    z_range: tuple[float, float]
    penalty: float

    def segment_at(self, z: float) -> Segment:
        for seg in self.segments:
            if seg.lo <= z <= seg.hi:
                return seg
        raise ValueError(f"z={z:.6g} outside the partitioned range")


def line_partition(
    X,
    line: LineDecomposition,
    lam: float,
    z_range,
    solver: LassoOptions | None = None,
    gram: np.ndarray | None = None,
    max_segments: int = 10_000,
    init: np.ndarray | None = None,
) -> LinePartition:
    """Segment ``z_range`` into maximal constant-(active set, signs) pieces.

    Sweep: solve the lasso at the left end, slice that event's polyhedron
    along the line to find where it ends, step epsilon past the boundary,
    re-solve with a warm start, repeat.  Terminal segments keep their exact
    (possibly infinite) endpoints even when those fall outside the working
    range.
    """
    X = np.asarray(X, dtype=float)
    z_lo, z_hi = float(z_range[0]), float(z_range[1])
    if not (math.isfinite(z_lo) and math.isfinite(z_hi) and z_lo < z_hi):
        raise ValidationError("z_range must be a finite nonempty interval")
    if not z_lo <= line.z_obs <= z_hi:
        raise ValidationError("z_range must contain the observed statistic")
    if solver is None:
        solver = LassoOptions(penalty=lam)
    elif solver.penalty != lam or solver.include_intercept:
        solver = LassoOptions(
            penalty=lam,
            convergence_tol=solver.convergence_tol,
            active_tol=solver.active_tol,
            max_iterations=solver.max_iterations,
        )
    if gram is None:
        gram = X.T @ X
    xtc = X.T @ line.c
    xtnu = X.T @ line.nu

    def solve_at(z: float, warm: np.ndarray) -> LassoFit:
        return _solve(X, line.point(z), solver, warm)

    beta0 = np.zeros(X.shape[1]) if init is None else np.asarray(init, dtype=float)
    fit = solve_at(z_lo, beta0)
    key = (fit.active_set, fit.signs)
    v_minus, v_plus = _line_bounds_for_model_signs(gram, xtc, xtnu, *key, lam)
    segments = [Segment(v_minus, v_plus, *key)]

    while segments[-1].hi < z_hi:
        if len(segments) >= max_segments:
            raise PartitionError(
                f"more than {max_segments} segments in [{z_lo:.4g}, {z_hi:.4g}]; "
                "pathological instance"
            )
        frontier = segments[-1].hi
        eps = 1e-7 * (1.0 + abs(frontier))
        new_key = None
        for _ in range(4):
            fit = solve_at(frontier + eps, fit.coefficients)
            cand = (fit.active_set, fit.signs)
            if cand != segments[-1].key:
                new_key = cand
                break
            eps *= 10.0
        if new_key is None:
            raise PartitionError(
                f"degenerate boundary landing at z={frontier:.8g}: the event "
                "did not change after 4 nudges"
            )
        v_minus, v_plus = _line_bounds_for_model_signs(gram, xtc, xtnu, *new_key, lam)
        if abs(v_minus - frontier) > 1e-6 * (1.0 + abs(frontier)):
            raise PartitionError(
                f"segment at z={frontier:.8g} opens at {v_minus:.8g}; "
                "inconsistent boundary (possible sub-epsilon sliver)"
            )
        if v_plus <= frontier:
            raise PartitionError(
                f"segment at z={frontier:.8g} fails to advance (V+={v_plus:.8g})"
            )
        segments.append(Segment(frontier, v_plus, *new_key))

    return LinePartition(tuple(segments), (z_lo, z_hi), float(lam))


def _extend_to_rays(ts: TruncationSet, part: LinePartition) -> TruncationSet:
    """Stretch terminal pieces to +-inf when the event holds at a sweep end.

    The sweep only enumerates events inside the working range; an event
    still in force at the outermost segment is treated as extending
    indefinitely, which keeps pivots well behaved for hypothesized means
    far from the observed statistic.
    """
    if ts.is_empty or not part.segments:
        return ts
    ivs = list(ts.intervals)
    if ivs[0][0] == part.segments[0].lo:
        ivs[0] = (-INF, ivs[0][1])
    if ivs[-1][1] == part.segments[-1].hi:
        ivs[-1] = (ivs[-1][0], INF)
    return TruncationSet(tuple(ivs))


def model_truncation(part: LinePartition, M) -> TruncationSet:
    """Support of the event {active set equals M exactly}, signs unioned."""
    key = tuple(sorted(int(j) for j in M))
    pieces = [(seg.lo, seg.hi) for seg in part.segments if seg.active == key]
    if not pieces:
        raise EmptyTruncationError(f"active set {key} never occurs on the line")
    return _extend_to_rays(TruncationSet.from_intervals(pieces), part)


def model_sign_truncation(part: LinePartition, M, s) -> TruncationSet:
    """Support of {active set = M, signs = s}: a single interval."""
    pairs = sorted(zip((int(j) for j in M), (int(v) for v in s)))
    key = (tuple(j for j, _ in pairs), tuple(v for _, v in pairs))
    pieces = [(seg.lo, seg.hi) for seg in part.segments if seg.key == key]
    if not pieces:
        raise EmptyTruncationError(f"event {key} never occurs on the line")
    out = TruncationSet.from_intervals(pieces)
    if len(out) != 1:
        raise PartitionError(
            f"model-sign event produced {len(out)} disjoint intervals; "
            "a polyhedron sliced by a line must give one"
        )
    return out


def variable_truncation(part: LinePartition, j: int) -> TruncationSet:
    """Support of the event {variable j is in the active set}."""
    j = int(j)
    pieces = [(seg.lo, seg.hi) for seg in part.segments if j in seg.active]
    if not pieces:
        raise EmptyTruncationError(f"variable {j} never selected on the line")
    return _extend_to_rays(TruncationSet.from_intervals(pieces), part)


def full_target_truncation(
    X,
    y,
    j: int,
    lam: float,
    solver: LassoOptions | None = None,
    gram: np.ndarray | None = None,
) -> TruncationSet:
    """Closed two-ray support of {j selected} for the full-regression contrast.

    With ``eta_j = X (X^T X)^{-1} e_j`` the selection event for j along the
    line is the complement of an interval ``[a_j, b_j]`` whose endpoints
    come from the lasso fit of the off-line response on the other columns.
    """
    X, y = check_pair(X, y)
    n, p = X.shape
    if n < p:
        raise ValidationError("full-regression contrast requires n >= p")
    if lam <= 0:
        raise ValidationError("two-ray truncation requires a positive penalty")
    if gram is None:
        gram = X.T @ X
    try:
        cf = cho_factor(gram)
    except LinAlgError as err:
        raise RankDeficiencyError("X^T X is singular") from err
    w = cho_solve(cf, np.eye(p)[:, int(j)])
    eta = X @ w
    eta_sq = float(w[int(j)])
    line = LineDecomposition.from_contrast(y, eta)

    X_minus = np.delete(X, int(j), axis=1)
    inner = LassoOptions(
        penalty=lam,
        convergence_tol=solver.convergence_tol if solver else 1e-8,
        active_tol=solver.active_tol if solver else 1e-9,
        max_iterations=solver.max_iterations if solver else 100_000,
    )
    beta_minus = fit_lasso(X_minus, line.nu, inner).coefficients
    r = X_minus @ beta_minus - line.nu
    score = float(X[:, int(j)] @ r)
    a = eta_sq * (score - lam)
    b = eta_sq * (score + lam)
    return TruncationSet.two_rays(a, b)


def stable_t_truncation(
    part: LinePartition,
    X,
    line: LineDecomposition,
    j: int,
    H,
    cutoff: float,
    sigma: float,
    gram: np.ndarray | None = None,
    merge_tol: float = 0.0,
) -> TruncationSet:
    """Support of {j selected} and {the high-t subset equals H}.

    Within each constant-active-set segment the OLS t-statistics are affine
    in z, so each threshold crossing contributes a pair ``(c_k, d_k)``;
    membership constraints intersect those bands with the segment, and the
    per-segment pieces are unioned.
    """
    if cutoff <= 0:
        raise ValidationError("cutoff must be positive")
    X = np.asarray(X, dtype=float)
    if gram is None:
        gram = X.T @ X
    xtc = X.T @ line.c
    xtnu = X.T @ line.nu
    H_set = frozenset(int(h) for h in H)
    j = int(j)
    xi_sigma = float(cutoff) * float(sigma)
    ray_tol = 1e-11 * max(1.0, float(np.linalg.norm(line.c)))

    pieces: list[TruncationSet] = []
    for seg in part.segments:
        M = seg.active
        if j not in M or not H_set <= set(M):
            continue
        Ml = list(M)
        GM = gram[np.ix_(Ml, Ml)]
        try:
            cf = cho_factor(GM)
        except LinAlgError as err:
            raise RankDeficiencyError(f"X_M^T X_M singular for M={Ml}") from err
        ginv = cho_solve(cf, np.eye(len(Ml)))
        norms = np.sqrt(np.diag(ginv))
        a = (ginv @ xtc[Ml]) / norms  # slope of each t-numerator in z
        b0 = (ginv @ xtnu[Ml]) / norms  # its value at z = 0

        cur = TruncationSet(((seg.lo, seg.hi),))
        for idx, k in enumerate(Ml):
            in_H = k in H_set
            if abs(a[idx]) <= ray_tol:
                exceeds = abs(b0[idx]) > xi_sigma
                if exceeds != in_H:
                    cur = TruncationSet.empty()
                    break
                continue
            c_k = (-math.copysign(1.0, a[idx]) * b0[idx] - xi_sigma) / abs(a[idx])
            d_k = (-math.copysign(1.0, a[idx]) * b0[idx] + xi_sigma) / abs(a[idx])
            band = (
                TruncationSet.two_rays(c_k, d_k)
                if in_H
                else TruncationSet(((c_k, d_k),))
            )
            cur = cur.intersect(band)
            if cur.is_empty:
                break
        if not cur.is_empty:
            pieces.append(cur)

    if not pieces:
        raise EmptyTruncationError(
            f"stable-t event (j={j}, H={sorted(H_set)}) is empty on the line"
        )
    out = pieces[0]
    for extra in pieces[1:]:
        out = out.union(extra, merge_tol=merge_tol)
    return _extend_to_rays(out, part)


def stable_l1_truncation(
    X,
    line: LineDecomposition,
    j: int,
    lam: float,
    lam_high: float,
    H,
    z_range,
    solver: LassoOptions | None = None,
    gram: np.ndarray | None = None,
    part_low: LinePartition | None = None,
    part_high: LinePartition | None = None,
    merge_tol: float = 0.0,
) -> TruncationSet:
    """Support of {j selected at lam} and {active set at lam_high equals H}.

    The second event unions the high-penalty partition's segments over all
    sign vectors whose active set is H.
    """
    if lam_high <= lam:
        raise ValidationError("lam_high must exceed lam")
    X = np.asarray(X, dtype=float)
    if gram is None:
        gram = X.T @ X
    if part_low is None:
        part_low = line_partition(X, line, lam, z_range, solver=solver, gram=gram)
    if part_high is None:
        part_high = line_partition(X, line, lam_high, z_range, solver=solver, gram=gram)

    selected = variable_truncation(part_low, j)
    key = tuple(sorted(int(h) for h in H))
    pieces = [(seg.lo, seg.hi) for seg in part_high.segments if seg.active == key]
    if not pieces:
        raise EmptyTruncationError(
            f"high-penalty active set {key} never occurs on the line"
        )
    high_event = _extend_to_rays(TruncationSet.from_intervals(pieces), part_high)
    out = selected.intersect(high_event)
    if out.is_empty:
        raise EmptyTruncationError(
            f"stable-l1 event (j={j}, H={key}) is empty on the line"
        )
    return TruncationSet.from_intervals(out.intervals, merge_tol=merge_tol)


class SelectorError(RuntimeError):
    """A blackbox selector failed at a specific grid point."""

    def __init__(self, message: str, z: float):
        super().__init__(message)
        self.z = z


def grid_truncation(
    selector,
    line: LineDecomposition,
    grid,
    refine_tol: float,
) -> TruncationSet:
    """Approximate the event {selector(y(z)) is true} by grid + bisection.

    ``selector`` maps a response vector to a boolean.  Maximal grid runs
    where the event holds become intervals whose interior boundaries are
    bisected down to ``refine_tol``; runs touching the grid ends keep the
    grid endpoints.  Features narrower than the grid spacing can be missed.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise ValidationError("grid must be a sorted 1-D array of z values")
    if refine_tol <= 0:
        raise ValidationError("refine_tol must be positive")

    def evaluate(z: float) -> bool:
        try:
            return bool(selector(line.point(z)))
        except Exception as err:  # propagate with the offending location
            raise SelectorError(f"selector failed at z={z:.8g}: {err}", z) from err

    flags = np.array([evaluate(z) for z in grid], dtype=bool)

    def refine(z_out: float, z_in: float) -> float:
        # invariant: event false at z_out, true at z_in
        while abs(z_in - z_out) > refine_tol:
            mid = 0.5 * (z_out + z_in)
            if evaluate(mid):
                z_in = mid
            else:
                z_out = mid
        return 0.5 * (z_out + z_in)

    intervals = []
    i = 0
    n = grid.size
    while i < n:
        if not flags[i]:
            i += 1
            continue
        start = i
        while i + 1 < n and flags[i + 1]:
            i += 1
        left = grid[start] if start == 0 else refine(grid[start - 1], grid[start])
        right = grid[i] if i == n - 1 else refine(grid[i + 1], grid[i])
        intervals.append((left, right))
        i += 1
    return TruncationSet.from_intervals(intervals)
