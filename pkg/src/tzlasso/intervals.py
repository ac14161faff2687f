"""Disjoint unions of closed intervals on the extended real line.

Every conditioning event in this package, once restricted to a line in
response space, is a union of intervals of Z-statistic values.  This module
provides the single canonical representation for those sets together with
the handful of set operations the geometry code needs (intersection, union,
membership, clipping).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

INF = math.inf


class EmptyTruncationError(ValueError):
    """The conditioning event is empty on the line being examined."""


@dataclass(frozen=True)
class TruncationSet:
    """Ordered disjoint union of closed intervals ``[lo, hi]``.

    Endpoints may be ``-inf``/``+inf``.  Instances are normalized at
    construction via :meth:`from_intervals`: intervals are sorted, empty
    pairs dropped, and adjacent intervals whose gap is at most ``merge_tol``
    are merged.
    """

    intervals: tuple[tuple[float, float], ...]

    @classmethod
    def from_intervals(
        cls,
        pairs: Iterable[Sequence[float]],
        merge_tol: float = 0.0,
    ) -> "TruncationSet":
        cleaned = []
        for lo, hi in pairs:
            lo, hi = float(lo), float(hi)
            if math.isnan(lo) or math.isnan(hi):
                raise ValueError("interval endpoints must not be NaN")
            if lo <= hi:
                cleaned.append((lo, hi))
        cleaned.sort()
        merged: list[tuple[float, float]] = []
        for lo, hi in cleaned:
            if merged and lo - merged[-1][1] <= merge_tol:
                prev_lo, prev_hi = merged[-1]
                merged[-1] = (prev_lo, max(prev_hi, hi))
            else:
                merged.append((lo, hi))
        return cls(tuple(merged))

    @classmethod
    def whole_line(cls) -> "TruncationSet":
        return cls(((-INF, INF),))

    @classmethod
    def empty(cls) -> "TruncationSet":
        return cls(())

    @classmethod
    def two_rays(cls, a: float, b: float) -> "TruncationSet":
        """``(-inf, a] U [b, inf)`` with ``a < b``."""
        if not a < b:
            raise ValueError(f"two-ray set requires a < b, got {a}, {b}")
        return cls(((-INF, float(a)), (float(b), INF)))

    def __iter__(self):
        return iter(self.intervals)

    def __len__(self) -> int:
        return len(self.intervals)

    @property
    def is_empty(self) -> bool:
        return not self.intervals

    @property
    def inf(self) -> float:
        return self.intervals[0][0] if self.intervals else INF

    @property
    def sup(self) -> float:
        return self.intervals[-1][1] if self.intervals else -INF

    def contains(self, z: float, tol: float = 0.0) -> bool:
        return any(lo - tol <= z <= hi + tol for lo, hi in self.intervals)

    def nearest_point(self, z: float) -> float:
        """The support point closest to ``z`` (``z`` itself if inside)."""
        if self.is_empty:
            raise EmptyTruncationError("no intervals to project onto")
        best, best_dist = z, INF
        for lo, hi in self.intervals:
            if lo <= z <= hi:
                return z
            cand = lo if z < lo else hi
            dist = abs(cand - z)
            if dist < best_dist:
                best, best_dist = cand, dist
        return best

    def intersect(self, other: "TruncationSet") -> "TruncationSet":
        out = []
        i = j = 0
        a, b = self.intervals, other.intervals
        while i < len(a) and j < len(b):
            lo = max(a[i][0], b[j][0])
            hi = min(a[i][1], b[j][1])
            if lo <= hi:
                out.append((lo, hi))
            if a[i][1] < b[j][1]:
                i += 1
            else:
                j += 1
        return TruncationSet(tuple(out))

    def union(self, other: "TruncationSet", merge_tol: float = 0.0) -> "TruncationSet":
        return TruncationSet.from_intervals(
            list(self.intervals) + list(other.intervals), merge_tol=merge_tol
        )

    def clip(self, lo: float, hi: float) -> "TruncationSet":
        return self.intersect(TruncationSet(((float(lo), float(hi)),)))

    def total_length(self) -> float:
        return sum(hi - lo for lo, hi in self.intervals)

    def __str__(self) -> str:
        if self.is_empty:
            return "{}"
        return " U ".join(f"[{lo:.6g}, {hi:.6g}]" for lo, hi in self.intervals)
