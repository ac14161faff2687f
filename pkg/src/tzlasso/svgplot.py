"""Native SVG emission for interval plots and length boxplots.

No rendering dependencies: charts are assembled as strings with fixed,
deterministic layout and float formatting, so outputs are byte-stable for
identical inputs.  Infinite interval ends are drawn clipped to the plot
range with an arrowhead, mirroring how unbounded results are displayed.
"""

from __future__ import annotations

import math

_METHOD_COLORS = {
    "naive": "#888888",
    "bonferroni": "#b8860b",
    "tz_v": "#1f77b4",
    "tz_m": "#d62728",
    "tz_ms": "#9467bd",
    "tz_stab_t": "#2ca02c",
    "tz_stab_l1": "#17becf",
}


def _color(method: str) -> str:
    return _METHOD_COLORS.get(method, "#333333")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10.0 ** math.floor(math.log10(raw))
    step = min(
        (m * mag for m in (1.0, 2.0, 2.5, 5.0, 10.0)),
        key=lambda s: abs(s - raw),
    )
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-12:
        ticks.append(round(t, 10))
        t += step
    return ticks


class _Canvas:
    def __init__(self, width: int, height: int, title: str):
        self.width, self.height = width, height
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
            f'height="{height}" viewBox="0 0 {width} {height}">',
            f'<rect width="{width}" height="{height}" fill="white"/>',
            f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" '
            f'font-family="sans-serif" font-size="14">{title}</text>',
        ]

    def line(self, x1, y1, x2, y2, color="#000", width=1.0, dash=None):
        d = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(
            f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}" '
            f'stroke="{color}" stroke-width="{width}"{d}/>'
        )

    def rect(self, x, y, w, h, fill="none", stroke="#000"):
        self.parts.append(
            f'<rect x="{x:.2f}" y="{y:.2f}" width="{w:.2f}" height="{h:.2f}" '
            f'fill="{fill}" stroke="{stroke}"/>'
        )

    def circle(self, x, y, r, fill):
        self.parts.append(
            f'<circle cx="{x:.2f}" cy="{y:.2f}" r="{r:.1f}" fill="{fill}"/>'
        )

    def text(self, x, y, s, size=10, anchor="middle", rotate=None, color="#000"):
        tr = f' transform="rotate({rotate} {x:.2f} {y:.2f})"' if rotate else ""
        self.parts.append(
            f'<text x="{x:.2f}" y="{y:.2f}" text-anchor="{anchor}" '
            f'font-family="sans-serif" font-size="{size}" fill="{color}"{tr}>{s}</text>'
        )

    def arrow_up(self, x, y, color):
        self.parts.append(
            f'<path d="M {x:.2f} {y:.2f} l -4 8 l 8 0 z" fill="{color}"/>'
        )

    def arrow_down(self, x, y, color):
        self.parts.append(
            f'<path d="M {x:.2f} {y:.2f} l -4 -8 l 8 0 z" fill="{color}"/>'
        )

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def interval_plot(rows: list[dict], title: str = "Selection-adjusted intervals") -> str:
    """Per-variable confidence intervals, grouped by variable.

    ``rows`` are summary dicts with keys name, method, estimate, lower,
    upper (as produced by the report writers).  Returns the SVG text.
    """
    rows = [r for r in rows if r.get("lower") is not None]
    if not rows:
        canvas = _Canvas(400, 120, title)
        canvas.text(200, 70, "no selected variables", size=12)
        return canvas.render()

    variables = sorted({r["name"] for r in rows}, key=str)
    methods = []
    for r in rows:
        if r["method"] not in methods:
            methods.append(r["method"])

    finite_vals = []
    for r in rows:
        for key in ("lower", "upper", "estimate"):
            v = r[key]
            if v is not None and math.isfinite(v):
                finite_vals.append(v)
    lo = min(finite_vals + [0.0])
    hi = max(finite_vals + [0.0])
    pad = 0.08 * (hi - lo or 1.0)
    lo, hi = lo - pad, hi + pad

    group_w = 18 * max(1, len(methods)) + 14
    left, right, top, bottom = 60, 20, 40, 70
    width = left + right + group_w * len(variables)
    height = 360
    plot_h = height - top - bottom

    def ypix(v: float) -> float:
        return top + (hi - v) / (hi - lo) * plot_h

    canvas = _Canvas(width, height, title)
    for t in _ticks(lo, hi):
        canvas.line(left - 4, ypix(t), width - right, ypix(t), "#dddddd", 0.5)
        canvas.text(left - 8, ypix(t) + 3, _fmt(t), size=9, anchor="end")
    canvas.line(left, ypix(0.0), width - right, ypix(0.0), "#999999", 0.8, dash="4 3")

    for vi, name in enumerate(variables):
        gx = left + group_w * vi
        canvas.text(gx + group_w / 2, height - bottom + 16, str(name), size=10)
        for mi, method in enumerate(methods):
            sub = [r for r in rows if r["name"] == name and r["method"] == method]
            if not sub:
                continue
            r = sub[0]
            x = gx + 10 + 18 * mi
            color = _color(method)
            y_lo_val, y_hi_val = r["lower"], r["upper"]
            lo_clip = not math.isfinite(y_lo_val)
            hi_clip = not math.isfinite(y_hi_val)
            y1 = ypix(max(y_lo_val, lo))
            y2 = ypix(min(y_hi_val, hi))
            canvas.line(x, y1, x, y2, color, 2.0)
            if lo_clip:
                canvas.arrow_down(x, ypix(lo), color)
            if hi_clip:
                canvas.arrow_up(x, ypix(hi), color)
            est = r.get("estimate")
            if est is not None and math.isfinite(est):
                canvas.circle(x, ypix(est), 2.5, color)

    for mi, method in enumerate(methods):
        x = left + 10 + 90 * mi
        y = height - 18
        canvas.line(x, y, x + 16, y, _color(method), 3.0)
        canvas.text(x + 20, y + 3, method, size=9, anchor="start")
    return canvas.render()


def _box_stats(values: list[float]) -> tuple[float, float, float, float, float]:
    vals = sorted(values)
    n = len(vals)

    def q(frac: float) -> float:
        if n == 1:
            return vals[0]
        pos = frac * (n - 1)
        i = int(pos)
        f = pos - i
        return vals[i] * (1 - f) + vals[min(i + 1, n - 1)] * f

    q1, med, q3 = q(0.25), q(0.5), q(0.75)
    iqr = q3 - q1
    lo_w = min(v for v in vals if v >= q1 - 1.5 * iqr)
    hi_w = max(v for v in vals if v <= q3 + 1.5 * iqr)
    return lo_w, q1, med, q3, hi_w


def length_boxplot(
    lengths_by_method: dict[str, list[float]],
    title: str = "Interval lengths",
) -> str:
    """Boxplots of interval lengths, one box per method.

    Infinite lengths are displayed at the maximum finite length observed
    across methods (the usual display convention for unbounded intervals);
    the proportion capped is annotated under each box.
    """
    methods = list(lengths_by_method)
    finite_all = [
        v
        for vals in lengths_by_method.values()
        for v in vals
        if math.isfinite(v)
    ]
    cap = max(finite_all) if finite_all else 1.0

    display: dict[str, list[float]] = {}
    inf_share: dict[str, float] = {}
    for m, vals in lengths_by_method.items():
        shown = [min(v, cap) if math.isfinite(v) else cap for v in vals]
        display[m] = shown
        inf_share[m] = (
            sum(1 for v in vals if not math.isfinite(v)) / len(vals) if vals else 0.0
        )

    lo = 0.0
    hi = cap * 1.05 or 1.0
    left, right, top, bottom = 60, 20, 40, 70
    box_w, gap = 46, 26
    width = left + right + len(methods) * (box_w + gap)
    height = 380
    plot_h = height - top - bottom

    def ypix(v: float) -> float:
        return top + (hi - v) / (hi - lo) * plot_h

    canvas = _Canvas(width, height, title)
    for t in _ticks(lo, hi):
        canvas.line(left - 4, ypix(t), width - right, ypix(t), "#dddddd", 0.5)
        canvas.text(left - 8, ypix(t) + 3, _fmt(t), size=9, anchor="end")

    for mi, m in enumerate(methods):
        vals = display[m]
        x = left + gap / 2 + mi * (box_w + gap)
        cx = x + box_w / 2
        color = _color(m)
        canvas.text(cx, height - bottom + 16, m, size=9, rotate=-30)
        if not vals:
            canvas.text(cx, ypix(hi / 2), "n/a", size=9)
            continue
        lo_w, q1, med, q3, hi_w = _box_stats(vals)
        canvas.line(cx, ypix(lo_w), cx, ypix(q1), color)
        canvas.line(cx, ypix(q3), cx, ypix(hi_w), color)
        canvas.rect(x, ypix(q3), box_w, ypix(q1) - ypix(q3), "none", color)
        canvas.line(x, ypix(med), x + box_w, ypix(med), color, 2.0)
        for wy in (lo_w, hi_w):
            canvas.line(cx - 8, ypix(wy), cx + 8, ypix(wy), color)
        if inf_share[m] > 0:
            canvas.text(
                cx,
                height - bottom + 34,
                f"inf {100 * inf_share[m]:.0f}%",
                size=8,
                color="#d62728",
            )
    return canvas.render()
