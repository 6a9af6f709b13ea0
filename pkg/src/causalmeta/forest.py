"""Forest plots as plain text or standalone SVG.

Both renderers are deterministic: the same analysis always produces the same
bytes. Ratio measures are drawn on a log axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from xml.sax.saxutils import escape

from .analysis import AnalysisResult
from .model import Method

POOLED_LABELS = {Method.FIXED: "Fixed effects", Method.RANDOM: "Random effects", Method.CAUSAL: "Causal"}


@dataclass(frozen=True)
class ForestRow:
    label: str
    point: float
    ci_low: float
    ci_high: float
    pooled: bool


def forest_rows(result: AnalysisResult) -> list[ForestRow]:
    rows = [ForestRow(s.label, s.point, s.ci_low, s.ci_high, False) for s in result.studies]
    rows += [ForestRow(POOLED_LABELS[p.method], p.point, p.ci_low, p.ci_high, True) for p in result.pooled]
    return rows


class _Axis:
    """Maps effect values to [0, 1] on a linear or log axis."""

    def __init__(self, rows: list[ForestRow], null: float, log: bool):
        self.log = log
        vals = [null]
        for r in rows:
            vals += [r.ci_low, r.ci_high, r.point]
        t = [self._t(v) for v in vals if math.isfinite(self._t(v))]
        lo, hi = min(t), max(t)
        pad = 0.05 * (hi - lo) if hi > lo else 1.0
        self.lo, self.hi = lo - pad, hi + pad

    def _t(self, v: float) -> float:
        if self.log:
            return math.log(v) if v > 0 else -math.inf
        return v

    def __call__(self, v: float) -> float:
        return min(1.0, max(0.0, (self._t(v) - self.lo) / (self.hi - self.lo)))


def _num(v: float) -> str:
    return f"{v:.4g}"


def render_text(result: AnalysisResult, width: int = 41) -> str:
    """One line per study and per pooled model, with an ASCII interval plot."""
    measure = result.measure
    null = measure.null_value
    rows = forest_rows(result)
    axis = _Axis(rows, null, measure.exponentiate)

    def col(v):
        return int(round(axis(v) * (width - 1)))

    label_w = max([len(r.label) for r in rows] + [5])
    lines = [f"{'Study'.ljust(label_w)}  {'Estimate':>10}  {'95% CI' if result.ci_level == 0.95 else 'CI':<21}  plot"]
    null_col = col(null)
    for i, r in enumerate(rows):
        if r.pooled and (i == 0 or not rows[i - 1].pooled):
            lines.append("-" * (label_w + 2 + 10 + 2 + 21 + 2 + width))
        canvas = [" "] * width
        canvas[null_col] = "|"
        a, b, p = col(r.ci_low), col(r.ci_high), col(r.point)
        for j in range(a, b + 1):
            canvas[j] = "-"
        if r.pooled:
            canvas[a], canvas[b] = "<", ">"
            canvas[p] = "#"
        else:
            canvas[p] = "o"
        ci = f"[{_num(r.ci_low)}, {_num(r.ci_high)}]"
        lines.append(f"{r.label.ljust(label_w)}  {_num(r.point):>10}  {ci:<21}  {''.join(canvas)}")
    lines.append(f"{measure.value.upper()} scale: {'log' if axis.log else 'linear'}; '|' marks the null value {_num(null)}")
    return "\n".join(lines) + "\n"


def render_svg(result: AnalysisResult, title: str | None = None) -> str:
    """Standalone SVG document (fixed 760 px canvas width)."""
    measure = result.measure
    null = measure.null_value
    rows = forest_rows(result)
    axis = _Axis(rows, null, measure.exponentiate)

    width, row_h, top = 760, 24, 56
    plot_x0, plot_x1 = 220.0, 540.0
    height = top + row_h * (len(rows) + 1) + 40

    def x(v: float) -> str:
        return f"{plot_x0 + axis(v) * (plot_x1 - plot_x0):.2f}"

    title = title if title is not None else (result.dataset.name or "forest plot")
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="10" y="22" font-size="14" font-weight="bold">{escape(title)}</text>',
        f'<text x="10" y="44" font-weight="bold">Study</text>',
        f'<text x="{plot_x1 + 20:.0f}" y="44" font-weight="bold">{escape(measure.value.upper())} [{result.ci_level:.0%} CI]</text>',
    ]
    y_end = top + row_h * len(rows) + row_h / 2
    out.append(f'<line class="null" x1="{x(null)}" y1="{top - 6}" x2="{x(null)}" y2="{y_end:.0f}" '
               f'stroke="#888" stroke-dasharray="4,3"/>')
    for i, r in enumerate(rows):
        y = top + row_h * i + row_h / 2
        yy = f"{y:.1f}"
        weight = "bold" if r.pooled else "normal"
        out.append(f'<text x="10" y="{y + 4:.1f}" font-weight="{weight}">{escape(r.label)}</text>')
        if r.pooled:
            xl, xp, xh = x(r.ci_low), x(r.point), x(r.ci_high)
            out.append(f'<polygon class="pooled" points="{xl},{yy} {xp},{y - 7:.1f} {xh},{yy} {xp},{y + 7:.1f}" '
                       f'fill="#1f4e79" data-x="{xp}"/>')
        else:
            out.append(f'<line class="whisker" x1="{x(r.ci_low)}" y1="{yy}" x2="{x(r.ci_high)}" y2="{yy}" stroke="black"/>')
            cx = float(x(r.point))
            out.append(f'<rect class="study" x="{cx - 4:.2f}" y="{y - 4:.1f}" width="8" height="8" '
                       f'fill="black" data-x="{x(r.point)}"/>')
        out.append(f'<text x="{plot_x1 + 20:.0f}" y="{y + 4:.1f}">{_num(r.point)} [{_num(r.ci_low)}, {_num(r.ci_high)}]</text>')
    axis_y = y_end + 6
    out.append(f'<line x1="{plot_x0:.0f}" y1="{axis_y:.0f}" x2="{plot_x1:.0f}" y2="{axis_y:.0f}" stroke="black"/>')
    out.append(f'<text x="{x(null)}" y="{axis_y + 16:.0f}" text-anchor="middle">{_num(null)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
