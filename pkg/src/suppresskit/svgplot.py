"""Deterministic SVG line plots: plain text output, diffable in tests,
no timestamps or generator metadata."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

_WIDTH, _HEIGHT = 640, 440
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 70, 160, 30, 50

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
           "#8c564b", "#17becf", "#7f7f7f")


@dataclass(frozen=True)
class Series:
    label: str
    points: Sequence[tuple[float, float]]


def _fmt(v: float) -> str:
    return format(v, ".2f").rstrip("0").rstrip(".") or "0"


def line_plot(series: Sequence[Series], title: str = "",
              x_label: str = "strength", y_label: str = "relative accuracy") -> str:
    if not series or not any(s.points for s in series):
        raise ValueError("nothing to plot")
    xs = [x for s in series for x, _ in s.points]
    ys = [y for s in series for _, y in s.points]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(0.0, min(ys)), max(1.0, max(ys))
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0

    plot_w = _WIDTH - _MARGIN_L - _MARGIN_R
    plot_h = _HEIGHT - _MARGIN_T - _MARGIN_B

    def px(x: float) -> float:
        return _MARGIN_L + (x - x_lo) / (x_hi - x_lo) * plot_w

    def py(y: float) -> float:
        return _MARGIN_T + (y_hi - y) / (y_hi - y_lo) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
    ]
    if title:
        parts.append(f'<text x="{_WIDTH // 2}" y="20" text-anchor="middle" '
                     f'font-size="14">{title}</text>')

    # Axes with four ticks each.
    x_axis_y = py(y_lo)
    parts.append(f'<line x1="{_MARGIN_L}" y1="{py(y_hi):.1f}" x2="{_MARGIN_L}" '
                 f'y2="{x_axis_y:.1f}" stroke="black"/>')
    parts.append(f'<line x1="{_MARGIN_L}" y1="{x_axis_y:.1f}" x2="{px(x_hi):.1f}" '
                 f'y2="{x_axis_y:.1f}" stroke="black"/>')
    for i in range(5):
        xv = x_lo + (x_hi - x_lo) * i / 4
        yv = y_lo + (y_hi - y_lo) * i / 4
        parts.append(f'<text x="{px(xv):.1f}" y="{x_axis_y + 18:.1f}" '
                     f'text-anchor="middle">{_fmt(xv)}</text>')
        parts.append(f'<text x="{_MARGIN_L - 8}" y="{py(yv) + 4:.1f}" '
                     f'text-anchor="end">{_fmt(yv)}</text>')
    parts.append(f'<text x="{_MARGIN_L + plot_w / 2:.1f}" y="{_HEIGHT - 10}" '
                 f'text-anchor="middle">{x_label}</text>')
    parts.append(f'<text x="18" y="{_MARGIN_T + plot_h / 2:.1f}" text-anchor="middle" '
                 f'transform="rotate(-90 18 {_MARGIN_T + plot_h / 2:.1f})">{y_label}</text>')

    legend_x = _WIDTH - _MARGIN_R + 12
    for i, s in enumerate(sorted(series, key=lambda s: s.label)):
        color = _COLORS[i % len(_COLORS)]
        coords = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in s.points)
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                     f'points="{coords}"/>')
        ly = _MARGIN_T + 14 + i * 18
        parts.append(f'<line x1="{legend_x}" y1="{ly - 4}" x2="{legend_x + 22}" '
                     f'y2="{ly - 4}" stroke="{color}" stroke-width="1.5"/>')
        parts.append(f'<text x="{legend_x + 28}" y="{ly}">{s.label}</text>')

    parts.append("</svg>")
    return "\n".join(parts) + "\n"
