"""Minimal log-log SVG line plots written as plain text.

Output is a pure function of the input numbers, so files are reproducible
byte for byte.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

WIDTH, HEIGHT = 640, 440
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 20, 36, 50
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


@dataclass
class Series:
    label: str
    x: list
    y: list
    markers: bool = True


@dataclass
class RefSlope:
    """Guide line ``y = y0 * (x / x0)^slope``."""

    label: str
    slope: float
    x0: float
    y0: float


@dataclass
class LogLogPlot:
    title: str
    xlabel: str
    ylabel: str
    series: list = field(default_factory=list)
    refs: list = field(default_factory=list)


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _decades(lo: float, hi: float) -> tuple[int, int]:
    a, b = math.floor(math.log10(lo)), math.ceil(math.log10(hi))
    if a == b:
        b += 1
    return a, b


def _positive(xs, ys):
    return [(x, y) for x, y in zip(xs, ys) if x > 0 and y > 0 and math.isfinite(x) and math.isfinite(y)]


def render(plot: LogLogPlot) -> str:
    pts = [p for s in plot.series for p in _positive(s.x, s.y)]
    if pts:
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
    else:
        xs, ys = [1.0, 10.0], [1.0, 10.0]
    xa, xb = _decades(min(xs), max(xs))
    ya, yb = _decades(min(ys), max(ys))
    pw = WIDTH - MARGIN_L - MARGIN_R
    ph = HEIGHT - MARGIN_T - MARGIN_B

    def X(x):
        return MARGIN_L + pw * (math.log10(x) - xa) / (xb - xa)

    def Y(y):
        return MARGIN_T + ph * (1.0 - (math.log10(y) - ya) / (yb - ya))

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
           f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
           f'<text x="{WIDTH / 2:.0f}" y="20" text-anchor="middle" font-size="14">{plot.title}</text>']
    for d in range(xa, xb + 1):
        x = _fmt(X(10.0**d))
        out.append(f'<line x1="{x}" y1="{MARGIN_T}" x2="{x}" y2="{MARGIN_T + ph}" stroke="#ddd"/>')
        out.append(f'<text x="{x}" y="{MARGIN_T + ph + 16}" text-anchor="middle">1e{d}</text>')
    for d in range(ya, yb + 1):
        y = _fmt(Y(10.0**d))
        out.append(f'<line x1="{MARGIN_L}" y1="{y}" x2="{MARGIN_L + pw}" y2="{y}" stroke="#ddd"/>')
        out.append(f'<text x="{MARGIN_L - 6}" y="{y}" text-anchor="end" dominant-baseline="middle">1e{d}</text>')
    out.append(f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    out.append(f'<text x="{MARGIN_L + pw / 2:.0f}" y="{HEIGHT - 12}" text-anchor="middle">{plot.xlabel}</text>')
    out.append(f'<text x="16" y="{MARGIN_T + ph / 2:.0f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {MARGIN_T + ph / 2:.0f})">{plot.ylabel}</text>')
    out.append(f'<clipPath id="plotarea"><rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}"/></clipPath>')
    legend = []
    for i, ref in enumerate(plot.refs):
        x0, x1 = 10.0**xa, 10.0**xb
        y0 = ref.y0 * (x0 / ref.x0) ** ref.slope
        y1 = ref.y0 * (x1 / ref.x0) ** ref.slope
        out.append(f'<line x1="{_fmt(X(x0))}" y1="{_fmt(Y(y0))}" x2="{_fmt(X(x1))}" y2="{_fmt(Y(y1))}" '
                   f'stroke="#888" stroke-dasharray="6 4" clip-path="url(#plotarea)"/>')
        legend.append((f"{ref.label} (slope {ref.slope:g})", "#888", True))
    for i, s in enumerate(plot.series):
        color = PALETTE[i % len(PALETTE)]
        p = _positive(s.x, s.y)
        if len(p) > 1:
            path = " ".join(f"{_fmt(X(x))},{_fmt(Y(y))}" for x, y in p)
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1"/>')
        if s.markers:
            for x, y in p:
                out.append(f'<circle cx="{_fmt(X(x))}" cy="{_fmt(Y(y))}" r="2.5" fill="{color}"/>')
        legend.append((s.label, color, False))
    for i, (label, color, dashed) in enumerate(legend):
        y = MARGIN_T + 14 + 16 * i
        dash = ' stroke-dasharray="6 4"' if dashed else ""
        out.append(f'<line x1="{MARGIN_L + pw - 150}" y1="{y}" x2="{MARGIN_L + pw - 126}" y2="{y}" '
                   f'stroke="{color}" stroke-width="2"{dash}/>')
        out.append(f'<text x="{MARGIN_L + pw - 120}" y="{y + 4}">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write(plot: LogLogPlot, path) -> Path:
    path = Path(path)
    path.write_text(render(plot))
    return path
