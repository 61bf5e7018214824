"""Minimal native SVG scatter plots (no plotting dependency)."""

from __future__ import annotations

import math
from typing import Sequence, Tuple
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


def _ticks(lo: float, hi: float, n: int = 5) -> Sequence[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    first = math.ceil(lo / step) * step
    out = []
    k = 0
    while first + k * step <= hi + 1e-9 * step:
        out.append(round(first + k * step, 10))
        k += 1
    return out


def _span(values: Sequence[float]) -> Tuple[float, float]:
    lo, hi = min(values), max(values)
    if hi - lo < 1e-9:
        pad = max(abs(lo) * 0.05, 1.0)
    else:
        pad = 0.08 * (hi - lo)
    return lo - pad, hi + pad


def scatter(
    points: Sequence[Tuple[float, float, str]],
    title: str,
    xlabel: str,
    ylabel: str,
    width: int = 520,
    height: int = 380,
) -> str:
    """Scatter of labelled ``(x, y, label)`` points; one colour per label."""
    if not points:
        raise ValueError("nothing to plot")
    left, right, top, bottom = 70, 150, 40, 55
    pw, ph = width - left - right, height - top - bottom
    x0, x1 = _span([p[0] for p in points])
    y0, y1 = _span([p[1] for p in points])

    def sx(x):
        return left + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return top + ph - (y - y0) / (y1 - y0) * ph

    labels = list(dict.fromkeys(p[2] for p in points))
    colour = {lab: PALETTE[i % len(PALETTE)] for i, lab in enumerate(labels)}
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{left + pw / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for t in _ticks(x0, x1):
        x = sx(t)
        out.append(f'<line x1="{x:.1f}" y1="{top + ph}" x2="{x:.1f}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{x:.1f}" y="{top + ph + 18}" text-anchor="middle">{t:g}</text>')
    for t in _ticks(y0, y1):
        y = sy(t)
        out.append(f'<line x1="{left - 5}" y1="{y:.1f}" x2="{left}" y2="{y:.1f}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{y + 4:.1f}" text-anchor="end">{t:g}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(
        f'<text x="18" y="{top + ph / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 18 {top + ph / 2:.1f})">{escape(ylabel)}</text>'
    )
    for x, y, lab in points:
        out.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="5" fill="{colour[lab]}" fill-opacity="0.8"/>')
    for i, lab in enumerate(labels):
        ly = top + 10 + 18 * i
        out.append(f'<circle cx="{left + pw + 15}" cy="{ly}" r="5" fill="{colour[lab]}"/>')
        out.append(f'<text x="{left + pw + 25}" y="{ly + 4}">{escape(lab)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
