"""Minimal static SVG plots: fixed layout, fixed number formatting, no timestamps."""

from __future__ import annotations

import math
from typing import Sequence
from xml.sax.saxutils import escape

W, H = 480, 360
LEFT, RIGHT, TOP, BOTTOM = 64, 16, 28, 44


def _num(v: float) -> str:
    return f"{v:.2f}"


def _scale(lo: float, hi: float, a: float, b: float):
    span = hi - lo if hi > lo else 1.0
    return lambda v: a + (v - lo) * (b - a) / span


def _frame(title: str, xlabel: str, ylabel: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<rect x="{LEFT}" y="{TOP}" width="{W - LEFT - RIGHT}" height="{H - TOP - BOTTOM}" fill="none" stroke="black"/>',
        f'<text x="{W / 2:.0f}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>',
        f'<text x="{W / 2:.0f}" y="{H - 8}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
        f'<text x="14" y="{H / 2:.0f}" text-anchor="middle" font-size="12" transform="rotate(-90 14 {H / 2:.0f})">{escape(ylabel)}</text>',
    ]


def _ticks(lo: float, hi: float, sx, sy_or_none, axis: str, log: bool) -> list[str]:
    out = []
    for i in range(5):
        v = lo + (hi - lo) * i / 4
        label = f"1e{v:.0f}" if log else f"{v:.3g}"
        if axis == "x":
            x = sx(v)
            out.append(f'<text x="{_num(x)}" y="{H - BOTTOM + 14}" text-anchor="middle" font-size="10">{label}</text>')
        else:
            y = sx(v)
            out.append(f'<text x="{LEFT - 4}" y="{_num(y + 3)}" text-anchor="end" font-size="10">{label}</text>')
    return out


def line_plot(
    series: Sequence[tuple[str, Sequence[float], Sequence[float]]],
    *,
    title: str,
    xlabel: str,
    ylabel: str,
    logx: bool = False,
    logy: bool = False,
) -> str:
    """Polylines for (label, xs, ys) series; nonpositive values are clipped on log axes."""

    def tx(v, log):
        return math.log10(max(v, 1e-300)) if log else v

    pts = [([tx(x, logx) for x in xs], [tx(y, logy) for y in ys]) for _, xs, ys in series]
    allx = [v for xs, _ in pts for v in xs] or [0.0, 1.0]
    ally = [v for _, ys in pts for v in ys] or [0.0, 1.0]
    x0, x1 = min(allx), max(allx)
    y0, y1 = min(ally), max(ally)
    if logy:
        y0, y1 = math.floor(y0), math.ceil(y1)
    if y1 == y0:
        y0, y1 = y0 - 1.0, y1 + 1.0
    if x1 == x0:
        x0, x1 = x0 - 1.0, x1 + 1.0
    sx = _scale(x0, x1, LEFT, W - RIGHT)
    sy = _scale(y0, y1, H - BOTTOM, TOP)
    out = _frame(title, xlabel, ylabel)
    out += _ticks(x0, x1, sx, None, "x", logx)
    out += _ticks(y0, y1, sy, None, "y", logy)
    colors = ("#1f5fa8", "#b0411e", "#2b8a3e", "#6b3fa0")
    for k, ((label, _, _), (xs, ys)) in enumerate(zip(series, pts)):
        c = colors[k % len(colors)]
        path = " ".join(f"{_num(sx(x))},{_num(sy(y))}" for x, y in zip(xs, ys))
        out.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{path}"/>')
        if len(xs) <= 64:
            out += [f'<circle cx="{_num(sx(x))}" cy="{_num(sy(y))}" r="2.5" fill="{c}"/>' for x, y in zip(xs, ys)]
        out.append(f'<text x="{W - RIGHT - 4}" y="{TOP + 14 + 14 * k}" text-anchor="end" font-size="11" fill="{c}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def curve_plot(xs: Sequence[float], ys: Sequence[float], *, title: str, xlabel: str, ylabel: str) -> str:
    """A curve in the plane with equal axis scaling (level sets, trajectories)."""
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    half = 0.55 * max(x1 - x0, y1 - y0, 1e-12)
    cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
    size = min(W - LEFT - RIGHT, H - TOP - BOTTOM)
    sx = _scale(cx - half, cx + half, LEFT, LEFT + size)
    sy = _scale(cy - half, cy + half, TOP + size, TOP)
    out = _frame(title, xlabel, ylabel)
    out += _ticks(cx - half, cx + half, sx, None, "x", False)
    out += _ticks(cy - half, cy + half, sy, None, "y", False)
    # thin long curves so files stay small
    stride = max(1, len(xs) // 2000)
    path = " ".join(f"{_num(sx(x))},{_num(sy(y))}" for x, y in zip(xs[::stride], ys[::stride]))
    out.append(f'<polyline fill="none" stroke="#1f5fa8" stroke-width="1.2" points="{path}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
