"""Minimal deterministic SVG line plots and CSV helpers for the CLI reports."""
from __future__ import annotations

import csv
import io
import math
from typing import Mapping, Sequence

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")
W, H = 640, 440
LEFT, RIGHT, TOP, BOTTOM = 70, 150, 40, 60


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _axis(lo: float, hi: float, log: bool):
    if log:
        lo, hi = math.log10(lo), math.log10(hi)
    if hi <= lo:
        hi = lo + 1.0
    return lo, hi


def line_plot_svg(
    series: Mapping[str, Sequence[tuple[float, float]]],
    title: str,
    xlabel: str,
    ylabel: str,
    xlog: bool = False,
    ylog: bool = False,
    xlim: tuple[float, float] | None = None,
    ylim: tuple[float, float] | None = None,
    step: bool = False,
) -> str:
    """Render named ``(x, y)`` series as an SVG document.

    Log axes drop non-positive values. ``step`` draws a left-continuous
    staircase, the natural shape of a miss-rate-vs-FPPI curve.
    """
    pts = {}
    for name, data in series.items():
        keep = [(x, y) for x, y in data if (not xlog or x > 0) and (not ylog or y > 0)]
        pts[name] = keep
    xs = [x for d in pts.values() for x, _ in d] or [1.0]
    ys = [y for d in pts.values() for _, y in d] or [1.0]
    x0, x1 = _axis(*(xlim or (min(xs), max(xs))), xlog)
    y0, y1 = _axis(*(ylim or (min(ys), max(ys))), ylog)
    pw, ph = W - LEFT - RIGHT, H - TOP - BOTTOM

    def px(x):
        v = math.log10(x) if xlog else x
        return LEFT + (v - x0) / (x1 - x0) * pw

    def py(y):
        v = math.log10(y) if ylog else y
        v = min(max(v, y0), y1)
        return TOP + ph - (v - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W // 2}" y="24" text-anchor="middle" font-family="sans-serif" font-size="15">{title}</text>',
        f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for k in range(5):
        fx = x0 + (x1 - x0) * k / 4
        fy = y0 + (y1 - y0) * k / 4
        tx = LEFT + pw * k / 4
        ty = TOP + ph - ph * k / 4
        lx = f"{10 ** fx:.3g}" if xlog else f"{fx:.3g}"
        ly = f"{10 ** fy:.3g}" if ylog else f"{fy:.3g}"
        out.append(f'<line x1="{_fmt(tx)}" y1="{TOP}" x2="{_fmt(tx)}" y2="{TOP + ph}" stroke="#dddddd"/>')
        out.append(f'<line x1="{LEFT}" y1="{_fmt(ty)}" x2="{LEFT + pw}" y2="{_fmt(ty)}" stroke="#dddddd"/>')
        out.append(f'<text x="{_fmt(tx)}" y="{TOP + ph + 18}" text-anchor="middle" font-family="sans-serif" font-size="11">{lx}</text>')
        out.append(f'<text x="{LEFT - 6}" y="{_fmt(ty + 4)}" text-anchor="end" font-family="sans-serif" font-size="11">{ly}</text>')
    out.append(f'<text x="{LEFT + pw // 2}" y="{H - 16}" text-anchor="middle" font-family="sans-serif" font-size="13">{xlabel}</text>')
    out.append(
        f'<text x="18" y="{TOP + ph // 2}" text-anchor="middle" font-family="sans-serif" font-size="13" '
        f'transform="rotate(-90 18 {TOP + ph // 2})">{ylabel}</text>'
    )
    for n, (name, data) in enumerate(pts.items()):
        color = PALETTE[n % len(PALETTE)]
        coords = []
        prev_y = None
        for x, y in data:
            if step and prev_y is not None:
                coords.append(f"{_fmt(px(x))},{_fmt(py(prev_y))}")
            coords.append(f"{_fmt(px(x))},{_fmt(py(y))}")
            prev_y = y
        if coords:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{" ".join(coords)}"/>')
        ly = TOP + 16 + 20 * n
        out.append(f'<line x1="{W - RIGHT + 10}" y1="{ly}" x2="{W - RIGHT + 30}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{W - RIGHT + 36}" y="{ly + 4}" font-family="sans-serif" font-size="12">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def to_csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()
