"""Standalone SVG line charts of a metric against noise dimension."""

from __future__ import annotations

import math
from collections import defaultdict
from pathlib import Path
from xml.sax.saxutils import escape

from .errors import ContractError
from .harness import read_results

PLOTTABLE = ("fd", "jsd", "fid", "is_mean", "is_var", "d_loss", "g_loss")
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")

WIDTH, HEIGHT = 640, 400
LEFT, RIGHT, TOP, BOTTOM = 70, 150, 40, 50


def _series(rows, metric):
    grouped = defaultdict(lambda: defaultdict(list))
    for row in rows:
        value = row.get(metric, "")
        if value == "":
            continue
        grouped[row["loss"]][int(row["noise_dim"])].append(float(value))
    series = {}
    for loss in sorted(grouped):
        points = []
        for dim in sorted(grouped[loss]):
            vals = grouped[loss][dim]
            points.append((dim, sum(vals) / len(vals), min(vals), max(vals)))
        series[loss] = points
    return series


def _fmt(v):
    return f"{v:.2f}"


def _y_ticks(lo, hi, count=5):
    return [lo + (hi - lo) * i / (count - 1) for i in range(count)]


def emit_plot_svg(results_csv, metric, out_path) -> Path:
    """Plot ``metric`` (mean over seeds, min-max band) per loss family."""
    rows = read_results(results_csv)
    columns = [c for c in PLOTTABLE if not rows or c in rows[0]]
    if metric not in PLOTTABLE:
        raise ContractError(f"unknown metric {metric!r}; available: {', '.join(columns)}")
    series = _series(rows, metric)
    if not series:
        raise ContractError(f"no {metric} values in {results_csv}")

    dims = [p[0] for pts in series.values() for p in pts]
    lows = [p[2] for pts in series.values() for p in pts]
    highs = [p[3] for pts in series.values() for p in pts]
    x_min, x_max = min(dims), max(dims)
    log_x = x_min > 0 and x_max / x_min > 20
    y_min, y_max = min(lows), max(highs)
    if y_max == y_min:
        pad = abs(y_max) * 0.1 or 1.0
        y_min, y_max = y_min - pad, y_max + pad
    plot_w = WIDTH - LEFT - RIGHT
    plot_h = HEIGHT - TOP - BOTTOM

    def sx(d):
        if x_max == x_min:
            return LEFT + plot_w / 2
        if log_x:
            frac = (math.log10(d) - math.log10(x_min)) / (math.log10(x_max) - math.log10(x_min))
        else:
            frac = (d - x_min) / (x_max - x_min)
        return LEFT + frac * plot_w

    def sy(v):
        return TOP + (1.0 - (v - y_min) / (y_max - y_min)) * plot_h

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{LEFT}" y="22" font-size="14">{escape(metric)} vs noise dimension</text>',
        f'<line x1="{LEFT}" y1="{TOP + plot_h}" x2="{LEFT + plot_w}" y2="{TOP + plot_h}" stroke="black"/>',
        f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{TOP + plot_h}" stroke="black"/>',
    ]
    for d in sorted(set(dims)):
        x = _fmt(sx(d))
        out.append(f'<line x1="{x}" y1="{TOP + plot_h}" x2="{x}" y2="{TOP + plot_h + 4}" stroke="black"/>')
        out.append(f'<text x="{x}" y="{TOP + plot_h + 16}" text-anchor="middle">{d}</text>')
    for v in _y_ticks(y_min, y_max):
        y = _fmt(sy(v))
        out.append(f'<line x1="{LEFT - 4}" y1="{y}" x2="{LEFT}" y2="{y}" stroke="black"/>')
        out.append(f'<text x="{LEFT - 6}" y="{y}" text-anchor="end" dominant-baseline="middle">{v:.4g}</text>')
    x_label = "noise dimension (log scale)" if log_x else "noise dimension"
    out.append(f'<text x="{LEFT + plot_w / 2:.2f}" y="{HEIGHT - 12}" text-anchor="middle">{x_label}</text>')

    for i, (loss, points) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        if len(points) == 1:
            d, mean, _, _ = points[0]
            out.append(f'<circle cx="{_fmt(sx(d))}" cy="{_fmt(sy(mean))}" r="4" fill="{color}"/>')
        else:
            upper = [f"{_fmt(sx(d))},{_fmt(sy(hi))}" for d, _, _, hi in points]
            lower = [f"{_fmt(sx(d))},{_fmt(sy(lo))}" for d, _, lo, _ in reversed(points)]
            out.append(f'<polygon points="{" ".join(upper + lower)}" fill="{color}" fill-opacity="0.2" stroke="none"/>')
            line = " ".join(f"{_fmt(sx(d))},{_fmt(sy(mean))}" for d, mean, _, _ in points)
            out.append(f'<polyline points="{line}" fill="none" stroke="{color}" stroke-width="2"/>')
        ly = TOP + 14 * i + 6
        lx = WIDTH - RIGHT + 12
        out.append(f'<rect x="{lx}" y="{ly - 5}" width="10" height="10" fill="{color}"/>')
        out.append(f'<text x="{lx + 14}" y="{ly}" dominant-baseline="middle">{escape(loss)}</text>')
    out.append("</svg>")

    out_path = Path(out_path)
    out_path.write_text("\n".join(out) + "\n")
    return out_path
