"""Self-contained SVG line plots, no plotting dependency.

Curves come in as (x, {label: y}) pairs and go out as polylines with
linear or decade-log axes, ticks, and a legend.  Output is a pure
function of the inputs (fixed palette, fixed float formatting, no
timestamps), so a plot regenerated from the same CSV is byte-identical.
"""

from __future__ import annotations

import math
from typing import Dict, List, Sequence, Tuple

import numpy as np

PALETTE = ["#1b6ca8", "#c0392b", "#1e8449", "#8e44ad", "#d68910",
           "#34495e", "#16a085", "#7f8c8d"]

_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 72, 18, 34, 52


def _nice_step(span: float, target: int = 5) -> float:
    raw = span / max(target, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 5.0, 10.0):
        if mult * mag >= raw:
            return mult * mag
    return 10.0 * mag


def _linear_ticks(lo: float, hi: float) -> List[float]:
    if not math.isfinite(lo) or not math.isfinite(hi):
        return []
    if hi <= lo:
        pad = 1.0 if lo == 0 else abs(lo) * 0.5
        lo, hi = lo - pad, hi + pad
    step = _nice_step(hi - lo)
    first = math.ceil(lo / step) * step
    ticks = []
    v = first
    while v <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return ticks


def _log_ticks(lo: float, hi: float) -> List[float]:
    ticks = []
    for k in range(math.floor(math.log10(lo)), math.ceil(math.log10(hi)) + 1):
        v = 10.0 ** k
        if lo / 1.001 <= v <= hi * 1.001:
            ticks.append(v)
    return ticks


def _fmt_tick(v: float) -> str:
    if v != 0 and (abs(v) >= 1e4 or abs(v) < 1e-3):
        return "%.0e" % v
    return "%.4g" % v


def _data_range(arrays: Sequence[np.ndarray], log: bool) -> Tuple[float, float]:
    vals = []
    for a in arrays:
        a = np.asarray(a, dtype=float)
        mask = np.isfinite(a)
        if log:
            mask &= a > 0
        if mask.any():
            vals.append((a[mask].min(), a[mask].max()))
    if not vals:
        return (0.1, 1.0) if log else (0.0, 1.0)
    lo = min(v[0] for v in vals)
    hi = max(v[1] for v in vals)
    if log:
        if hi <= lo:
            lo, hi = lo / 2, hi * 2
    elif hi <= lo:
        pad = 1.0 if lo == 0 else abs(lo) * 0.1
        lo, hi = lo - pad, hi + pad
    return lo, hi


def line_plot(path, x, series: Dict[str, Sequence[float]], *,
              xlabel: str = "", ylabel: str = "", title: str = "",
              logx: bool = False, logy: bool = False,
              width: int = 720, height: int = 480) -> None:
    """Write a polyline plot of the named series against x.

    Non-finite points split a curve into separate segments; on log axes
    non-positive values are dropped the same way.  Lone points render as
    small circles so single-sample series stay visible.
    """
    x = np.asarray(x, dtype=float)
    ys = {label: np.asarray(y, dtype=float) for label, y in series.items()}
    xlo, xhi = _data_range([x], logx)
    ylo, yhi = _data_range(list(ys.values()), logy)

    if logx:
        tx = lambda v: math.log10(v)
        xt = _log_ticks(xlo, xhi)
    else:
        xt = _linear_ticks(xlo, xhi)
        if xt:
            xlo, xhi = min(xlo, xt[0]), max(xhi, xt[-1])
        tx = lambda v: v
    if logy:
        ty = lambda v: math.log10(v)
        yt = _log_ticks(ylo, yhi)
    else:
        yt = _linear_ticks(ylo, yhi)
        if yt:
            ylo, yhi = min(ylo, yt[0]), max(yhi, yt[-1])
        ty = lambda v: v

    fx0, fx1 = tx(xlo), tx(xhi)
    fy0, fy1 = ty(ylo), ty(yhi)
    if fx1 <= fx0:
        fx1 = fx0 + 1.0
    if fy1 <= fy0:
        fy1 = fy0 + 1.0
    plot_w = width - _MARGIN_L - _MARGIN_R
    plot_h = height - _MARGIN_T - _MARGIN_B

    def px(v: float) -> float:
        return _MARGIN_L + (tx(v) - fx0) / (fx1 - fx0) * plot_w

    def py(v: float) -> float:
        return _MARGIN_T + plot_h - (ty(v) - fy0) / (fy1 - fy0) * plot_h

    out: List[str] = []
    out.append(f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
               f'height="{height}" viewBox="0 0 {width} {height}">')
    out.append(f'<rect width="{width}" height="{height}" fill="white"/>')
    if title:
        out.append(f'<text x="{width / 2:.0f}" y="20" font-size="14" '
                   f'text-anchor="middle" font-family="sans-serif">'
                   f'{_escape(title)}</text>')

    for v in xt:
        X = px(v)
        out.append(f'<line x1="{X:.2f}" y1="{_MARGIN_T}" x2="{X:.2f}" '
                   f'y2="{_MARGIN_T + plot_h}" stroke="#dddddd" '
                   f'stroke-width="1"/>')
        out.append(f'<text x="{X:.2f}" y="{_MARGIN_T + plot_h + 16}" '
                   f'font-size="11" text-anchor="middle" '
                   f'font-family="sans-serif">{_fmt_tick(v)}</text>')
    for v in yt:
        Y = py(v)
        out.append(f'<line x1="{_MARGIN_L}" y1="{Y:.2f}" '
                   f'x2="{_MARGIN_L + plot_w}" y2="{Y:.2f}" '
                   f'stroke="#dddddd" stroke-width="1"/>')
        out.append(f'<text x="{_MARGIN_L - 6}" y="{Y + 4:.2f}" '
                   f'font-size="11" text-anchor="end" '
                   f'font-family="sans-serif">{_fmt_tick(v)}</text>')

    out.append(f'<rect x="{_MARGIN_L}" y="{_MARGIN_T}" width="{plot_w}" '
               f'height="{plot_h}" fill="none" stroke="black" '
               f'stroke-width="1"/>')
    if xlabel:
        out.append(f'<text x="{_MARGIN_L + plot_w / 2:.0f}" '
                   f'y="{height - 14}" font-size="12" text-anchor="middle" '
                   f'font-family="sans-serif">{_escape(xlabel)}</text>')
    if ylabel:
        yc = _MARGIN_T + plot_h / 2
        out.append(f'<text x="16" y="{yc:.0f}" font-size="12" '
                   f'text-anchor="middle" font-family="sans-serif" '
                   f'transform="rotate(-90 16 {yc:.0f})">'
                   f'{_escape(ylabel)}</text>')

    for idx, (label, y) in enumerate(ys.items()):
        color = PALETTE[idx % len(PALETTE)]
        ok = np.isfinite(x) & np.isfinite(y)
        if logx:
            ok &= x > 0
        if logy:
            ok &= y > 0
        runs = _finite_runs(ok)
        for a, b in runs:
            pts = " ".join(f"{px(x[i]):.2f},{py(y[i]):.2f}"
                           for i in range(a, b))
            if b - a == 1:
                out.append(f'<circle cx="{px(x[a]):.2f}" '
                           f'cy="{py(y[a]):.2f}" r="2.5" fill="{color}"/>')
            else:
                out.append(f'<polyline points="{pts}" fill="none" '
                           f'stroke="{color}" stroke-width="1.5"/>')
        ly = _MARGIN_T + 14 + 16 * idx
        lx = _MARGIN_L + plot_w - 150
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 22}" '
                   f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 28}" y="{ly}" font-size="11" '
                   f'font-family="sans-serif">{_escape(label)}</text>')

    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")


def _finite_runs(mask: np.ndarray) -> List[Tuple[int, int]]:
    runs = []
    start = None
    for i, good in enumerate(mask):
        if good and start is None:
            start = i
        elif not good and start is not None:
            runs.append((start, i))
            start = None
    if start is not None:
        runs.append((start, len(mask)))
    return runs


def _escape(text: str) -> str:
    return (text.replace("&", "&amp;").replace("<", "&lt;")
            .replace(">", "&gt;"))


def plot_csv(csv_path, svg_path, *, logx: bool = False, logy: bool = False,
             title: str = "", columns: Sequence[str] = ()) -> None:
    """Plot a CSV written by this package: first column is the abscissa,
    every other column a curve.  An explicit column list (matched on the
    name before the unit bracket) restricts the curves."""
    with open(csv_path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
    if data.size == 0:
        data = np.zeros((0, len(header)))
    bare = [name.split("[")[0].strip() for name in header]
    series = {}
    for i in range(1, len(header)):
        if columns and bare[i] not in columns:
            continue
        series[header[i].strip()] = data[:, i]
    line_plot(svg_path, data[:, 0], series, xlabel=header[0].strip(),
              title=title, logx=logx, logy=logy)
