"""Tiny deterministic SVG writer for heatmaps and line plots.

Charts are conveniences; the CSV files next to them are the data contract.
"""
from __future__ import annotations

import numpy as np

W, H = 640, 480
MARGIN = (70, 20, 30, 50)  # left, right, top, bottom
MAX_CELLS = 200
# anchors of a perceptually ordered dark-blue -> yellow ramp
_RAMP = np.array([[68, 1, 84], [59, 82, 139], [33, 145, 140], [94, 201, 98], [253, 231, 37]], float)
_LINE_COLORS = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd")


def _color(v):
    v = float(np.clip(v, 0.0, 1.0)) * (len(_RAMP) - 1)
    i = min(int(v), len(_RAMP) - 2)
    c = _RAMP[i] + (v - i) * (_RAMP[i + 1] - _RAMP[i])
    return "#%02x%02x%02x" % tuple(int(round(x)) for x in c)


def _frame(title, xlabel, ylabel, x_rng, y_rng):
    l, r, t, b = MARGIN
    pw, ph = W - l - r, H - t - b
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">',
           f'<rect width="{W}" height="{H}" fill="white"/>',
           f'<text x="{W / 2:.1f}" y="18" text-anchor="middle">{title}</text>',
           f'<text x="{l + pw / 2:.1f}" y="{H - 8}" text-anchor="middle">{xlabel}</text>',
           f'<text x="14" y="{t + ph / 2:.1f}" text-anchor="middle" transform="rotate(-90 14 {t + ph / 2:.1f})">{ylabel}</text>']
    for k in range(5):
        fx = x_rng[0] + k / 4 * (x_rng[1] - x_rng[0])
        fy = y_rng[0] + k / 4 * (y_rng[1] - y_rng[0])
        px = l + k / 4 * pw
        py = t + ph - k / 4 * ph
        out.append(f'<text x="{px:.1f}" y="{t + ph + 16}" text-anchor="middle">{fx:.4g}</text>')
        out.append(f'<text x="{l - 4}" y="{py + 4:.1f}" text-anchor="end">{fy:.4g}</text>')
    return out, (l, t, pw, ph)


def _finish(out, box, path):
    l, t, pw, ph = box
    out.append(f'<rect x="{l}" y="{t}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    out.append("</svg>\n")
    with open(path, "w") as fh:
        fh.write("\n".join(out))


def heatmap(path, x, y, z, title="", xlabel="", ylabel=""):
    """``z[i, j]`` at ``(x[i], y[j])``; x runs horizontally, y vertically."""
    x, y, z = np.asarray(x, float), np.asarray(y, float), np.asarray(z, float)
    sx = max(1, int(np.ceil(x.size / MAX_CELLS)))
    sy = max(1, int(np.ceil(y.size / MAX_CELLS)))
    x, y, z = x[::sx], y[::sy], z[::sx, ::sy]
    out, box = _frame(title, xlabel, ylabel, (x.min(), x.max()), (y.min(), y.max()))
    l, t, pw, ph = box
    finite = z[np.isfinite(z)]
    lo, hi = (finite.min(), finite.max()) if finite.size else (0.0, 1.0)
    span = hi - lo or 1.0
    cw, ch = pw / x.size, ph / y.size
    xo = np.argsort(x)
    yo = np.argsort(y)
    for a, i in enumerate(xo):
        for b, j in enumerate(yo):
            v = z[i, j]
            fill = "#cccccc" if not np.isfinite(v) else _color((v - lo) / span)
            out.append(f'<rect x="{l + a * cw:.2f}" y="{t + ph - (b + 1) * ch:.2f}" '
                       f'width="{cw + 0.05:.2f}" height="{ch + 0.05:.2f}" fill="{fill}"/>')
    _finish(out, box, path)


def line_plot(path, x, series, labels=(), title="", xlabel="", ylabel="", band=None):
    """Curves ``series[k]`` over ``x``; NaN points leave gaps.  ``band`` shades a y range."""
    x = np.asarray(x, float)
    series = [np.asarray(s, float) for s in series]
    allv = np.concatenate([s[np.isfinite(s)] for s in series] + ([np.asarray(band, float)] if band else []))
    ylo, yhi = (allv.min(), allv.max()) if allv.size else (0.0, 1.0)
    if yhi == ylo:
        ylo, yhi = ylo - 0.5, yhi + 0.5
    xlo, xhi = x.min(), x.max()
    if xhi == xlo:
        xlo, xhi = xlo - 0.5, xhi + 0.5
    out, box = _frame(title, xlabel, ylabel, (xlo, xhi), (ylo, yhi))
    l, t, pw, ph = box
    px = lambda v: l + (v - xlo) / (xhi - xlo) * pw
    py = lambda v: t + ph - (v - ylo) / (yhi - ylo) * ph
    if band:
        out.append(f'<rect x="{l}" y="{py(band[1]):.2f}" width="{pw}" '
                   f'height="{py(band[0]) - py(band[1]):.2f}" fill="#dddddd"/>')
    for k, s in enumerate(series):
        color = _LINE_COLORS[k % len(_LINE_COLORS)]
        seg = []
        for xv, yv in zip(x, s):
            if np.isfinite(yv):
                seg.append(f"{px(xv):.2f},{py(yv):.2f}")
                continue
            if len(seg) > 1:
                out.append(f'<polyline points="{" ".join(seg)}" fill="none" stroke="{color}"/>')
            seg = []
        if len(seg) > 1:
            out.append(f'<polyline points="{" ".join(seg)}" fill="none" stroke="{color}"/>')
        for xv, yv in zip(x, s):
            if np.isfinite(yv):
                out.append(f'<circle cx="{px(xv):.2f}" cy="{py(yv):.2f}" r="2.5" fill="{color}"/>')
        if k < len(labels):
            out.append(f'<text x="{l + pw - 6}" y="{t + 16 + 14 * k}" text-anchor="end" fill="{color}">{labels[k]}</text>')
    _finish(out, box, path)
