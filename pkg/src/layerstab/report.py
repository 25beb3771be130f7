"""CSV, JSON and self-contained SVG output for scans and reports."""

from __future__ import annotations

import csv
import json
from html import escape
from pathlib import Path

import numpy as np

from .system import _jsonable

FLOAT_FMT = "%.17g"
LEVELS = 64


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    return FLOAT_FMT % float(x)


def scan_columns(d: int) -> list:
    return ["tau"] + [f"eta{i}" for i in range(1, d)] + ["gamma", "rho", "variant", "D", "dimEminus",
                                                         "conditioning"]


def write_scan_csv(path, rows: list, d: int) -> None:
    """One row per sample; floats are written with 17 significant digits so they round-trip."""
    cols = scan_columns(d)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(cols)
        for r in rows:
            eta = list(r["eta"])
            wr.writerow([_fmt(r["tau"])] + [_fmt(e) for e in eta] +
                        [_fmt(r["gamma"]), _fmt(r["rho"]), r["variant"], _fmt(r["D"]),
                         "" if r.get("dimEminus") is None else str(int(r["dimEminus"])),
                         _fmt(r.get("conditioning"))])


def read_scan_csv(path) -> list:
    out = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            row = {}
            for k, v in rec.items():
                if k == "variant":
                    row[k] = v
                elif k == "dimEminus":
                    row[k] = int(v) if v else None
                else:
                    row[k] = float(v) if v else None
            out.append(row)
    return out


def write_json(path, obj) -> None:
    data = _jsonable(obj)
    if isinstance(data, dict) and "schema" not in data:
        data = {"schema": 1, **data}
    Path(path).write_text(json.dumps(data, indent=2, default=_fallback, allow_nan=True))


def _fallback(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return repr(x)


# SVG -----------------------------------------------------------------------

_W, _H, _PAD = 640, 420, 60


def _axis_map(vals, lo_px, hi_px, log):
    v = np.asarray(vals, dtype=float)
    if log:
        v = np.log10(np.clip(v, 1e-300, None))
    finite = v[np.isfinite(v)]
    a, b = (finite.min(), finite.max()) if finite.size else (0.0, 1.0)
    if b - a < 1e-300:
        a, b = a - 0.5, b + 0.5
    return (lambda x: lo_px + (hi_px - lo_px) * ((np.log10(max(x, 1e-300)) if log else x) - a) / (b - a)), (a, b)


def _frame(title, xlabel, ylabel, xr, yr, logx, logy) -> list:
    tick = lambda v, log: (f"1e{v:.1f}" if log else f"{v:.3g}")
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<rect x="{_PAD}" y="{_PAD / 2}" width="{_W - 1.5 * _PAD}" height="{_H - 1.5 * _PAD}" '
        f'fill="none" stroke="black"/>',
        f'<text x="{_W / 2}" y="{_H - 8}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
        f'<text x="14" y="{_H / 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 14 {_H / 2})">{escape(ylabel)}</text>',
        f'<text x="{_PAD}" y="{_H - _PAD + 16}" font-size="10">{tick(xr[0], logx)}</text>',
        f'<text x="{_W - _PAD / 2}" y="{_H - _PAD + 16}" text-anchor="end" font-size="10">{tick(xr[1], logx)}</text>',
        f'<text x="{_PAD - 4}" y="{_H - _PAD}" text-anchor="end" font-size="10">{tick(yr[0], logy)}</text>',
        f'<text x="{_PAD - 4}" y="{_PAD / 2 + 10}" text-anchor="end" font-size="10">{tick(yr[1], logy)}</text>',
    ]


def svg_line(path, x, series: dict, title="", xlabel="x", ylabel="y", logx=False, logy=False,
             markers=True) -> str:
    """Line (or scatter) plot of one or more series sharing x."""
    allx = np.asarray(x, dtype=float)
    ally = np.concatenate([np.asarray(v, dtype=float) for v in series.values()]) if series else np.zeros(1)
    fx, xr = _axis_map(allx, _PAD, _W - _PAD / 2, logx)
    fy, yr = _axis_map(ally, _H - _PAD, _PAD / 2, logy)
    out = _frame(title, xlabel, ylabel, xr, yr, logx, logy)
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]
    for k, (name, ys) in enumerate(series.items()):
        col = colors[k % len(colors)]
        pts = [(fx(a), fy(b)) for a, b in zip(allx, ys) if np.isfinite(a) and np.isfinite(b)]
        if markers:
            out += [f'<circle cx="{px:.2f}" cy="{py:.2f}" r="2" fill="{col}"/>' for px, py in pts]
        else:
            out.append('<polyline fill="none" stroke="{}" points="{}"/>'.format(
                col, " ".join(f"{px:.2f},{py:.2f}" for px, py in pts)))
        out.append(f'<text x="{_W - _PAD}" y="{_PAD / 2 + 16 + 14 * k}" text-anchor="end" font-size="11" '
                   f'fill="{col}">{escape(str(name))}</text>')
    out.append("</svg>")
    text = "\n".join(out)
    if path is not None:
        Path(path).write_text(text)
    return text


def _color(level: int) -> str:
    t = level / (LEVELS - 1)
    r = int(255 * min(1.0, 2 * t))
    b = int(255 * min(1.0, 2 * (1 - t)))
    g = int(255 * (1 - abs(2 * t - 1)))
    return f"#{r:02x}{g:02x}{b:02x}"


def quantize(Z, levels: int = LEVELS) -> np.ndarray:
    Z = np.asarray(Z, dtype=float)
    finite = Z[np.isfinite(Z)]
    if not finite.size:
        return np.zeros(Z.shape, dtype=int)
    a, b = finite.min(), finite.max()
    if b - a <= 0:
        return np.zeros(Z.shape, dtype=int)
    q = np.floor((np.where(np.isfinite(Z), Z, a) - a) / (b - a) * levels).astype(int)
    return np.clip(q, 0, levels - 1)


def svg_heatmap(path, xs, ys, Z, title="", xlabel="x", ylabel="y") -> str:
    """Heatmap of Z[i, j] over (xs[j], ys[i]), quantized to 64 color levels."""
    Z = np.asarray(Z, dtype=float)
    q = quantize(Z)
    ny, nx = Z.shape
    x0, y0 = _PAD, _PAD / 2
    w = (_W - 1.5 * _PAD) / nx
    h = (_H - 1.5 * _PAD) / ny
    xr = (float(np.min(xs)), float(np.max(xs)))
    yr = (float(np.min(ys)), float(np.max(ys)))
    out = _frame(title, xlabel, ylabel, xr, yr, False, False)
    for i in range(ny):
        for j in range(nx):
            out.append(f'<rect x="{x0 + j * w:.2f}" y="{y0 + (ny - 1 - i) * h:.2f}" width="{w + 0.5:.2f}" '
                       f'height="{h + 0.5:.2f}" fill="{_color(int(q[i, j]))}"/>')
    out.append("</svg>")
    text = "\n".join(out)
    if path is not None:
        Path(path).write_text(text)
    return text
