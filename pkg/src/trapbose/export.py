"""Deterministic CSV/JSON/SVG writers for solver results."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

LEVEL_COLUMNS = (
    "index", "n1_label", "l", "E_over_hw", "shift_over_hw",
    "det_residual", "oracle_gap", "eq24_gap",
)


def fmt(x) -> str:
    """17 significant digits; integers stay integers."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isnan(x):
        return "nan"
    return format(x, ".17g")


def write_csv(path, header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    Path(path).write_text(buf.getvalue())


def level_rows(solutions):
    for s in solutions:
        yield (s.index, s.n1, s.l, s.energy, s.shift, s.det_residual, s.oracle_gap, s.eq24_gap)


def write_levels_csv(path, solutions):
    write_csv(path, LEVEL_COLUMNS, level_rows(solutions))


def write_wavefunction_csv(path, f):
    write_csv(path, ("r", "u"), zip(f.r, f.u))


def write_kernel_csv(path, samples):
    write_csv(path, ("r", "r_prime", "g"), samples)


def solution_record(s) -> dict:
    return {
        "index": s.index,
        "n1_label": s.n1,
        "l": s.l,
        "E_over_hw": s.energy,
        "shift_over_hw": s.shift,
        "det_residual": s.det_residual,
        "oracle_gap": s.oracle_gap,
        "eq24_gap": s.eq24_gap,
        "eq24_reference": s.eq24_reference,
        "eigen_residual": s.eigen_residual,
        "status": s.status,
        "coefficients": [float(k) for k in s.coefficients],
    }


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.generic):
        return _json_safe(obj.item())
    return obj


def write_json(path, data):
    Path(path).write_text(json.dumps(_json_safe(data), indent=2, sort_keys=True) + "\n")


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def line_chart_svg(x, series: dict, xlabel: str = "", ylabel: str = "",
                   width: int = 640, height: int = 400) -> str:
    """Minimal static line chart; NaN points break the line."""
    x = np.asarray(x, dtype=float)
    left, right, top, bottom = 70, 20, 20, 50
    ys = [np.asarray(v, dtype=float) for v in series.values()]
    finite = np.concatenate([y[np.isfinite(y)] for y in ys]) if ys else np.array([])
    x0, x1 = (float(x.min()), float(x.max())) if len(x) else (0.0, 1.0)
    y0, y1 = (float(finite.min()), float(finite.max())) if len(finite) else (0.0, 1.0)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5

    def px(v):
        return left + (v - x0) / (x1 - x0) * (width - left - right)

    def py(v):
        return height - bottom - (v - y0) / (y1 - y0) * (height - top - bottom)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{left}" y1="{height - bottom}" x2="{width - right}" y2="{height - bottom}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{height - bottom}" stroke="black"/>',
    ]
    for frac in (0.0, 0.5, 1.0):
        xv, yv = x0 + frac * (x1 - x0), y0 + frac * (y1 - y0)
        out.append(f'<text x="{px(xv):.2f}" y="{height - bottom + 18}" font-size="11" '
                   f'text-anchor="middle">{xv:.4g}</text>')
        out.append(f'<text x="{left - 6}" y="{py(yv) + 4:.2f}" font-size="11" '
                   f'text-anchor="end">{yv:.6g}</text>')
    out.append(f'<text x="{(left + width - right) / 2:.1f}" y="{height - 10}" font-size="13" '
               f'text-anchor="middle">{xlabel}</text>')
    out.append(f'<text x="15" y="{(top + height - bottom) / 2:.1f}" font-size="13" '
               f'text-anchor="middle" transform="rotate(-90 15 {(top + height - bottom) / 2:.1f})">{ylabel}</text>')
    for i, (name, y) in enumerate(zip(series, ys)):
        color = _PALETTE[i % len(_PALETTE)]
        segments, current = [], []
        for xv, yv in zip(x, y):
            if np.isfinite(yv):
                current.append(f"{px(xv):.2f},{py(yv):.2f}")
            elif current:
                segments.append(current)
                current = []
        if current:
            segments.append(current)
        for seg in segments:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{" ".join(seg)}"/>')
        out.append(f'<text x="{width - right - 4}" y="{top + 14 * (i + 1)}" font-size="11" '
                   f'text-anchor="end" fill="{color}">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
