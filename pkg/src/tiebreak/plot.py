"""Minimal SVG line chart for tradeoff curves (two y axes)."""
from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

W, H = 640, 400
LEFT, RIGHT, TOP, BOTTOM = 70, 70, 30, 50


def _scale(vals, lo_px, hi_px):
    v = np.asarray(vals, dtype=np.float64)
    finite = v[np.isfinite(v)]
    if finite.size == 0:
        return lambda x: (lo_px + hi_px) / 2, (0.0, 1.0)
    a, b = float(finite.min()), float(finite.max())
    if a == b:
        a, b = a - 0.5, b + 0.5
    return (lambda x: lo_px + (x - a) / (b - a) * (hi_px - lo_px)), (a, b)


def _path(xs, ys, fx, fy):
    parts, pen = [], "M"
    for x, y in zip(xs, ys):
        if not (math.isfinite(x) and math.isfinite(y)):
            pen = "M"
            continue
        parts.append(f"{pen}{fx(x):.2f},{fy(y):.2f}")
        pen = "L"
    return " ".join(parts)


def curve_svg(delta, left, right, left_label="log efficiency", right_label="gain",
              title="Efficiency / gain tradeoff") -> str:
    fx, (x0, x1) = _scale(delta, LEFT, W - RIGHT)
    fl, (l0, l1) = _scale(left, H - BOTTOM, TOP)
    fr, (r0, r1) = _scale(right, H - BOTTOM, TOP)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
           '<rect width="100%" height="100%" fill="white"/>',
           f'<text x="{W / 2}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>',
           f'<line x1="{LEFT}" y1="{H - BOTTOM}" x2="{W - RIGHT}" y2="{H - BOTTOM}" stroke="black"/>',
           f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{H - BOTTOM}" stroke="#1f77b4"/>',
           f'<line x1="{W - RIGHT}" y1="{TOP}" x2="{W - RIGHT}" y2="{H - BOTTOM}" stroke="#d62728"/>']
    for frac in (0.0, 0.5, 1.0):
        xv, lv, rv = x0 + frac * (x1 - x0), l0 + frac * (l1 - l0), r0 + frac * (r1 - r0)
        out.append(f'<text x="{fx(xv):.1f}" y="{H - BOTTOM + 16}" text-anchor="middle" font-size="11">{xv:.3g}</text>')
        out.append(f'<text x="{LEFT - 6}" y="{fl(lv):.1f}" text-anchor="end" font-size="11" fill="#1f77b4">{lv:.4g}</text>')
        out.append(f'<text x="{W - RIGHT + 6}" y="{fr(rv):.1f}" font-size="11" fill="#d62728">{rv:.4g}</text>')
    out.append(f'<text x="{W / 2}" y="{H - 12}" text-anchor="middle" font-size="12">delta</text>')
    out.append(f'<text x="14" y="{H / 2}" transform="rotate(-90 14 {H / 2})" text-anchor="middle" '
               f'font-size="12" fill="#1f77b4">{escape(left_label)}</text>')
    out.append(f'<text x="{W - 14}" y="{H / 2}" transform="rotate(90 {W - 14} {H / 2})" text-anchor="middle" '
               f'font-size="12" fill="#d62728">{escape(right_label)}</text>')
    out.append(f'<path d="{_path(delta, left, fx, fl)}" fill="none" stroke="#1f77b4" stroke-width="2"/>')
    out.append(f'<path d="{_path(delta, right, fx, fr)}" fill="none" stroke="#d62728" stroke-width="2"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_curve_svg(path, curve) -> None:
    right, label = curve.log_gain, "log gain"
    if not np.any(np.isfinite(right)):
        right, label = curve.gain, "gain"
    Path(path).write_text(curve_svg(curve.delta, curve.log_efficiency, right, right_label=label),
                          encoding="utf-8")
