"""Minimal deterministic SVG renderer for curve plots.

Produces a fixed-size canvas with axes, tick labels, one polyline per data
series and optional dashed vertical reference lines.  Output is a pure
function of the inputs (no timestamps, fixed float formatting), so plot
files are byte-stable across reruns.
"""

from __future__ import annotations

import numpy as np

WIDTH, HEIGHT = 640, 420
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 64, 16, 20, 48
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"]


def _fmt(x: float) -> str:
    return f"{x:.3f}".rstrip("0").rstrip(".") or "0"


class _Canvas:
    def __init__(self, x_range, y_range):
        self.x_lo, self.x_hi = x_range
        self.y_lo, self.y_hi = y_range
        if self.x_hi == self.x_lo:
            self.x_hi = self.x_lo + 1.0
        if self.y_hi == self.y_lo:
            self.y_hi = self.y_lo + 1.0

    def px(self, x: float) -> float:
        frac = (x - self.x_lo) / (self.x_hi - self.x_lo)
        return MARGIN_L + frac * (WIDTH - MARGIN_L - MARGIN_R)

    def py(self, y: float) -> float:
        frac = (y - self.y_lo) / (self.y_hi - self.y_lo)
        return HEIGHT - MARGIN_B - frac * (HEIGHT - MARGIN_T - MARGIN_B)


def render_curves(
    series: list[tuple[str, np.ndarray, np.ndarray]],
    ref_lines: list[tuple[str, float]] | None = None,
    x_label: str = "beta",
    y_label: str = "value",
) -> str:
    """SVG text for labelled (x, y) series plus dashed vertical references."""
    if not series:
        raise ValueError("nothing to plot")
    xs = np.concatenate([np.asarray(s[1], dtype=np.float64) for s in series])
    ys = np.concatenate([np.asarray(s[2], dtype=np.float64) for s in series])
    refs = ref_lines or []
    all_x = np.concatenate([xs, np.asarray([r[1] for r in refs])]) if refs else xs
    canvas = _Canvas((all_x.min(), all_x.max()), (ys.min(), ys.max()))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    # axes
    x0, y0 = MARGIN_L, HEIGHT - MARGIN_B
    parts.append(
        f'<line x1="{x0}" y1="{y0}" x2="{WIDTH - MARGIN_R}" y2="{y0}" stroke="black"/>'
    )
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{MARGIN_T}" stroke="black"/>')
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        xv = canvas.x_lo + frac * (canvas.x_hi - canvas.x_lo)
        yv = canvas.y_lo + frac * (canvas.y_hi - canvas.y_lo)
        px, py = canvas.px(xv), canvas.py(yv)
        parts.append(f'<line x1="{px:.1f}" y1="{y0}" x2="{px:.1f}" y2="{y0 + 5}" stroke="black"/>')
        parts.append(
            f'<text x="{px:.1f}" y="{y0 + 18}" font-size="11" text-anchor="middle">{_fmt(xv)}</text>'
        )
        parts.append(f'<line x1="{x0 - 5}" y1="{py:.1f}" x2="{x0}" y2="{py:.1f}" stroke="black"/>')
        parts.append(
            f'<text x="{x0 - 8}" y="{py + 4:.1f}" font-size="11" text-anchor="end">{_fmt(yv)}</text>'
        )
    parts.append(
        f'<text x="{(MARGIN_L + WIDTH - MARGIN_R) / 2:.1f}" y="{HEIGHT - 12}" '
        f'font-size="12" text-anchor="middle">{x_label}</text>'
    )
    parts.append(
        f'<text x="14" y="{(MARGIN_T + HEIGHT - MARGIN_B) / 2:.1f}" font-size="12" '
        f'text-anchor="middle" transform="rotate(-90 14 {(MARGIN_T + HEIGHT - MARGIN_B) / 2:.1f})">'
        f"{y_label}</text>"
    )

    for i, (label, sx, sy) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        points = " ".join(
            f"{canvas.px(float(px)):.1f},{canvas.py(float(py)):.1f}"
            for px, py in zip(sx, sy)
        )
        parts.append(
            f'<polyline points="{points}" fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
        parts.append(
            f'<text x="{WIDTH - MARGIN_R - 6}" y="{MARGIN_T + 14 + 14 * i}" font-size="11" '
            f'text-anchor="end" fill="{color}">{label}</text>'
        )

    for j, (label, xv) in enumerate(refs):
        px = canvas.px(float(xv))
        parts.append(
            f'<line x1="{px:.1f}" y1="{MARGIN_T}" x2="{px:.1f}" y2="{y0}" '
            f'stroke="#555555" stroke-dasharray="6,4"/>'
        )
        parts.append(
            f'<text x="{px + 3:.1f}" y="{MARGIN_T + 12 + 12 * j}" font-size="10" '
            f'fill="#555555">{label}</text>'
        )

    parts.append("</svg>")
    return "\n".join(parts) + "\n"
