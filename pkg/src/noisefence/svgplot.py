"""Minimal dependency-free SVG line plots (log-log capable) for the analysis
curves; CSV stays the primary artifact."""

from __future__ import annotations

import math

WIDTH, HEIGHT, MARGIN = 640, 420, 60

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]


def _transform(value: float, log: bool) -> float:
    if log:
        if value <= 0:
            raise ValueError("log axis requires positive values")
        return math.log10(value)
    return value


def line_plot_svg(
    series: dict[str, list[tuple[float, float]]],
    x_label: str,
    y_label: str,
    log_x: bool = True,
    log_y: bool = True,
) -> str:
    """Render named (x, y) series as an SVG document string."""
    points = [
        (_transform(x, log_x), _transform(y, log_y))
        for pts in series.values()
        for x, y in pts
    ]
    if not points:
        raise ValueError("nothing to plot")
    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    x_span = (x_hi - x_lo) or 1.0
    y_span = (y_hi - y_lo) or 1.0

    def px(x: float) -> float:
        return MARGIN + (x - x_lo) / x_span * (WIDTH - 2 * MARGIN)

    def py(y: float) -> float:
        return HEIGHT - MARGIN - (y - y_lo) / y_span * (HEIGHT - 2 * MARGIN)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN}" '
        f'y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<text x="{WIDTH / 2:.1f}" y="{HEIGHT - 15}" text-anchor="middle" '
        f'font-size="13">{x_label}</text>',
        f'<text x="18" y="{HEIGHT / 2:.1f}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 18 {HEIGHT / 2:.1f})">{y_label}</text>',
    ]
    for i, (name, pts) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        coords = " ".join(
            f"{px(_transform(x, log_x)):.2f},{py(_transform(y, log_y)):.2f}" for x, y in pts
        )
        parts.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="2"/>')
        parts.append(
            f'<text x="{WIDTH - MARGIN + 4}" y="{MARGIN + 16 * i}" font-size="12" '
            f'fill="{color}" text-anchor="end">{name}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts)
