"""Minimal SVG line plots with a logarithmic y axis."""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 720, 480
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 80, 190, 30, 60
COLORS = (
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)


def _nice_step(span: float) -> float:
    raw = span / 8
    mag = 10 ** math.floor(math.log10(raw))
    for f in (1, 2, 5, 10):
        if f * mag >= raw:
            return f * mag
    return 10 * mag


def line_plot_svg(series, title="", xlabel="loss [dB]", ylabel="key rate per pulse", y_floor=1e-12) -> str:
    """Render ``series`` (a mapping label -> (xs, ys)) as an SVG document.

    Non-positive y values (and values below ``y_floor``) break the polyline,
    since they cannot be drawn on a log axis.
    """
    xs_all = [x for xs, _ in series.values() for x in xs]
    ys_all = [y for _, ys in series.values() for y in ys if y is not None and y > y_floor]
    x_lo, x_hi = (min(xs_all), max(xs_all)) if xs_all else (0.0, 1.0)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if ys_all:
        d_lo = math.floor(math.log10(min(ys_all)))
        d_hi = math.ceil(math.log10(max(ys_all)))
    else:
        d_lo, d_hi = -1, 0
    if d_hi == d_lo:
        d_hi += 1

    pw = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    ph = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

    def px(x):
        return MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * pw

    def py(y):
        return MARGIN_TOP + (d_hi - math.log10(y)) / (d_hi - d_lo) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    # log-y ticks, one per decade
    for d in range(d_lo, d_hi + 1):
        y = py(10.0**d)
        out.append(f'<line x1="{MARGIN_LEFT}" y1="{y:.2f}" x2="{MARGIN_LEFT + pw}" y2="{y:.2f}" stroke="#ddd"/>')
        out.append(f'<text x="{MARGIN_LEFT - 6}" y="{y + 4:.2f}" text-anchor="end">1e{d}</text>')
    step = _nice_step(x_hi - x_lo)
    x = math.ceil(x_lo / step) * step
    while x <= x_hi + 1e-9:
        xp = px(x)
        out.append(f'<line x1="{xp:.2f}" y1="{MARGIN_TOP + ph}" x2="{xp:.2f}" y2="{MARGIN_TOP + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{xp:.2f}" y="{MARGIN_TOP + ph + 18}" text-anchor="middle">{x:g}</text>')
        x += step

    for i, (label, (xs, ys)) in enumerate(series.items()):
        color = COLORS[i % len(COLORS)]
        runs, current = [], []
        for x, y in zip(xs, ys):
            if y is not None and y > y_floor:
                current.append(f"{px(x):.2f},{py(y):.2f}")
            elif current:
                runs.append(current)
                current = []
        if current:
            runs.append(current)
        for pts in runs:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{" ".join(pts)}"/>')
        ly = MARGIN_TOP + 14 + 18 * i
        lx = MARGIN_LEFT + pw + 12
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 20}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 26}" y="{ly}" font-size="10">{escape(label)}</text>')

    cx = MARGIN_LEFT + pw / 2
    out.append(f'<text x="{cx:.1f}" y="{HEIGHT - 15}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(
        f'<text x="20" y="{MARGIN_TOP + ph / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 20 {MARGIN_TOP + ph / 2:.1f})">{escape(ylabel)}</text>'
    )
    if title:
        out.append(f'<text x="{cx:.1f}" y="{MARGIN_TOP - 10}" text-anchor="middle">{escape(title)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
