"""Hand-rolled SVG grouped-bar charts.

Charts are written as plain SVG text with stable formatting so that equal
inputs produce byte-identical files, and every bar and baseline carries
machine-readable ``data-*`` attributes with the exact numeric values, which
lets tests (and downstream tooling) parse values back out of the artifact.
"""

from __future__ import annotations

from pathlib import Path

WIDTH_PER_CLUSTER = 120
MARGIN_LEFT = 70
MARGIN_RIGHT = 30
MARGIN_TOP = 50
MARGIN_BOTTOM = 70
PLOT_HEIGHT = 300

PALETTE = [
    "#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3",
    "#937860", "#da8bc3", "#8c8c8c", "#ccb974", "#64b5cd",
]


def _fmt(x):
    return f"{x:.2f}"


def grouped_bar_svg(title, clusters, series, y_label="", baselines=(), y_floor=None, y_ceil=None):
    """Render one grouped bar chart.

    ``clusters`` labels the x-axis groups; ``series`` is a list of
    (name, values) pairs, one value per cluster; ``baselines`` is a list of
    (attribute_name, value) pairs drawn as dashed horizontal lines.
    """
    n_clusters = len(clusters)
    n_series = max(1, len(series))
    plot_w = WIDTH_PER_CLUSTER * n_clusters
    width = MARGIN_LEFT + plot_w + MARGIN_RIGHT
    height = MARGIN_TOP + PLOT_HEIGHT + MARGIN_BOTTOM

    values = [v for _, vals in series for v in vals]
    lows = [0.0] + values + [v for _, v in baselines]
    highs = [0.0] + values + [v for _, v in baselines]
    lo = min(lows) if y_floor is None else y_floor
    hi = max(highs) if y_ceil is None else y_ceil
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo
    lo, hi = lo - 0.08 * span, hi + 0.08 * span

    def y_px(v):
        return MARGIN_TOP + PLOT_HEIGHT * (hi - v) / (hi - lo)

    bar_w = (WIDTH_PER_CLUSTER * 0.8) / n_series
    out = []
    out.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif">'
    )
    out.append(f'<text x="{_fmt(width / 2)}" y="24" text-anchor="middle" font-size="16">{title}</text>')
    if y_label:
        out.append(
            f'<text x="16" y="{_fmt(MARGIN_TOP + PLOT_HEIGHT / 2)}" text-anchor="middle" '
            f'font-size="12" transform="rotate(-90 16 {_fmt(MARGIN_TOP + PLOT_HEIGHT / 2)})">{y_label}</text>'
        )

    # axes and zero line
    x0, x1 = MARGIN_LEFT, MARGIN_LEFT + plot_w
    out.append(f'<line x1="{x0}" y1="{MARGIN_TOP}" x2="{x0}" y2="{MARGIN_TOP + PLOT_HEIGHT}" stroke="#333"/>')
    zero_y = y_px(0.0)
    out.append(f'<line x1="{x0}" y1="{_fmt(zero_y)}" x2="{x1}" y2="{_fmt(zero_y)}" stroke="#333"/>')

    for c, cluster in enumerate(clusters):
        cx = MARGIN_LEFT + WIDTH_PER_CLUSTER * c + WIDTH_PER_CLUSTER * 0.1
        for s, (name, vals) in enumerate(series):
            v = vals[c]
            top = y_px(max(v, 0.0))
            bottom = y_px(min(v, 0.0))
            x = cx + s * bar_w
            out.append(
                f'<rect x="{_fmt(x)}" y="{_fmt(top)}" width="{_fmt(bar_w * 0.9)}" '
                f'height="{_fmt(bottom - top)}" fill="{PALETTE[s % len(PALETTE)]}" '
                f'data-cluster="{cluster}" data-series="{name}" data-value="{v!r}"/>'
            )
            label_y = top - 4 if v >= 0 else bottom + 12
            out.append(
                f'<text x="{_fmt(x + bar_w * 0.45)}" y="{_fmt(label_y)}" text-anchor="middle" '
                f'font-size="9">{v:.3f}</text>'
            )
        out.append(
            f'<text x="{_fmt(cx + WIDTH_PER_CLUSTER * 0.4)}" y="{_fmt(MARGIN_TOP + PLOT_HEIGHT + 16)}" '
            f'text-anchor="middle" font-size="11">{cluster}</text>'
        )

    for attr, v in baselines:
        y = _fmt(y_px(v))
        out.append(
            f'<line x1="{x0}" y1="{y}" x2="{x1}" y2="{y}" stroke="#222" '
            f'stroke-dasharray="6,4" {attr}="{v!r}"/>'
        )
        out.append(
            f'<text x="{_fmt(x1 - 4)}" y="{_fmt(float(y) - 5)}" text-anchor="end" font-size="10">{v:.3f}</text>'
        )

    # legend
    lx = MARGIN_LEFT
    ly = MARGIN_TOP + PLOT_HEIGHT + 36
    for s, (name, _) in enumerate(series):
        out.append(
            f'<rect x="{_fmt(lx)}" y="{_fmt(ly)}" width="10" height="10" fill="{PALETTE[s % len(PALETTE)]}"/>'
        )
        out.append(f'<text x="{_fmt(lx + 14)}" y="{_fmt(ly + 9)}" font-size="11">{name}</text>')
        lx += 14 + 8 * max(4, len(name))

    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(text, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path
