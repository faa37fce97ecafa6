"""Standalone SVG figures rendered from an experiment report dict.

Output is plain text with fixed element order and fixed number formatting so
identical reports give identical bytes.
"""

from __future__ import annotations

import math
import re
from pathlib import Path
from xml.sax.saxutils import escape

from ..errors import IncompleteReport

PALETTE = (
    "#332288", "#117733", "#44AA99", "#88CCEE", "#DDCC77", "#CC6677", "#AA4499", "#882255",
    "#661100", "#6699CC", "#999933", "#E69F00", "#56B4E9", "#009E73", "#D55E00", "#0072B2",
)
BASE_COLOR = "#888888"
FONT = 'font-family="sans-serif" font-size="11"'


def _f(x: float) -> str:
    return f"{x:.2f}"


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", str(text))


def _header(width, height, title):
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
        f'<text x="{width / 2:.2f}" y="18" text-anchor="middle" {FONT} font-weight="bold">'
        f'{escape(title)}</text>',
    ]


def _method_color(methods, method):
    return BASE_COLOR if method == "base" else PALETTE[methods.index(method) % len(PALETTE)]


def forest_svg(attribute: str, groups: list, rows: list, methods: list) -> str:
    """One horizontal TPR interval per (group, row); ``rows`` pairs a base row with a debiased one.

    ``rows`` is a list of ``(method, {group: (mean_tpr, half_width)})``.
    """
    left, right, top, row_h = 150, 30, 40, 18
    plot_w = 400
    n_rows = len(groups) * len(rows)
    height = top + n_rows * row_h + 60
    width = left + plot_w + right
    title = f"{attribute}: group TPR ({' vs '.join(m for m, _ in rows)})"
    out = _header(width, height, title)

    def x(v):
        return left + plot_w * min(max(v, 0.0), 1.0)

    axis_y = top + n_rows * row_h + 8
    out.append(f'<line class="axis" x1="{_f(x(0))}" y1="{axis_y}" x2="{_f(x(1))}" y2="{axis_y}" '
               'stroke="#000000" stroke-width="1"/>')
    for i in range(6):
        v = i / 5
        out.append(f'<line class="tick" x1="{_f(x(v))}" y1="{axis_y}" x2="{_f(x(v))}" '
                   f'y2="{axis_y + 4}" stroke="#000000"/>')
        out.append(f'<text x="{_f(x(v))}" y="{axis_y + 16}" text-anchor="middle" {FONT}>'
                   f'{v:.1f}</text>')
    out.append(f'<text x="{_f(x(0.5))}" y="{axis_y + 32}" text-anchor="middle" {FONT}>'
               'true-positive rate (mean over folds)</text>')

    r = 0
    for g in groups:
        for method, values in rows:
            cy = top + r * row_h + row_h / 2
            mean, hw = values.get(g, (math.nan, None))
            color = _method_color(methods, method)
            out.append(f'<text x="{left - 8}" y="{cy + 4:.2f}" text-anchor="end" {FONT}>'
                       f'{escape(str(g))} [{escape(method)}]</text>')
            if math.isfinite(mean):
                hw = 0.0 if hw is None or not math.isfinite(hw) else hw
                out.append(f'<line class="interval" data-group="{escape(str(g))}" '
                           f'data-method="{escape(method)}" x1="{_f(x(mean - hw))}" y1="{cy:.2f}" '
                           f'x2="{_f(x(mean + hw))}" y2="{cy:.2f}" stroke="{color}" stroke-width="2"/>')
                out.append(f'<circle class="point" cx="{_f(x(mean))}" cy="{cy:.2f}" r="3" '
                           f'fill="{color}"/>')
            r += 1
    out.append("</svg>")
    return "\n".join(out) + "\n"


def scatter_svg(attribute: str, points: list, methods: list, band: float) -> str:
    """EOD (x) against BAcc (y), one marker per method, with the fair band shaded.

    ``points`` is a list of ``(method, eod, bacc)``.
    """
    left, right, top, bottom = 60, 120, 40, 50
    plot_w, plot_h = 360, 260
    width, height = left + plot_w + right, top + plot_h + bottom
    reach = max([band * 3] + [abs(e) + 0.05 for _, e, _ in points])
    x_max = math.ceil(reach * 10) / 10
    baccs = [b for _, _, b in points if math.isfinite(b)] or [0.5]
    y_lo = max(0.0, math.floor((min(baccs) - 0.05) * 20) / 20)
    y_hi = min(1.0, math.ceil((max(baccs) + 0.05) * 20) / 20)
    if y_hi <= y_lo:
        y_lo, y_hi = 0.0, 1.0

    def x(v):
        return left + plot_w * (v + x_max) / (2 * x_max)

    def y(v):
        return top + plot_h * (1 - (v - y_lo) / (y_hi - y_lo))

    out = _header(width, height, f"{attribute}: fairness vs accuracy")
    out.append(f'<rect class="fair-band" data-eod-low="{-band:g}" data-eod-high="{band:g}" '
               f'x="{_f(x(-band))}" y="{top}" width="{_f(x(band) - x(-band))}" height="{plot_h}" '
               'fill="#dddddd" fill-opacity="0.6"/>')
    out.append(f'<rect class="frame" x="{left}" y="{top}" width="{plot_w}" height="{plot_h}" '
               'fill="none" stroke="#000000"/>')
    out.append(f'<line class="zero" x1="{_f(x(0))}" y1="{top}" x2="{_f(x(0))}" y2="{top + plot_h}" '
               'stroke="#555555" stroke-dasharray="3,3"/>')
    n_xt = int(round(2 * x_max / 0.1))
    step = 1 if n_xt <= 10 else 2 if n_xt <= 20 else 5
    for i in range(0, n_xt + 1, step):
        v = -x_max + i * 0.1
        out.append(f'<text x="{_f(x(v))}" y="{top + plot_h + 16}" text-anchor="middle" {FONT}>'
                   f'{v:+.1f}</text>')
    n_yt = int(round((y_hi - y_lo) / 0.05))
    for i in range(n_yt + 1):
        v = y_lo + i * 0.05
        out.append(f'<text x="{left - 6}" y="{_f(y(v) + 4)}" text-anchor="end" {FONT}>{v:.2f}</text>')
    out.append(f'<text x="{_f(x(0))}" y="{height - 10}" text-anchor="middle" {FONT}>EOD</text>')
    out.append(f'<text x="14" y="{top + plot_h / 2:.2f}" text-anchor="middle" {FONT} '
               f'transform="rotate(-90 14 {top + plot_h / 2:.2f})">BAcc</text>')

    for i, (method, e, b) in enumerate(points):
        color = _method_color(methods, method)
        px, py = x(e), y(b)
        if method == "base":
            out.append(f'<path class="marker" data-method="base" d="M{_f(px - 5)},{_f(py - 5)} '
                       f'L{_f(px + 5)},{_f(py + 5)} M{_f(px - 5)},{_f(py + 5)} L{_f(px + 5)},{_f(py - 5)}" '
                       f'stroke="{color}" stroke-width="2"/>')
        else:
            out.append(f'<circle class="marker" data-method="{escape(method)}" cx="{_f(px)}" '
                       f'cy="{_f(py)}" r="5" fill="{color}"/>')
        ly = top + 10 + 16 * i
        out.append(f'<rect x="{left + plot_w + 12}" y="{ly - 8}" width="10" height="10" fill="{color}"/>')
        out.append(f'<text x="{left + plot_w + 28}" y="{ly + 1}" {FONT}>{escape(method)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _finite(v):
    return isinstance(v, (int, float)) and math.isfinite(v)


def _cell_intervals(cell):
    return {g: (s["mean_tpr"] if s["mean_tpr"] is not None else math.nan, s["half_width"])
            for g, s in cell["group_report"]["groups"].items()}


def render_figures(report, outdir) -> list:
    """Write forest plots per (attribute, method) and one scatter per attribute."""
    data = report.to_dict() if hasattr(report, "to_dict") else report
    try:
        attributes = data["attributes"]
        band = data["config"]["band"]
    except (KeyError, TypeError):
        raise IncompleteReport("report lacks attributes or config") from None
    if not attributes:
        raise IncompleteReport("report has no attributes")
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = []
    for attr in sorted(attributes):
        cells = attributes[attr].get("cells", {})
        base = cells.get("base")
        if base is None or base.get("status") != "ok":
            raise IncompleteReport(f"attribute {attr!r} has no usable base cell")
        methods = sorted(m for m, c in cells.items() if m != "base" and c.get("status") == "ok")
        groups = list(base["group_report"]["groups"])
        base_iv = _cell_intervals(base)
        targets = methods or [None]
        for m in targets:
            rows = [("base", base_iv)] + ([(m, _cell_intervals(cells[m]))] if m else [])
            svg = forest_svg(attr, groups, rows, methods)
            path = outdir / f"forest_{_slug(attr)}_{_slug(m or 'base')}.svg"
            path.write_text(svg, encoding="utf-8")
            paths.append(path)
        points = [(m, cells[m]["fairness"]["eod"], cells[m]["bacc"]["pooled"])
                  for m in ["base"] + methods]
        points = [p for p in points if _finite(p[1]) and _finite(p[2])]
        path = outdir / f"scatter_{_slug(attr)}.svg"
        path.write_text(scatter_svg(attr, points, methods, band), encoding="utf-8")
        paths.append(path)
    return paths
