"""Minimal SVG line charts: polylines, axis ticks, vertical markers, a shaded band."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


@dataclass
class Series:
    label: str
    x: Sequence[float]
    y: Sequence[float]
    color: str | None = None
    dashed: bool = False


@dataclass
class Band:
    x: Sequence[float]
    low: Sequence[float]
    high: Sequence[float]
    color: str = "#d62728"


def nice_ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return []
    if hi == lo:
        return [lo]
    raw = (hi - lo) / max(target, 1)
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    first = math.ceil(lo / step) * step
    ticks = []
    k = 0
    while first + k * step <= hi + step * 1e-9:
        ticks.append(round(first + k * step, 12))
        k += 1
    return ticks


def _fmt_tick(v: float) -> str:
    return f"{v:g}" if abs(v) < 1e5 else f"{v:.3g}"


def line_chart(
    series: Sequence[Series],
    title: str = "",
    x_label: str = "",
    y_label: str = "",
    markers: Sequence[tuple[float, str]] = (),
    band: Band | None = None,
    width: int = 720,
    height: int = 400,
) -> str:
    """Render ``series`` as one ``<polyline>`` each; markers are vertical ``<line>`` rules."""
    left, right, top, bottom = 70, 20, 40, 50
    xs = [v for s in series for v in s.x] + [m for m, _ in markers]
    ys = [v for s in series for v in s.y if math.isfinite(v)]
    if band is not None:
        xs += list(band.x)
        ys += [v for v in (*band.low, *band.high) if math.isfinite(v)]
    x0, x1 = (min(xs), max(xs)) if xs else (0.0, 1.0)
    y0, y1 = (min(ys), max(ys)) if ys else (0.0, 1.0)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    pad = (y1 - y0) * 0.05
    y0, y1 = y0 - pad, y1 + pad

    plot_w = width - left - right
    plot_h = height - top - bottom

    def px(v: float) -> float:
        return left + (v - x0) / (x1 - x0) * plot_w

    def py(v: float) -> float:
        return top + (y1 - v) / (y1 - y0) * plot_h

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        out.append(
            f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-size="15" '
            f'font-family="sans-serif">{escape(title)}</text>'
        )
    axis_y = top + plot_h
    out.append(
        f'<g class="axes" stroke="#333" stroke-width="1">'
        f'<line x1="{left}" y1="{axis_y}" x2="{left + plot_w}" y2="{axis_y}"/>'
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{axis_y}"/></g>'
    )
    ticks = ['<g class="ticks" font-size="11" font-family="sans-serif" fill="#333">']
    for v in nice_ticks(x0, x1):
        x = px(v)
        ticks.append(f'<line x1="{x:.2f}" y1="{axis_y}" x2="{x:.2f}" y2="{axis_y + 5}" stroke="#333"/>')
        ticks.append(f'<text x="{x:.2f}" y="{axis_y + 18}" text-anchor="middle">{_fmt_tick(v)}</text>')
    for v in nice_ticks(y0, y1):
        y = py(v)
        ticks.append(f'<line x1="{left - 5}" y1="{y:.2f}" x2="{left}" y2="{y:.2f}" stroke="#333"/>')
        ticks.append(f'<text x="{left - 8}" y="{y + 4:.2f}" text-anchor="end">{_fmt_tick(v)}</text>')
    ticks.append("</g>")
    out.extend(ticks)
    if x_label:
        out.append(
            f'<text x="{left + plot_w / 2:.1f}" y="{height - 10}" text-anchor="middle" '
            f'font-size="12" font-family="sans-serif">{escape(x_label)}</text>'
        )
    if y_label:
        out.append(
            f'<text x="16" y="{top + plot_h / 2:.1f}" text-anchor="middle" font-size="12" '
            f'font-family="sans-serif" transform="rotate(-90 16 {top + plot_h / 2:.1f})">'
            f"{escape(y_label)}</text>"
        )

    if band is not None:
        upper = [f"{px(x):.2f},{py(y):.2f}" for x, y in zip(band.x, band.high)]
        lower = [f"{px(x):.2f},{py(y):.2f}" for x, y in zip(band.x, band.low)]
        out.append(
            f'<polygon class="band" points="{" ".join(upper + lower[::-1])}" '
            f'fill="{band.color}" fill-opacity="0.2" stroke="none"/>'
        )

    for value, label in markers:
        x = px(value)
        out.append(
            f'<line class="marker" data-x="{value:g}" x1="{x:.2f}" y1="{top}" x2="{x:.2f}" y2="{axis_y}" '
            f'stroke="#777" stroke-dasharray="4 3"/>'
        )
        if label:
            out.append(
                f'<text x="{x + 4:.2f}" y="{top + 12}" font-size="11" '
                f'font-family="sans-serif" fill="#555">{escape(label)}</text>'
            )

    for i, s in enumerate(series):
        color = s.color or PALETTE[i % len(PALETTE)]
        pts = " ".join(
            f"{px(x):.2f},{py(y):.2f}" for x, y in zip(s.x, s.y) if math.isfinite(y)
        )
        dash = ' stroke-dasharray="6 4"' if s.dashed else ""
        out.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.8"{dash}>'
            f"<title>{escape(s.label)}</title></polyline>"
        )

    legend_x = left + 10
    for i, s in enumerate(series):
        color = s.color or PALETTE[i % len(PALETTE)]
        y = top + 14 + 16 * i
        out.append(
            f'<rect x="{legend_x}" y="{y - 8}" width="12" height="3" fill="{color}"/>'
            f'<text x="{legend_x + 18}" y="{y}" font-size="11" font-family="sans-serif">'
            f"{escape(s.label)}</text>"
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"
