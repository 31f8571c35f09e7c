"""Minimal dependency-free SVG line charts."""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from typing import NamedTuple, Sequence

WIDTH, HEIGHT = 640, 420
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 70, 20, 40, 55


class Marker(NamedTuple):
    """A vertical dashed line at ``x``."""

    x: float
    label: str
    color: str = "red"


def _fmt(v):
    return f"{v:.2f}"


def _tick(v):
    return f"{v:.3g}"


def _range(values):
    lo, hi = min(values), max(values)
    if not math.isfinite(lo) or not math.isfinite(hi):
        raise ValueError("non-finite values cannot be plotted")
    if hi == lo:
        pad = abs(lo) * 0.05 or 0.5
        return lo - pad, hi + pad
    return lo, hi


def line_chart(xs: Sequence[float], ys: Sequence[float], markers: Sequence[Marker] = (),
               title="", xlabel="", ylabel="", y_range=None) -> str:
    """Render one polyline with optional vertical markers; returns the SVG text.

    Every marker is drawn as one ``<line class="marker">`` element, so the
    count of such elements equals ``len(markers)``.
    """
    if len(xs) != len(ys) or not xs:
        raise ValueError("xs and ys must be non-empty and of equal length")
    x_lo, x_hi = _range(list(xs) + [m.x for m in markers])
    y_lo, y_hi = y_range if y_range is not None else _range(ys)
    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

    def sx(x):
        return MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w

    def sy(y):
        return MARGIN_TOP + (1.0 - (y - y_lo) / (y_hi - y_lo)) * plot_h

    svg = ET.Element("svg", xmlns="http://www.w3.org/2000/svg", width=str(WIDTH),
                     height=str(HEIGHT), viewBox=f"0 0 {WIDTH} {HEIGHT}")
    ET.SubElement(svg, "rect", x="0", y="0", width=str(WIDTH), height=str(HEIGHT),
                  fill="white")
    title_el = ET.SubElement(svg, "text", x=str(WIDTH // 2), y="22", attrib={
        "text-anchor": "middle", "font-size": "15", "font-family": "sans-serif"})
    title_el.text = title

    axes = ET.SubElement(svg, "g", attrib={"class": "axes", "stroke": "black"})
    x0, y0 = MARGIN_LEFT, MARGIN_TOP + plot_h
    ET.SubElement(axes, "line", x1=str(x0), y1=str(y0), x2=str(x0 + plot_w), y2=str(y0))
    ET.SubElement(axes, "line", x1=str(x0), y1=str(y0), x2=str(x0), y2=str(MARGIN_TOP))

    ticks = ET.SubElement(svg, "g", attrib={"class": "ticks", "font-size": "11",
                                            "font-family": "sans-serif"})
    for i in range(5):
        xv = x_lo + (x_hi - x_lo) * i / 4
        t = ET.SubElement(ticks, "text", x=_fmt(sx(xv)), y=str(y0 + 18),
                          attrib={"text-anchor": "middle"})
        t.text = _tick(xv)
        yv = y_lo + (y_hi - y_lo) * i / 4
        t = ET.SubElement(ticks, "text", x=str(x0 - 8), y=_fmt(sy(yv) + 4),
                          attrib={"text-anchor": "end"})
        t.text = _tick(yv)

    xl = ET.SubElement(svg, "text", x=str(x0 + plot_w // 2), y=str(HEIGHT - 12), attrib={
        "text-anchor": "middle", "font-size": "13", "font-family": "sans-serif"})
    xl.text = xlabel
    yl = ET.SubElement(svg, "text", x="18", y=str(MARGIN_TOP + plot_h // 2), attrib={
        "text-anchor": "middle", "font-size": "13", "font-family": "sans-serif",
        "transform": f"rotate(-90 18 {MARGIN_TOP + plot_h // 2})"})
    yl.text = ylabel

    points = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in zip(xs, ys))
    ET.SubElement(svg, "polyline", points=points, fill="none", stroke="steelblue",
                  attrib={"class": "series", "stroke-width": "2"})

    for m in markers:
        px = _fmt(sx(m.x))
        ET.SubElement(svg, "line", x1=px, y1=str(MARGIN_TOP), x2=px, y2=str(y0),
                      stroke=m.color, attrib={"class": "marker", "stroke-dasharray": "6,4",
                                              "stroke-width": "1.5"})
        lab = ET.SubElement(svg, "text", x=px, y=str(MARGIN_TOP - 4), fill=m.color,
                            attrib={"text-anchor": "middle", "font-size": "11",
                                    "font-family": "sans-serif"})
        lab.text = m.label

    return '<?xml version="1.0" encoding="UTF-8"?>\n' + ET.tostring(svg, encoding="unicode") + "\n"


def write_line_chart(path, *args, **kwargs):
    text = line_chart(*args, **kwargs)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return path
