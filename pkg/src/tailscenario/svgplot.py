"""Minimal SVG boxplots (box 25-75%, median line, whiskers 5/95%, outlier dots)."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

PANEL_W, PANEL_H = 560, 300
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 20, 40, 50
COLORS = ("#4c72b0", "#dd8452", "#55a868", "#c44e52")


def _fmt(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".")


def _quantiles(v: np.ndarray) -> dict:
    q = np.percentile(v, [5, 25, 50, 75, 95])
    return dict(zip(("q5", "q25", "q50", "q75", "q95"), q.tolist()))


def _scale(values, log: bool):
    lo, hi = float(np.min(values)), float(np.max(values))
    if log:
        lo, hi = math.log10(lo), math.log10(hi)
    if hi - lo < 1e-12:
        lo, hi = lo - 0.5, hi + 0.5
    pad = 0.05 * (hi - lo)
    lo, hi = lo - pad, hi + pad
    top, bottom = MARGIN_T, PANEL_H - MARGIN_B

    def y(v):
        t = math.log10(v) if log else v
        return bottom - (t - lo) / (hi - lo) * (bottom - top)

    ticks = []
    if log:
        for k in range(math.floor(lo), math.ceil(hi) + 1):
            if lo <= k <= hi:
                ticks.append((10.0 ** k, f"1e{k}"))
    else:
        step = 10 ** math.floor(math.log10((hi - lo) / 4))
        for mult in (1, 2, 5, 10):
            if (hi - lo) / (step * mult) <= 6:
                step *= mult
                break
        v = math.ceil(lo / step) * step
        while v <= hi:
            ticks.append((v, f"{v:.4g}"))
            v += step
    return y, ticks


def boxplot_panel(title: str, groups: list[tuple[str, float, np.ndarray]], methods: list[str],
                  deltas: list[float], offset_y: int) -> list[str]:
    """One panel; ``groups`` holds (method, delta, values) triples."""
    vals = [v for _, _, v in groups if v.size]
    out = [f'<g class="panel" transform="translate(0,{offset_y})">',
           f'<text x="{PANEL_W / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>']
    if not vals:
        out.append(f'<text x="{PANEL_W / 2}" y="{PANEL_H / 2}" text-anchor="middle">no data</text></g>')
        return out
    allv = np.concatenate(vals)
    log = bool(np.all(allv > 0) and allv.max() / allv.min() > 50)
    y, ticks = _scale(allv, log)
    left, right = MARGIN_L, PANEL_W - MARGIN_R
    bottom = PANEL_H - MARGIN_B
    out.append(f'<line x1="{left}" y1="{MARGIN_T}" x2="{left}" y2="{bottom}" stroke="black"/>')
    out.append(f'<line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}" stroke="black"/>')
    for v, label in ticks:
        yy = _fmt(y(v))
        out.append(f'<line x1="{left - 4}" y1="{yy}" x2="{left}" y2="{yy}" stroke="black"/>')
        out.append(f'<text x="{left - 6}" y="{yy}" text-anchor="end" font-size="10" dy="3">{label}</text>')

    slot = (right - left) / max(len(deltas), 1)
    width = slot / (len(methods) + 1)
    for k, delta in enumerate(deltas):
        cx = left + slot * (k + 0.5)
        out.append(f'<text x="{_fmt(cx)}" y="{bottom + 16}" text-anchor="middle" font-size="10">{delta:g}</text>')
        for j, method in enumerate(methods):
            match = [v for m, dlt, v in groups if m == method and dlt == delta]
            if not match or not match[0].size:
                continue
            v = match[0]
            q = _quantiles(v)
            x0 = cx - slot / 2 + width * (j + 0.5)
            x1 = x0 + width * 0.8
            xm = (x0 + x1) / 2
            col = COLORS[j % len(COLORS)]
            out.append(f'<g class="box" data-method="{escape(method)}" data-delta="{delta:g}">')
            out.append(f'<line x1="{_fmt(xm)}" y1="{_fmt(y(q["q5"]))}" x2="{_fmt(xm)}" y2="{_fmt(y(q["q25"]))}" stroke="{col}"/>')
            out.append(f'<line x1="{_fmt(xm)}" y1="{_fmt(y(q["q75"]))}" x2="{_fmt(xm)}" y2="{_fmt(y(q["q95"]))}" stroke="{col}"/>')
            for key in ("q5", "q95"):
                out.append(f'<line x1="{_fmt(x0 + width * 0.2)}" y1="{_fmt(y(q[key]))}" x2="{_fmt(x1 - width * 0.2)}" '
                           f'y2="{_fmt(y(q[key]))}" stroke="{col}"/>')
            top, low = y(q["q75"]), y(q["q25"])
            out.append(f'<rect x="{_fmt(x0)}" y="{_fmt(top)}" width="{_fmt(x1 - x0)}" height="{_fmt(max(low - top, 0.5))}" '
                       f'fill="{col}" fill-opacity="0.35" stroke="{col}"/>')
            out.append(f'<line class="median" x1="{_fmt(x0)}" y1="{_fmt(y(q["q50"]))}" x2="{_fmt(x1)}" '
                       f'y2="{_fmt(y(q["q50"]))}" stroke="black" stroke-width="2"/>')
            for val in v[(v < q["q5"]) | (v > q["q95"])]:
                out.append(f'<circle cx="{_fmt(xm)}" cy="{_fmt(y(val))}" r="1.5" fill="{col}"/>')
            out.append("</g>")
    for j, method in enumerate(methods):
        lx = right - 90
        ly = MARGIN_T + 14 * j
        out.append(f'<rect x="{lx}" y="{ly - 8}" width="10" height="10" fill="{COLORS[j % len(COLORS)]}"/>')
        out.append(f'<text x="{lx + 14}" y="{ly}" font-size="10">{escape(method)}</text>')
    out.append(f'<text x="{PANEL_W / 2}" y="{PANEL_H - 12}" text-anchor="middle" font-size="11">delta</text>')
    out.append("</g>")
    return out


def render_boxplots(panels: list[tuple[str, list]], methods: list[str], deltas: list[float]) -> str:
    height = PANEL_H * len(panels)
    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{PANEL_W}" height="{height}" '
             f'viewBox="0 0 {PANEL_W} {height}" font-family="sans-serif">']
    for i, (title, groups) in enumerate(panels):
        lines.extend(boxplot_panel(title, groups, methods, deltas, i * PANEL_H))
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
