"""Standalone SVG heatmaps of sweep CSVs, with the boundary curves drawn on top."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

from .sbm import it_detectability_limit

# viridis-like ramp, interpolated linearly
_RAMP = [(68, 1, 84), (59, 82, 139), (33, 145, 140), (94, 201, 98), (253, 231, 37)]


def _color(t: float) -> str:
    t = min(max(t, 0.0), 1.0) * (len(_RAMP) - 1)
    i = min(int(t), len(_RAMP) - 2)
    f = t - i
    rgb = [round(a + (b - a) * f) for a, b in zip(_RAMP[i], _RAMP[i + 1])]
    return "#%02x%02x%02x" % tuple(rgb)


def _as_value(v):
    if isinstance(v, str):
        low = v.strip().lower()
        if low in ("true", "false"):
            return 1.0 if low == "true" else 0.0
    return float(v)


def grid_from_rows(rows, column: str):
    cs = sorted({float(r["c"]) for r in rows})
    es = sorted({float(r["eps"]) for r in rows})
    values = np.full((len(es), len(cs)), np.nan)
    seen = set()
    for r in rows:
        key = (float(r["c"]), float(r["eps"]))
        if key in seen:
            raise ValueError(f"duplicate cell {key}")
        seen.add(key)
        values[es.index(key[1]), cs.index(key[0])] = _as_value(r[column])
    if len(seen) != len(cs) * len(es):
        raise ValueError("CSV rows do not form a rectangular (c, eps) grid")
    return cs, es, values


def heatmap_svg(rows, column: str, boundary=None, title: str | None = None) -> str:
    """``boundary``: optional list of ``(c, eps_star)`` for the mean-field line."""
    cs, es, values = grid_from_rows(rows, column)
    lo, hi = float(np.nanmin(values)), float(np.nanmax(values))
    span = hi - lo
    left, top, pw, ph = 70, 40, 480, 360
    cw, chh = pw / len(cs), ph / len(es)
    c_lo, c_hi = cs[0] - 0.5 * _step(cs), cs[-1] + 0.5 * _step(cs)
    e_lo, e_hi = es[0] - 0.5 * _step(es), es[-1] + 0.5 * _step(es)

    def px(c):
        return left + (c - c_lo) / (c_hi - c_lo) * pw

    def py(e):
        return top + ph - (e - e_lo) / (e_hi - e_lo) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{left + pw + 120}" height="{top + ph + 60}" '
           f'font-family="sans-serif" font-size="12">']
    out.append(f'<text x="{left}" y="20">{escape(title or column)}</text>')
    for i, e in enumerate(es):
        for j, c in enumerate(cs):
            t = 0.5 if span == 0 else (values[i, j] - lo) / span
            out.append(f'<rect class="cell" x="{left + j * cw:.2f}" y="{top + ph - (i + 1) * chh:.2f}" '
                       f'width="{cw:.2f}" height="{chh:.2f}" fill="{_color(t)}"/>')
    out.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    for c in cs:
        out.append(f'<text class="xtick" x="{px(c):.2f}" y="{top + ph + 16}" text-anchor="middle">{c:g}</text>')
    for e in es:
        out.append(f'<text class="ytick" x="{left - 6}" y="{py(e) + 4:.2f}" text-anchor="end">{e:g}</text>')
    out.append(f'<text x="{left + pw / 2}" y="{top + ph + 40}" text-anchor="middle">average degree c</text>')
    out.append(f'<text x="20" y="{top + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 20 {top + ph / 2})">epsilon</text>')

    it_pts = [(c, it_detectability_limit(c)) for c in np.linspace(max(cs[0], 1.0), cs[-1], 50)]
    out.append(_polyline("it-limit", it_pts, px, py, "white", "6,3"))
    if boundary:
        pts = [(c, e) for c, e in boundary if not math.isnan(e)]
        out.append(_polyline("mf-boundary", pts, px, py, "red", None))

    # color scale
    lx = left + pw + 30
    if span == 0:
        out.append(f'<rect class="legend" x="{lx}" y="{top}" width="20" height="20" fill="{_color(0.5)}"/>')
        out.append(f'<text x="{lx + 26}" y="{top + 14}">{lo:.4g}</text>')
    else:
        for k in range(20):
            t = 1 - k / 19
            out.append(f'<rect class="legend" x="{lx}" y="{top + k * ph / 20:.2f}" width="20" '
                       f'height="{ph / 20 + 0.5:.2f}" fill="{_color(t)}"/>')
        out.append(f'<text x="{lx + 26}" y="{top + 10}">{hi:.4g}</text>')
        out.append(f'<text x="{lx + 26}" y="{top + ph}">{lo:.4g}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _step(axis):
    return (axis[-1] - axis[0]) / (len(axis) - 1) if len(axis) > 1 else 1.0


def _polyline(cls, pts, px, py, color, dash):
    coords = " ".join(f"{px(c):.2f},{py(e):.2f}" for c, e in pts)
    dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
    return (f'<polyline class="{cls}" points="{coords}" fill="none" stroke="{color}" '
            f'stroke-width="2"{dash_attr}/>')


def emit_svg_heatmap(csv_path, column: str, out_path, boundary=None) -> None:
    from .harness import read_csv

    svg = heatmap_svg(read_csv(csv_path), column, boundary)
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(svg)
