"""Minimal deterministic SVG line plots from result CSV files.

The plotter reads the harness CSV schema
(`experiment,n,beta,epsilon,t,quantity,value,stderr`), draws one polyline
per (quantity, n) group, and embeds the raw data rows in a comment block
so a plot can be parsed back into exactly the rows it came from.  No
external renderer is involved; layout is fixed and deterministic.
"""

from __future__ import annotations

import csv
import math

from .errors import CsvParseError

__all__ = ["read_rows", "emit_plot", "parse_embedded"]

HEADER = "experiment,n,beta,epsilon,t,quantity,value,stderr"

_W, _H = 800.0, 500.0
_ML, _MR, _MT, _MB = 70.0, 20.0, 20.0, 50.0
_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
           "#8c564b", "#17becf", "#7f7f7f"]


def read_rows(path) -> list[dict]:
    """Parse a harness CSV; raises with a line number on schema breaches."""
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvParseError("empty file", line_number=1)
        if ",".join(header) != HEADER:
            raise CsvParseError(
                f"bad header {','.join(header)!r}", line_number=1)
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != 8:
                raise CsvParseError(
                    f"expected 8 fields, got {len(rec)}", line_number=lineno)
            try:
                rows.append({
                    "experiment": rec[0],
                    "n": int(rec[1]),
                    "beta": float(rec[2]),
                    "epsilon": float(rec[3]),
                    "t": float(rec[4]),
                    "quantity": rec[5],
                    "value": float(rec[6]),
                    "stderr": float(rec[7]) if rec[7] else 0.0,
                })
            except ValueError as exc:
                raise CsvParseError(f"bad field: {exc}", line_number=lineno)
    if not rows:
        raise CsvParseError("no data rows", line_number=2)
    return rows


def _scale(vals, lo_px, hi_px, log):
    vs = [math.log10(v) for v in vals] if log else list(vals)
    vmin, vmax = min(vs), max(vs)
    if vmax == vmin:
        vmax = vmin + 1.0
    span = vmax - vmin

    def to_px(v):
        x = math.log10(v) if log else v
        return lo_px + (x - vmin) / span * (hi_px - lo_px)

    return to_px, vmin, vmax


def emit_plot(csv_path, out_svg, logy: bool = False, logx: bool = False):
    """Render one SVG from a harness CSV.

    The x axis is `t` when the file has more than one time value,
    otherwise `n`; one polyline per (quantity, n or quantity) group.
    """
    rows = read_rows(csv_path)
    tvals = sorted({r["t"] for r in rows})
    use_t = len(tvals) > 1
    xkey = "t" if use_t else "n"

    def group_key(r):
        return (r["quantity"], r["n"]) if use_t else (r["quantity"],)

    groups: dict[tuple, list] = {}
    for r in rows:
        groups.setdefault(group_key(r), []).append(r)

    xs_all = [r[xkey] for r in rows]
    ys_all = [r["value"] for r in rows]
    if logx and min(xs_all) <= 0:
        raise CsvParseError("log x-scale requires positive x values")
    if logy and min(ys_all) <= 0:
        raise CsvParseError("log y-scale requires positive values")
    to_x, xmin, xmax = _scale(xs_all, _ML, _W - _MR, logx)
    to_y, ymin, ymax = _scale(ys_all, _H - _MB, _MT, logy)

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W:.0f}" '
        f'height="{_H:.0f}" viewBox="0 0 {_W:.0f} {_H:.0f}">',
        f'<rect width="{_W:.0f}" height="{_H:.0f}" fill="white"/>',
        f'<line x1="{_ML}" y1="{_H - _MB}" x2="{_W - _MR}" y2="{_H - _MB}" '
        'stroke="black"/>',
        f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_H - _MB}" '
        'stroke="black"/>',
        f'<text x="{_ML}" y="{_H - _MB + 20:.0f}" font-size="12">'
        f'{xkey} min {xmin:.6g}{" (log10)" if logx else ""}</text>',
        f'<text x="{_W - _MR - 120:.0f}" y="{_H - _MB + 20:.0f}" '
        f'font-size="12">{xkey} max {xmax:.6g}</text>',
        f'<text x="5" y="{_MT + 10:.0f}" font-size="12">'
        f'max {ymax:.6g}{" (log10)" if logy else ""}</text>',
        f'<text x="5" y="{_H - _MB:.0f}" font-size="12">min {ymin:.6g}</text>',
    ]
    for gi, key in enumerate(sorted(groups)):
        pts = sorted(groups[key], key=lambda r: r[xkey])
        color = _COLORS[gi % len(_COLORS)]
        path = " ".join(
            f"{to_x(r[xkey]):.2f},{to_y(r['value']):.2f}" for r in pts)
        label = "/".join(str(k) for k in key)
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
            f'points="{path}"/>')
        parts.append(
            f'<text x="{_W - _MR - 150:.0f}" y="{_MT + 15 + 14 * gi:.0f}" '
            f'font-size="12" fill="{color}">{label}</text>')

    parts.append("<!--DATA")
    parts.append(HEADER)
    for r in rows:
        parts.append(_format_row(r))
    parts.append("-->")
    parts.append("</svg>")
    with open(out_svg, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")


def _format_row(r: dict) -> str:
    return (f"{r['experiment']},{r['n']},{r['beta']:.17g},"
            f"{r['epsilon']:.17g},{r['t']:.17g},{r['quantity']},"
            f"{r['value']:.17g},{r['stderr']:.17g}")


def parse_embedded(svg_path) -> list[dict]:
    """Recover the data rows embedded in a plot produced by emit_plot."""
    with open(svg_path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        block = text.split("<!--DATA\n", 1)[1].split("\n-->", 1)[0]
    except IndexError:
        raise CsvParseError("no embedded data block found")
    lines = block.splitlines()
    if not lines or lines[0] != HEADER:
        raise CsvParseError("embedded block lacks the schema header")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        rec = line.split(",")
        if len(rec) != 8:
            raise CsvParseError("bad embedded row", line_number=lineno)
        rows.append({
            "experiment": rec[0], "n": int(rec[1]), "beta": float(rec[2]),
            "epsilon": float(rec[3]), "t": float(rec[4]), "quantity": rec[5],
            "value": float(rec[6]), "stderr": float(rec[7]),
        })
    return rows
