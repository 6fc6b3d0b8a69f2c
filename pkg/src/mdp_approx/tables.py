"""CSV tables with '#' metadata lines and minimal hand-written SVG line plots."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np


def fmt(x) -> str:
    """Round-trip safe number formatting (17 significant digits)."""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return format(float(x), ".17g")


@dataclass
class CsvTable:
    name: str
    header: list
    columns: list  # one sequence per header entry
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.header) != len(self.columns):
            raise ValueError("one column per header entry")
        lengths = {len(c) for c in self.columns}
        if len(lengths) > 1:
            raise ValueError("table must be rectangular")

    @property
    def n_rows(self) -> int:
        return len(self.columns[0]) if self.columns else 0

    def column(self, name: str) -> np.ndarray:
        return np.asarray(self.columns[self.header.index(name)])

    def to_text(self) -> str:
        lines = [f"# {key}: {fmt(value) if not isinstance(value, str) else value}"
                 for key, value in self.metadata.items()]
        lines.append(",".join(self.header))
        for i in range(self.n_rows):
            lines.append(",".join(fmt(col[i]) for col in self.columns))
        return "\n".join(lines) + "\n"

    def write(self, directory) -> Path:
        path = Path(directory) / f"{self.name}.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_text())
        return path


def read_csv(path) -> tuple[dict, list, np.ndarray]:
    """Parse a table written by :meth:`CsvTable.write` into (metadata, header, data)."""
    metadata, header, rows = {}, None, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            metadata[key.strip()] = value.strip()
        elif header is None:
            header = line.split(",")
        elif line:
            rows.append([float(x) for x in line.split(",")])
    return metadata, header, np.array(rows)


_COLOURS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf")


def _ticks(lo: float, hi: float, n: int = 5) -> list:
    if hi == lo:
        return [lo]
    step = 10 ** math.floor(math.log10((hi - lo) / n))
    for mult in (1, 2, 5, 10):
        if (hi - lo) / (step * mult) <= n:
            step *= mult
            break
    start = math.ceil(lo / step) * step
    return [start + k * step for k in range(int((hi - start) / step) + 1)]


def svg_line_plot(x: Sequence, series: dict, title: str = "", xlabel: str = "s", ylabel: str = "",
                  width: int = 640, height: int = 420) -> str:
    """One polyline per series; non-finite points are dropped."""
    x = np.asarray(x, dtype=float)
    left, right, top, bottom = 70, 160, 30, 50
    pw, ph = width - left - right, height - top - bottom
    finite = [np.asarray(v, float)[np.isfinite(v)] for v in series.values()]
    values = np.concatenate([v for v in finite if v.size] or [np.zeros(1)])
    y_lo, y_hi = float(values.min()), float(values.max())
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 1.0, y_hi + 1.0
    x_lo, x_hi = float(x.min()), float(x.max())
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 1.0, x_hi + 1.0

    def px(v):
        return left + (v - x_lo) / (x_hi - x_lo) * pw

    def py(v):
        return top + (y_hi - v) / (y_hi - y_lo) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{left + pw / 2}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>',
           f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for t in _ticks(x_lo, x_hi):
        out.append(f'<line x1="{px(t):.2f}" y1="{top + ph}" x2="{px(t):.2f}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{px(t):.2f}" y="{top + ph + 18}" text-anchor="middle" font-size="11">{t:g}</text>')
    for t in _ticks(y_lo, y_hi):
        out.append(f'<line x1="{left - 5}" y1="{py(t):.2f}" x2="{left}" y2="{py(t):.2f}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{py(t) + 4:.2f}" text-anchor="end" font-size="11">{t:g}</text>')
    out.append(f'<text x="{left + pw / 2}" y="{height - 10}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>')
    out.append(f'<text x="15" y="{top + ph / 2}" text-anchor="middle" font-size="12" '
               f'transform="rotate(-90 15 {top + ph / 2})">{escape(ylabel)}</text>')
    for k, (name, ys) in enumerate(series.items()):
        colour = _COLOURS[k % len(_COLOURS)]
        ys = np.asarray(ys, dtype=float)
        keep = np.isfinite(ys)
        points = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x[keep], ys[keep]))
        if points:
            out.append(f'<polyline points="{points}" fill="none" stroke="{colour}" stroke-width="1.5"/>')
        ly = top + 15 + 18 * k
        out.append(f'<line x1="{left + pw + 10}" y1="{ly}" x2="{left + pw + 30}" y2="{ly}" stroke="{colour}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 35}" y="{ly + 4}" font-size="11">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_plots(table: CsvTable, directory, x_column: str = "s", zoom=None, title: str = "") -> list:
    """Full-range plot of every non-x column, plus a zoomed companion when ``zoom`` is given."""
    x = table.column(x_column).astype(float)
    series = {h: table.column(h) for h in table.header if h != x_column and h != "best_ell"}
    paths = []
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    full = directory / f"{table.name}.svg"
    full.write_text(svg_line_plot(x, series, title or table.name, x_column))
    paths.append(full)
    if zoom is not None:
        keep = (x >= zoom[0]) & (x <= zoom[1])
        zoomed = directory / f"{table.name}_zoom.svg"
        zoomed.write_text(svg_line_plot(x[keep], {k: np.asarray(v)[keep] for k, v in series.items()},
                                        f"{title or table.name} (zoom)", x_column))
        paths.append(zoomed)
    return paths
