"""CSV and standalone SVG writers for analysis output."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


def fmt(v) -> str:
    """Shortest text that reads back to the same float (integers stay integers)."""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    """Write rows under a header; column names carry their unit, e.g. ``theta2_rad``."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])
    return path


def read_csv(path: Path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    return rows[0], data.reshape(-1, len(rows[0]))


class SvgFigure:
    """Polylines and markers in data coordinates, y axis pointing up."""

    def __init__(self, xlim, ylim, width: int = 600, title: str = "", xlabel: str = "", ylabel: str = ""):
        self.xlim, self.ylim = (float(xlim[0]), float(xlim[1])), (float(ylim[0]), float(ylim[1]))
        self.width = width
        dx, dy = self.xlim[1] - self.xlim[0], self.ylim[1] - self.ylim[0]
        self.height = max(120, int(round(width * dy / dx))) if dx > 0 else width
        self.margin = 40
        self.title, self.xlabel, self.ylabel = title, xlabel, ylabel
        self.items: list[str] = []

    def _xy(self, x, y):
        (x0, x1), (y0, y1) = self.xlim, self.ylim
        px = self.margin + (np.asarray(x) - x0) / (x1 - x0) * self.width
        py = self.margin + (y1 - np.asarray(y)) / (y1 - y0) * self.height
        return px, py

    def polyline(self, pts, color: str = "black", closed: bool = False, width: float = 1.0,
                 wrap: Optional[Sequence[float]] = None, dash: bool = False):
        """Draw a polyline; with ``wrap`` = (xspan, yspan), jumps across a periodic edge split it."""
        pts = np.asarray(pts, dtype=float)
        if len(pts) < 2:
            return
        if closed:
            pts = np.vstack([pts, pts[:1]])
        cuts = np.zeros(len(pts) - 1, dtype=bool)
        if wrap is not None:
            jump = np.abs(np.diff(pts, axis=0))
            for k, span in enumerate(wrap):
                if span:
                    cuts |= jump[:, k] > 0.5 * span
        start = 0
        style = f'fill="none" stroke="{color}" stroke-width="{width:g}"' + (' stroke-dasharray="4 3"' if dash else "")
        for end in list(np.nonzero(cuts)[0] + 1) + [len(pts)]:
            seg = pts[start:end]
            if len(seg) >= 2:
                px, py = self._xy(seg[:, 0], seg[:, 1])
                coords = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
                self.items.append(f'<polyline points="{coords}" {style}/>')
            start = end

    def marker(self, x, y, color: str = "black", shape: str = "diamond", size: float = 5.0, label: str = ""):
        px, py = self._xy(x, y)
        s = size
        if shape == "diamond":
            pts = f"{px:.2f},{py - s:.2f} {px + s:.2f},{py:.2f} {px:.2f},{py + s:.2f} {px - s:.2f},{py:.2f}"
            self.items.append(f'<polygon points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        else:
            self.items.append(f'<circle cx="{px:.2f}" cy="{py:.2f}" r="{s / 2:g}" fill="{color}"/>')
        if label:
            self.text(x, y, label, dx=s + 2)

    def text(self, x, y, s: str, dx: float = 0.0, size: int = 11):
        px, py = self._xy(x, y)
        self.items.append(f'<text x="{px + dx:.2f}" y="{py:.2f}" font-size="{size}" font-family="sans-serif">{escape(s)}</text>')

    def save(self, path: Path) -> Path:
        m = self.margin
        W, H = self.width + 2 * m, self.height + 2 * m
        (x0, x1), (y0, y1) = self.xlim, self.ylim
        head = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
            f'<rect x="{m}" y="{m}" width="{self.width}" height="{self.height}" fill="white" stroke="#888"/>',
            f'<text x="{m}" y="{m - 14}" font-size="13" font-family="sans-serif">{escape(self.title)}</text>',
            f'<text x="{m + self.width / 2:.1f}" y="{H - 8}" font-size="11" font-family="sans-serif" text-anchor="middle">'
            f'{escape(self.xlabel)} [{x0:.3g}, {x1:.3g}]</text>',
            f'<text x="12" y="{m + self.height / 2:.1f}" font-size="11" font-family="sans-serif" '
            f'transform="rotate(-90 12 {m + self.height / 2:.1f})" text-anchor="middle">'
            f'{escape(self.ylabel)} [{y0:.3g}, {y1:.3g}]</text>',
        ]
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(head + self.items + ["</svg>", ""]))
        return path


def mask_outline(mask: np.ndarray, grid) -> list:
    """Boundary polylines of a boolean cell mask on a 2-D grid, via the same zero-curve tracer."""
    from .numcore import trace_zero_curve

    return trace_zero_curve(mask.astype(float) - 0.5, grid)
