"""Minimal deterministic SVG writer for world-coordinate figures.

Numbers are printed with a fixed number of decimals and elements are emitted
in call order, so equal inputs give byte-identical files.
"""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .plane import BoxRect


def _num(x: float) -> str:
    s = f"{x:.3f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


class Figure:
    """World box mapped onto a ``width`` pixel wide canvas (y axis up)."""

    def __init__(self, world: BoxRect, width: int = 640, title: str = ""):
        self.world = world
        self.width = width
        self.scale = width / world.width
        self.height = int(round(world.height * self.scale))
        self.title = title
        self.items: list[str] = []

    def _xy(self, z: complex) -> tuple[float, float]:
        return ((z.real - self.world.x_lo) * self.scale, (self.world.y_hi - z.imag) * self.scale)

    def rect(self, box: BoxRect, stroke="black", fill="none", width: float = 1.0, opacity: float = 1.0,
             min_px: float = 0.0):
        x0, y0 = self._xy(complex(box.x_lo, box.y_hi))
        w, h = box.width * self.scale, box.height * self.scale
        if w < min_px:
            x0 -= (min_px - w) / 2
            w = min_px
        if h < min_px:
            y0 -= (min_px - h) / 2
            h = min_px
        self.items.append(f'<rect x="{_num(x0)}" y="{_num(y0)}" width="{_num(w)}" height="{_num(h)}" '
                          f'stroke="{stroke}" fill="{fill}" stroke-width="{_num(width)}" opacity="{_num(opacity)}"/>')

    def polyline(self, z, stroke="black", width: float = 1.0, closed: bool = False, dash: str | None = None):
        pts = " ".join(f"{_num(x)},{_num(y)}" for x, y in (self._xy(complex(w)) for w in z))
        tag = "polygon" if closed else "polyline"
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self.items.append(f'<{tag} points="{pts}" stroke="{stroke}" fill="none" stroke-width="{_num(width)}"{extra}/>')

    def marker(self, z: complex, color="red", r: float = 4.0, label: str | None = None):
        x, y = self._xy(complex(z))
        self.items.append(f'<circle cx="{_num(x)}" cy="{_num(y)}" r="{_num(r)}" fill="{color}"/>')
        if label:
            self.text(z, label, dx=r + 2, color=color)

    def cross(self, z: complex, color="black", r: float = 5.0):
        x, y = self._xy(complex(z))
        self.items.append(f'<path d="M{_num(x - r)},{_num(y - r)}L{_num(x + r)},{_num(y + r)}'
                          f'M{_num(x - r)},{_num(y + r)}L{_num(x + r)},{_num(y - r)}" stroke="{color}" stroke-width="1.5"/>')

    def arrow(self, a: complex, b: complex, color="gray", width: float = 0.8, head: float = 3.0):
        x0, y0 = self._xy(complex(a))
        x1, y1 = self._xy(complex(b))
        dx, dy = x1 - x0, y1 - y0
        n = float(np.hypot(dx, dy))
        if n < 1e-9:
            return
        ux, uy = dx / n, dy / n
        hx, hy = x1 - head * ux, y1 - head * uy
        px, py = -uy * head / 2, ux * head / 2
        self.items.append(f'<path d="M{_num(x0)},{_num(y0)}L{_num(x1)},{_num(y1)}'
                          f'M{_num(hx + px)},{_num(hy + py)}L{_num(x1)},{_num(y1)}L{_num(hx - px)},{_num(hy - py)}" '
                          f'stroke="{color}" fill="none" stroke-width="{_num(width)}"/>')

    def text(self, z: complex, s: str, dx: float = 0.0, dy: float = 0.0, color="black", size: int = 11):
        x, y = self._xy(complex(z))
        self.items.append(f'<text x="{_num(x + dx)}" y="{_num(y + dy)}" font-family="monospace" '
                          f'font-size="{size}" fill="{color}">{escape(s)}</text>')

    def mask(self, region, color="black", opacity: float = 1.0):
        """Raster region as horizontal runs of cells, one rect per run."""
        m = region.mask
        d = region.delta
        fr = region.frame
        parts = []
        for i in range(m.shape[0]):
            row = m[i].astype(np.int8)
            edges = np.diff(np.concatenate([[0], row, [0]]))
            starts = np.nonzero(edges == 1)[0]
            stops = np.nonzero(edges == -1)[0]
            y_top = fr.y_lo + (i + 1) * d
            for a, b in zip(starts, stops):
                x0, y0 = self._xy(complex(fr.x_lo + a * d, y_top))
                parts.append(f'<rect x="{_num(x0)}" y="{_num(y0)}" width="{_num((b - a) * d * self.scale)}" '
                             f'height="{_num(d * self.scale)}"/>')
        if parts:
            self.items.append(f'<g fill="{color}" opacity="{_num(opacity)}" stroke="none">' + "".join(parts) + "</g>")

    def to_string(self) -> str:
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" height="{self.height}" '
                f'viewBox="0 0 {self.width} {self.height}">')
        body = [head, f'<rect x="0" y="0" width="{self.width}" height="{self.height}" fill="white"/>']
        if self.title:
            body.append(f'<title>{escape(self.title)}</title>')
        body.extend(self.items)
        body.append("</svg>")
        return "\n".join(body) + "\n"

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_string())
        return path
