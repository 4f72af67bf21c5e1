"""Rasterized compact planar sets and their complement topology.

A :class:`CompactRegion` is a boolean grid over a frame.  Cell ``(i, j)`` has
center ``(x_lo + (j + 1/2) delta, y_lo + (i + 1/2) delta)``; row 0 is the
lowest y.  The outermost ring of cells is always false so that the complement
component touching the frame edge is the unbounded one.

Connectivity is fixed once: set cells are 8-connected, complement cells are
4-connected, so neither a digital curve nor its complement leaks through a
diagonal corner.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from .errors import EmptyRegion, InvalidParameter, PointInSet
from .plane import BoxRect, as_complex

EIGHT = np.ones((3, 3), dtype=bool)
FOUR = ndimage.generate_binary_structure(2, 1)


def _grid_shape(frame: BoxRect, delta: float) -> tuple[int, int]:
    nx = int(math.ceil((frame.x_hi - frame.x_lo) / delta - 1e-9))
    ny = int(math.ceil((frame.y_hi - frame.y_lo) / delta - 1e-9))
    return ny, nx


def snap_frame(frame: BoxRect, delta: float) -> BoxRect:
    """Stretch ``frame`` so both sides are whole multiples of ``delta``."""
    ny, nx = _grid_shape(frame, delta)
    return BoxRect(frame.x_lo, frame.x_lo + nx * delta, frame.y_lo, frame.y_lo + ny * delta)


@dataclass(frozen=True, eq=False)
class CompactRegion:
    frame: BoxRect
    delta: float
    mask: np.ndarray

    def __post_init__(self):
        if not self.delta > 0:
            raise InvalidParameter(f"resolution must be positive, got {self.delta}")
        mask = np.asarray(self.mask, dtype=bool)
        if mask.shape != _grid_shape(self.frame, self.delta):
            raise InvalidParameter(
                f"mask shape {mask.shape} does not match frame/delta {_grid_shape(self.frame, self.delta)}")
        if mask.shape[0] < 3 or mask.shape[1] < 3:
            raise InvalidParameter("frame must be at least 3 cells wide")
        if mask[0].any() or mask[-1].any() or mask[:, 0].any() or mask[:, -1].any():
            raise InvalidParameter("true cells on the frame border; enlarge the frame")
        mask = mask.copy()
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)

    # construction -------------------------------------------------------

    @classmethod
    def empty(cls, frame: BoxRect, delta: float) -> "CompactRegion":
        frame = snap_frame(frame, delta)
        return cls(frame, delta, np.zeros(_grid_shape(frame, delta), dtype=bool))

    @classmethod
    def from_mask(cls, mask: np.ndarray, frame: BoxRect, delta: float) -> "CompactRegion":
        """Wrap ``mask`` after clearing its border ring."""
        m = np.array(mask, dtype=bool)
        m[0] = m[-1] = False
        m[:, 0] = m[:, -1] = False
        return cls(snap_frame(frame, delta), delta, m)

    @classmethod
    def from_predicate(cls, pred: Callable[[np.ndarray], np.ndarray], frame: BoxRect,
                       delta: float) -> "CompactRegion":
        """Cells whose centers satisfy ``pred``; the border ring is cleared."""
        frame = snap_frame(frame, delta)
        return cls.from_mask(_eval_rows(pred, frame, delta), frame, delta)

    @classmethod
    def from_points(cls, points, frame: BoxRect, delta: float) -> "CompactRegion":
        """Cells hit by at least one point; points outside the frame are dropped."""
        frame = snap_frame(frame, delta)
        z = np.asarray(points, dtype=complex).ravel()
        ny, nx = _grid_shape(frame, delta)
        m = np.zeros((ny, nx), dtype=bool)
        j = np.floor((z.real - frame.x_lo) / delta).astype(np.int64)
        i = np.floor((z.imag - frame.y_lo) / delta).astype(np.int64)
        ok = (i >= 0) & (i < ny) & (j >= 0) & (j < nx)
        m[i[ok], j[ok]] = True
        return cls.from_mask(m, frame, delta)

    def like(self, mask: np.ndarray) -> "CompactRegion":
        return CompactRegion.from_mask(mask, self.frame, self.delta)

    # geometry -----------------------------------------------------------

    @property
    def shape(self) -> tuple[int, int]:
        return self.mask.shape

    @property
    def is_empty(self) -> bool:
        return not self.mask.any()

    @property
    def cell_count(self) -> int:
        return int(self.mask.sum())

    def centers(self) -> np.ndarray:
        return grid_centers(self.frame, self.delta)

    def points(self) -> np.ndarray:
        """Centers of the true cells."""
        i, j = np.nonzero(self.mask)
        return (self.frame.x_lo + (j + 0.5) * self.delta) + 1j * (self.frame.y_lo + (i + 0.5) * self.delta)

    def cell_of(self, p) -> tuple[int, int] | None:
        z = as_complex(p)
        j = int(math.floor((z.real - self.frame.x_lo) / self.delta))
        i = int(math.floor((z.imag - self.frame.y_lo) / self.delta))
        ny, nx = self.shape
        if 0 <= i < ny and 0 <= j < nx:
            return i, j
        return None

    def contains(self, p) -> bool:
        cell = self.cell_of(p)
        return cell is not None and bool(self.mask[cell])

    def contains_array(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        j = np.floor((z.real - self.frame.x_lo) / self.delta).astype(np.int64)
        i = np.floor((z.imag - self.frame.y_lo) / self.delta).astype(np.int64)
        ny, nx = self.shape
        ok = (i >= 0) & (i < ny) & (j >= 0) & (j < nx)
        out = np.zeros(z.shape, dtype=bool)
        out[ok] = self.mask[i[ok], j[ok]]
        return out

    def bbox(self) -> BoxRect:
        if self.is_empty:
            raise EmptyRegion("empty region has no bounding box")
        i, j = np.nonzero(self.mask)
        f, d = self.frame, self.delta
        return BoxRect(f.x_lo + j.min() * d, f.x_lo + (j.max() + 1) * d,
                       f.y_lo + i.min() * d, f.y_lo + (i.max() + 1) * d)

    # set algebra (same grid only) ------------------------------------------

    def _check_grid(self, other: "CompactRegion"):
        if other.frame != self.frame or other.delta != self.delta:
            raise InvalidParameter("regions live on different grids")

    def __or__(self, other):
        self._check_grid(other)
        return self.like(self.mask | other.mask)

    def __and__(self, other):
        self._check_grid(other)
        return self.like(self.mask & other.mask)

    def __sub__(self, other):
        self._check_grid(other)
        return self.like(self.mask & ~other.mask)

    def __le__(self, other):
        self._check_grid(other)
        return not (self.mask & ~other.mask).any()

    def __eq__(self, other):
        if not isinstance(other, CompactRegion):
            return NotImplemented
        return (self.frame == other.frame and self.delta == other.delta
                and bool(np.array_equal(self.mask, other.mask)))

    def __hash__(self):
        return hash((self.frame, self.delta, self.mask.tobytes()))

    def dilate(self, cells: int = 1) -> "CompactRegion":
        if cells <= 0:
            return self
        return self.like(ndimage.binary_dilation(self.mask, EIGHT, iterations=cells))

    def image(self, f: Callable[[np.ndarray], np.ndarray], supersample: int = 2) -> "CompactRegion":
        """Rasterized forward image ``f(self)`` on the same grid.

        Each true cell is probed at ``supersample**2`` interior points so that
        mild expansion does not leave holes.
        """
        pts = self.points()
        if pts.size == 0:
            return self
        k = supersample
        offs = ((np.arange(k) + 0.5) / k - 0.5) * self.delta
        ox, oy = np.meshgrid(offs, offs)
        probe = (pts[:, None] + (ox + 1j * oy).ravel()[None, :]).ravel()
        return CompactRegion.from_points(f(probe), self.frame, self.delta)

    def preimage(self, f: Callable[[np.ndarray], np.ndarray],
                 where: "CompactRegion | None" = None) -> "CompactRegion":
        """Cells whose centers are mapped by ``f`` into this region."""
        mask = _eval_rows(lambda z: self.contains_array(f(z)), self.frame, self.delta)
        if where is not None:
            self._check_grid(where)
            mask &= where.mask
        return self.like(mask)


def _eval_rows(pred, frame: BoxRect, delta: float, chunk: int = 1 << 21) -> np.ndarray:
    """Boolean predicate on the cell centers, evaluated a block of rows at a time."""
    ny, nx = _grid_shape(frame, delta)
    x = frame.x_lo + (np.arange(nx) + 0.5) * delta
    out = np.empty((ny, nx), dtype=bool)
    step = max(1, chunk // nx)
    for i0 in range(0, ny, step):
        y = frame.y_lo + (np.arange(i0, min(ny, i0 + step)) + 0.5) * delta
        out[i0:i0 + y.size] = np.asarray(pred(x[None, :] + 1j * y[:, None]), dtype=bool)
    return out


def grid_centers(frame: BoxRect, delta: float) -> np.ndarray:
    ny, nx = _grid_shape(frame, delta)
    x = frame.x_lo + (np.arange(nx) + 0.5) * delta
    y = frame.y_lo + (np.arange(ny) + 0.5) * delta
    return x[None, :] + 1j * y[:, None]


@dataclass(frozen=True, eq=False)
class ComponentLabeling:
    """Labels of complement cells (0 on set cells) and the unbounded label."""

    labels: np.ndarray
    count: int
    unbounded_id: int

    def label_at(self, region: CompactRegion, p) -> int:
        cell = region.cell_of(p)
        if cell is None:
            return self.unbounded_id
        return int(self.labels[cell])

    @property
    def bounded_ids(self) -> list[int]:
        return [k for k in range(1, self.count + 1) if k != self.unbounded_id]


def components_of_complement(K: CompactRegion) -> ComponentLabeling:
    labels, n = ndimage.label(~K.mask, structure=FOUR)
    # border ring is all complement, hence a single component
    return ComponentLabeling(labels, int(n), int(labels[0, 0]))


def set_components(K: CompactRegion) -> tuple[np.ndarray, int]:
    """8-connected labeling of the set cells."""
    labels, n = ndimage.label(K.mask, structure=EIGHT)
    return labels, int(n)


def is_connected(K: CompactRegion) -> bool:
    return set_components(K)[1] == 1


def is_disc(K: CompactRegion) -> bool:
    """Nonempty, connected, and without holes: the raster analogue of a disc."""
    return is_connected(K) and components_of_complement(K).count == 1


def separates(K: CompactRegion, p, q) -> bool:
    """True iff p and q lie in different components of the complement of K."""
    for pt in (p, q):
        if K.contains(pt):
            raise PointInSet(f"point {as_complex(pt)} lies in the region")
    lab = components_of_complement(K)
    return lab.label_at(K, p) != lab.label_at(K, q)


def fill(K: CompactRegion) -> CompactRegion:
    """K together with every bounded complement component."""
    lab = components_of_complement(K)
    return K.like(lab.labels != lab.unbounded_id)


def distance(p, K: CompactRegion) -> float:
    """Euclidean distance from p to the nearest true-cell center (0 inside K)."""
    if K.is_empty:
        raise EmptyRegion("distance to an empty region")
    if K.contains(p):
        return 0.0
    pts = K.points()
    tree = cKDTree(np.column_stack([pts.real, pts.imag]))
    z = as_complex(p)
    d, _ = tree.query([z.real, z.imag])
    return float(d)


def region_distance(A: CompactRegion, B: CompactRegion) -> float:
    """Minimum center-to-center distance between two nonempty regions."""
    if A.is_empty or B.is_empty:
        raise EmptyRegion("distance between empty regions")
    if A.frame == B.frame and A.delta == B.delta and (A.mask & B.mask).any():
        return 0.0
    # the nearest pair of disjoint sets is realized by boundary cells
    pa, pb = _rim(A), _rim(B)
    tree = cKDTree(np.column_stack([pb.real, pb.imag]))
    d, _ = tree.query(np.column_stack([pa.real, pa.imag]))
    return float(d.min())


def _rim(K: CompactRegion) -> np.ndarray:
    inner = ndimage.binary_erosion(K.mask, FOUR)
    return K.like(K.mask & ~inner).points()


def hausdorff(A: CompactRegion, B: CompactRegion) -> float:
    """Hausdorff distance between the true-cell centers of A and B."""
    if A.is_empty and B.is_empty:
        return 0.0
    if A.is_empty or B.is_empty:
        return math.inf
    pa, pb = A.points(), B.points()
    xa = np.column_stack([pa.real, pa.imag])
    xb = np.column_stack([pb.real, pb.imag])
    dab, _ = cKDTree(xb).query(xa)
    dba, _ = cKDTree(xa).query(xb)
    return float(max(dab.max(), dba.max()))


# PBM import/export ----------------------------------------------------------

def write_pbm(K: CompactRegion, path) -> tuple[Path, Path]:
    """Write ``K`` as plain PBM (P1) plus a ``.hdr`` sidecar with frame and delta.

    The first PBM row is the top of the frame (largest y).  Sidecar numbers are
    written as exact decimal expansions of the binary floats.
    """
    path = Path(path)
    ny, nx = K.shape
    rows = ["P1", f"{nx} {ny}"]
    for row in K.mask[::-1]:
        bits = "".join("1" if b else "0" for b in row)
        rows.extend(bits[k:k + 70] for k in range(0, len(bits), 70))
    path.write_text("\n".join(rows) + "\n")
    hdr = path.with_suffix(".hdr")
    f = K.frame
    hdr.write_text(
        "".join(f"{name} = {Decimal(v)}\n" for name, v in
                (("x_lo", f.x_lo), ("x_hi", f.x_hi), ("y_lo", f.y_lo), ("y_hi", f.y_hi), ("delta", K.delta))))
    return path, hdr


def read_pbm(path) -> CompactRegion:
    path = Path(path)
    tokens = []
    for line in path.read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            tokens.append(line)
    if not tokens or tokens[0] != "P1":
        raise InvalidParameter(f"{path} is not a plain PBM file")
    nx, ny = (int(t) for t in tokens[1].split())
    bits = "".join("".join(t.split()) for t in tokens[2:])
    if len(bits) != nx * ny:
        raise InvalidParameter(f"{path}: expected {nx * ny} pixels, found {len(bits)}")
    mask = (np.frombuffer(bits.encode(), dtype=np.uint8) == ord("1")).reshape(ny, nx)[::-1]
    meta = {}
    for line in path.with_suffix(".hdr").read_text().splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            meta[k.strip()] = float(Decimal(v.strip()))
    frame = BoxRect(meta["x_lo"], meta["x_hi"], meta["y_lo"], meta["y_hi"])
    return CompactRegion(frame, meta["delta"], mask)


# convenience shapes ----------------------------------------------------------

def circle_region(center, radius: float, frame: BoxRect, delta: float) -> CompactRegion:
    """Digital circle: cells whose center lies within delta of the circle.

    The half-width ``delta`` keeps the 8-connected ring closed, so its
    4-connected complement splits into inside and outside.
    """
    c = as_complex(center)
    return CompactRegion.from_predicate(lambda z: np.abs(np.abs(z - c) - radius) <= delta, frame, delta)


def disc_region(center, radius: float, frame: BoxRect, delta: float) -> CompactRegion:
    c = as_complex(center)
    return CompactRegion.from_predicate(lambda z: np.abs(z - c) <= radius, frame, delta)


def annulus_region(center, r_in: float, r_out: float, frame: BoxRect, delta: float) -> CompactRegion:
    c = as_complex(center)
    return CompactRegion.from_predicate(
        lambda z: (np.abs(z - c) >= r_in) & (np.abs(z - c) <= r_out), frame, delta)


def box_region(box: BoxRect, frame: BoxRect, delta: float, closed: bool = False) -> CompactRegion:
    return CompactRegion.from_predicate(lambda z: box.contains_array(z, closed=closed), frame, delta)
