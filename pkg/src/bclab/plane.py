"""Planar geometry shared by the rest of the package.

Points are carried two ways: as the small immutable :class:`Point2` at API
boundaries, and as complex numpy arrays (``x + iy``) wherever bulk evaluation
happens.  ``as_complex`` / ``Point2.from_complex`` convert between them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import InvalidCurve, InvalidParameter

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Point2:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise InvalidParameter(f"non-finite point ({self.x}, {self.y})")

    @classmethod
    def from_complex(cls, z: complex) -> "Point2":
        return cls(float(z.real), float(z.imag))

    def __complex__(self) -> complex:
        return complex(self.x, self.y)

    def __iter__(self):
        yield self.x
        yield self.y


def as_complex(p) -> complex:
    """Accept a Point2, a complex, or an (x, y) pair."""
    if isinstance(p, Point2):
        return complex(p.x, p.y)
    if isinstance(p, (complex, float, int, np.number)):
        return complex(p)
    x, y = p
    return complex(x, y)


@dataclass(frozen=True)
class PolarOffset:
    rho: float
    theta: float

    def __post_init__(self):
        if self.rho < 0 or not math.isfinite(self.rho):
            raise InvalidParameter(f"rho must be finite and >= 0, got {self.rho}")
        # normalize theta into [0, 2pi)
        t = math.fmod(self.theta, TWO_PI)
        if t < 0:
            t += TWO_PI
        if t >= TWO_PI:
            t = 0.0
        object.__setattr__(self, "theta", t)


def to_polar(center, p) -> PolarOffset:
    d = as_complex(p) - as_complex(center)
    if d == 0:
        return PolarOffset(0.0, 0.0)
    return PolarOffset(abs(d), math.atan2(d.imag, d.real))


def from_polar(center, o: PolarOffset) -> Point2:
    c = as_complex(center)
    return Point2(c.real + o.rho * math.cos(o.theta), c.imag + o.rho * math.sin(o.theta))


@dataclass(frozen=True)
class BoxRect:
    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float

    def __post_init__(self):
        if not (self.x_lo < self.x_hi and self.y_lo < self.y_hi):
            raise InvalidParameter(f"degenerate box {self}")

    @classmethod
    def from_corners(cls, lo: complex, hi: complex) -> "BoxRect":
        return cls(lo.real, hi.real, lo.imag, hi.imag)

    @property
    def lo(self) -> complex:
        return complex(self.x_lo, self.y_lo)

    @property
    def hi(self) -> complex:
        return complex(self.x_hi, self.y_hi)

    @property
    def center(self) -> complex:
        return complex(0.5 * (self.x_lo + self.x_hi), 0.5 * (self.y_lo + self.y_hi))

    @property
    def width(self) -> float:
        return self.x_hi - self.x_lo

    @property
    def height(self) -> float:
        return self.y_hi - self.y_lo

    @property
    def diameter(self) -> float:
        return math.hypot(self.width, self.height)

    def contains(self, p, closed: bool = False) -> bool:
        z = as_complex(p)
        if closed:
            return self.x_lo <= z.real <= self.x_hi and self.y_lo <= z.imag <= self.y_hi
        return self.x_lo < z.real < self.x_hi and self.y_lo < z.imag < self.y_hi

    def contains_array(self, z: np.ndarray, closed: bool = False) -> np.ndarray:
        x, y = z.real, z.imag
        if closed:
            return (x >= self.x_lo) & (x <= self.x_hi) & (y >= self.y_lo) & (y <= self.y_hi)
        return (x > self.x_lo) & (x < self.x_hi) & (y > self.y_lo) & (y < self.y_hi)

    def expanded(self, margin: float) -> "BoxRect":
        return BoxRect(self.x_lo - margin, self.x_hi + margin, self.y_lo - margin, self.y_hi + margin)

    def boundary_loop(self) -> "Polyline":
        """Counter-clockwise closed polyline along the box boundary."""
        return Polyline(
            (
                Point2(self.x_lo, self.y_lo),
                Point2(self.x_hi, self.y_lo),
                Point2(self.x_hi, self.y_hi),
                Point2(self.x_lo, self.y_hi),
            ),
            closed=True,
        )

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return (rng.uniform(self.x_lo, self.x_hi, n) + 1j * rng.uniform(self.y_lo, self.y_hi, n))


def _segments_cross(a: complex, b: complex, c: complex, d: complex) -> bool:
    """Closed-segment intersection test for [a,b] and [c,d]."""

    def orient(p, q, r):
        v = (q - p).conjugate() * (r - p)
        return v.imag

    def on_seg(p, q, r):
        return (
            min(p.real, q.real) - 1e-15 <= r.real <= max(p.real, q.real) + 1e-15
            and min(p.imag, q.imag) - 1e-15 <= r.imag <= max(p.imag, q.imag) + 1e-15
        )

    o1, o2 = orient(a, b, c), orient(a, b, d)
    o3, o4 = orient(c, d, a), orient(c, d, b)
    if ((o1 > 0 and o2 < 0) or (o1 < 0 and o2 > 0)) and ((o3 > 0 and o4 < 0) or (o3 < 0 and o4 > 0)):
        return True
    if o1 == 0 and on_seg(a, b, c):
        return True
    if o2 == 0 and on_seg(a, b, d):
        return True
    if o3 == 0 and on_seg(c, d, a):
        return True
    if o4 == 0 and on_seg(c, d, b):
        return True
    return False


@dataclass(frozen=True)
class Polyline:
    vertices: tuple
    closed: bool = False
    _z: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        verts = tuple(v if isinstance(v, Point2) else Point2(*v) for v in self.vertices)
        object.__setattr__(self, "vertices", verts)
        if len(verts) < 2:
            raise InvalidCurve("a polyline needs at least two vertices")
        z = np.array([complex(v) for v in verts])
        if np.any(z[1:] == z[:-1]):
            raise InvalidCurve("consecutive vertices must be distinct")
        z.setflags(write=False)
        object.__setattr__(self, "_z", z)

    @classmethod
    def from_complex(cls, z: Iterable[complex], closed: bool = False) -> "Polyline":
        return cls(tuple(Point2.from_complex(w) for w in z), closed=closed)

    @classmethod
    def segment(cls, a, b) -> "Polyline":
        return cls((Point2.from_complex(as_complex(a)), Point2.from_complex(as_complex(b))))

    @property
    def z(self) -> np.ndarray:
        """Vertices as a complex array; closed loops repeat the first vertex at the end."""
        if self.closed:
            return np.append(self._z, self._z[0])
        return self._z

    @property
    def length(self) -> float:
        return float(np.abs(np.diff(self.z)).sum())

    def is_simple(self) -> bool:
        z = self.z
        nseg = len(z) - 1
        for i in range(nseg):
            for j in range(i + 1, nseg):
                if j == i + 1 or (self.closed and i == 0 and j == nseg - 1):
                    # segments sharing a vertex may only meet there; reject fold-backs
                    if j == i + 1:
                        u, w = z[i] - z[i + 1], z[j + 1] - z[j]
                    else:
                        u, w = z[1] - z[0], z[j] - z[j + 1]
                    prod = u.conjugate() * w
                    if prod.imag == 0 and prod.real > 0:
                        return False
                    continue
                if _segments_cross(z[i], z[i + 1], z[j], z[j + 1]):
                    return False
        return True

    def point_at(self, t: float) -> complex:
        """Point at normalized arclength t in [0, 1]."""
        z = self.z
        seg = np.abs(np.diff(z))
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        s = min(max(t, 0.0), 1.0) * cum[-1]
        k = int(np.searchsorted(cum, s, side="right") - 1)
        k = min(k, len(seg) - 1)
        lam = (s - cum[k]) / seg[k]
        return complex(z[k] + lam * (z[k + 1] - z[k]))

    def subpath(self, t0: float, t1: float) -> "Polyline":
        """Restriction to the normalized arclength window [t0, t1]."""
        if not 0.0 <= t0 < t1 <= 1.0:
            raise InvalidParameter(f"bad arclength window ({t0}, {t1})")
        z = self.z
        seg = np.abs(np.diff(z))
        cum = np.concatenate([[0.0], np.cumsum(seg)]) / seg.sum()
        pts = [self.point_at(t0)]
        pts += [complex(w) for w, s in zip(z, cum) if t0 < s < t1]
        pts.append(self.point_at(t1))
        out = [pts[0]]
        for p in pts[1:]:
            if p != out[-1]:
                out.append(p)
        if len(out) < 2:
            raise InvalidParameter("arclength window too short")
        return Polyline.from_complex(out)

    def resample(self, n: int) -> np.ndarray:
        """n points evenly spaced in arclength (closed loops exclude the duplicate end)."""
        ts = np.linspace(0.0, 1.0, n, endpoint=not self.closed)
        return np.array([self.point_at(t) for t in ts])


def distance_to_polyline(p: np.ndarray, z: np.ndarray, flat_ends: bool = False) -> np.ndarray:
    """Distance from each point of ``p`` to the polyline with vertices ``z``.

    With ``flat_ends`` the two terminal segments are not capped: points whose
    projection falls beyond the first or last vertex get distance ``inf`` from
    that end, giving the product-chart shape [0,1] x (-eps, eps) at the ends.
    Interior vertices still act as round joints.
    """
    p = np.asarray(p, dtype=complex)
    best = np.full(p.shape, np.inf)
    nseg = len(z) - 1
    for k in range(nseg):
        a, b = z[k], z[k + 1]
        d = b - a
        t = ((p - a) * d.conjugate()).real / (abs(d) ** 2)
        if flat_ends:
            lo = 0.0 if k == 0 else -np.inf
            hi = 1.0 if k == nseg - 1 else np.inf
            inside = (t >= lo) & (t <= hi)
            tc = np.clip(t, 0.0, 1.0)
            dist = np.abs(p - (a + tc * d))
            # beyond a free end only the perpendicular band counts
            dist = np.where(inside, dist, np.inf)
        else:
            tc = np.clip(t, 0.0, 1.0)
            dist = np.abs(p - (a + tc * d))
        np.minimum(best, dist, out=best)
    if flat_ends:
        for k in range(1, nseg):
            np.minimum(best, np.abs(p - z[k]), out=best)
    return best


def tube(gamma: Polyline, eps: float, delta: float | None = None,
         t_range: tuple[float, float] = (0.0, 1.0), frame: BoxRect | None = None,
         caps: str = "flat"):
    """Rasterized eps-neighbourhood of a simple polyline.

    Args:
        gamma: simple open polyline.
        eps: half-width of the tube.
        delta: grid spacing, defaults to eps / 10.
        t_range: normalized arclength window; ``(0, t)`` gives the truncated
            tube V_t used by the maximal-disc construction.
        frame: computation window; defaults to the bounding box plus margin.
        caps: ``"flat"`` (product chart, default) or ``"round"`` (Minkowski
            sum with the eps-disc).

    Returns:
        CompactRegion of the cells whose centers lie within eps of the path.
    """
    from .region import CompactRegion

    if not eps > 0:
        raise InvalidParameter(f"eps must be positive, got {eps}")
    if caps not in ("flat", "round"):
        raise InvalidParameter(f"unknown cap style {caps!r}")
    if not gamma.is_simple():
        raise InvalidCurve("tube needs a simple path")
    delta = eps / 10.0 if delta is None else delta
    path = gamma if t_range == (0.0, 1.0) else gamma.subpath(*t_range)
    z = path.z
    if frame is None:
        m = eps + 3 * delta
        frame = BoxRect(z.real.min() - m, z.real.max() + m, z.imag.min() - m, z.imag.max() + m)
    flat = caps == "flat"
    return CompactRegion.from_predicate(
        lambda w: distance_to_polyline(w, z, flat_ends=flat) < eps, frame, delta)


@dataclass(frozen=True)
class Chart:
    """Orientation-preserving coordinate change with an explicit inverse.

    ``forward`` and ``inverse`` act on complex arrays; ``domain`` is a
    membership predicate on complex arrays.
    """

    forward: Callable[[np.ndarray], np.ndarray]
    inverse: Callable[[np.ndarray], np.ndarray]
    domain: Callable[[np.ndarray], np.ndarray]
    name: str = ""

    def roundtrip_residual(self, samples: np.ndarray) -> float:
        samples = np.asarray(samples, dtype=complex)
        samples = samples[self.domain(samples)]
        if samples.size == 0:
            return 0.0
        return float(np.max(np.abs(self.inverse(self.forward(samples)) - samples)))

    def orientation_sign(self, samples: np.ndarray, h: float = 1e-6) -> np.ndarray:
        """Sign of the finite-difference Jacobian determinant at each sample."""
        z = np.asarray(samples, dtype=complex)
        fx = (self.forward(z + h) - self.forward(z - h)) / (2 * h)
        fy = (self.forward(z + 1j * h) - self.forward(z - 1j * h)) / (2 * h)
        det = fx.real * fy.imag - fx.imag * fy.real
        return np.sign(det)


def disc_domain(center: complex, radius: float) -> Callable[[np.ndarray], np.ndarray]:
    return lambda z: np.abs(np.asarray(z) - center) < radius


def box_domain(box: BoxRect) -> Callable[[np.ndarray], np.ndarray]:
    return lambda z: box.contains_array(np.asarray(z))


def points_array(points: Sequence) -> np.ndarray:
    return np.array([as_complex(p) for p in points], dtype=complex)
