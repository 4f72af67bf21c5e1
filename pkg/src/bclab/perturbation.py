"""Compactly supported perturbation that leaves a single fixed point.

Everything lives in the normalized coordinates: the support is the rectangle
V = (0,10) x (-1,1), the critical point c = (1,0) sits in the left square
U0 = (0,2) x (-1,1) and its image f(c) = (9,0) in the right square
fU0 = (8,10) x (-1,1).  The perturbation is ``h = h3 o h2 o h1`` where

* ``h1`` straightens the model map ray by ray on fU0,
* ``h2`` squeezes fU0 vertically towards the axis y = 0,
* ``h3`` slides V horizontally, preserving horizontals and sending 9 to 1.

All three are the identity off their (open) supports, so ``h`` equals the
identity exactly on the boundary of V and outside it.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import ndimage, optimize

from .errors import (DegenerateTube, FixedPointOnPath, InvalidParameter, InvalidPath,
                     PreconditionFailed, ResolutionTooCoarse)
from .fixedpoints import CertificateList, find_fixed_points
from .maps import BranchedCover, NormalizedModelMap, PlaneMap, _corners, _sqnorm
from .plane import BoxRect, Point2, Polyline, distance_to_polyline
from .region import FOUR, CompactRegion, is_disc, region_distance

SQRT2 = math.sqrt(2.0)


def _open_box(box: BoxRect) -> Callable[[np.ndarray], np.ndarray]:
    def pred(z):
        z = np.asarray(z, dtype=complex)
        return (box.x_lo < z.real) & (z.real < box.x_hi) & (box.y_lo < z.imag) & (z.imag < box.y_hi)
    return pred


@dataclass(frozen=True)
class NormalizedModel:
    """The normalized picture around the critical point.

    ``exponent`` selects the radial profile of the model map (1 gives the
    ray-affine map, for which ``h1`` is the identity).
    """

    exponent: float = 1.0
    V: BoxRect = BoxRect(0.0, 10.0, -1.0, 1.0)
    U0: BoxRect = BoxRect(0.0, 2.0, -1.0, 1.0)
    fU0: BoxRect = BoxRect(8.0, 10.0, -1.0, 1.0)
    c: Point2 = Point2(1.0, 0.0)
    fc: Point2 = Point2(9.0, 0.0)

    @cached_property
    def f(self) -> NormalizedModelMap:
        return NormalizedModelMap(self.exponent)

    @property
    def gamma_prime(self) -> Polyline:
        return Polyline.segment(self.c, self.fc)

    @cached_property
    def u_halfwidth(self) -> float:
        """Half-width a of the maximal square U about c: a + a**p = 8, so that
        U and f(U) (half-width a**p about f(c)) touch on the line x = 1 + a."""
        p = self.exponent
        if p == 1.0:
            return 4.0
        return optimize.brentq(lambda a: a + a ** p - 8.0, 0.0, 8.0, xtol=1e-15)

    @property
    def U(self) -> BoxRect:
        a = self.u_halfwidth
        return BoxRect(1.0 - a, 1.0 + a, -a, a)

    @property
    def fU(self) -> BoxRect:
        b = self.u_halfwidth ** self.exponent
        return BoxRect(9.0 - b, 9.0 + b, -b, b)

    @property
    def touching_point(self) -> Point2:
        return Point2(1.0 + self.u_halfwidth, 0.0)

    def disc_data(self) -> "DiscData":
        return DiscData(self.f, complex(self.c), complex(self.fc), _open_box(self.U0), _open_box(self.fU0),
                        _open_box(self.U), _open_box(self.fU), self.gamma_prime,
                        BoxRect(-0.5, 10.5, -1.5, 1.5))

    def check(self, n: int = 10_000, seed: int = 0) -> dict[str, bool]:
        """The seven normalization properties, the last three by sampling."""
        rng = np.random.default_rng(seed)
        f = self.f
        out = {
            "V_rectangle": self.V == BoxRect(0.0, 10.0, -1.0, 1.0),
            "U0_fU0_squares": self.U0 == BoxRect(0.0, 2.0, -1.0, 1.0) and self.fU0 == BoxRect(8.0, 10.0, -1.0, 1.0),
            "critical_points": complex(self.c) == 1 and complex(self.fc) == 9
                               and complex(f(np.array([complex(self.c)]))[0]) == complex(self.fc),
            "gamma_prime_segment": np.allclose(self.gamma_prime.z, [1, 9]),
        }
        z = self.U0.sample(n, rng)
        v = z - complex(self.c)
        w = f(z) - complex(self.fc)
        # angle doubling: arg(f(z) - f(c)) = 2 arg(z - c), with the image inside f(U0)
        dbl = np.abs(np.angle(w / (v / np.abs(v)) ** 2)) < 1e-9
        out["angle_doubling"] = bool(dbl.all() and _open_box(self.fU0)(f(z)).all())
        inU, inFU, inV = _open_box(self.U), _open_box(self.fU), _open_box(self.V)
        z = self.V.sample(n, rng)
        s = rng.random(n)
        a = z[inU(z) & inV(z)]
        left = s[:a.size] * a.real + 1j * a.imag
        out["U_left_monotone"] = bool((inU(left) & inV(left)).all())
        b = z[inFU(z) & inV(z)]
        right = (b.real + s[:b.size] * (10.0 - b.real)) + 1j * b.imag
        right = right[right.real < 10.0]
        out["fU_right_monotone"] = bool((inFU(right) & inV(right)).all())
        return out


@dataclass(frozen=True)
class DiscData:
    """Inputs of the support construction as vectorized membership tests."""

    f: BranchedCover
    c: complex
    fc: complex
    in_U0: Callable
    in_fU0: Callable
    in_U: Callable
    in_fU: Callable
    gamma: Polyline
    frame: BoxRect


@dataclass(frozen=True)
class TubeParams:
    eps1: float
    eps2: float
    eps3: float
    eps0: float = field(default=-1.0)

    def __post_init__(self):
        for name in ("eps1", "eps2", "eps3"):
            if not getattr(self, name) > 0:
                raise InvalidParameter(f"{name} must be positive")
        m = min(self.eps1, self.eps2, self.eps3)
        if self.eps0 == -1.0:
            object.__setattr__(self, "eps0", m)
        elif self.eps0 != m:
            raise InvalidParameter("eps0 must be the minimum of eps1, eps2, eps3")


# the three factors ---------------------------------------------------------------

def _h22_core(y):
    """Vertical squeeze on fU0: y/4 near the axis, steeper near |y| = 1."""
    ay = np.abs(y)
    return np.where(ay <= 0.5, y / 4.0, (7.0 * y - 3.0 * np.sign(y)) / 4.0)


def _h22_blend_weight(x):
    """Weight of the identity in the x-blend of h2 (0 in the central zone)."""
    return np.where(x > 9.9, 10.0 * x - 99.0, np.where(x < 8.1, 81.0 - 10.0 * x, 0.0))


def _h31(x, a):
    return np.where(x <= 9.0, a * x + (1.0 - a) * x / 9.0, a * x + (1.0 - a) * (9.0 * x - 80.0))


class PerturbationMap:
    """``h = h3 o h2 o h1`` for a normalized model, with inverses and bounds."""

    def __init__(self, model: NormalizedModel | None = None):
        self.model = model or NormalizedModel()
        self.p = self.model.exponent
        self.fc = complex(self.model.fc)
        self.support = self.model.V
        self._in_fU0 = _open_box(self.model.fU0)
        self._in_V = _open_box(self.model.V)

    # h1 --------------------------------------------------------------------

    def h1(self, z):
        z = np.asarray(z, dtype=complex)
        if self.p == 1.0:
            return z.copy()
        u = z - self.fc
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self.fc + u * _sqnorm(u) ** (1.0 / self.p - 1.0)
        return np.where(self._in_fU0(z) & (u != 0), out, z)

    def h1_inv(self, z):
        z = np.asarray(z, dtype=complex)
        if self.p == 1.0:
            return z.copy()
        u = z - self.fc
        out = self.fc + u * _sqnorm(u) ** (self.p - 1.0)
        return np.where(self._in_fU0(z), out, z)

    @staticmethod
    def h11(theta):
        """Radial factor of h1 o f on the ray of angle theta out of c: the
        ratio R(2 theta) / L(theta) of boundary distances of the two squares."""
        theta = np.asarray(theta, dtype=float)
        e1 = np.exp(1j * theta)
        e2 = e1 * e1
        return _sqnorm(e1) / _sqnorm(e2)

    def radial_profile(self, n: int = 360, measured: bool = True):
        """(theta, factor) over n rays; ``measured`` reads the factor off
        h1 o f at half the ray length instead of the closed form."""
        theta = np.arange(n) * (2 * math.pi / n)
        if not measured:
            return theta, self.h11(theta)
        e = np.exp(1j * theta)
        L = 1.0 / _sqnorm(e)
        rho = 0.5 * L
        c = complex(self.model.c)
        img = self.h1(self.model.f(c + rho * e)) - self.fc
        return theta, np.abs(img) / rho

    # h2 --------------------------------------------------------------------

    def h2(self, z):
        z = np.asarray(z, dtype=complex)
        x, y = z.real, z.imag
        w = _h22_blend_weight(x)
        y2 = w * y + (1.0 - w) * _h22_core(y)
        return np.where(self._in_fU0(z), x + 1j * y2, z)

    def h2_inv(self, z):
        z = np.asarray(z, dtype=complex)
        x, yp = z.real, z.imag
        w = _h22_blend_weight(x)
        s = np.sign(yp)
        ay = np.abs(yp)
        brk = w / 2.0 + (1.0 - w) / 8.0
        inner = yp / (w + (1.0 - w) / 4.0)
        outer = s * (ay + 3.0 * (1.0 - w) / 4.0) / (w + 7.0 * (1.0 - w) / 4.0)
        y = np.where(ay <= brk, inner, outer)
        return np.where(self._in_fU0(z), x + 1j * y, z)

    # h3 --------------------------------------------------------------------

    def h3(self, z):
        z = np.asarray(z, dtype=complex)
        a = np.abs(z.imag)
        return np.where(self._in_V(z), _h31(z.real, a) + 1j * z.imag, z)

    def h3_inv(self, z):
        z = np.asarray(z, dtype=complex)
        xp, a = z.real, np.abs(z.imag)
        left = xp / (a + (1.0 - a) / 9.0)
        right = (xp + 80.0 * (1.0 - a)) / (a + 9.0 * (1.0 - a))
        x = np.where(xp <= 1.0 + 8.0 * a, left, right)
        return np.where(self._in_V(z), x + 1j * z.imag, z)

    # composition -------------------------------------------------------------

    def __call__(self, z):
        return self.h3(self.h2(self.h1(z)))

    def inverse(self, z):
        return self.h1_inv(self.h2_inv(self.h3_inv(z)))

    def perturbed(self, f=None) -> "PerturbedMap":
        return PerturbedMap(self, f or self.model.f)

    def jacobian_det(self, z, h: float = 1e-7, which: str = "h"):
        F = {"h": self, "h1": self.h1, "h2": self.h2, "h3": self.h3}[which]
        z = np.asarray(z, dtype=complex)
        fx = (F(z + h) - F(z - h)) / (2 * h)
        fy = (F(z + 1j * h) - F(z - 1j * h)) / (2 * h)
        return fx.real * fy.imag - fx.imag * fy.real

    # seams -----------------------------------------------------------------

    def seam_residuals(self, n: int = 1000, seed: int = 0) -> dict[str, float]:
        """Largest disagreement between the two formulas meeting at each seam."""
        rng = np.random.default_rng(seed)
        y = rng.uniform(-1, 1, n)
        x = rng.uniform(8.0, 10.0, n)
        res = {}
        half = np.where(rng.random(n) < 0.5, -0.5, 0.5)
        # |y| = 1/2 inside the core, at every x of the central zone
        res["h2_y_half"] = float(np.abs(half / 4.0 - (7.0 * half - 3.0 * np.sign(half)) / 4.0).max())
        core = _h22_core(y)
        xl, xr = 81.0 / 10.0, 99.0 / 10.0
        res["h2_x_81/10"] = float(np.abs(((81.0 - 10.0 * xl) * y + (10.0 * xl - 80.0) * core) - core).max())
        res["h2_x_99/10"] = float(np.abs(((10.0 * xr - 99.0) * y + (100.0 - 10.0 * xr) * core) - core).max())
        # h2 meets the identity on the vertical sides of fU0
        res["h2_x_8"] = float(np.abs(((81.0 - 80.0) * y + (80.0 - 80.0) * core) - y).max())
        res["h2_x_10"] = float(np.abs(((100.0 - 99.0) * y + (100.0 - 100.0) * core) - y).max())
        res["h2_y_1"] = float(abs(_h22_core(np.array([1.0, -1.0])) - [1.0, -1.0]).max())
        a = np.abs(rng.uniform(-1, 1, n))
        res["h3_x_9"] = float(np.abs((a * 9.0 + (1.0 - a) * 9.0 / 9.0) - (a * 9.0 + (1.0 - a) * (81.0 - 80.0))).max())
        xx = rng.uniform(0, 10, n)
        res["h3_y_1"] = float(np.abs(_h31(xx, np.ones(n)) - xx).max())
        res["h3_x_10"] = float(np.abs(_h31(np.full(n, 10.0), a) - 10.0).max())
        res["h3_x_0"] = float(np.abs(_h31(np.zeros(n), a)).max())
        return res

    # Lipschitz bounds ---------------------------------------------------------

    def lipschitz_h32_on_boxes(self, lo, hi):
        """Bound for the Lipschitz constant of h3 o h2 on boxes.

        Both maps are continuous and piecewise smooth, so the sup of the
        Jacobian norm over the pieces meeting the box bounds the constant;
        Frobenius norms of entrywise bounds are used.
        """
        lo = np.asarray(lo, dtype=complex)
        hi = np.asarray(hi, dtype=complex)
        x0, x1 = lo.real, hi.real
        y0, y1 = lo.imag, hi.imag
        ymax = np.minimum(np.maximum(np.abs(y0), np.abs(y1)), 1.0)

        # h2: rows (1, 0) and (dx, dy)
        hits2 = (x1 > 8.0) & (x0 < 10.0) & (y1 > -1.0) & (y0 < 1.0)
        blend = (x0 < 8.1) | (x1 > 9.9)
        dx2 = np.where(blend, 3.75, 0.0)
        steep = ymax > 0.5
        dy2 = np.where(steep, 1.75, np.where(blend, 1.0, 0.25))
        L2 = np.where(hits2, np.sqrt(1.0 + dx2 ** 2 + dy2 ** 2), 1.0)

        # h3: rows (dx, dy) and (0, 1); h2 keeps x and does not increase |y|
        hits3 = (x1 > 0.0) & (x0 < 10.0) & (y1 > -1.0) & (y0 < 1.0)
        xa = np.clip(x0, 0.0, 10.0)
        xb = np.clip(x1, 0.0, 10.0)
        left = xa <= 9.0
        right = xb > 9.0
        dxl = ymax + (1.0 - ymax) / 9.0
        dyl = 8.0 * np.minimum(xb, 9.0) / 9.0
        dxr = 9.0  # h2 may push |y| to zero, where the slope in x is 9
        dyr = np.maximum(np.abs(80.0 - 8.0 * np.maximum(xa, 9.0)), np.abs(80.0 - 8.0 * xb))
        nl = np.where(left, np.sqrt(dxl ** 2 + dyl ** 2 + 1.0), 0.0)
        nr = np.where(right, np.sqrt(dxr ** 2 + dyr ** 2 + 1.0), 0.0)
        L3 = np.where(hits3, np.maximum(np.maximum(nl, nr), 1.0), 1.0)
        return L3 * L2


class PerturbedMap(PlaneMap):
    """``g = h o f``, with box Lipschitz bounds for certified search.

    The critical point is fixed and is its own only preimage.
    """

    name = "perturbed_model"
    degree = 2

    def __init__(self, h: PerturbationMap, f: NormalizedModelMap):
        self.h = h
        self.f = f
        self._unit = NormalizedModelMap(1.0)
        self._U0 = h.model.U0
        self.critical_point = complex(h.model.c)
        self.critical_value = complex(self(np.array([self.critical_point]))[0])

    def __call__(self, z):
        return self.h(self.f(z))

    def preimages_array(self, q):
        return self.f.preimages_array(self.h.inverse(np.asarray(q, dtype=complex)))

    def describe(self):
        return {"family": self.name, "exponent": self.f.exponent}

    def lipschitz_on_boxes(self, lo, hi):
        lo = np.asarray(lo, dtype=complex)
        hi = np.asarray(hi, dtype=complex)
        # h1 o f is the ray-affine unit model on U0 and f itself elsewhere
        Lf = self.f.lipschitz_on_boxes(lo, hi)
        if self.f.exponent != 1.0:
            U0 = self._U0
            meets = (hi.real > U0.x_lo) & (lo.real < U0.x_hi) & (hi.imag > U0.y_lo) & (lo.imag < U0.y_hi)
            inside = (lo.real >= U0.x_lo) & (hi.real <= U0.x_hi) & (lo.imag >= U0.y_lo) & (hi.imag <= U0.y_hi)
            Lf = np.where(inside, self._unit.unit_lipschitz, np.where(meets, np.maximum(Lf, self._unit.unit_lipschitz), Lf))
        # enclosure of h1 f(B): Lipschitz disc around the center image
        m = 0.5 * (lo + hi)
        hm = self.h.h1(self.f(m))
        r = Lf * np.abs(hi - lo) / 2
        # the square image of the sup-norm ball around c gives a second box
        # ...and the sup-norm ball: ||h1 f(z) - f(c)|| is ||z - c|| on U0, its p-th power off U0
        s = _sqnorm(_corners(lo, hi) - complex(self.h.model.c)).max(axis=0)
        s = np.maximum(s, s ** self.f.exponent)
        fc = self.h.fc
        blo = np.maximum(hm.real - r, fc.real - s) + 1j * np.maximum(hm.imag - r, fc.imag - s)
        bhi = np.minimum(hm.real + r, fc.real + s) + 1j * np.minimum(hm.imag + r, fc.imag + s)
        return self.h.lipschitz_h32_on_boxes(blo, bhi) * Lf


# support construction ------------------------------------------------------------

def _chunks(z: np.ndarray, size: int = 1 << 20):
    for k in range(0, z.size, size):
        yield z[k:k + size]


def _true_points(mask: np.ndarray, frame: BoxRect, delta: float, size: int = 1 << 20):
    """Centers of the true cells, a block of rows at a time."""
    ny, nx = mask.shape
    x = frame.x_lo + (np.arange(nx) + 0.5) * delta
    step = max(1, size // nx)
    for i0 in range(0, ny, step):
        blk = mask[i0:i0 + step]
        i, j = np.nonzero(blk)
        if i.size:
            yield x[j] + 1j * (frame.y_lo + (i0 + i + 0.5) * delta)


def _frame_around(boxes: list[BoxRect], margin: float) -> BoxRect:
    return BoxRect(min(b.x_lo for b in boxes) - margin, max(b.x_hi for b in boxes) + margin,
                   min(b.y_lo for b in boxes) - margin, max(b.y_hi for b in boxes) + margin)


def _path_box(g: Polyline) -> BoxRect:
    z = g.z
    return BoxRect(z.real.min(), z.real.max() + 1e-12, z.imag.min(), z.imag.max() + 1e-12)


def _k_distance(K: CompactRegion | None, gamma: Polyline) -> float:
    if K is None or K.is_empty:
        return math.inf
    return float(distance_to_polyline(K.points(), gamma.z).min())


@dataclass
class MaximalDisc:
    U: CompactRegion
    fU: CompactRegion
    t0: float
    eps: float
    trace: list
    gap: float

    @property
    def interiors_disjoint(self) -> bool:
        return not (self.U.mask & self.fU.mask).any()


def maximal_disc_U(f: BranchedCover, K: CompactRegion | None, U0, gamma: Polyline, delta: float = 1e-2,
                   eps: float | None = None, fU0=None, iterations: int = 20) -> MaximalDisc:
    """Largest preimage disc about the critical point that stays off its image.

    Grows ``W_t = f(U0) + tube(gamma[0, t], eps)`` along the path ``gamma``
    from f(c) to c and bisects (``iterations`` steps) for the last t where
    ``W_t`` and ``f^-1(W_t)`` are disjoint at grid resolution ``delta``.
    Returns U = f^-1(W_t0) and f(U) = W_t0 rasterized on a common grid.
    """
    c = complex(f.critical_point)
    if isinstance(U0, BoxRect):
        u0_box = U0
        in_U0 = _open_box(U0)
    else:
        in_U0 = U0
        u0_box = None
    if fU0 is None:
        if u0_box is None:
            raise InvalidParameter("pass fU0 when U0 is not a box")
        fU0 = _open_box(BoxRect(*_image_bbox(f, u0_box)))
    elif isinstance(fU0, BoxRect):
        fU0 = _open_box(fU0)
    if K is not None and not K.is_empty:
        if in_U0(K.points()).any():
            raise PreconditionFailed("U0 meets K")
    dK = _k_distance(K, gamma)
    if dK <= delta:
        raise InvalidPath("the path meets K")
    if abs(gamma.z[0] - complex(f.critical_value)) > 1e-12 or abs(gamma.z[-1] - c) > 1e-12:
        raise InvalidPath("the path must run from f(c) to c")
    eps = min(0.5, dK / 2) if eps is None else min(eps, dK / 2)

    def member(t):
        sub = gamma.subpath(0.0, t).z if t > 0 else None

        def pred(w):
            inside = fU0(w)
            if sub is not None:
                inside = inside | (distance_to_polyline(w, sub, flat_ends=True) < eps)
            return inside
        return pred

    gbox = _path_box(gamma)
    probe_frame = _frame_around([gbox] + ([u0_box] if u0_box else []) + [BoxRect(*_fu0_bbox(f, fU0, gbox))],
                                eps + 3 * delta)

    def disjoint(t) -> bool:
        pred = member(t)
        W = CompactRegion.from_predicate(pred, probe_frame, delta)
        for pts in _true_points(W.mask, W.frame, delta):
            if pred(f(pts)).any():
                return False
        return True

    trace = []
    if not disjoint(0.0):
        raise DegenerateTube("f(U0) already meets its preimage")
    lo, hi = 0.0, 1.0
    trace.append((0.0, True))
    if disjoint(1.0):
        lo = 1.0
        trace.append((1.0, True))
    else:
        trace.append((1.0, False))
        for _ in range(iterations):
            mid = 0.5 * (lo + hi)
            ok = disjoint(mid)
            trace.append((mid, ok))
            if ok:
                lo = mid
            else:
                hi = mid
    if lo == 0.0:
        raise DegenerateTube("the tube collides immediately (t0 = 0)")
    t0 = lo
    pred = member(t0)
    # frame covering W_t0 and its preimage
    W = CompactRegion.from_predicate(pred, probe_frame, delta)
    pts = W.points()
    pre = f.preimages_array(pts[:: max(1, pts.size // 200_000)]).ravel()
    bx = BoxRect(min(pre.real.min(), probe_frame.x_lo), max(pre.real.max(), probe_frame.x_hi),
                 min(pre.imag.min(), probe_frame.y_lo), max(pre.imag.max(), probe_frame.y_hi))
    frame = bx.expanded(10 * delta)
    fU_reg = CompactRegion.from_predicate(pred, frame, delta)
    U_reg = CompactRegion.from_predicate(lambda z: pred(f(z)), frame, delta)
    return MaximalDisc(U_reg, fU_reg, t0, eps, trace, _signed_gap(U_reg, fU_reg))


def _image_bbox(f, box: BoxRect, n: int = 200):
    xs = np.linspace(box.x_lo, box.x_hi, n)
    ys = np.linspace(box.y_lo, box.y_hi, n)
    w = f(xs[None, :] + 1j * ys[:, None]).ravel()
    return w.real.min(), w.real.max(), w.imag.min(), w.imag.max()


def _fu0_bbox(f, fU0, gbox: BoxRect, n: int = 400):
    """Bounding box of the f(U0) predicate, searched around the critical value."""
    fc = complex(f.critical_value)
    r = 1.0
    while r < 1e6:
        xs = np.linspace(fc.real - r, fc.real + r, n)
        ys = np.linspace(fc.imag - r, fc.imag + r, n)
        z = xs[None, :] + 1j * ys[:, None]
        m = fU0(z)
        edge = m[0].any() or m[-1].any() or m[:, 0].any() or m[:, -1].any()
        if not edge:
            w = z[m]
            if w.size == 0:
                return fc.real - 1e-9, fc.real + 1e-9, fc.imag - 1e-9, fc.imag + 1e-9
            h = 2 * r / (n - 1)
            return w.real.min() - h, w.real.max() + h, w.imag.min() - h, w.imag.max() + h
        r *= 2
    raise InvalidParameter("f(U0) is unbounded")


def _signed_gap(A: CompactRegion, B: CompactRegion) -> float:
    """Distance between two rasters, negative by penetration depth if they overlap."""
    both = A.mask & B.mask
    if both.any():
        depth = ndimage.distance_transform_cdt(A.mask, metric="taxicab")
        return -float(depth[both].max()) * A.delta
    return region_distance(A, B)


# the support V ----------------------------------------------------------------------

@dataclass
class SupportResult:
    V: CompactRegion
    params: TubeParams
    predicates: dict
    halvings: dict

    @property
    def ok(self) -> bool:
        return all(self.predicates.values())


def build_V(model: NormalizedModel | DiscData, K: CompactRegion | None = None, delta: float = 1e-3,
            eps_init: float = 1.0, max_halvings: int = 40) -> SupportResult:
    """Support V = U0 + tube(gamma', eps0) + f(U0) satisfying the five predicates.

    Each eps_i starts at ``eps_init`` and is halved until its predicate holds
    on the grid of spacing ``delta``:

    * eps1: the tube misses K;
    * eps2: f(V minus (U + f(U))) misses V;
    * eps3: f(V n U) n V lies in f(U0).
    """
    data = model.disc_data() if isinstance(model, NormalizedModel) else model
    f, gamma = data.f, data.gamma
    # the touching point must not be fixed
    ts = np.linspace(0.0, 1.0, 10_001)
    pts = np.array([gamma.point_at(t) for t in ts])
    on_both = ~(data.in_U(pts) | data.in_fU(pts))
    disp = np.abs(f(pts) - pts)
    if (disp < 1e-12).any() or (on_both.any() and disp[on_both].min() <= delta):
        bad = pts[np.argmin(disp)]
        raise FixedPointOnPath(f"f fixes the path point {bad:.6g}")
    frame = data.frame
    z_path = gamma.z

    def V_pred(eps):
        def pred(z):
            return data.in_U0(z) | data.in_fU0(z) | (distance_to_polyline(z, z_path, flat_ends=True) < eps)
        return pred

    dK = _k_distance(K, gamma)

    def p1(eps):
        return eps + delta < dK

    def p2(eps):
        V = CompactRegion.from_predicate(V_pred(eps), frame, delta)
        rest = V.mask & ~_eval(data.in_U, V) & ~_eval(data.in_fU, V)
        for w in _true_points(rest, V.frame, delta):
            if V.contains_array(f(w)).any():
                return False
        return True

    def p3(eps):
        V = CompactRegion.from_predicate(V_pred(eps), frame, delta)
        vu = V.mask & _eval(data.in_U, V)
        for w in _true_points(vu, V.frame, delta):
            fw = f(w)
            if (V.contains_array(fw) & ~data.in_fU0(fw)).any():
                return False
        return True

    found, halvings = {}, {}
    for name, pred in (("eps1", p1), ("eps2", p2), ("eps3", p3)):
        eps = eps_init
        for k in range(max_halvings + 1):
            if pred(eps):
                found[name], halvings[name] = eps, k
                break
            eps /= 2
        else:
            raise ResolutionTooCoarse(f"{name} not found after {max_halvings} halvings")
        if found[name] < delta:
            raise ResolutionTooCoarse(f"{name} = {found[name]:.3g} is below the grid spacing")
    params = TubeParams(found["eps1"], found["eps2"], found["eps3"])
    V = CompactRegion.from_predicate(V_pred(params.eps0), frame, delta)
    return SupportResult(V, params, support_predicates(V, data, K), halvings)


def _eval(pred, R: CompactRegion) -> np.ndarray:
    from .region import _eval_rows
    return _eval_rows(pred, R.frame, R.delta)


def support_predicates(V: CompactRegion, data: DiscData, K: CompactRegion | None) -> dict[str, bool]:
    """The five support properties on the grid of V."""
    f = data.f
    inU = _eval(data.in_U, V)
    inFU = _eval(data.in_fU, V)
    out = {}
    if K is None or K.is_empty:
        out["V_misses_K"] = True
    else:
        out["V_misses_K"] = not V.contains_array(K.points()).any()
    out["V_cap_U_disc"] = is_disc(V.like(V.mask & inU))
    out["V_cap_fU_disc"] = is_disc(V.like(V.mask & inFU))
    covers = True
    for pred in (data.in_U0, data.in_fU0):
        m = _eval(pred, V)
        covers &= not (m & ~V.mask).any()
    out["U0_fU0_in_V"] = bool(covers)
    ok4 = True
    for w in _true_points(V.mask & inU, V.frame, V.delta):
        fw = f(w)
        if (V.contains_array(fw) & ~data.in_fU0(fw)).any():
            ok4 = False
            break
    out["f_VU_in_fU0"] = ok4
    ok5 = True
    for w in _true_points(V.mask & ~inU & ~inFU, V.frame, V.delta):
        if V.contains_array(f(w)).any():
            ok5 = False
            break
    out["f_rest_misses_V"] = ok5
    return out


# verification of the single fixed point --------------------------------------------------

def strip_height(n: int) -> float:
    """Half-height of the n-th narrowing strip [0,2] x [-h_n, h_n]."""
    return SQRT2 ** n / 2 ** (n + 2)


@dataclass
class StageResult:
    name: str
    passed: bool
    detail: str
    counterexample: complex | None = None


@dataclass
class VerificationReport:
    stages: list
    seams: dict
    h11_range: tuple
    certificates: CertificateList | None
    fixed_boxes: list

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.stages)

    def stage(self, name: str) -> StageResult:
        return next(s for s in self.stages if s.name == name)

    def to_text(self) -> str:
        lines = ["perturbation verification", ""]
        lines.append("seam residuals:")
        for k, v in self.seams.items():
            lines.append(f"  {k:14s} {v:.3e}")
        lines.append(f"radial factor range: [{self.h11_range[0]:.12f}, {self.h11_range[1]:.12f}]")
        lines.append("")
        for s in self.stages:
            mark = "PASS" if s.passed else "FAIL"
            lines.append(f"[{mark}] {s.name}: {s.detail}")
            if s.counterexample is not None:
                lines.append(f"       counterexample: {s.counterexample!r}")
        lines.append("")
        lines.append("fixed-point boxes:")
        for c in self.fixed_boxes:
            b = c.box
            lines.append(f"  [{b.x_lo:.9f}, {b.x_hi:.9f}] x [{b.y_lo:.9f}, {b.y_hi:.9f}]"
                         f" index={c.index} witness={c.witness}")
        return "\n".join(lines) + "\n"

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["kind", "name", "value", "passed"])
            for k, v in self.seams.items():
                w.writerow(["seam", k, repr(v), ""])
            w.writerow(["h11", "min", repr(self.h11_range[0]), ""])
            w.writerow(["h11", "max", repr(self.h11_range[1]), ""])
            for s in self.stages:
                w.writerow(["stage", s.name, s.detail, int(s.passed)])
            for c in self.fixed_boxes:
                b = c.box
                w.writerow(["box", c.status, f"{b.x_lo!r} {b.x_hi!r} {b.y_lo!r} {b.y_hi!r}", c.index])
        return path


def _stage_candidates(model: NormalizedModel, n: int, rng) -> StageResult:
    """Points of V whose image stays in V lie in the closed left square."""
    f = model.f
    z = model.V.sample(n, rng)
    inV = _open_box(model.V)
    back = z[inV(f(z))]
    U0c = model.U0
    outside = back[~U0c.contains_array(back, closed=True)]
    detail = f"{back.size}/{n} samples return to V, all inside closed U0" if outside.size == 0 \
        else f"{outside.size} returning samples outside U0"
    return StageResult("candidates", outside.size == 0, detail, complex(outside[0]) if outside.size else None)


def _stage_strips(model: NormalizedModel, g, n: int, levels: int, rng) -> StageResult:
    """Entry: g(U0) meets the strip x in [0,2] inside U_1.  Then for each
    level k, points of U_{k+1} landing in the strip land in U_{k+2}."""
    def check(src_h, dst_h, z):
        w = g(z)
        hit = (w.real >= 0.0) & (w.real <= 2.0)
        bad = hit & (np.abs(w.imag) > dst_h)
        return int(hit.sum()), z[bad]

    z = model.U0.sample(n, rng)
    # bias half the sample towards the part of U0 that returns to the strip
    z[: n // 2] = 1.0 + rng.uniform(-0.3, 0.3, n // 2) + 1j * rng.uniform(-0.3, 0.3, n // 2)
    hits, bad = check(1.0, strip_height(1), z)
    if bad.size:
        return StageResult("strips", False, "entry into U_1 fails", complex(bad[0]))
    total = hits
    for k in range(levels + 1):
        hk, hk2 = strip_height(k + 1), strip_height(k + 2)
        z = rng.uniform(0.0, 2.0, n) + 1j * rng.uniform(-hk, hk, n)
        z[: n // 2] = 1.0 + rng.uniform(-0.15, 0.15, n // 2) + 1j * rng.uniform(-hk, hk, n // 2)
        hits, bad = check(hk, hk2, z)
        total += hits
        if bad.size:
            return StageResult("strips", False, f"U_{k + 1} -> U_{k + 2} fails", complex(bad[0]))
    return StageResult("strips", True, f"levels 0..{levels}, {n} samples each, {total} strip returns checked")


def _stage_interval(model: NormalizedModel, g, n: int = 100_001) -> StageResult:
    """On the axis segment [0,2] the map is x -> 1 + 9|x - 1|, fixed only at 1."""
    x = np.linspace(0.0, 2.0, n)
    w = g(x + 0j)
    if np.abs(w.imag).max() > 0:
        return StageResult("interval", False, "axis not preserved", complex(x[np.argmax(np.abs(w.imag))]))
    expected = 1.0 + 9.0 * np.abs(x - 1.0)
    err = float(np.abs(w.real - expected).max())
    d = w.real - x
    fixed = x[d == 0]
    sign_change = np.nonzero(np.sign(d[1:]) * np.sign(d[:-1]) < 0)[0]
    ok = err < 1e-12 and fixed.tolist() == [1.0] and sign_change.size == 0
    return StageResult("interval", ok, f"max |g(x) - (1 + 9|x-1|)| = {err:.2e}, fixed points {fixed.tolist()}")


def verify_no_new_fixed(model: NormalizedModel | None = None, delta: float = 1e-3, samples: int = 10_000,
                        levels: int = 10, seed: int = 0, budget: int = 5_000_000,
                        search: bool = True) -> VerificationReport:
    """Numerical replay of the argument that h o f has c as its only fixed point.

    Stages: candidates (only U0 returns to V), strips (nested contraction of
    the strips U_n), interval (the axis map), search (certified subdivision
    of the closed rectangle V).
    """
    model = model or NormalizedModel()
    h = PerturbationMap(model)
    g = h.perturbed()
    rng = np.random.default_rng(seed)
    stages = [_stage_candidates(model, samples, rng), _stage_strips(model, g, samples, levels, rng),
              _stage_interval(model, g)]
    cert = None
    boxes = []
    if search:
        V = model.V
        c = complex(model.c)
        cert = find_fixed_points(g, BoxRect(V.x_lo, V.x_hi, V.y_lo, V.y_hi), delta,
                                 L=g.lipschitz_on_boxes, budget=budget, hints=[c])
        boxes = cert.fixed
        one = len(boxes) == 1 and boxes[0].contains(c)
        ok = one and cert.complete
        detail = (f"{len(boxes)} contains_fixed box(es), {len(cert.undecided)} undecided, "
                  f"{cert.empty_count} empty, {cert.evaluations} evaluations")
        if boxes:
            detail += f"; index at c = {boxes[0].index}"
        stages.append(StageResult("search", ok, detail))
    _, prof = h.radial_profile(360)
    return VerificationReport(stages, h.seam_residuals(), (float(prof.min()), float(prof.max())), cert, boxes)
