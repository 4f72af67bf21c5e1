"""Dynamics on the punctured plane and on its universal cover.

The annulus ``C minus {c}`` is charted by log-polar coordinates packed into a
complex number ``w = u + i v`` with ``u = arg(z - c) / 2 pi`` (defined mod 1)
and ``v = log |z - c|``.  The universal cover is the whole ``w`` plane, with
deck transformation ``u -> u + 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import (CannotPuncture, IncompleteCertification, NoDisjointLift, PreconditionFailed,
                     UnsupportedOperation)
from .fixedpoints import CONTAINS, FixedPointCertificate, find_fixed_points
from .maps import Identity, Monomial, PlaneMap
from .plane import BoxRect, as_complex
from .region import CompactRegion, fill, hausdorff, is_connected, separates

TAU = 2 * math.pi


@dataclass(frozen=True)
class PuncturedChart:
    c: complex
    exclusion: float = 1e-6

    def to_strip(self, z):
        """Principal strip coordinates, u in [0, 1)."""
        v = np.asarray(z, dtype=complex) - self.c
        u = np.mod(np.angle(v) / TAU, 1.0)
        u = np.where(u >= 1.0, 0.0, u)
        return u + 1j * np.log(np.abs(v))

    def from_strip(self, w):
        w = np.asarray(w, dtype=complex)
        return self.c + np.exp(w.imag + 1j * TAU * w.real)

    def roundtrip_residual(self, z) -> float:
        z = np.asarray(z, dtype=complex)
        z = z[np.abs(z - self.c) > self.exclusion]
        return float(np.abs(self.from_strip(self.to_strip(z)) - z).max(initial=0.0))


class AnnulusMap:
    """Restriction of a plane map to the complement of a totally invariant point."""

    def __init__(self, f: PlaneMap, c: complex):
        self.f = f
        self.c = complex(c)
        self.degree = int(f.degree)
        self.chart = PuncturedChart(self.c)

    def __call__(self, z):
        return self.f(z)

    def preimages_array(self, q):
        return self.f.preimages_array(q)


def puncture(f: PlaneMap, c=None, samples: int = 2000, seed: int = 0, tol: float = 1e-9) -> AnnulusMap:
    """Remove a totally invariant point and check the result is an annulus cover.

    Defaults to the critical point of a branched cover.  Sampling checks that
    regular points have ``degree`` distinct preimages, none at the puncture.
    """
    if c is None:
        c = getattr(f, "critical_point", None)
        if c is None:
            raise CannotPuncture("no puncture point given")
    c = as_complex(c)
    fc = complex(f(np.array([c]))[0])
    if abs(fc - c) > tol:
        raise CannotPuncture(f"f(c) = {fc:.6g} is not c = {c:.6g}")
    pre = np.asarray(f.preimages_array(np.array([c]))).ravel()
    if np.abs(pre - c).max() > math.sqrt(tol):
        raise CannotPuncture("c has preimages other than itself")
    rng = np.random.default_rng(seed)
    q = c + np.exp(rng.uniform(-2, 2, samples) + 1j * rng.uniform(0, TAU, samples))
    pre = np.asarray(f.preimages_array(q))
    if pre.shape[0] != f.degree:
        raise CannotPuncture("preimage count differs from the degree")
    back = np.abs(f(pre) - q[None, :]).max()
    if back > 1e-8 * max(1.0, float(np.abs(q).max())):
        raise CannotPuncture(f"preimages do not map back (residual {back:.2e})")
    if np.abs(pre - c).min() < tol:
        raise CannotPuncture("a regular point has a preimage at the puncture")
    if f.degree > 1:
        i, j = np.triu_indices(f.degree, 1)
        if np.abs(pre[i] - pre[j]).min() < tol:
            raise CannotPuncture("preimages of regular points are not distinct")
    return AnnulusMap(f, c)


def _strip_path(chart: PuncturedChart, w: np.ndarray, r: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Point at parameter t in [0, 2] of the path 0 -> i v (t <= 1) -> u + i v."""
    ww = w[r]
    vert = 1j * ww.imag * np.minimum(t, 1.0)
    horiz = ww.real * np.clip(t - 1.0, 0.0, 1.0)
    return chart.from_strip(vert + horiz)


def _continue_angle(F, chart: PuncturedChart, w: np.ndarray, start: int = 32,
                    max_points: int = 1 << 24) -> np.ndarray:
    """Change of arg(F(z) - c) / 2 pi along the strip path from 0 to each w.

    With a Lipschitz bound from F every step is certified: on a step of arc
    length s, ``L * s < |F(z_i) - c|`` keeps the image off c and the turn
    below a quarter.  Failing steps are bisected; rows refine independently.
    """
    c = chart.c
    n = w.size
    t = np.tile(np.linspace(0.0, 2.0, 2 * start + 1), n)
    r = np.repeat(np.arange(n), 2 * start + 1)
    z = _strip_path(chart, w, r, t)
    a = np.asarray(F(z)) - c
    certified = hasattr(F, "lipschitz_on_boxes")
    while True:
        same = r[1:] == r[:-1]
        z0, z1 = z[:-1], z[1:]
        # arc length: |dz| = e^v sqrt((2 pi du)^2 + dv^2) on the strip path
        rad = np.maximum(np.abs(z0 - c), np.abs(z1 - c))
        dt = t[1:] - t[:-1]
        ww = w[r[:-1]]
        vertical = t[1:] <= 1.0
        dw = np.where(vertical, np.abs(ww.imag) * dt, TAU * np.abs(ww.real) * dt)
        arc = rad * np.exp(np.where(vertical, np.abs(ww.imag) * dt, 0.0)) * dw
        turn = np.abs(np.angle(a[1:] / a[:-1]))
        if certified:
            lo = np.minimum(z0.real, z1.real) - arc + 1j * (np.minimum(z0.imag, z1.imag) - arc)
            hi = np.maximum(z0.real, z1.real) + arc + 1j * (np.maximum(z0.imag, z1.imag) + arc)
            L = np.asarray(F.lipschitz_on_boxes(lo, hi), dtype=float)
            ok = L * arc < np.maximum(np.abs(a[1:]), np.abs(a[:-1]))
        else:
            ok = turn < math.pi / 4
        bad = np.nonzero(same & ~ok)[0]
        if bad.size == 0:
            break
        if t.size + bad.size > max_points:
            raise UnsupportedOperation("angle continuation did not converge")
        tm = 0.5 * (t[bad] + t[bad + 1])
        rm = r[bad]
        zm = _strip_path(chart, w, rm, tm)
        am = np.asarray(F(zm)) - c
        t = np.insert(t, bad + 1, tm)
        r = np.insert(r, bad + 1, rm)
        z = np.insert(z, bad + 1, zm)
        a = np.insert(a, bad + 1, am)
    step = np.angle(a[1:] / a[:-1])
    step[r[1:] != r[:-1]] = 0.0
    total = np.zeros(n)
    np.add.at(total, r[1:], step)
    return total / TAU


@dataclass(frozen=True)
class StripLift:
    """Lift of an annulus map to the strip, normalized by ``lift_offset``."""

    base: AnnulusMap
    lift_offset: int = 0

    @property
    def chart(self) -> PuncturedChart:
        return self.base.chart

    @property
    def exact(self) -> bool:
        return isinstance(self.base.f, Monomial) and self.base.c == 0

    def __call__(self, w, reduce: bool = True):
        """Lifted image; ``reduce=False`` continues along the full path
        instead of using deck equivariance (used to test it)."""
        w = np.asarray(w, dtype=complex)
        d = self.base.degree
        if self.exact:
            return d * w.real + self.lift_offset + 1j * d * w.imag
        c, F, chart = self.base.c, self.base.f, self.chart
        flat = w.ravel()
        # deck equivariance reduces every query to 0 <= u < 1
        m = np.floor(flat.real) if reduce else np.zeros(flat.size)
        w0 = flat - m
        # base point w = 0, i.e. z = c + 1; its lifted image uses the principal angle
        zb = complex(F(np.array([c + 1.0]))[0]) - c
        ub = math.atan2(zb.imag, zb.real) / TAU
        du = _continue_angle(F, chart, w0)
        img = F(chart.from_strip(flat)) - c
        out = ub + du + d * m + self.lift_offset + 1j * np.log(np.abs(img))
        return out.reshape(w.shape)

    def project(self, w):
        return self.chart.from_strip(w)

    def projection_residual(self, n: int = 10_000, seed: int = 0, v_range=(-1.0, 1.0)) -> float:
        rng = np.random.default_rng(seed)
        w = rng.uniform(-1, 2, n) + 1j * rng.uniform(*v_range, n)
        lhs = self.project(self(w))
        rhs = self.base(self.project(w))
        return float((np.abs(lhs - rhs) / np.maximum(1.0, np.abs(rhs))).max())

    def deck_residual(self, n: int = 10_000, seed: int = 0, v_range=(-1.0, 1.0)) -> float:
        rng = np.random.default_rng(seed)
        w = rng.uniform(-1, 1, n) + 1j * rng.uniform(*v_range, n)
        return float(np.abs(self(w + 1, reduce=False) - self(w, reduce=False) - self.base.degree).max())


def lift(g: AnnulusMap, k: int = 0) -> StripLift:
    return StripLift(g, int(k))


def essential(K: CompactRegion, c) -> bool:
    """True iff K separates the puncture from infinity."""
    f = K.frame
    far = complex(f.x_lo + 0.5 * K.delta, f.y_lo + 0.5 * K.delta)
    return separates(K, c, far)


def lifted_copy(K: CompactRegion, c) -> np.ndarray:
    """Strip points of one lift of K, cut along a ray from c that misses K."""
    c = as_complex(c)
    if essential(K, c):
        raise NoDisjointLift("K is essential: its lifts are unbounded")
    pts = K.points()
    ang = np.sort(np.mod(np.angle(pts - c), TAU))
    gaps = np.diff(np.concatenate([ang, [ang[0] + TAU]]))
    k = int(np.argmax(gaps))
    # cells subtend at most about delta / r of angle; the ray must clear them
    r_min = float(np.abs(pts - c).min())
    if gaps[k] <= 2 * K.delta / r_min:
        raise UnsupportedOperation("no ray from the puncture misses K")
    cut = ang[k] + gaps[k] / 2
    u = np.mod(np.angle(pts - c) - cut, TAU) / TAU + cut / TAU
    return u + 1j * np.log(np.abs(pts - c))


def _point_hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    xa = np.column_stack([a.real, a.imag])
    xb = np.column_stack([b.real, b.imag])
    return float(max(cKDTree(xb).query(xa)[0].max(), cKDTree(xa).query(xb)[0].max()))


def select_lift_fixing(g: AnnulusMap, K: CompactRegion, tol: float | None = None) -> StripLift:
    """Lift of g that maps a chosen lifted copy of K onto itself.

    ``tol`` bounds the strip Hausdorff distance between the copy and its
    image (default: two grid cells at the distance of K from the puncture).
    """
    copy = lifted_copy(K, g.c)
    img0 = lift(g, 0)(copy)
    shift = float(np.median(img0.real) - np.median(copy.real))
    r_min = float(np.abs(K.points() - g.c).min())
    tol = 2 * K.delta / r_min if tol is None else tol
    best = None
    for m in (round(shift) - 1, round(shift), round(shift) + 1):
        d = _point_hausdorff(img0 - m, copy)
        if best is None or d < best[1]:
            best = (m, d)
    m, d = best
    if d > tol:
        raise NoDisjointLift(f"no lift maps the copy of K to itself (best residual {d:.3g} > {tol:.3g})")
    return StripLift(g, -int(m))


def lift_fixing_residual(L: StripLift, K: CompactRegion) -> float:
    copy = lifted_copy(K, L.base.c)
    return _point_hausdorff(L(copy), copy)


def _jacobian_det(f, z, h: float = 1e-7):
    fx = (f(z + h) - f(z - h)) / (2 * h)
    fy = (f(z + 1j * h) - f(z - 1j * h)) / (2 * h)
    return fx.real * fy.imag - fx.imag * fy.real


def box_inside(box: BoxRect, R: CompactRegion) -> bool:
    """Every cell the closed box touches belongs to R."""
    d = R.delta
    fr = R.frame
    j0 = int(math.floor((box.x_lo - fr.x_lo) / d))
    j1 = int(math.floor((box.x_hi - fr.x_lo) / d))
    i0 = int(math.floor((box.y_lo - fr.y_lo) / d))
    i1 = int(math.floor((box.y_hi - fr.y_lo) / d))
    ny, nx = R.shape
    if i0 < 0 or j0 < 0 or i1 >= ny or j1 >= nx:
        return False
    return bool(R.mask[i0:i1 + 1, j0:j1 + 1].all())


def fixed_point_in_fill(f: PlaneMap, K: CompactRegion, U: CompactRegion, delta: float | None = None,
                        budget: int = 5_000_000, samples: int = 2000, seed: int = 0) -> FixedPointCertificate:
    """Certified fixed point of f inside Fill(U + f(U)).

    Checks the inputs first: f(K) = K within two cells, U a connected
    neighbourhood of K, f orientation preserving on the fill (sampled).
    """
    if hausdorff(K, CompactRegion.from_points(f(K.points()), K.frame, K.delta)) > 2 * K.delta * (1 + 1e-9):
        raise PreconditionFailed("K is not invariant")
    if not (K <= U) or not is_connected(U):
        raise PreconditionFailed("U must be a connected neighbourhood of K")
    W = fill(U | CompactRegion.from_points(f(U.points()), U.frame, U.delta))
    pts = W.points()
    if isinstance(f, Identity):
        p = complex(pts[0])
        half = W.delta / 2
        return FixedPointCertificate(BoxRect(p.real - half, p.real + half, p.imag - half, p.imag + half),
                                     0, CONTAINS, 0.0, witness=p)
    rng = np.random.default_rng(seed)
    probe = pts[rng.integers(0, pts.size, min(samples, pts.size))]
    if (_jacobian_det(f, probe) <= 0).any():
        raise PreconditionFailed("f reverses orientation on the fill")
    delta = W.delta if delta is None else delta
    res = find_fixed_points(f, W.bbox(), delta, budget=budget)
    for cert in res.fixed:
        if box_inside(cert.box, W):
            return cert
    if res.undecided:
        raise IncompleteCertification("undecided boxes remain in the fill", res)
    raise PreconditionFailed("no certified fixed point inside the fill (counterexample candidate)")
