"""Branched covering maps of the plane and a few plane homeomorphisms.

Every map acts on complex numpy arrays through ``__call__`` and knows a
Lipschitz bound on axis-aligned boxes (``lipschitz_on_boxes`` takes arrays of
lower-left / upper-right corners).  Branched covers additionally carry their
critical point, critical value, and a chart pair ``(phi, phi')`` with
``phi' o f = m_d o phi`` near the critical point.
"""

from __future__ import annotations

import math
from functools import cached_property

import numpy as np

from .errors import InvalidParameter, UnsupportedOperation
from .plane import BoxRect, Chart, Point2, as_complex, disc_domain, box_domain
from .region import CompactRegion, hausdorff


def _corners(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    lo = np.asarray(lo, dtype=complex)
    hi = np.asarray(hi, dtype=complex)
    return np.stack([lo, hi, lo.real + 1j * hi.imag, hi.real + 1j * lo.imag])


def max_abs_on_boxes(lo, hi, center: complex = 0j) -> np.ndarray:
    """max |z - center| over each box (attained at a corner)."""
    return np.abs(_corners(lo, hi) - center).max(axis=0)


def min_abs_on_boxes(lo, hi, center: complex = 0j) -> np.ndarray:
    """min |z - center| over each box."""
    lo = np.asarray(lo, dtype=complex) - center
    hi = np.asarray(hi, dtype=complex) - center
    dx = np.maximum(np.maximum(lo.real, -hi.real), 0.0)
    dy = np.maximum(np.maximum(lo.imag, -hi.imag), 0.0)
    return np.hypot(dx, dy)


def sup_jacobian_norm(F, center: complex, n: int = 200_000, h: float = 1e-7) -> float:
    """Sup over directions of the Jacobian operator norm of a map that is
    positively homogeneous of degree one about ``center``.

    The Jacobian depends on the angle only, so dense angular sampling at unit
    radius (with a 1% margin) bounds the global Lipschitz constant.
    """
    t = (np.arange(n) + 0.5) * (2 * math.pi / n)
    z = center + np.exp(1j * t)
    fx = (F(z + h) - F(z - h)) / (2 * h)
    fy = (F(z + 1j * h) - F(z - 1j * h)) / (2 * h)
    a, b, c, d = fx.real, fy.real, fx.imag, fy.imag
    # largest singular value of [[a, b], [c, d]]
    s = a * a + b * b + c * c + d * d
    det = a * d - b * c
    smax = np.sqrt(0.5 * (s + np.sqrt(np.maximum(s * s - 4 * det * det, 0.0))))
    return float(smax.max() * 1.01)


class PlaneMap:
    """Continuous map of the plane evaluated on complex arrays."""

    degree: int = 1
    name: str = "map"

    def __call__(self, z):
        raise NotImplementedError

    def eval(self, p) -> Point2:
        return Point2.from_complex(complex(self(np.asarray([as_complex(p)]))[0]))

    def lipschitz_on_boxes(self, lo, hi) -> np.ndarray:
        raise UnsupportedOperation(f"{self.name} has no Lipschitz bound")

    def lipschitz_on_box(self, box: BoxRect) -> float:
        return float(self.lipschitz_on_boxes(np.array([box.lo]), np.array([box.hi]))[0])

    def preimages_array(self, w) -> np.ndarray:
        """All preimages, shape ``(degree,) + w.shape``."""
        raise UnsupportedOperation(f"{self.name} has no inverse formula")

    def preimages(self, q) -> list[Point2]:
        w = as_complex(q)
        pre = self.preimages_array(np.asarray([w]))[:, 0]
        out: list[complex] = []
        for z in pre:
            if not any(abs(z - o) <= 1e-12 * max(1.0, abs(z)) for o in out):
                out.append(complex(z))
        return [Point2.from_complex(z) for z in out]

    def describe(self) -> dict:
        return {"family": self.name}


class Homeomorphism(PlaneMap):
    degree = 1

    def inverse(self, w):
        raise UnsupportedOperation(f"{self.name} has no inverse formula")

    def preimages_array(self, w) -> np.ndarray:
        return self.inverse(np.asarray(w, dtype=complex))[None]


class Identity(Homeomorphism):
    name = "identity"

    def __call__(self, z):
        return np.array(z, dtype=complex, copy=True)

    def inverse(self, w):
        return np.array(w, dtype=complex, copy=True)

    def lipschitz_on_boxes(self, lo, hi):
        return np.ones(np.shape(lo))


class Rotation(Homeomorphism):
    name = "rotation"

    def __init__(self, angle: float, center=0j):
        self.angle = float(angle)
        self.center = as_complex(center)
        self._w = complex(math.cos(angle), math.sin(angle))

    def __call__(self, z):
        return self.center + self._w * (np.asarray(z, dtype=complex) - self.center)

    def inverse(self, w):
        return self.center + (np.asarray(w, dtype=complex) - self.center) / self._w

    def lipschitz_on_boxes(self, lo, hi):
        return np.ones(np.shape(lo))

    def describe(self):
        return {"family": self.name, "angle": self.angle, "center": [self.center.real, self.center.imag]}


class Translation(Homeomorphism):
    name = "translation"

    def __init__(self, shift):
        self.shift = as_complex(shift)

    def __call__(self, z):
        return np.asarray(z, dtype=complex) + self.shift

    def inverse(self, w):
        return np.asarray(w, dtype=complex) - self.shift

    def lipschitz_on_boxes(self, lo, hi):
        return np.ones(np.shape(lo))

    def describe(self):
        return {"family": self.name, "shift": [self.shift.real, self.shift.imag]}


class Twist(Homeomorphism):
    """Rigid rotation by ``angle`` on the disc of radius ``r_in`` about
    ``center``, fading linearly in the radius to the identity at ``r_out``."""

    name = "twist"

    def __init__(self, angle: float, center=0j, r_in: float = 1.0, r_out: float = 2.0):
        if not 0 < r_in < r_out:
            raise InvalidParameter("need 0 < r_in < r_out")
        self.angle = float(angle)
        self.center = as_complex(center)
        self.r_in, self.r_out = float(r_in), float(r_out)

    def _turn(self, r):
        w = np.clip((self.r_out - r) / (self.r_out - self.r_in), 0.0, 1.0)
        return np.exp(1j * self.angle * w)

    def __call__(self, z):
        v = np.asarray(z, dtype=complex) - self.center
        return self.center + v * self._turn(np.abs(v))

    def inverse(self, w):
        v = np.asarray(w, dtype=complex) - self.center
        return self.center + v / self._turn(np.abs(v))

    def lipschitz_on_boxes(self, lo, hi):
        # radial shear: the angular speed changes by |angle| / (r_out - r_in) per unit radius
        r = np.minimum(max_abs_on_boxes(lo, hi, self.center), self.r_out)
        return 1.0 + abs(self.angle) * r / (self.r_out - self.r_in)

    def describe(self):
        return {"family": self.name, "angle": self.angle, "center": [self.center.real, self.center.imag],
                "r_in": self.r_in, "r_out": self.r_out}


class BranchedCover(PlaneMap):
    """Orientation-preserving branched cover with a single critical point."""

    degree = 2
    critical_point: complex
    critical_value: complex

    @property
    def charts(self) -> tuple[Chart, Chart]:
        raise UnsupportedOperation(f"{self.name} carries no conjugacy charts")

    def chart_residual(self, samples) -> float:
        """max |phi'(f(z)) - phi(z)**d| over samples inside the chart domain."""
        phi, phi2 = self.charts
        z = np.asarray(samples, dtype=complex)
        z = z[phi.domain(z)]
        if z.size == 0:
            return 0.0
        return float(np.max(np.abs(phi2.forward(self(z)) - phi.forward(z) ** self.degree)))

    def chart_samples(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Uniform samples of the chart domain around the critical point."""
        phi, _ = self.charts
        r = np.sqrt(rng.uniform(0, 1, n)) * 0.999
        t = rng.uniform(0, 2 * math.pi, n)
        return phi.inverse(r * np.exp(1j * t))


class Quadratic(BranchedCover):
    """z -> z**2 + a."""

    name = "quadratic"

    def __init__(self, a=0j):
        self.a = as_complex(a)
        self.critical_point = 0j
        self.critical_value = self.a

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        return z * z + self.a

    def preimages_array(self, w):
        r = np.sqrt(np.asarray(w, dtype=complex) - self.a)
        return np.stack([r, -r])

    def lipschitz_on_boxes(self, lo, hi):
        return 2.0 * max_abs_on_boxes(lo, hi)

    @cached_property
    def charts(self):
        a = self.a
        phi = Chart(lambda z: np.asarray(z), lambda w: np.asarray(w), disc_domain(0j, 1.0), "phi")
        phi2 = Chart(lambda w: np.asarray(w) - a, lambda u: np.asarray(u) + a, disc_domain(a, 1.0), "phi'")
        return phi, phi2

    def repelling_fixed_point(self) -> complex:
        return complex((1 + np.sqrt(complex(1 - 4 * self.a))) / 2)

    def describe(self):
        return {"family": self.name, "a": [self.a.real, self.a.imag]}


class Monomial(BranchedCover):
    """z -> z**d."""

    name = "monomial"

    def __init__(self, d: int = 2):
        if int(d) < 1:
            raise InvalidParameter(f"monomial degree must be >= 1, got {d}")
        self.degree = int(d)
        self.critical_point = 0j
        self.critical_value = 0j

    def __call__(self, z):
        return np.asarray(z, dtype=complex) ** self.degree

    def preimages_array(self, w):
        w = np.asarray(w, dtype=complex)
        d = self.degree
        r = np.abs(w) ** (1.0 / d)
        t = np.angle(w) / d
        k = np.arange(d).reshape((d,) + (1,) * w.ndim)
        return r * np.exp(1j * (t + 2 * math.pi * k / d))

    def lipschitz_on_boxes(self, lo, hi):
        d = self.degree
        return d * max_abs_on_boxes(lo, hi) ** (d - 1)

    def iterate(self, n: int) -> "Monomial":
        return Monomial(self.degree ** n)

    @cached_property
    def charts(self):
        ident = Chart(lambda z: np.asarray(z), lambda w: np.asarray(w), disc_domain(0j, 1.0), "id")
        return ident, ident

    def describe(self):
        return {"family": self.name, "d": self.degree}


def _sqnorm(v):
    """max(|Re v|, |Im v|): the norm whose unit ball is the axis-aligned square."""
    return np.maximum(np.abs(v.real), np.abs(v.imag))


class NormalizedModelMap(BranchedCover):
    """Model cover with critical point c = 1 and critical value 9.

    In polar coordinates about c the map is
    ``c + (rho, theta) -> 9 + (R(2 theta) * (rho / L(theta))**p, 2 theta)``
    where ``L`` and ``R`` are the distances from c and 9 to the boundaries of
    the unit squares around them.  It sends the square (0,2)x(-1,1) two-to-one
    onto (8,10)x(-1,1), and each square ``||v||_inf < s`` around c onto the
    square of half-width ``s**p`` around 9.  With ``p = 1`` it is affine on
    every ray out of c.
    """

    name = "normalized_model"

    def __init__(self, exponent: float = 1.0):
        if exponent < 1.0:
            raise InvalidParameter("radial exponent must be >= 1")
        self.exponent = float(exponent)
        self.critical_point = 1 + 0j
        self.critical_value = 9 + 0j

    def __call__(self, z):
        v = np.asarray(z, dtype=complex) - self.critical_point
        s = _sqnorm(v)
        with np.errstate(invalid="ignore", divide="ignore"):
            u = v / np.abs(v)
            w = u * u
            out = self.critical_value + s ** self.exponent * w / _sqnorm(w)
        return np.where(v == 0, self.critical_value, out)

    def preimages_array(self, q):
        u = np.asarray(q, dtype=complex) - self.critical_value
        s = _sqnorm(u) ** (1.0 / self.exponent)
        with np.errstate(invalid="ignore", divide="ignore"):
            e = np.sqrt(u / np.abs(u))
            v = s * e / _sqnorm(e)
        v = np.where(u == 0, 0j, v)
        return np.stack([self.critical_point + v, self.critical_point - v])

    @cached_property
    def unit_lipschitz(self) -> float:
        """Global Lipschitz constant of the exponent-1 model."""
        c, fc = self.critical_point, self.critical_value

        def F1(z):
            v = z - c
            u = v / np.abs(v)
            w = u * u
            return fc + _sqnorm(v) * w / _sqnorm(w)

        return sup_jacobian_norm(F1, c)

    def lipschitz_on_boxes(self, lo, hi):
        L1 = self.unit_lipschitz
        p = self.exponent
        if p == 1.0:
            return np.full(np.shape(lo), L1)
        smax = np.maximum(np.abs(_corners(lo, hi) - self.critical_point).max(axis=0), 1e-300)
        # product rule on ||v||^(p-1) * F1(v), with |F1 - fc| <= sqrt(2) ||v||_inf
        return smax ** (p - 1) * (L1 + (p - 1) * math.sqrt(2))

    @cached_property
    def charts(self):
        c, fc, p = self.critical_point, self.critical_value, self.exponent

        def phi(z):
            v = np.asarray(z, dtype=complex) - c
            with np.errstate(invalid="ignore", divide="ignore"):
                out = np.sqrt(_sqnorm(v)) * v / np.abs(v)
            return np.where(v == 0, 0j, out)

        def phi_inv(zeta):
            zeta = np.asarray(zeta, dtype=complex)
            with np.errstate(invalid="ignore", divide="ignore"):
                e = zeta / np.abs(zeta)
                out = c + np.abs(zeta) ** 2 * e / _sqnorm(e)
            return np.where(zeta == 0, c, out)

        def phi2(w):
            u = np.asarray(w, dtype=complex) - fc
            with np.errstate(invalid="ignore", divide="ignore"):
                out = _sqnorm(u) ** (1.0 / p) * u / np.abs(u)
            return np.where(u == 0, 0j, out)

        def phi2_inv(zeta):
            zeta = np.asarray(zeta, dtype=complex)
            with np.errstate(invalid="ignore", divide="ignore"):
                e = zeta / np.abs(zeta)
                out = fc + np.abs(zeta) ** p * e / _sqnorm(e)
            return np.where(zeta == 0, fc, out)

        dom = box_domain(BoxRect(0.0, 2.0, -1.0, 1.0))
        dom2 = box_domain(BoxRect(8.0, 10.0, -1.0, 1.0))
        return Chart(phi, phi_inv, dom, "phi"), Chart(phi2, phi2_inv, dom2, "phi'")

    def describe(self):
        return {"family": self.name, "exponent": self.exponent}


class RotationCover(BranchedCover):
    """Degree-2 cover that is a rigid rotation on the disc |z| <= 2 s.

    Built as ``Psi o m_2 o Phi`` with ``Phi(z) = 3 + z / (2 s)``.  On the
    bean ``B = m_2(D(3, 1))``, ``Psi(w) = 2 s e^{i alpha} (sqrt(w) - 3)``;
    outside ``B`` it is extended radially from 9 (``B`` is star-shaped about 9).
    The critical point is ``-6 s``.
    """

    name = "rotation_cover"

    def __init__(self, alpha: float = math.pi / 2, scale: float = 1.0):
        if scale <= 0:
            raise InvalidParameter("scale must be positive")
        self.alpha = float(alpha)
        self.scale = float(scale)
        self._rot = complex(math.cos(alpha), math.sin(alpha))
        self.critical_point = complex(-6.0 * scale)
        self.critical_value = complex(self._psi(np.array([0j]))[0])

    @staticmethod
    def _boundary_param(phi):
        """Solve t + arg(6 + e^{it}) = phi (monotone in t) by Newton."""
        t = np.array(phi, dtype=float, copy=True)
        for _ in range(40):
            g = t + np.arctan2(np.sin(t), 6 + np.cos(t)) - phi
            dg = 1 + (1 + 6 * np.cos(t)) / (37 + 12 * np.cos(t))
            t = t - g / dg
        return t

    def _psi(self, w):
        w = np.asarray(w, dtype=complex)
        u = w - 9.0
        rho = np.abs(u)
        t = self._boundary_param(np.angle(u))
        rho_b = np.abs(6 + np.exp(1j * t))
        k = 2 * self.scale * self._rot
        inside = rho < rho_b
        return np.where(inside, k * (np.sqrt(w) - 3), k * np.exp(1j * t) * rho / rho_b)

    def _psi_inv(self, zeta):
        zp = np.asarray(zeta, dtype=complex) / (2 * self.scale * self._rot)
        r = np.abs(zp)
        e = np.exp(1j * np.angle(zp))
        return np.where(r < 1, (3 + zp) ** 2, 9 + r * e * (6 + e))

    def __call__(self, z):
        phi = 3 + np.asarray(z, dtype=complex) / (2 * self.scale)
        return self._psi(phi * phi)

    def preimages_array(self, q):
        r = np.sqrt(self._psi_inv(q))
        return np.stack([2 * self.scale * (r - 3), 2 * self.scale * (-r - 3)])

    @cached_property
    def psi_lipschitz(self) -> float:
        # outside the bean Psi is homogeneous about 9; inside |Psi'| = s/|sqrt w| <= s/2
        def radial(w):
            u = w - 9.0
            t = self._boundary_param(np.angle(u))
            rho_b = np.abs(6 + np.exp(1j * t))
            return 2 * self.scale * self._rot * np.exp(1j * t) * np.abs(u) / rho_b
        return max(sup_jacobian_norm(radial, 9 + 0j), self.scale / 2)

    def lipschitz_on_boxes(self, lo, hi):
        s = self.scale
        rmax = max_abs_on_boxes(lo, hi)
        phimax = max_abs_on_boxes(3 + np.asarray(lo) / (2 * s), 3 + np.asarray(hi) / (2 * s))
        general = self.psi_lipschitz * phimax / s
        return np.where(rmax <= 2 * s, 1.0, np.maximum(general, 1.0))

    @cached_property
    def charts(self):
        s = self.scale
        c = self.critical_point
        phi = Chart(lambda z: (np.asarray(z) - c) / (2 * s), lambda w: c + 2 * s * np.asarray(w),
                    disc_domain(c, 2 * s), "phi")
        phi2 = Chart(self._psi_inv, self._psi,
                     lambda w: np.abs(self._psi_inv(np.asarray(w))) < 1, "phi'")
        return phi, phi2

    def describe(self):
        return {"family": self.name, "alpha": self.alpha, "scale": self.scale}


class Composed(BranchedCover):
    """``outer o base`` for a homeomorphism ``outer`` and a branched cover ``base``."""

    name = "composed"

    def __init__(self, outer: Homeomorphism, base: BranchedCover):
        self.outer = outer
        self.base = base
        self.degree = base.degree
        self.critical_point = base.critical_point
        self.critical_value = complex(outer(np.array([base.critical_value]))[0])

    def __call__(self, z):
        return self.outer(self.base(z))

    def preimages_array(self, w):
        return self.base.preimages_array(self.outer.inverse(np.asarray(w, dtype=complex)))

    def lipschitz_on_boxes(self, lo, hi):
        lo = np.asarray(lo, dtype=complex)
        hi = np.asarray(hi, dtype=complex)
        Lb = self.base.lipschitz_on_boxes(lo, hi)
        m = self.base((lo + hi) / 2)
        r = Lb * np.abs(hi - lo) / 2
        return Lb * self.outer.lipschitz_on_boxes(m - r * (1 + 1j), m + r * (1 + 1j))

    def describe(self):
        return {"family": self.name, "outer": self.outer.describe(), "base": self.base.describe()}


class Iterate(PlaneMap):
    """n-fold composition with box-propagated Lipschitz bounds."""

    name = "iterate"

    def __init__(self, f: PlaneMap, n: int):
        if n < 1:
            raise InvalidParameter("iterate count must be >= 1")
        self.f = f
        self.n = int(n)
        self.degree = f.degree ** self.n

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        for _ in range(self.n):
            z = self.f(z)
        return z

    def lipschitz_on_boxes(self, lo, hi):
        lo = np.asarray(lo, dtype=complex)
        hi = np.asarray(hi, dtype=complex)
        total = np.ones(lo.shape)
        for _ in range(self.n):
            L = self.f.lipschitz_on_boxes(lo, hi)
            total = total * L
            m = self.f((lo + hi) / 2)
            r = L * np.abs(hi - lo) / 2
            lo, hi = m - r * (1 + 1j), m + r * (1 + 1j)
        return total


def iterate(f: PlaneMap, n: int) -> PlaneMap:
    if isinstance(f, Monomial):
        return f.iterate(n)
    if n == 1:
        return f
    return Iterate(f, n)


class Polynomial(PlaneMap):
    """Complex polynomial with coefficients in increasing degree order."""

    name = "polynomial"

    def __init__(self, coeffs):
        self.coeffs = np.asarray(coeffs, dtype=complex)
        self.degree = max(len(self.coeffs) - 1, 0)

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape, dtype=complex)
        for a in self.coeffs[::-1]:
            out = out * z + a
        return out

    def lipschitz_on_boxes(self, lo, hi):
        R = max_abs_on_boxes(lo, hi)
        k = np.arange(1, len(self.coeffs))
        return sum(kk * abs(a) * R ** (kk - 1) for kk, a in zip(k, self.coeffs[1:])) + 0.0 * R


def make_family(family: str, **params) -> PlaneMap:
    """Instantiate a built-in family by name.

    Recognized names and parameters: ``quadratic`` (a), ``monomial`` (d),
    ``normalized_model`` (exponent), ``rotation_cover`` (alpha, scale),
    ``rotation`` (angle, center), ``twist`` (angle, center, r_in, r_out),
    ``translation`` (shift), ``identity``.
    """
    family = family.strip().lower()
    if family == "quadratic":
        return Quadratic(params.get("a", 0j))
    if family == "monomial":
        return Monomial(int(params.get("d", 2)))
    if family == "normalized_model":
        return NormalizedModelMap(float(params.get("exponent", 1.0)))
    if family == "rotation_cover":
        return RotationCover(float(params.get("alpha", math.pi / 2)), float(params.get("scale", 1.0)))
    if family == "rotation":
        return Rotation(float(params.get("angle", math.pi / 2)), params.get("center", 0j))
    if family == "translation":
        return Translation(params.get("shift", 1 + 0j))
    if family == "twist":
        return Twist(float(params.get("angle", 0.3)), params.get("center", 0j),
                     float(params.get("r_in", 1.0)), float(params.get("r_out", 2.0)))
    if family == "identity":
        return Identity()
    raise InvalidParameter(f"unknown map family {family!r}")


def julia_dust(a, depth: int, frame: BoxRect, delta: float, seed: int = 0,
               burn_in: int = 100) -> CompactRegion:
    """Rasterized approximation of the Julia set of z**2 + a.

    Combines the complete backward tree of the repelling fixed point
    ``(1 + sqrt(1 - 4a)) / 2`` down to ``depth`` levels with one random
    inverse-iteration orbit of length ``2**depth`` (after ``burn_in`` steps,
    branches drawn from ``seed``).
    """
    if depth < 1:
        raise InvalidParameter("depth must be >= 1")
    f = Quadratic(a)
    z0 = f.repelling_fixed_point()
    level = np.array([z0])
    pts = [level]
    for _ in range(depth):
        level = f.preimages_array(level).ravel()
        pts.append(level)
    rng = np.random.default_rng(seed)
    n = 2 ** depth
    signs = np.where(rng.random(burn_in + n) < 0.5, 1.0, -1.0)
    orbit = np.empty(n, dtype=complex)
    z = z0
    for k, s in enumerate(signs):
        z = s * np.sqrt(z - f.a)
        if k >= burn_in:
            orbit[k - burn_in] = z
    pts.append(orbit)
    return CompactRegion.from_points(np.concatenate(pts), frame, delta)


def preimage_residual(f: PlaneMap, K: CompactRegion) -> float:
    """Hausdorff distance between K and the rasterized preimage of its cells."""
    pre = f.preimages_array(K.points()).ravel()
    return hausdorff(K, CompactRegion.from_points(pre, K.frame, K.delta))


def image_residual(f: PlaneMap, K: CompactRegion) -> float:
    """Hausdorff distance between K and the rasterized image of its cells."""
    return hausdorff(K, CompactRegion.from_points(f(K.points()), K.frame, K.delta))
