"""Fixed-point certification by winding numbers and Lipschitz box exclusion.

A box ``B`` is certified empty when the displacement ``v = g(m) - m`` at its
center satisfies ``|v| > (L + 1) * diam(B)`` with ``L`` a Lipschitz bound of
``g`` on ``B``: then ``g(x) - x`` cannot vanish anywhere in ``B``.  Boxes that
survive are split in four until they reach the leaf size; unresolved leaves are
grouped into clusters, each cluster is replaced by one box of width ``delta``
centered on the best fixed-point estimate, and the remainder is re-excluded.
A cluster box is reported as ``contains_fixed`` when the certified winding
number of ``g(x) - x`` along its boundary is nonzero, or when an exact witness
``g(p) == p`` lies inside it.

The boxes are half-open ``[lo, hi)`` in both axes, so the reported boxes tile
the search frame exactly (up to dropped out-of-domain boxes).
"""

from __future__ import annotations

import csv
import math
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import IncompleteCertification, IndeterminateLoop, InvalidParameter
from .maps import PlaneMap, iterate, max_abs_on_boxes, min_abs_on_boxes
from .plane import BoxRect, Polyline

CONTAINS = "contains_fixed"
EMPTY = "certified_empty"
UNDECIDED = "undecided"


@dataclass(frozen=True)
class FixedPointCertificate:
    box: BoxRect
    index: int
    status: str
    margin: float
    witness: complex | None = None

    def __post_init__(self):
        if self.status not in (CONTAINS, EMPTY, UNDECIDED):
            raise InvalidParameter(f"unknown status {self.status!r}")
        if self.status == CONTAINS and self.index == 0 and self.witness is None:
            raise InvalidParameter("contains_fixed needs a nonzero index or an exact witness")
        if self.status == EMPTY and not self.margin > 0:
            raise InvalidParameter("certified_empty needs a positive margin")

    def contains(self, p) -> bool:
        return self.box.contains(p, closed=True)


def _as_lipschitz(g, L) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    if L is None:
        if isinstance(g, PlaneMap):
            return g.lipschitz_on_boxes
        raise InvalidParameter("a Lipschitz bound is required for plain callables")
    if callable(L):
        return L
    value = float(L)
    return lambda lo, hi: np.full(np.shape(lo), value)


# winding numbers ---------------------------------------------------------------

def _loop_param(z: np.ndarray):
    """Arclength parametrization t in [0, 1) -> point of the closed polygon z (z[0] == z[-1])."""
    seg = np.abs(np.diff(z))
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]

    def at(t):
        s = np.asarray(t) * total
        return np.interp(s, cum, z.real) + 1j * np.interp(s, cum, z.imag)

    return at, total


def winding_index(g, loop: Polyline, samples: int = 256, L=None,
                  max_points: int = 1 << 21) -> int:
    """Winding number of ``g(x) - x`` along a closed polyline.

    With a Lipschitz bound ``L`` (scalar, box callable, or taken from ``g``)
    every step is certified: ``(L + 1) * step < |g(x) - x|`` at one endpoint,
    so the displacement cannot reach zero or turn by pi within the step.
    Without one, steps are refined until every turn is below pi/2.
    """
    if not loop.closed:
        raise InvalidParameter("winding_index needs a closed loop")
    z = loop.z
    if L is None and isinstance(g, PlaneMap):
        L = g.lipschitz_on_box(BoxRect(z.real.min(), z.real.max() + 1e-12,
                                       z.imag.min(), z.imag.max() + 1e-12))
    elif L is not None and callable(L):
        lo = np.array([complex(z.real.min(), z.imag.min())])
        hi = np.array([complex(z.real.max(), z.imag.max())])
        L = float(L(lo, hi)[0])
    at, total = _loop_param(z)
    t = np.linspace(0.0, 1.0, max(int(samples), 8) + 1)
    # keep polygon corners as sample points
    cum = np.concatenate([[0.0], np.cumsum(np.abs(np.diff(z)))]) / total
    t = np.union1d(t, cum)
    x = at(t)
    v = np.asarray(g(x)) - x
    while True:
        a = np.abs(v)
        if np.any(a == 0):
            raise IndeterminateLoop("g has a fixed point on the loop")
        step = np.diff(t) * total
        turn = np.abs(np.angle(v[1:] / v[:-1]))
        if L is not None:
            ok = (float(L) + 1.0) * step < np.maximum(a[1:], a[:-1])
        else:
            ok = turn < math.pi / 2
        ok &= turn < math.pi / 2
        if ok.all():
            break
        if len(t) > max_points:
            raise IndeterminateLoop(
                f"fixed point too close to the loop (min |g(x)-x| = {a.min():.3e})")
        bad = np.nonzero(~ok)[0]
        tm = 0.5 * (t[bad] + t[bad + 1])
        xm = at(tm)
        vm = np.asarray(g(xm)) - xm
        t = np.insert(t, bad + 1, tm)
        v = np.insert(v, bad + 1, vm)
    total_turn = np.angle(v[1:] / v[:-1]).sum()
    return int(round(total_turn / (2 * math.pi)))


def box_winding(g, lo: complex, hi: complex, L: float, samples: int = 64) -> int:
    box = BoxRect.from_corners(lo, hi)
    return winding_index(g, box.boundary_loop(), samples=4 * samples, L=L)


# subdivision -------------------------------------------------------------------

class _Budget:
    def __init__(self, limit: int):
        self.limit = int(limit)
        self.used = 0

    def take(self, n: int) -> int:
        k = max(0, min(n, self.limit - self.used))
        self.used += k
        return k


def _split(lo, hi):
    m = 0.5 * (lo + hi)
    return (np.concatenate([lo, m.real + 1j * lo.imag, lo.real + 1j * m.imag, m]),
            np.concatenate([m, hi.real + 1j * m.imag, m.real + 1j * hi.imag, hi]))


@dataclass
class _Sweep:
    empty_lo: list
    empty_hi: list
    empty_margin: list
    leaf_lo: list
    leaf_hi: list
    undecided_lo: list
    undecided_hi: list
    witnesses: list


def _sweep(g, Lfn, lo, hi, leaf_width, budget, domain=None, min_width=0.0):
    """Breadth-first exclusion; returns certified, leaf and undecided boxes."""
    out = _Sweep([], [], [], [], [], [], [], [])
    lo = np.asarray(lo, dtype=complex)
    hi = np.asarray(hi, dtype=complex)
    while lo.size:
        k = budget.take(lo.size)
        if k < lo.size:
            out.undecided_lo.append(lo[k:])
            out.undecided_hi.append(hi[k:])
            lo, hi = lo[:k], hi[:k]
            if not k:
                break
        if domain is not None:
            code = domain(lo, hi)
            keep = code != 0
            lo, hi = lo[keep], hi[keep]
            if not lo.size:
                break
        m = 0.5 * (lo + hi)
        v = np.asarray(g(m)) - m
        a = np.abs(v)
        diam = np.abs(hi - lo)
        with np.errstate(invalid="ignore", over="ignore"):
            margin = a - (np.asarray(Lfn(lo, hi), dtype=float) + 1.0) * diam
        empty = margin > 0
        if np.any(a == 0):
            out.witnesses.extend(m[a == 0].tolist())
        out.empty_lo.append(lo[empty])
        out.empty_hi.append(hi[empty])
        out.empty_margin.append(margin[empty])
        lo, hi = lo[~empty], hi[~empty]
        width = np.maximum(hi.real - lo.real, hi.imag - lo.imag)
        leaf = width <= leaf_width
        out.leaf_lo.append(lo[leaf])
        out.leaf_hi.append(hi[leaf])
        lo, hi = lo[~leaf], hi[~leaf]
        tiny = np.maximum(hi.real - lo.real, hi.imag - lo.imag) <= min_width
        out.undecided_lo.append(lo[tiny])
        out.undecided_hi.append(hi[tiny])
        lo, hi = lo[~tiny], hi[~tiny]
        if lo.size:
            lo, hi = _split(lo, hi)
    return out


def _cat(parts) -> np.ndarray:
    parts = [np.asarray(p, dtype=complex) for p in parts if np.size(p)]
    return np.concatenate(parts) if parts else np.zeros(0, dtype=complex)


def _catf(parts) -> np.ndarray:
    parts = [np.asarray(p, dtype=float) for p in parts if np.size(p)]
    return np.concatenate(parts) if parts else np.zeros(0)


def _box_minus(lo: complex, hi: complex, clo: complex, chi: complex):
    """Decompose [lo,hi) minus [clo,chi) into at most four rectangles."""
    x0, x1, y0, y1 = lo.real, hi.real, lo.imag, hi.imag
    cx0, cx1 = max(clo.real, x0), min(chi.real, x1)
    cy0, cy1 = max(clo.imag, y0), min(chi.imag, y1)
    if cx0 >= cx1 or cy0 >= cy1:
        return [(lo, hi)]
    pieces = []
    if x0 < cx0:
        pieces.append((complex(x0, y0), complex(cx0, y1)))
    if cx1 < x1:
        pieces.append((complex(cx1, y0), complex(x1, y1)))
    if y0 < cy0:
        pieces.append((complex(cx0, y0), complex(cx1, cy0)))
    if cy1 < y1:
        pieces.append((complex(cx0, cy1), complex(cx1, y1)))
    return pieces


def _overlaps(lo, hi, clo: complex, chi: complex) -> np.ndarray:
    return ((lo.real < chi.real) & (hi.real > clo.real)
            & (lo.imag < chi.imag) & (hi.imag > clo.imag))


def _clusters(lo: np.ndarray, hi: np.ndarray) -> list[np.ndarray]:
    """Group boxes whose closures touch (8-adjacency for grid leaves)."""
    n = lo.size
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    if n:
        tol = 1e-12 * max(1.0, float(np.abs(hi).max()))
        order = np.argsort(lo.real)
        xs_lo = lo.real[order]
        for a_pos, i in enumerate(order):
            # only boxes starting before this one ends can touch it
            j_end = np.searchsorted(xs_lo, hi.real[i] + tol, side="right")
            for j in order[a_pos + 1:j_end]:
                if (lo.real[j] <= hi.real[i] + tol and lo.imag[j] <= hi.imag[i] + tol
                        and hi.imag[j] >= lo.imag[i] - tol):
                    ri, rj = find(i), find(j)
                    if ri != rj:
                        parent[ri] = rj
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return [np.array(v) for v in groups.values()]


def _refine_estimate(g, lo, hi, hint_points, per_side=8):
    """Best fixed-point estimate inside the union of boxes: grid search then
    a shrinking pattern search on |g(x) - x|."""
    offs = (np.arange(per_side) + 0.5) / per_side
    ox, oy = np.meshgrid(offs, offs)
    ox, oy = ox.ravel(), oy.ravel()
    w = hi - lo
    pts = (lo[:, None] + ox[None, :] * w.real[:, None] + 1j * oy[None, :] * w.imag[:, None]).ravel()
    if hint_points:
        pts = np.concatenate([pts, np.asarray(hint_points, dtype=complex)])
    a = np.abs(np.asarray(g(pts)) - pts)
    best = pts[np.argmin(a)]
    best_a = a.min()
    step = max(float(np.max(w.real)), float(np.max(w.imag))) / per_side
    grid = np.arange(-4, 5)
    gx, gy = np.meshgrid(grid, grid)
    pattern = (gx + 1j * gy).ravel()
    for _ in range(12):
        if best_a == 0:
            break
        cand = best + step / 4 * pattern
        ca = np.abs(np.asarray(g(cand)) - cand)
        k = np.argmin(ca)
        if ca[k] < best_a:
            best, best_a = cand[k], ca[k]
        step /= 4
    return complex(best), float(best_a)


class CertificateList(Sequence):
    """Outcome of :func:`find_fixed_points`; a sequence of certificates.

    Certified-empty boxes are stored as arrays and materialized on access.
    """

    def __init__(self, frame, delta, fixed, undecided, empty_lo, empty_hi, empty_margin, evaluations):
        self.frame = frame
        self.delta = delta
        self.fixed: list[FixedPointCertificate] = fixed
        self.undecided: list[FixedPointCertificate] = undecided
        self.empty_lo = empty_lo
        self.empty_hi = empty_hi
        self.empty_margin = empty_margin
        self.evaluations = evaluations

    def __len__(self):
        return len(self.fixed) + len(self.undecided) + self.empty_lo.size

    def __getitem__(self, k):
        if isinstance(k, slice):
            return [self[i] for i in range(*k.indices(len(self)))]
        if k < 0:
            k += len(self)
        if not 0 <= k < len(self):
            raise IndexError(k)
        if k < len(self.fixed):
            return self.fixed[k]
        k -= len(self.fixed)
        if k < len(self.undecided):
            return self.undecided[k]
        k -= len(self.undecided)
        return FixedPointCertificate(BoxRect.from_corners(complex(self.empty_lo[k]), complex(self.empty_hi[k])),
                                     0, EMPTY, float(self.empty_margin[k]))

    @property
    def empty_count(self) -> int:
        return int(self.empty_lo.size)

    @property
    def complete(self) -> bool:
        return not self.undecided

    def covered_area(self) -> float:
        w = self.empty_hi - self.empty_lo
        area = float((w.real * w.imag).sum())
        for c in self.fixed + self.undecided:
            area += c.box.width * c.box.height
        return area

    def to_csv(self, path, include_empty: bool = True) -> Path:
        path = Path(path)
        rows = self if include_empty else self.fixed + self.undecided
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x_lo", "x_hi", "y_lo", "y_hi", "index", "status", "margin"])
            for c in rows:
                b = c.box
                w.writerow([repr(b.x_lo), repr(b.x_hi), repr(b.y_lo), repr(b.y_hi), c.index, c.status,
                            repr(float(c.margin))])
        return path


def find_fixed_points(g, frame: BoxRect, delta: float, L=None, budget: int = 5_000_000,
                      domain=None, hints=()) -> CertificateList:
    """Certified search for fixed points of ``g`` in ``frame``.

    Args:
        g: map on complex arrays (a PlaneMap supplies its own Lipschitz bound).
        frame: search window.
        delta: width of the boxes reported around fixed points.
        L: Lipschitz bound of ``g`` on the frame, scalar or box callable.
        budget: maximum number of box evaluations.
        domain: optional ``(lo, hi) -> code`` with 0 = drop box, 1 = inside,
            2 = partially inside; see :func:`annulus_domain`.
        hints: candidate points tested for exact fixedness (``g(p) == p``).

    Returns:
        CertificateList with contains_fixed boxes of width <= delta, the
        certified-empty cover of the rest, and any undecided boxes.
    """
    if not delta > 0:
        raise InvalidParameter("delta must be positive")
    Lfn = _as_lipschitz(g, L)
    bud = _Budget(budget)
    leaf_width = delta / 8.0
    sw = _sweep(g, Lfn, np.array([frame.lo]), np.array([frame.hi]), leaf_width, bud, domain)

    empty_lo, empty_hi, empty_m = _cat(sw.empty_lo), _cat(sw.empty_hi), _catf(sw.empty_margin)
    undecided = [(complex(a), complex(b)) for a, b in zip(_cat(sw.undecided_lo), _cat(sw.undecided_hi))]
    witnesses = list(sw.witnesses)
    hint_arr = np.asarray([complex(h) for h in hints], dtype=complex)
    if hint_arr.size:
        witnesses += hint_arr[np.asarray(g(hint_arr)) == hint_arr].tolist()

    extra_lo, extra_hi, extra_m = [], [], []
    fixed: list[FixedPointCertificate] = []
    work_lo, work_hi = _cat(sw.leaf_lo), _cat(sw.leaf_hi)
    rounds = 0
    while work_lo.size and rounds < 64:
        rounds += 1
        next_lo, next_hi = [], []
        for idx in _clusters(work_lo, work_hi):
            clo, chi = work_lo[idx], work_hi[idx]
            inside = [w for w in witnesses
                      if np.any((clo.real <= w.real) & (w.real <= chi.real)
                                & (clo.imag <= w.imag) & (w.imag <= chi.imag))]
            if inside:
                p, pa = complex(inside[0]), 0.0
            else:
                p, pa = _refine_estimate(g, clo, chi, [])
            half = delta / 2
            c_lo = complex(max(p.real - half, frame.x_lo), max(p.imag - half, frame.y_lo))
            c_hi = complex(min(p.real + half, frame.x_hi), min(p.imag + half, frame.y_hi))
            # boxes already accepted take precedence
            if any(_overlaps(np.array([c_lo]), np.array([c_hi]), c.box.lo, c.box.hi)[0] for c in fixed):
                for c in fixed:
                    c_lo, c_hi = _trim(c_lo, c_hi, c.box.lo, c.box.hi, p)
            if not (c_lo.real < c_hi.real and c_lo.imag < c_hi.imag):
                undecided += [(complex(a), complex(b)) for a, b in zip(clo, chi)]
                continue
            Lc = float(Lfn(np.array([c_lo]), np.array([c_hi]))[0])
            try:
                index = box_winding(g, c_lo, c_hi, Lc)
            except IndeterminateLoop:
                index = None
            wit = next((w for w in witnesses
                        if c_lo.real <= w.real <= c_hi.real and c_lo.imag <= w.imag <= c_hi.imag), None)
            if wit is None and pa == 0.0 and c_lo.real <= p.real <= c_hi.real and c_lo.imag <= p.imag <= c_hi.imag:
                wit = p
            if (index is not None and index != 0) or wit is not None:
                fixed.append(FixedPointCertificate(BoxRect.from_corners(c_lo, c_hi), index or 0, CONTAINS,
                                                   float(pa), witness=wit))
            else:
                # no evidence of a fixed point: try to certify the box itself empty
                inner = _sweep(g, Lfn, np.array([c_lo]), np.array([c_hi]), 0.0, bud, domain,
                               min_width=delta * 1e-6)
                if _cat(inner.undecided_lo).size:
                    undecided.append((c_lo, c_hi))
                else:
                    extra_lo.append(_cat(inner.empty_lo))
                    extra_hi.append(_cat(inner.empty_hi))
                    extra_m.append(_catf(inner.empty_margin))
            # re-cover everything the new box overlapped
            hit = _overlaps(empty_lo, empty_hi, c_lo, c_hi)
            pieces = []
            for a, b in zip(empty_lo[hit], empty_hi[hit]):
                pieces += _box_minus(complex(a), complex(b), c_lo, c_hi)
            empty_lo, empty_hi, empty_m = empty_lo[~hit], empty_hi[~hit], empty_m[~hit]
            for a, b in zip(clo, chi):
                pieces += _box_minus(complex(a), complex(b), c_lo, c_hi)
            # leaves of other clusters are left for their own turn
            if pieces:
                plo = np.array([q[0] for q in pieces])
                phi = np.array([q[1] for q in pieces])
                sub = _sweep(g, Lfn, plo, phi, 0.0, bud, domain, min_width=delta / 4096)
                extra_lo.append(_cat(sub.empty_lo))
                extra_hi.append(_cat(sub.empty_hi))
                extra_m.append(_catf(sub.empty_margin))
                next_lo.append(_cat(sub.undecided_lo))
                next_hi.append(_cat(sub.undecided_hi))
            if bud.used >= bud.limit:
                break
        if bud.used >= bud.limit:
            undecided += [(complex(a), complex(b)) for a, b in zip(_cat(next_lo), _cat(next_hi))]
            break
        work_lo, work_hi = _cat(next_lo), _cat(next_hi)
        # undecided remnants that now sit inside an accepted box are covered by it
        if work_lo.size and fixed:
            keep = np.ones(work_lo.size, dtype=bool)
            for c in fixed:
                keep &= ~((work_lo.real >= c.box.x_lo) & (work_hi.real <= c.box.x_hi)
                          & (work_lo.imag >= c.box.y_lo) & (work_hi.imag <= c.box.y_hi))
            work_lo, work_hi = work_lo[keep], work_hi[keep]
    if work_lo.size and rounds >= 64:
        undecided += [(complex(a), complex(b)) for a, b in zip(work_lo, work_hi)]

    empty_lo = np.concatenate([empty_lo, _cat(extra_lo)])
    empty_hi = np.concatenate([empty_hi, _cat(extra_hi)])
    empty_m = np.concatenate([empty_m, _catf(extra_m)])
    und = [FixedPointCertificate(BoxRect.from_corners(a, b), 0, UNDECIDED, 0.0)
           for a, b in undecided if a.real < b.real and a.imag < b.imag]
    fixed.sort(key=lambda c: (c.box.x_lo, c.box.y_lo))
    return CertificateList(frame, delta, fixed, und, empty_lo, empty_hi, empty_m, bud.used)


def _trim(c_lo, c_hi, o_lo, o_hi, p):
    """Shrink a candidate box so it no longer overlaps an accepted one, keeping p."""
    x0, x1, y0, y1 = c_lo.real, c_hi.real, c_lo.imag, c_hi.imag
    if not (x0 < o_hi.real and x1 > o_lo.real and y0 < o_hi.imag and y1 > o_lo.imag):
        return c_lo, c_hi
    if p.real >= o_hi.real:
        x0 = max(x0, o_hi.real)
    elif p.real <= o_lo.real:
        x1 = min(x1, o_lo.real)
    elif p.imag >= o_hi.imag:
        y0 = max(y0, o_hi.imag)
    else:
        y1 = min(y1, o_lo.imag)
    return complex(x0, y0), complex(x1, y1)


def annulus_domain(center=0j, r_in: float = 0.0, r_out: float = math.inf):
    """Domain code for boxes relative to ``r_in <= |z - center| <= r_out``."""

    def code(lo, hi):
        far = max_abs_on_boxes(lo, hi, center)
        near = min_abs_on_boxes(lo, hi, center)
        out = np.full(np.shape(lo), 2, dtype=np.int8)
        out[(near >= r_in) & (far <= r_out)] = 1
        out[(far < r_in) | (near > r_out)] = 0
        return out

    return code


# periodic points -----------------------------------------------------------------

def count_periodic(f, n: int, frame: BoxRect, delta: float, puncture=None, r_in: float = 0.0,
                   r_out: float = math.inf, budget: int = 5_000_000) -> int:
    """Number of certified fixed points of the n-th iterate inside the frame.

    ``puncture`` with ``r_in`` / ``r_out`` restricts the count to the annulus
    ``r_in <= |z - puncture| <= r_out``.  Raises IncompleteCertification when
    any box stays undecided.
    """
    g = iterate(f, n)
    domain = None
    if puncture is not None:
        domain = annulus_domain(complex(puncture), r_in, r_out)
    res = find_fixed_points(g, frame, delta, budget=budget, domain=domain)
    if not res.complete:
        raise IncompleteCertification(f"{len(res.undecided)} undecided boxes for n={n}", res)
    if puncture is None:
        return len(res.fixed)
    c = complex(puncture)
    return sum(1 for cert in res.fixed if r_in <= abs(cert.box.center - c) <= r_out)


@dataclass(frozen=True)
class RateSeries:
    counts: tuple
    estimates: tuple

    def __post_init__(self):
        ns = [n for n, _ in self.counts]
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise InvalidParameter("n must be strictly increasing")
        if any(c < 0 for _, c in self.counts):
            raise InvalidParameter("counts must be nonnegative")


def rate_estimate(f, N: int, frame: BoxRect, delta: float, **kwargs) -> RateSeries:
    """Counts of fixed points of f**n for n = 1..N and (1/n) log count."""
    if N < 1:
        raise InvalidParameter("N must be >= 1")
    counts, est = [], []
    for n in range(1, N + 1):
        k = count_periodic(f, n, frame, delta, **kwargs)
        counts.append((n, k))
        est.append((n, math.log(k) / n if k > 0 else -math.inf))
    return RateSeries(tuple(counts), tuple(est))
