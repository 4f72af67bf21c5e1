import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bclab.errors import InvalidCurve, InvalidParameter
from bclab.plane import (BoxRect, Point2, PolarOffset, Polyline, as_complex, distance_to_polyline,
                         from_polar, to_polar, tube)
from bclab.region import CompactRegion, hausdorff


def test_to_polar_examples():
    o = to_polar(Point2(0, 0), Point2(1, 0))
    assert (o.rho, o.theta) == (1.0, 0.0)
    o = to_polar(Point2(1, 0), Point2(1, 1))
    assert o.rho == 1.0 and o.theta == pytest.approx(math.pi / 2)
    o = to_polar(Point2(3, 4), Point2(3, 4))
    assert (o.rho, o.theta) == (0.0, 0.0)


def test_from_polar_examples():
    p = from_polar(Point2(0, 0), PolarOffset(1, math.pi))
    assert p.x == pytest.approx(-1) and abs(p.y) < 1e-15
    for th in (0.0, 1.0, 4.0):
        assert from_polar(Point2(9, 0), PolarOffset(0, th)) == Point2(9, 0)


def test_polar_roundtrip_random():
    rng = np.random.default_rng(1)
    c = Point2(0.3, -1.2)
    for x, y in rng.uniform(-50, 50, (1000, 2)):
        q = from_polar(c, to_polar(c, Point2(x, y)))
        assert abs(complex(q) - complex(x, y)) < 1e-12


@given(st.floats(-1e6, 1e6), st.floats(0, 1e3))
def test_polar_theta_normalized(theta, rho):
    o = PolarOffset(rho, theta)
    assert 0 <= o.theta < 2 * math.pi


def test_invalid_values():
    with pytest.raises(InvalidParameter):
        Point2(float("nan"), 0)
    with pytest.raises(InvalidParameter):
        PolarOffset(-1, 0)
    with pytest.raises(InvalidParameter):
        BoxRect(1, 0, 0, 1)
    with pytest.raises(InvalidCurve):
        Polyline(((0, 0),))
    with pytest.raises(InvalidCurve):
        Polyline(((0, 0), (0, 0), (1, 0)))


def test_as_complex_accepts_several_forms():
    assert as_complex(Point2(1, 2)) == 1 + 2j
    assert as_complex((1, 2)) == 1 + 2j
    assert as_complex(3) == 3 + 0j


def test_box_basics():
    b = BoxRect(0, 2, -1, 1)
    assert b.center == 1 + 0j and b.width == 2 and b.height == 2
    assert b.contains((1, 0)) and not b.contains((0, 0)) and not b.contains((2, 0))
    assert b.contains((2, 1), closed=True)
    assert b.boundary_loop().closed


def test_polyline_simplicity():
    assert Polyline(((0, 0), (1, 0), (1, 1))).is_simple()
    bowtie = Polyline(((0, 0), (1, 1), (1, 0), (0, 1)))
    assert not bowtie.is_simple()
    foldback = Polyline(((0, 0), (2, 0), (1, 0)))
    assert not foldback.is_simple()


def test_polyline_arclength():
    p = Polyline(((0, 0), (1, 0), (1, 1)))
    assert p.length == 2.0
    assert p.point_at(0.25) == 0.5
    assert p.point_at(0.75) == 1 + 0.5j
    sub = p.subpath(0.25, 0.75)
    assert np.allclose(sub.z, [0.5, 1, 1 + 0.5j])


def test_straight_tube_bounds():
    seg = Polyline(((0, 0), (1, 0)))
    T = tube(seg, 0.1, delta=0.01)
    inner = CompactRegion.from_predicate(
        lambda z: (z.real >= 0) & (z.real <= 1) & (np.abs(z.imag) <= 0.05), T.frame, T.delta)
    assert inner <= T
    pts = T.points()
    assert pts.real.min() >= -0.01 and pts.real.max() <= 1.01
    assert np.abs(pts.imag).max() <= 0.11


def test_tube_truncation_drops_right_half():
    seg = Polyline(((0, 0), (1, 0)))
    frame = BoxRect(-0.2, 1.2, -0.2, 0.2)
    half = tube(seg, 0.1, delta=0.01, t_range=(0.0, 0.5), frame=frame)
    assert not half.points().real.max() > 0.5 + 0.01
    full = tube(seg, 0.1, delta=0.01, frame=frame)
    assert half <= full


def test_l_shaped_tube_matches_minkowski_sum():
    L = Polyline(((0, 0), (1, 0), (1, 1)))
    eps, d = 0.1, 0.01
    T = tube(L, eps, delta=d, caps="round")
    # brute force: cells within eps of a dense sample of the path
    s = np.concatenate([np.linspace(0, 1, 2001), 1 + 1j * np.linspace(0, 1, 2001)])
    c = T.centers()
    near = np.zeros(c.shape, dtype=bool)
    for k in range(0, s.size, 200):
        near |= (np.abs(c[..., None] - s[None, None, k:k + 200]) < eps).any(axis=-1)
    oracle = CompactRegion.from_mask(near, T.frame, d)
    assert hausdorff(T, oracle) <= 2 * d
    flat = tube(L, eps, delta=d, frame=T.frame)
    assert flat <= T


def test_tube_errors():
    seg = Polyline(((0, 0), (1, 0)))
    with pytest.raises(InvalidParameter):
        tube(seg, 0.0)
    with pytest.raises(InvalidCurve):
        tube(Polyline(((0, 0), (1, 1), (1, 0), (0, 1))), 0.1)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5)), min_size=1, max_size=20))
def test_distance_to_polyline_vs_dense_sampling(pts):
    z = np.array([0, 1 + 1j, 2])
    p = np.array([complex(x, y) for x, y in pts])
    d = distance_to_polyline(p, z)
    dense = np.concatenate([np.linspace(0, 1 + 1j, 4001), np.linspace(1 + 1j, 2, 4001)])
    brute = np.abs(p[:, None] - dense[None, :]).min(axis=1)
    assert np.all(d <= brute + 1e-12)
    assert np.all(brute - d <= 1e-3)
