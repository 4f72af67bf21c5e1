import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bclab.errors import InvalidParameter, UnsupportedOperation
from bclab.maps import (Composed, Identity, Monomial, NormalizedModelMap, Polynomial, Quadratic, Rotation,
                        RotationCover, Translation, Twist, iterate, julia_dust, make_family,
                        preimage_residual)
from bclab.plane import BoxRect, Point2
from bclab.region import circle_region, hausdorff, separates

FAMILIES = [Quadratic(0), Quadratic(1), Quadratic(-0.12 + 0.74j), Monomial(2), Monomial(3),
            NormalizedModelMap(1.0), NormalizedModelMap(1.5), RotationCover(0.7, 1.0),
            Composed(Rotation(0.3), Monomial(2))]


def test_eval_examples():
    q0, q1 = Quadratic(0), Quadratic(1)
    assert q0.eval(Point2(1, 0)) == Point2(1, 0)
    assert q0.eval(Point2(0, 1)) == Point2(-1, 0)
    assert q1.eval(Point2(0, 0)) == Point2(1, 0)


def test_preimage_examples():
    q0, q1 = Quadratic(0), Quadratic(1)
    assert sorted(complex(p).real for p in q0.preimages(Point2(1, 0))) == [-1.0, 1.0]
    assert q0.preimages(Point2(0, 0)) == [Point2(0, 0)]
    assert q1.preimages(Point2(1, 0)) == [Point2(0, 0)]
    with pytest.raises(UnsupportedOperation):
        Polynomial([1, 0, 1]).preimages(Point2(1, 0))


@pytest.mark.parametrize("f", FAMILIES, ids=lambda f: f.name)
def test_preimages_map_back_and_are_distinct(f):
    rng = np.random.default_rng(3)
    c = f.critical_point
    q = f.critical_value + rng.uniform(0.05, 1.0, 1000) * np.exp(1j * rng.uniform(0, 2 * np.pi, 1000))
    pre = f.preimages_array(q)
    assert pre.shape == (f.degree, 1000)
    err = np.abs(f(pre) - q[None, :]).max()
    assert err < 1e-10
    gaps = np.abs(pre[0] - pre[1])
    assert gaps.min() > 1e-8
    assert not np.any(np.abs(pre - c) == 0)


@pytest.mark.parametrize("f", [f for f in FAMILIES if not isinstance(f, Composed)], ids=lambda f: f.name)
def test_chart_commutativity(f):
    rng = np.random.default_rng(4)
    z = f.chart_samples(1000, rng)
    assert f.chart_residual(z) < 1e-9


@pytest.mark.parametrize("r,L", [(1.0, 2.0), (2.0, 4.0)])
def test_quadratic_lipschitz_on_disc_boxes(r, L):
    f = Quadratic(0.3 + 0.1j)
    s = r / math.sqrt(2)
    B = BoxRect(-s, s, -s, s)
    bound = f.lipschitz_on_box(B)
    assert bound == pytest.approx(L)
    # oracle: sup |2z| over a dense sample
    rng = np.random.default_rng(0)
    z = B.sample(100_000, rng)
    assert np.abs(2 * z).max() <= bound


def test_lipschitz_degenerate_box():
    f = Quadratic(0)
    L = f.lipschitz_on_box(BoxRect(0.5, 0.5 + 1e-12, 0.0, 1e-12))
    assert 0 <= L and L == pytest.approx(1.0, rel=1e-9)


@pytest.mark.parametrize("f", FAMILIES, ids=lambda f: f.name)
def test_lipschitz_bounds_difference_quotients(f):
    rng = np.random.default_rng(5)
    c = complex(f.critical_point)
    for _ in range(20):
        lo = c + complex(*rng.uniform(-3, 2, 2))
        hi = lo + complex(*rng.uniform(0.05, 1, 2))
        L = float(f.lipschitz_on_boxes(np.array([lo]), np.array([hi]))[0])
        B = BoxRect.from_corners(lo, hi)
        a, b = B.sample(2000, rng), B.sample(2000, rng)
        q = np.abs(f(a) - f(b)) / np.abs(a - b)
        assert q.max() <= L * (1 + 1e-9)


MONOTONE = (FAMILIES[1], FAMILIES[4], FAMILIES[7], FAMILIES[5])


@settings(max_examples=60, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.01, 2), st.floats(0.01, 2), st.floats(0, 1), st.floats(0, 1))
def test_lipschitz_monotone_under_inclusion(x, y, w, h, s, t):
    lo, hi = complex(x, y), complex(x + w, y + h)
    inner_lo = lo + complex(s * w / 2, t * h / 2)
    inner_hi = hi - complex((1 - s) * w / 2, (1 - t) * h / 2)
    for f in MONOTONE:
        outer = f.lipschitz_on_boxes(np.array([lo]), np.array([hi]))[0]
        inner = f.lipschitz_on_boxes(np.array([inner_lo]), np.array([inner_hi]))[0]
        assert inner <= outer * (1 + 1e-12)


def test_julia_dust_of_z2_is_the_circle():
    frame, d = BoxRect(-2, 2, -2, 2), 1e-2
    K = julia_dust(0, 12, frame, d)
    assert hausdorff(K, circle_region(0, 1.0, frame, d)) <= 2 * d


def test_julia_dust_a1():
    frame, d = BoxRect(-2, 2, -2, 2), 1e-2
    K = julia_dust(1, 12, frame, d)
    assert not separates(K, 0, 1)
    assert preimage_residual(Quadratic(1), K) <= 4 * d


def test_julia_dust_is_seeded():
    frame = BoxRect(-2, 2, -2, 2)
    a = julia_dust(1, 8, frame, 1e-2, seed=1)
    assert a == julia_dust(1, 8, frame, 1e-2, seed=1)
    with pytest.raises(InvalidParameter):
        julia_dust(1, 0, frame, 1e-2)


def test_rotation_cover_is_rotation_near_origin():
    f = RotationCover(0.7, 1.0)
    z = 1.5 * np.exp(1j * np.linspace(0, 6, 50)) * np.linspace(0.1, 1, 50)
    assert np.abs(f(z) - z * np.exp(0.7j)).max() < 1e-12
    assert f.critical_point == -6


def test_homeomorphisms_invert():
    z = np.linspace(-2, 2, 41)[:, None] + 1j * np.linspace(-2, 2, 41)[None, :]
    for h in (Identity(), Rotation(0.4, 1 + 1j), Translation(2 - 1j), Twist(0.3, 0.5, 0.8, 1.5)):
        assert np.abs(h.inverse(h(z)) - z).max() < 1e-12


def test_iterate_and_make_family():
    f = make_family("monomial", d=2)
    g = iterate(f, 3)
    z = np.array([0.3 + 0.4j])
    assert np.allclose(g(z), z ** 8)
    assert make_family("quadratic", a=1)(np.array([0j]))[0] == 1
    with pytest.raises(InvalidParameter):
        make_family("nope")


def test_normalized_model_axis():
    f = NormalizedModelMap(1.0)
    x = np.linspace(0, 2, 11) + 0j
    assert np.allclose(f(x), 9 + np.abs(x - 1))
    assert f(np.array([1 + 0j]))[0] == 9
