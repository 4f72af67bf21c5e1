import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bclab.errors import IncompleteCertification, IndeterminateLoop, InvalidParameter
from bclab.fixedpoints import (CONTAINS, EMPTY, UNDECIDED, FixedPointCertificate, RateSeries, box_winding,
                               count_periodic, find_fixed_points, rate_estimate, winding_index)
from bclab.maps import Monomial, Polynomial, Quadratic, Translation
from bclab.plane import BoxRect, Polyline

from oracles import circle_loop, dense_winding

ROOTS = np.array([0.5 + 0.5j * math.sqrt(3), 0.5 - 0.5j * math.sqrt(3)])


def loop(center, r, n=64):
    return Polyline.from_complex(circle_loop(center, r, n)[:-1], closed=True)


@pytest.mark.parametrize("r,expected", [(2.0, 2), (0.5, 1)])
def test_winding_of_square_map(r, expected):
    g = Monomial(2)
    assert winding_index(g, loop(0, r)) == expected
    assert round(dense_winding(g, circle_loop(0, r))) == expected


def test_translation_winds_zero():
    g = Translation(1)
    for c, r in ((0, 1), (3 + 1j, 0.2), (-2, 5)):
        assert winding_index(g, loop(c, r)) == 0


def test_fixed_point_on_loop_is_indeterminate():
    square = BoxRect(0.0, 1.0, -0.5, 0.5).boundary_loop()
    with pytest.raises(IndeterminateLoop):
        winding_index(Monomial(2), Polyline.from_complex(square.z[:-1] + 0.0, closed=True))
    with pytest.raises(InvalidParameter):
        winding_index(Monomial(2), Polyline.segment(0, 1))


def _random_poly(rng):
    deg = int(rng.integers(1, 4))
    coeffs = rng.normal(size=deg + 1) + 1j * rng.normal(size=deg + 1)
    return Polynomial(coeffs)


def test_random_polynomials_match_dense_oracle():
    rng = np.random.default_rng(11)
    checked = 0
    while checked < 20:
        g = _random_poly(rng)
        c = complex(*rng.uniform(-1, 1, 2))
        r = float(rng.uniform(0.3, 2.5))
        z = circle_loop(c, r, 4096)
        if np.abs(g(z) - z).min() < 1e-3:
            continue
        w = winding_index(g, loop(c, r, 128))
        assert w == round(dense_winding(g, circle_loop(c, r)))
        # argument principle: fixed points of g inside the loop
        p = g.coeffs.copy()
        if p.size < 2:
            p = np.append(p, 0)
        p[1] -= 1
        roots = np.roots(p[::-1])
        assert w == int((np.abs(roots - c) < r).sum())
        checked += 1


def test_winding_stable_under_refinement():
    rng = np.random.default_rng(2)
    for _ in range(10):
        g = _random_poly(rng)
        lp = loop(0.1, 1.3, 32)
        try:
            a = winding_index(g, lp, samples=64)
        except IndeterminateLoop:
            continue
        assert winding_index(g, lp, samples=512) == a


def test_index_additivity_on_random_polynomials():
    rng = np.random.default_rng(5)
    done = 0
    while done < 10:
        g = _random_poly(rng)
        lo, hi = complex(*rng.uniform(-2, -0.5, 2)), complex(*rng.uniform(0.5, 2, 2))
        mid = complex(*rng.uniform(-0.3, 0.3, 2))
        L = float(g.lipschitz_on_boxes(np.array([lo]), np.array([hi]))[0])
        try:
            whole = box_winding(g, lo, hi, L)
            parts = [box_winding(g, complex(x0, y0), complex(x1, y1), L)
                     for x0, x1 in ((lo.real, mid.real), (mid.real, hi.real))
                     for y0, y1 in ((lo.imag, mid.imag), (mid.imag, hi.imag))]
        except IndeterminateLoop:
            continue
        assert sum(parts) == whole
        done += 1


def test_z2_plus_1_roots():
    res = find_fixed_points(Quadratic(1), BoxRect(-2, 2, -2, 2), 1e-6)
    assert res.complete and len(res.fixed) == 2
    for cert in res.fixed:
        assert cert.index == 1 and cert.status == CONTAINS
        assert cert.box.width <= 1e-6 * (1 + 1e-9)
        assert np.abs(ROOTS - cert.box.center).min() < 1e-6
        assert any(cert.contains(r) for r in ROOTS)
    assert res.covered_area() == pytest.approx(16.0, rel=1e-12)


def test_empty_boxes_avoid_roots():
    cases = [(Quadratic(1), ROOTS),
             (Polynomial([0, 0, 0, 1]), np.array([0, 1, -1])),
             (Monomial(3), np.array([0, 1, -1]))]
    for g, roots in cases:
        res = find_fixed_points(g, BoxRect(-1.7, 1.9, -1.3, 1.6), 1e-5)
        lo, hi = res.empty_lo, res.empty_hi
        for r in roots:
            inside = (lo.real <= r.real) & (r.real < hi.real) & (lo.imag <= r.imag) & (r.imag < hi.imag)
            assert not inside.any()
        assert len(res.fixed) == len(roots)


def test_translation_gives_full_empty_cover():
    frame = BoxRect(-1, 1, -1, 1)
    res = find_fixed_points(Translation(1), frame, 1e-3)
    assert not res.fixed and res.complete
    assert res.covered_area() == pytest.approx(4.0, rel=1e-12)
    assert all(c.status == EMPTY and c.margin > 0 for c in res[:50])


def test_budget_exhaustion_reports_undecided():
    res = find_fixed_points(Quadratic(1), BoxRect(-2, 2, -2, 2), 1e-6, budget=20)
    assert not res.complete
    assert all(c.status == UNDECIDED for c in res.undecided)
    assert res.covered_area() == pytest.approx(16.0, rel=1e-12)


def test_certificate_invariants():
    b = BoxRect(0, 1, 0, 1)
    with pytest.raises(InvalidParameter):
        FixedPointCertificate(b, 0, CONTAINS, 0.0)
    with pytest.raises(InvalidParameter):
        FixedPointCertificate(b, 0, EMPTY, 0.0)
    with pytest.raises(InvalidParameter):
        FixedPointCertificate(b, 0, "maybe", 1.0)
    assert FixedPointCertificate(b, 0, CONTAINS, 0.0, witness=0.5 + 0.5j).contains(0.5 + 0.5j)


def test_csv_export(tmp_path):
    res = find_fixed_points(Quadratic(1), BoxRect(-2, 2, -2, 2), 1e-4)
    p = res.to_csv(tmp_path / "all.csv")
    lines = p.read_text().splitlines()
    assert lines[0] == "x_lo,x_hi,y_lo,y_hi,index,status,margin"
    assert len(lines) == len(res) + 1
    q = res.to_csv(tmp_path / "fixed.csv", include_empty=False)
    assert len(q.read_text().splitlines()) == 3


@pytest.mark.parametrize("d,n,expected", [(2, 3, 7), (3, 2, 8), (2, 1, 1)])
def test_count_periodic_examples(d, n, expected):
    got = count_periodic(Monomial(d), n, BoxRect(-4, 4, -4, 4), 1e-6, puncture=0, r_in=0.1, r_out=4)
    assert got == expected


def test_count_periodic_raises_when_incomplete():
    with pytest.raises(IncompleteCertification):
        count_periodic(Monomial(2), 2, BoxRect(-2, 2, -2, 2), 1e-6, budget=10)


def test_rate_estimates():
    s = rate_estimate(Monomial(2), 4, BoxRect(-1.5, 1.5, -1.5, 1.5), 1e-6, puncture=0, r_in=0.1)
    assert [k for _, k in s.counts] == [1, 3, 7, 15]
    est = [e for _, e in s.estimates]
    assert est[-1] == pytest.approx(math.log(15) / 4, abs=1e-12)
    assert all(a < b < math.log(2) for a, b in zip(est, est[1:]))
    t = rate_estimate(Translation(0.5), 3, BoxRect(-1, 1, -1, 1), 1e-3)
    assert [k for _, k in t.counts] == [0, 0, 0]
    assert all(e == -math.inf for _, e in t.estimates)


def test_rate_series_validation():
    with pytest.raises(InvalidParameter):
        RateSeries(((2, 1), (1, 1)), ())
    with pytest.raises(InvalidParameter):
        RateSeries(((1, -1),), ())


@settings(max_examples=15, deadline=None)
@given(st.complex_numbers(max_magnitude=0.6))
def test_quadratic_fixed_points_found(a):
    g = Quadratic(a)
    roots = np.roots([1, -1, a])
    if abs(roots[0] - roots[1]) < 1e-3:
        return
    res = find_fixed_points(g, BoxRect(-2.1, 2.3, -1.9, 2.2), 1e-6)
    assert res.complete
    assert len(res.fixed) == 2
    for r in roots:
        assert any(c.box.contains(r, closed=True) for c in res.fixed)
