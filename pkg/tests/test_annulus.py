import math

import numpy as np
import pytest

from bclab.annulus import (PuncturedChart, box_inside, essential, fixed_point_in_fill, lift, lift_fixing_residual,
                           lifted_copy, puncture, select_lift_fixing)
from bclab.errors import CannotPuncture, NoDisjointLift, PointInSet, PreconditionFailed
from bclab.fixedpoints import count_periodic
from bclab.maps import (Composed, Identity, Monomial, Quadratic, Rotation, RotationCover, Translation, Twist,
                        julia_dust)
from bclab.perturbation import NormalizedModel, PerturbationMap
from bclab.plane import BoxRect
from bclab.region import annulus_region, circle_region, disc_region, fill, separates

FRAME = BoxRect(-2, 2, -2, 2)


def test_chart_roundtrip():
    rng = np.random.default_rng(0)
    ch = PuncturedChart(0.3 - 0.2j)
    z = rng.uniform(-3, 3, 10_000) + 1j * rng.uniform(-3, 3, 10_000)
    assert ch.roundtrip_residual(z) < 1e-10
    u = ch.to_strip(z).real
    assert u.min() >= 0 and u.max() < 1


def test_puncture_examples():
    g = puncture(Monomial(2), 0)
    assert g.degree == 2 and g.c == 0
    with pytest.raises(CannotPuncture):
        puncture(Quadratic(1), 0)


def test_puncture_perturbed_model():
    model = NormalizedModel()
    g = puncture(PerturbationMap(model).perturbed(), complex(model.c), samples=500)
    assert g.degree == 2


def test_square_lift_formula():
    L = lift(puncture(Monomial(2), 0))
    w = np.array([0.3 + 0.2j, -1.7 + 0.5j])
    assert np.allclose(L(w), 2 * w)
    L1 = lift(puncture(Monomial(2), 0), 1)
    assert np.allclose(L1(w) - L(w), 1)


@pytest.mark.parametrize("f", [Monomial(2), Monomial(3), Composed(Identity(), Monomial(2)),
                               Composed(Rotation(0.4), Monomial(3))], ids=["m2", "m3", "m2_cont", "m3_rot"])
def test_lift_residuals(f):
    L = lift(puncture(f, 0, samples=500))
    assert L.deck_residual(10_000) < 1e-9
    assert L.projection_residual(10_000) < 1e-9


def test_continued_lift_agrees_with_exact():
    rng = np.random.default_rng(1)
    w = rng.uniform(-2, 2, 2000) + 1j * rng.uniform(-1, 1, 2000)
    exact = lift(puncture(Monomial(2), 0))(w)
    cont = lift(puncture(Composed(Identity(), Monomial(2)), 0))(w)
    assert np.abs(exact - cont).max() < 1e-9


def test_perturbed_model_lift():
    model = NormalizedModel()
    L = lift(puncture(PerturbationMap(model).perturbed(), complex(model.c), samples=500))
    assert L.deck_residual(1000, v_range=(-3, 1)) < 1e-9
    assert L.projection_residual(1000, v_range=(-3, 1)) < 1e-9


def test_essential_examples():
    circle = circle_region(0, 1.0, FRAME, 1e-2)
    assert essential(circle, 0)
    dust_far = disc_region(1.5, 0.2, FRAME, 1e-2)
    assert not essential(dust_far, 0)
    julia = julia_dust(0, 12, FRAME, 1e-2)
    assert essential(julia, 0)
    with pytest.raises(PointInSet):
        essential(circle, 1.0)


def test_essential_matches_separates_from_corner():
    rng = np.random.default_rng(2)
    for _ in range(10):
        c = complex(*rng.uniform(-1, 1, 2))
        K = circle_region(complex(*rng.uniform(-0.5, 0.5, 2)), rng.uniform(0.3, 1.2), FRAME, 2e-2)
        if K.contains(c):
            continue
        corner = complex(K.frame.x_lo + 0.01, K.frame.y_lo + 0.01)
        assert essential(K, c) == separates(K, c, corner)


def test_lifted_copy_is_bounded():
    K = disc_region(1.0, 0.3, FRAME, 1e-2)
    w = lifted_copy(K, 0)
    assert w.real.max() - w.real.min() < 1
    with pytest.raises(NoDisjointLift):
        lifted_copy(circle_region(0, 1.0, FRAME, 1e-2), 0)


def test_select_lift_identity():
    K = disc_region(1.0, 0.3, FRAME, 1e-2)
    L = select_lift_fixing(puncture(Identity(), 0, samples=200), K)
    assert L.lift_offset == 0
    assert lift_fixing_residual(L, K) < 1e-12


def test_select_lift_twist():
    frame = BoxRect(-2, 4, -2, 2)
    K = disc_region(2.0, 0.5, frame, 1e-2)
    g = puncture(Twist(0.3, 2.0, 0.8, 1.5), -1.0, samples=200)
    L = select_lift_fixing(g, K)
    assert L.lift_offset == 0
    assert lift_fixing_residual(L, K) <= 2 * K.delta / 2.5
    # another lift moves the copy by whole deck steps
    other = lift(g, 1)
    assert lift_fixing_residual(other, K) > 0.9


def test_select_lift_essential_circle():
    with pytest.raises(NoDisjointLift):
        select_lift_fixing(puncture(Monomial(2), 0), circle_region(0, 1.0, FRAME, 1e-2))


def test_monomial_annulus_counts():
    for d in (2, 3):
        for n in (1, 2, 3):
            got = count_periodic(Monomial(d), n, BoxRect(-1.5, 1.5, -1.5, 1.5), 1e-6, puncture=0, r_in=0.1)
            assert got == d ** n - 1


def test_fixed_point_in_fill_rotation():
    K = circle_region(0, 1.0, FRAME, 1e-2)
    U = annulus_region(0, 0.9, 1.1, FRAME, 1e-2)
    cert = fixed_point_in_fill(Rotation(math.pi / 2), K, U, delta=1e-6)
    assert cert.index == 1 and cert.contains(0)
    assert box_inside(cert.box, fill(U))


def test_fixed_point_in_fill_rotation_cover():
    frame = BoxRect(-3, 3, -3, 3)
    K = circle_region(0, 1.0, frame, 1e-2)
    U = annulus_region(0, 0.9, 1.1, frame, 1e-2)
    cert = fixed_point_in_fill(RotationCover(0.7), K, U, delta=1e-6)
    assert cert.index == 1 and cert.contains(0)


def test_fixed_point_in_fill_identity_and_translation():
    K = circle_region(0, 1.0, FRAME, 1e-2)
    U = annulus_region(0, 0.9, 1.1, FRAME, 1e-2)
    cert = fixed_point_in_fill(Identity(), K, U)
    assert cert.witness is not None
    with pytest.raises(PreconditionFailed):
        fixed_point_in_fill(Translation(0.5), K, U)
    with pytest.raises(PreconditionFailed):
        fixed_point_in_fill(Rotation(0.3), K, annulus_region(0, 0.95, 1.0, FRAME, 1e-2))
