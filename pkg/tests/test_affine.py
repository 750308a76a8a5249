import math

import numpy as np
import pytest

from pararadon.affine import (CurveChart, Reparam, SurfaceChart, affine_invariance_defect,
                              apply_linear, arclength_density, bordered_determinant,
                              chart_by_name, circle_chart, compose_surface, measure,
                              parabola_chart, paraboloid_chart,
                              reparam_invariance_defect, surface_density)


def test_parabola_density():
    chart = parabola_chart()
    # det(gamma', gamma'') = 2, exponent 2/(d(d+1)) = 1/3
    assert arclength_density(chart, 0.5) == pytest.approx(2 ** (1 / 3), abs=1e-12)
    with pytest.raises(ValueError):
        arclength_density(chart, 5.0)


def test_circle_density_and_measure():
    chart = circle_chart()
    for t in (0.0, 1.0, 4.0):
        assert arclength_density(chart, t) == pytest.approx(1.0, abs=1e-12)
    assert measure(chart, step=1e-3) == pytest.approx(2 * math.pi, abs=1e-6)


def test_degenerate_curve():
    flat = CurveChart(2, (0.0, 1.0), lambda t: np.array([t, 0.0]),
                      {1: lambda t: np.array([1.0, 0.0]), 2: lambda t: np.array([0.0, 0.0])})
    assert arclength_density(flat, 0.5) == 0.0


def test_paraboloid_surface_density():
    for d in (2, 3, 4):
        chart = paraboloid_chart(d)
        t = np.full(d - 1, 0.2)
        assert surface_density(chart, t) == pytest.approx(2 ** ((d - 1) / (d + 1)), abs=1e-12)


def test_plane_surface_density():
    chart = SurfaceChart(3, ((-1, 1), (-1, 1)),
                         lambda t: np.array([t[0], t[1], 0.0]),
                         jacobian=lambda t: np.array([[1.0, 0], [0, 1.0], [0, 0]]),
                         hessian=lambda t: np.zeros((3, 2, 2)))
    assert surface_density(chart, np.zeros(2)) == 0.0


def test_dimension_two_consistency():
    # at d = 2 the surface and curve exponents coincide: both give 2^(1/3)
    curve = parabola_chart()
    surf = paraboloid_chart(2)
    for t in (0.1, 0.3, 0.7):
        assert surface_density(surf, np.array([t])) == pytest.approx(
            arclength_density(curve, t), abs=1e-12)


def test_parabola_measure():
    assert measure(parabola_chart(), step=1e-3) == pytest.approx(2 ** (1 / 3), abs=1e-6)
    assert measure(parabola_chart(), region=(0.3, 0.3), step=1e-3) == 0.0
    with pytest.raises(ValueError):
        measure(parabola_chart(), region=(0.0, 5.0))


def test_mixed_partial_validation():
    bad = lambda t: np.array([[[0.0, 1.0], [0.0, 0.0]]] * 3)
    with pytest.raises(ValueError):
        SurfaceChart(3, ((-1, 1), (-1, 1)), lambda t: np.array([t[0], t[1], t[0] * t[1]]),
                     jacobian=lambda t: np.array([[1.0, 0], [0, 1.0], [t[1], t[0]]]),
                     hessian=bad)


def test_linear_invariance_curve():
    chart = parabola_chart()
    assert affine_invariance_defect(chart, np.eye(2), step=1e-3) == pytest.approx(0.0, abs=1e-14)
    rng = np.random.default_rng(0)
    for _ in range(3):
        A = rng.uniform(-1, 1, (2, 2))
        A += np.sign(np.linalg.det(A)) * 1.2 * np.eye(2)
        assert affine_invariance_defect(chart, A, step=1e-3) <= 1e-6
    fd_chart = parabola_chart(analytic=False)
    assert affine_invariance_defect(fd_chart, A, step=1e-3) <= 1e-3
    with pytest.raises(ValueError):
        affine_invariance_defect(chart, np.zeros((2, 2)))


def test_linear_invariance_surface():
    # A = 2I in d = 3: factor |det A|^((d-1)/(d+1)) = 8^(1/2)
    chart = paraboloid_chart(3, halfwidth=0.8)
    base = measure(chart, step=2e-2)
    mapped = measure(apply_linear(chart, 2 * np.eye(3)), step=2e-2)
    assert mapped == pytest.approx(math.sqrt(8) * base, rel=1e-10)
    assert affine_invariance_defect(chart, 2 * np.eye(3), step=2e-2) <= 1e-8


def test_pointwise_density_scaling():
    # density(A o gamma) = |det A|^(1/3) density(gamma) pointwise for d = 2
    chart = parabola_chart()
    A = np.array([[1.5, 0.2], [-0.3, 0.8]])
    mapped = apply_linear(chart, A)
    for t in (0.1, 0.5, 0.9):
        assert arclength_density(mapped, t) == pytest.approx(
            abs(np.linalg.det(A)) ** (1 / 3) * arclength_density(chart, t), rel=1e-12)
    surf = paraboloid_chart(3)
    B = np.array([[1.2, 0.1, 0.0], [0.0, 0.9, 0.2], [0.1, 0.0, 1.1]])
    mapped_s = apply_linear(surf, B)
    t = np.array([0.2, -0.3])
    assert surface_density(mapped_s, t) == pytest.approx(
        abs(np.linalg.det(B)) ** 0.5 * surface_density(surf, t), rel=1e-12)


def test_reparam_curve():
    chart = parabola_chart(interval=(0.0, 2.0))
    ident = Reparam(lambda t: t, lambda t: 1.0)
    assert reparam_invariance_defect(chart, ident, (0.0, 1.0), step=1e-3) <= 1e-14
    phi = Reparam(lambda t: t**3 + t, lambda t: 3 * t**2 + 1, lambda t: 6 * t,
                  lambda t: 6.0)
    assert reparam_invariance_defect(chart, phi, (0.0, 1.0), step=1e-3) <= 1e-6


def test_reparam_rejects_folds():
    chart = parabola_chart(interval=(-2.0, 2.0))
    fold = Reparam(lambda t: t * t, lambda t: 2 * t, lambda t: 2.0)
    with pytest.raises(ValueError):
        reparam_invariance_defect(chart, fold, (-1.0, 1.0), step=1e-2)


def test_reparam_surface_shear():
    S = np.array([[1.0, 0.4], [0.0, 1.0]])
    phi = Reparam(lambda t: S @ t, lambda t: S, lambda t: np.zeros((2, 2, 2)))
    chart = paraboloid_chart(3, halfwidth=3.0)
    defect = reparam_invariance_defect(chart, phi, ((-0.5, 0.5), (-0.5, 0.5)), step=2e-2)
    assert defect <= 1e-6


def test_pointwise_composition_identity():
    # |L_{F o phi}(0)| = |det(phi)|^{d+1} |L_F(0)| for linear phi
    S = np.array([[1.3, 0.5], [-0.2, 0.9]])
    phi = Reparam(lambda t: S @ t, lambda t: S, lambda t: np.zeros((2, 2, 2)))
    chart = paraboloid_chart(3, halfwidth=4.0)
    comp = compose_surface(chart, phi, ((-1, 1), (-1, 1)))
    z = np.zeros(2)
    lhs = abs(bordered_determinant(comp, z))
    rhs = abs(np.linalg.det(S)) ** 4 * abs(bordered_determinant(chart, z))
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_fd_matches_analytic():
    t = 0.37
    assert arclength_density(parabola_chart(analytic=False), t) == pytest.approx(
        arclength_density(parabola_chart(), t), abs=1e-4)
    pt = np.array([0.2, 0.1])
    assert surface_density(paraboloid_chart(3, analytic=False), pt) == pytest.approx(
        surface_density(paraboloid_chart(3), pt), abs=1e-4)


def test_chart_library():
    assert isinstance(chart_by_name("parabola"), CurveChart)
    assert isinstance(chart_by_name("circle"), CurveChart)
    assert isinstance(chart_by_name("paraboloid", dim=4), SurfaceChart)
    poly = chart_by_name("polynomial", coefficients=[1.0, 0.0, 0.0])  # t^2
    assert arclength_density(poly, 0.5) == pytest.approx(2 ** (1 / 3), abs=1e-12)
    with pytest.raises(ValueError):
        chart_by_name("sphere")
    with pytest.raises(ValueError):
        chart_by_name("polynomial")
