from fractions import Fraction

import numpy as np
import pytest
import sympy as sp

from toric_prescribe.errors import DegeneratePolytopeError
from toric_prescribe.polytope import make_pentagon, make_simplex, make_trapezium, shrink
from toric_prescribe.quadrature import (
    exact_polygon_monomial,
    exact_triangle_monomial,
    gauss_legendre,
    polygon_scheme,
    scheme_pentagon,
    scheme_shrunken,
    scheme_trapezium,
)
from toric_prescribe.selfcheck import monomial_errors

POLYTOPES = {"trapezium": make_trapezium(1.0), "pentagon": make_pentagon(2.0), "simplex": make_simplex()}


def test_gauss_legendre_small():
    x, w = gauss_legendre(1)
    assert np.array_equal(x, [0.0]) and np.array_equal(w, [2.0])
    x, w = gauss_legendre(2)
    assert np.allclose(x, [-1 / np.sqrt(3), 1 / np.sqrt(3)], atol=1e-15)
    assert np.allclose(w, [1.0, 1.0], atol=1e-15)


def test_gauss_legendre_exactness():
    x, w = gauss_legendre(20)
    assert np.dot(w, x**38) == pytest.approx(2 / 39, abs=1e-14)
    assert np.all(w > 0) and w.sum() == pytest.approx(2.0, abs=1e-14)
    assert np.array_equal(x, -x[::-1])


def test_gauss_legendre_matches_numpy():
    for n in (3, 7, 20, 40):
        x, w = gauss_legendre(n)
        xr, wr = np.polynomial.legendre.leggauss(n)
        assert np.allclose(x, xr, atol=1e-14) and np.allclose(w, wr, atol=1e-14)


def test_gauss_legendre_bad_n():
    with pytest.raises(ValueError):
        gauss_legendre(0)


@pytest.mark.parametrize("name", sorted(POLYTOPES))
def test_weights_sum_to_area(name):
    P = POLYTOPES[name]
    sch = polygon_scheme(P)
    assert sch.weights.sum() == pytest.approx(P.volume(), abs=1e-12)
    assert np.all(sch.weights > 0)
    assert np.all(P.contains(sch.points, 0.0))


def test_point_counts():
    assert len(scheme_trapezium(make_trapezium(1.0))) == 800
    assert len(scheme_pentagon(make_pentagon(2.0))) == 800
    with pytest.raises(ValueError):
        scheme_trapezium(make_pentagon(2.0))


def test_first_moments():
    P = make_trapezium(1.0)
    sch = polygon_scheme(P)
    exact = float(exact_polygon_monomial(P.vertices(), 1, 0))
    assert sch.integrate(sch.points[:, 0]) == pytest.approx(exact, abs=1e-12)
    Q = make_pentagon(2.0)
    sq = polygon_scheme(Q)
    t = float(exact_polygon_monomial(Q.vertices(), 1, 0) + exact_polygon_monomial(Q.vertices(), 0, 1))
    assert t < 0
    assert sq.integrate(sq.points.sum(axis=1)) == pytest.approx(t, abs=1e-12)


def test_shrunken():
    P = make_pentagon(2.0)
    a, b = scheme_shrunken(P, 0.0), polygon_scheme(P)
    assert np.array_equal(a.points, b.points) and np.array_equal(a.weights, b.weights)
    s = scheme_shrunken(P, 0.005)
    # square [-0.995, 0.995]^2 minus the corner beyond x1 + x2 = 0.995 (legs 0.995)
    by_hand = 1.99**2 - 0.995**2 / 2
    assert s.weights.sum() == pytest.approx(by_hand, abs=1e-12)
    assert shrink(P, 0.005).volume() == pytest.approx(by_hand, abs=1e-12)
    with pytest.raises(DegeneratePolytopeError):
        scheme_shrunken(P, 5.0)


def test_triangle_oracle_against_sympy():
    x, y = sp.symbols("x y")
    tri = [(-1, -1), (2, -1), (-1, 2)]
    for p, q in [(0, 0), (1, 0), (3, 2), (5, 4)]:
        exact = sp.integrate(sp.integrate(x**p * y**q, (y, -1, 1 - x)), (x, -1, 2))
        assert exact_triangle_monomial(tri, p, q) == Fraction(int(exact.p), int(exact.q))


@pytest.mark.parametrize("name", sorted(POLYTOPES))
def test_monomials_up_to_degree_30(name):
    P = POLYTOPES[name]
    sch = polygon_scheme(P, 20)
    verts = P.vertices()
    worst = 0.0
    for k in range(31):
        for p in range(k + 1):
            f = sch.points[:, 0] ** p * sch.points[:, 1] ** (k - p)
            exact = float(exact_polygon_monomial(verts, p, k - p))
            scale = max(abs(exact), float(np.dot(sch.weights, np.abs(f))))
            worst = max(worst, abs(sch.integrate(f) - exact) / scale)
    assert worst <= 1e-12


def test_selfcheck_monomials():
    assert monomial_errors(12) <= 1e-12


def test_refinement_agrees():
    P = make_pentagon(2.0)
    f = lambda X: np.exp(0.4 * X[:, 0] - 0.3 * X[:, 1]) * np.cos(X[:, 0] * X[:, 1])
    a, b = polygon_scheme(P, 20), polygon_scheme(P, 30)
    assert a.integrate(f(a.points)) == pytest.approx(b.integrate(f(b.points)), abs=1e-10)
