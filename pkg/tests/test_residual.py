import numpy as np
import pytest
import sympy as sp

import oracles
import symbolic as sy
from symbolic import x1, x2
from toric_prescribe import curvature
from toric_prescribe.basis import Jet4, SymplecticPotential, make_basis, potential_jet
from toric_prescribe.curvature import ScalarField2Jet, metric_data
from toric_prescribe.errors import SingularEvaluationError
from toric_prescribe.polytope import make_pentagon, make_simplex, make_trapezium, shrink
from toric_prescribe.quadrature import exact_polygon_monomial, polygon_scheme
from toric_prescribe.residual import (
    ConformalData,
    PointEvaluator,
    ResidualKind,
    ResidualSpec,
    SolitonData,
    WeightMode,
    error_metrics,
    field_jet_phi_qe,
    field_jet_sigma,
    max_grid,
    objective,
    qe_tensor_A,
    residual_components,
    residual_values,
    t1,
    t1_values,
    t2_components,
    t2_tensor,
    t3_components,
    t4,
    t4_values,
    tensor_norm,
)
from toric_prescribe.selfcheck import random_pentagon_sample

LPP = (0.076527, 1.002924, -0.588325)
PT = (0.3, -0.2)


def rat(v):
    return sp.Rational(v).limit_denominator(10**6)


def flat_md(n=3):
    return metric_data(Jet4(np.zeros(n), np.zeros((n, 2)), np.tile(np.eye(2), (n, 1, 1)), np.zeros((n, 2, 2, 2)), np.zeros((n, 2, 2, 2, 2))))


def zero_field(n=3):
    return ScalarField2Jet(np.zeros(n), np.zeros((n, 2)), np.zeros((n, 2, 2)))


@pytest.fixture(scope="module")
def trapezium_potential():
    """A perturbed trapezium(1) potential with rational coefficients, numerically and symbolically."""
    basis = make_basis(3, "z2")
    c = [rat(v) for v in (0.02, -0.03, 0.01, 0.015)]
    F = sum(ci * (x1**a * x2**b + (x1**b * x2**a if a != b else 0)) for ci, (a, b) in zip(c, basis.generators))
    ls = [x1 + x2 + 1, 1 + x1, 1 + x2, 1 - x1 - x2]
    u = sp.Rational(1, 2) * sum(l * sp.log(l) for l in ls) + F
    return SymplecticPotential(make_trapezium(1.0), basis, np.array([float(v) for v in c])), u


# closed-form cases ----------------------------------------------------------------


def test_flat_quadratic_residuals():
    md = flat_md()
    assert np.allclose(t1_values(md, zero_field()), -4.0)
    R = t2_tensor(md, zero_field())
    assert np.allclose(R, -np.eye(2))
    assert np.allclose(tensor_norm(R), np.sqrt(2.0))
    assert np.allclose(t4_values(md, zero_field(), zero_field(), 2.0), -4.0)


def test_components_square_to_norm():
    rng = np.random.default_rng(3)
    A = rng.normal(size=(7, 2, 2))
    R = A + np.swapaxes(A, 1, 2)
    c = residual_components(R, ResidualKind.T2)
    assert np.allclose(np.sqrt(np.sum(c * c, -1)), tensor_norm(R))
    assert residual_components(R[:, 0, 0], ResidualKind.T1).shape == (7, 1)


def test_trivial_conformal_data_gives_einstein_tensor():
    # sigma = phi = 0: the prescribed tensor is the metric itself and T3 reduces to T2
    md = flat_md()
    assert np.allclose(qe_tensor_A(md, zero_field(), zero_field(), 2.0), np.eye(2))
    S, X = random_pentagon_sample(10)
    cd = ConformalData(0.0, 1.0, 0.0, 2.0)
    assert np.allclose(t3_components(S, cd, X), t2_components(S, SolitonData(0.0), X), atol=1e-13)


def test_fubini_study_residuals_vanish():
    P = make_simplex()
    S = SymplecticPotential(P, make_basis(2), np.zeros(2))
    X = max_grid(P, 41, 0.01)
    assert np.max(np.abs(t1(S, SolitonData(0.0), X))) <= 1e-8
    assert np.max(np.abs(t2_components(S, SolitonData(0.0), X))) <= 1e-8


def test_sigma_phi_fields():
    x = np.array([[0.0, 0.0], [0.2, -0.5]])
    f = field_jet_sigma(ConformalData(0.0, 1.0, 0.3, 2.0), x)
    assert not np.any(f.value) and not np.any(f.grad) and not np.any(f.hess)
    b, c, d = 0.076527, 1.002924, 0.588325
    cd = ConformalData(b, c, d, 2.0)
    assert field_jet_sigma(cd, np.zeros(2)).value == pytest.approx(-np.log(c), rel=1e-15)
    assert field_jet_phi_qe(cd, np.zeros(2)).value == pytest.approx(-2 * np.log((d * c + 1) / c), rel=1e-15)
    # d c + 1 = c makes phi vanish at t = 0
    c2 = 1.2
    assert field_jet_phi_qe(ConformalData(0.1, c2, (c2 - 1) / c2, 3.0), np.zeros(2)).value == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("which", ["sigma", "phi"])
def test_field_jets_against_fd(which):
    b, c, d = LPP
    eps = np.array([0.05, -0.02, 0.01, 0.03, -0.01])  # eps basis of degree 2
    cd = ConformalData(b, c, d, 2.0, eps1=eps, eps2=-eps)
    fn = field_jet_sigma if which == "sigma" else field_jet_phi_qe
    X = np.array([[0.1, 0.2], [-0.4, 0.3], [0.5, -0.6]])
    J = fn(cd, X)
    val = lambda Y: fn(cd, Y).value
    h = 1e-5
    grad = np.stack([oracles.d1(val, X, i, h) for i in range(2)], -1)
    hess = np.stack([np.stack([oracles.d1(lambda Y: fn(cd, Y).grad[..., j], X, i, h) for j in range(2)], -1) for i in range(2)], -2)
    assert np.max(np.abs(grad - J.grad)) / np.max(np.abs(J.grad)) <= 1e-8
    assert np.max(np.abs(hess - J.hess)) / np.max(np.abs(J.hess)) <= 1e-8


def test_sigma_singular():
    with pytest.raises(SingularEvaluationError):
        field_jet_sigma(ConformalData(1.0, 0.5, 0.0, 2.0), np.array([-1.0, -0.5]))


def test_conformal_data_validation():
    with pytest.raises(ValueError):
        ConformalData(0.0, 1.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        ConformalData(0.0, 1.0, 0.0, 2.0, eps1=np.zeros(2))


def test_tensor_kinds_need_shrunken_region():
    with pytest.raises(ValueError):
        ResidualSpec(ResidualKind.T3, 0.0)
    assert ResidualSpec.default("t2").delta == 0.005
    assert ResidualSpec.default("t1").delta == 0.0


# finite-difference and symbolic oracles ---------------------------------------------


def test_t1_t2_against_fd_pipeline():
    P = make_pentagon(2.0)
    S = SymplecticPotential(P, make_basis(2), np.zeros(2))
    k = -0.434748
    X = np.array([[0.0, 0.0], [0.3, -0.4], [-0.5, 0.2]])
    phi = lambda Y: k * (Y[..., 0] + Y[..., 1])
    fd_t1 = oracles.scalar(S, X) + oracles.laplacian(S, X, phi) - 4
    fd_t2 = oracles.ricci(S, X) + oracles.covariant_hessian(S, X, phi) - potential_jet(S, X).hess
    assert np.max(np.abs(t1(S, SolitonData(k), X) - fd_t1)) <= 1e-5 * max(1, np.max(np.abs(fd_t1)))
    assert np.max(np.abs(t2_components(S, SolitonData(k), X) - fd_t2)) <= 1e-5 * max(1, np.max(np.abs(fd_t2)))


def test_soliton_residuals_against_symbolic_geometry(trapezium_potential):
    S, u = trapezium_potential
    k = rat(0.52762)
    E, g = sy.qe_defect(u, sp.Integer(0), k * (x1 + x2), m=sp.oo)
    Exx, tr = sy.evaluate(E, g, PT)
    sd = SolitonData(float(k))
    X = np.array([PT])
    assert np.allclose(t2_components(S, sd, X)[0], Exx, rtol=0, atol=1e-11)
    assert t1(S, sd, X)[0] == pytest.approx(tr, abs=1e-11)


def test_quasi_einstein_residuals_against_symbolic_geometry(trapezium_potential):
    """T3 is the x-x block and T4 the conformal trace of the full quasi-Einstein defect."""
    S, u = trapezium_potential
    B, C, D = (rat(v) for v in LPP)
    m = 2
    t = x1 + x2
    sigma = -sp.log(B * t + C)
    phi = -m * sp.log((D * (B * t + C) + 1) / (B * t + C))
    E, g = sy.qe_defect(u, sigma, phi, m)
    Exx, tr = sy.evaluate(E, g, PT)
    cd = ConformalData(float(B), float(C), float(D), m)
    X = np.array([PT])
    assert np.allclose(t3_components(S, cd, X)[0], Exx, rtol=0, atol=1e-11)
    assert t4(S, cd, X)[0] == pytest.approx(tr, abs=1e-11)


def test_general_fields_against_symbolic_geometry():
    """The conformal tensor with sigma and phi that are not functions of x1 + x2 alone."""
    u = (x1**2 + x2**2) / 2 + x1**2 * x2 / 10 + x2**4 / 20
    sigma = x1 / 5 - x2**2 / 7 + x1 * x2 / 9
    phi = x1**2 / 3 + x2 / 4 - x1 * x2**2 / 5
    m = 3
    E, g = sy.qe_defect(u, sigma, phi, m)
    pt = (0.2, 0.1)
    Exx, tr = sy.evaluate(E, g, pt)
    uj = [sy.field_jet(sp.diff(u, *v), pt)[0] for v in [(x1, x1), (x1, x2), (x2, x2)]]
    d3 = lambda *v: float(sp.diff(u, *v).subs({x1: pt[0], x2: pt[1]}))
    idx = [x1, x2]
    third = np.array([[[d3(idx[i], idx[j], idx[k]) for k in range(2)] for j in range(2)] for i in range(2)])
    fourth = np.array([[[[d3(idx[i], idx[j], idx[k], idx[l]) for l in range(2)] for k in range(2)] for j in range(2)] for i in range(2)])
    hess = np.array([[uj[0], uj[1]], [uj[1], uj[2]]])
    md = metric_data(Jet4(np.float64(0.0), np.zeros(2), hess, third, fourth))
    sj = ScalarField2Jet(*sy.field_jet(sigma, pt))
    pj = ScalarField2Jet(*sy.field_jet(phi, pt))
    R = curvature.ricci_xx(md) - qe_tensor_A(md, sj, pj, m)
    assert np.allclose(R, Exx, rtol=0, atol=1e-12)
    assert t4_values(md, sj, pj, m) == pytest.approx(tr, abs=1e-12)


# objective and metrics -------------------------------------------------------------


def test_objective_constant_and_polynomial(monkeypatch):
    import toric_prescribe.residual as res

    P = make_pentagon(2.0)
    sch = polygon_scheme(P)
    S = SymplecticPotential(P, make_basis(2), np.zeros(2))
    monkeypatch.setattr(res, "residual_values", lambda S, data, kind, x, chunk=4096: np.ones(len(np.asarray(x).reshape(-1, 2))))
    spec = ResidualSpec(ResidualKind.T1)
    r, I = objective(S, None, spec, sch)
    assert I == pytest.approx(P.volume(), abs=1e-12)
    em = error_metrics(S, None, spec, sch, grid_n=31)
    assert em.normalized == pytest.approx(np.sqrt(P.volume()) / P.volume(), abs=1e-12)
    assert em.max_abs == 1.0
    monkeypatch.setattr(res, "residual_values", lambda S, data, kind, x, chunk=4096: np.zeros(len(np.asarray(x).reshape(-1, 2))))
    assert objective(S, None, spec, sch)[1] == 0.0
    # T = x1 x2: I is the exact integral of x1^2 x2^2
    monkeypatch.setattr(res, "residual_values", lambda S, data, kind, x, chunk=4096: np.prod(np.asarray(x).reshape(-1, 2), axis=1))
    exact = float(exact_polygon_monomial(P.vertices(), 2, 2))
    assert objective(S, None, spec, sch)[1] == pytest.approx(exact, abs=1e-12)
    plain = objective(S, None, ResidualSpec(ResidualKind.T1, 0.0, WeightMode.PLAIN), sch)[1]
    assert plain == pytest.approx(float(np.sum((sch.weights * np.prod(sch.points, axis=1)) ** 2)))


def test_objective_invariant_under_resplitting():
    P = make_pentagon(2.0)
    S, _ = random_pentagon_sample(1)
    sd = SolitonData(-0.434748)
    spec = ResidualSpec(ResidualKind.T1)
    I20 = objective(S, sd, spec, polygon_scheme(P, 20))[1]
    I30 = objective(S, sd, spec, polygon_scheme(P, 30))[1]
    assert I20 == pytest.approx(I30, rel=1e-6)


def test_point_evaluator_matches_pointwise_api():
    S, X = random_pentagon_sample(12)
    ev = PointEvaluator(S.polytope, S.basis, X, ResidualKind.T2)
    sd = SolitonData(-0.4)
    assert np.allclose(ev.raw(S.coeffs, sd), t2_components(S, sd, X), rtol=1e-14, atol=1e-14)
    assert np.allclose(ev.values(S.coeffs, sd), residual_values(S, sd, "t2", X))
    batch = ev.values(np.stack([S.coeffs, 2 * S.coeffs]), sd)
    S2 = SymplecticPotential(S.polytope, S.basis, 2 * S.coeffs)
    assert np.allclose(batch[1], residual_values(S2, sd, "t2", X))


@pytest.mark.parametrize("kind", list(ResidualKind))
def test_z2_equivariance(kind):
    S, X = random_pentagon_sample(15)
    eps = np.array([0.03, -0.02, 0.01, 0.02, -0.01])
    data = ConformalData(-0.0744357, 1.00482, -0.463585, 2.0, eps1=eps, eps2=eps / 2) if kind.quasi_einstein else SolitonData(-0.434748)
    a = residual_values(S, data, kind, X)
    b = residual_values(S, data, kind, X[:, ::-1])
    assert np.allclose(a, b, rtol=1e-11, atol=1e-11)


def test_max_grid_region():
    P = make_trapezium(1.0)
    X = max_grid(P, 201, 0.005)
    assert np.all(P.values(X) > 0.005 - 1e-12)
    assert np.all(shrink(P, 0.005).contains(X, -1e-12))
    assert len(X) > 15000
