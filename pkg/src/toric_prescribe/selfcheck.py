"""Self-tests run by ``toric-prescribe quadcheck``.

Curvature routines are looked up through the module at call time so that a
deliberately broken implementation is caught by the checks.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import curvature
from .basis import SymplecticPotential, Symmetry, canonical_jet, make_basis, potential_jet
from .polytope import make_pentagon, make_simplex, make_trapezium, shrink
from .quadrature import exact_polygon_monomial, polygon_scheme
from .residual import max_grid


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value) and self.value <= self.tolerance)

    def to_dict(self) -> dict:
        return {**asdict(self), "passed": self.passed}


def standard_polytopes():
    return {"trapezium(1)": make_trapezium(1.0), "pentagon(2)": make_pentagon(2.0), "simplex": make_simplex()}


def trapezium_area(a: float) -> float:
    # the big triangle minus the corner cut off by a + x1 + x2 >= 0
    return 4.5 - (2.0 - a) ** 2 / 2


def pentagon_area(a: float) -> float:
    return a * a - (a - 1.0) ** 2 / 2


def check_areas() -> Check:
    expected = {"trapezium(1)": trapezium_area(1.0), "pentagon(2)": pentagon_area(2.0), "simplex": 4.5}
    err = 0.0
    for name, P in standard_polytopes().items():
        err = max(err, abs(P.volume() - expected[name]), abs(polygon_scheme(P).weights.sum() - expected[name]))
    return Check("areas", err, 1e-12)


def monomial_errors(max_degree: int = 30, n: int = 20) -> float:
    """Largest relative error of the quadrature on ``x1^p x2^q`` with ``p + q <= max_degree``."""
    worst = 0.0
    for P in standard_polytopes().values():
        sch = polygon_scheme(P, n)
        verts = P.vertices()
        x1, x2 = sch.points[:, 0], sch.points[:, 1]
        for k in range(max_degree + 1):
            for p in range(k + 1):
                q = k - p
                f = x1**p * x2**q
                exact = float(exact_polygon_monomial(verts, p, q))
                scale = max(abs(exact), float(np.dot(sch.weights, np.abs(f))))
                worst = max(worst, abs(sch.integrate(f) - exact) / scale)
    return worst


def check_monomials(max_degree: int = 30) -> Check:
    return Check(f"monomials(deg<={max_degree})", monomial_errors(max_degree), 1e-12)


def random_pentagon_sample(n_points: int = 50, degree: int = 4, scale: float = 0.05, seed: int = 0):
    rng = np.random.default_rng(seed)
    P = make_pentagon(2.0)
    basis = make_basis(degree, Symmetry.Z2)
    coeffs = rng.uniform(-scale, scale, len(basis))
    inner = shrink(P, 0.1)
    lo, hi = inner.bounding_box()
    pts = []
    while len(pts) < n_points:
        x = rng.uniform(lo, hi)
        if inner.contains(x[None, :])[0]:
            pts.append(x)
    return SymplecticPotential(P, basis, coeffs), np.array(pts)


def check_jets_fd(n_points: int = 20, h: float = 1e-5) -> Check:
    """Analytic third and fourth derivatives against central differences of lower ones."""
    S, X = random_pentagon_sample(n_points)
    J = potential_jet(S, X)
    worst = 0.0
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        Jp, Jm = potential_jet(S, X + e), potential_jet(S, X - e)
        d3 = (Jp.hess - Jm.hess) / (2 * h)
        d4 = (Jp.third - Jm.third) / (2 * h)
        worst = max(worst, np.max(np.abs(d3 - J.third[..., i])) / np.max(np.abs(J.third)))
        worst = max(worst, np.max(np.abs(d4 - J.fourth[..., i])) / np.max(np.abs(J.fourth)))
    return Check("jet-vs-fd", float(worst), 1e-6)


def check_trace_identity(n_points: int = 50) -> Check:
    """``S = 2 tr(u^-1 Ric)`` on random points of a perturbed pentagon metric."""
    S, X = random_pentagon_sample(n_points)
    md = curvature.metric_data(potential_jet(S, X))
    scal = curvature.scalar_curvature(md)
    tr = 2 * np.einsum("...ij,...ij->...", md.uinv, curvature.ricci_xx(md))
    return Check("trace-identity", float(np.max(np.abs(scal - tr)) / max(1.0, np.max(np.abs(scal)))), 1e-10)


def check_fubini_study(delta: float = 0.01, grid_n: int = 101) -> tuple[Check, Check]:
    P = make_simplex()
    X = max_grid(P, grid_n, delta)
    md = curvature.metric_data(canonical_jet(P, X))
    ric = np.max(np.abs(curvature.ricci_xx(md) - md.u_ij))
    scal = np.max(np.abs(curvature.scalar_curvature(md) - 4.0))
    return Check("fubini-study-ricci", float(ric), 1e-8), Check("fubini-study-scalar", float(scal), 1e-8)


def run_checks(max_degree: int = 30) -> list:
    return [
        check_areas(),
        check_monomials(max_degree),
        check_jets_fd(),
        check_trace_identity(),
        *check_fubini_study(),
    ]
