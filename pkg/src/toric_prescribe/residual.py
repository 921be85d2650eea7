"""Residual integrands for the soliton and quasi-Einstein equations.

Soliton data fixes ``phi = coeff * (x1 + x2)`` with ``lambda = 1``.  The
quasi-Einstein search writes the metric as ``e^{2 sigma} g_K`` with

    sigma = -log(b t + c) + eps1,
    phi   = -m log((d (b t + c) + 1) / (b t + c)) + eps2,      t = x1 + x2,

and measures the failure of the equation transported to ``g_K`` (``T3``)
and of its trace in the conformal metric (``T4``).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .basis import MonomialBasis, PolyDesign, SymplecticPotential, Symmetry, canonical_jet, potential_jet
from .curvature import (
    MetricData,
    ScalarField2Jet,
    grad_inner,
    hessian,
    laplacian,
    metric_data,
    ricci_xx,
    scalar_curvature,
)
from .errors import SingularEvaluationError
from .polytope import Polytope, shrink
from .quadrature import QuadratureScheme

DIMENSION = 4
DEFAULT_DELTA = 0.005
DEFAULT_GRID_N = 201


class ResidualKind(str, Enum):
    T1 = "t1"
    T2 = "t2"
    T3 = "t3"
    T4 = "t4"

    @property
    def tensorial(self) -> bool:
        return self in (ResidualKind.T2, ResidualKind.T3)

    @property
    def quasi_einstein(self) -> bool:
        return self in (ResidualKind.T3, ResidualKind.T4)


class WeightMode(str, Enum):
    SQRT = "sqrt"
    PLAIN = "plain"


@dataclass(frozen=True)
class SolitonData:
    coeff: float


def eps_basis(degree: int) -> MonomialBasis:
    """Z2 basis for the sigma/phi perturbations (no constant term)."""
    return MonomialBasis(degree, Symmetry.Z2, min_degree=1)


@dataclass(frozen=True)
class ConformalData:
    b: float
    c: float
    d: float
    m: float
    mu: float | None = None
    eps1: np.ndarray | None = None
    eps2: np.ndarray | None = None

    def __post_init__(self):
        if not self.m > 1:
            raise ValueError("quasi-Einstein parameter m must exceed 1")
        for name in ("eps1", "eps2"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, np.asarray(v, dtype=float))
        if (self.eps1 is None) != (self.eps2 is None):
            raise ValueError("eps1 and eps2 must be given together")
        if self.eps1 is not None and len(self.eps1) != len(self.eps2):
            raise ValueError("eps1 and eps2 must have equal length")

    @property
    def eps_degree(self) -> int:
        if self.eps1 is None:
            return 0
        n, d = len(self.eps1), 1
        while len(eps_basis(d)) < n:
            d += 1
        if len(eps_basis(d)) != n:
            raise ValueError(f"eps length {n} does not match any degree")
        return d


@dataclass(frozen=True)
class ResidualSpec:
    kind: ResidualKind
    delta: float = 0.0
    weight_mode: WeightMode = WeightMode.SQRT

    def __post_init__(self):
        object.__setattr__(self, "kind", ResidualKind(self.kind))
        object.__setattr__(self, "weight_mode", WeightMode(self.weight_mode))
        if self.kind.tensorial and not self.delta > 0:
            raise ValueError(f"{self.kind.value} is singular at the boundary; use a shrunken region")

    @classmethod
    def default(cls, kind, weight_mode=WeightMode.SQRT) -> "ResidualSpec":
        kind = ResidualKind(kind)
        return cls(kind, DEFAULT_DELTA if kind.tensorial else 0.0, weight_mode)

    def region(self, P: Polytope) -> Polytope:
        return shrink(P, self.delta)


@dataclass(frozen=True)
class ErrorMetrics:
    normalized: float
    max_abs: float
    objective: float

    def to_dict(self) -> dict:
        return {"normalized": self.normalized, "max_abs": self.max_abs, "objective": self.objective}


# scalar fields --------------------------------------------------------------

def _affine_t_log(slope: float, const: float, t: np.ndarray, what: str) -> ScalarField2Jet:
    """Jet of ``log(slope * t + const)`` with ``t = x1 + x2``."""
    L = slope * t + const
    if np.any(~(L > 0)):
        raise SingularEvaluationError(f"{what} has a non-positive logarithm argument")
    ones = np.ones(t.shape + (2,))
    g = (slope / L)[..., None] * ones
    h = (-(slope / L) ** 2)[..., None, None] * np.ones(t.shape + (2, 2))
    return ScalarField2Jet(np.log(L), g, h)


def _scale(f: ScalarField2Jet, s: float) -> ScalarField2Jet:
    return ScalarField2Jet(s * f.value, s * f.grad, s * f.hess)


def _poly_field(design: PolyDesign | None, coeffs) -> ScalarField2Jet | None:
    if design is None or coeffs is None:
        return None
    p = design.partials(coeffs)
    grad = np.stack([p[(1, 0)], p[(0, 1)]], -1)
    hess = np.stack([np.stack([p[(2, 0)], p[(1, 1)]], -1), np.stack([p[(1, 1)], p[(0, 2)]], -1)], -2)
    return ScalarField2Jet(p[(0, 0)], grad, hess)


def sigma_field(cd: ConformalData, x, eps_design: PolyDesign | None = None) -> ScalarField2Jet:
    x = np.asarray(x, dtype=float)
    t = x[..., 0] + x[..., 1]
    f = _scale(_affine_t_log(cd.b, cd.c, t, "sigma"), -1.0)
    if cd.eps1 is not None:
        design = eps_design or PolyDesign(eps_basis(cd.eps_degree), x)
        f = f + _poly_field(design, cd.eps1)
    return f


def phi_qe_field(cd: ConformalData, x, eps_design: PolyDesign | None = None) -> ScalarField2Jet:
    x = np.asarray(x, dtype=float)
    t = x[..., 0] + x[..., 1]
    num = _affine_t_log(cd.d * cd.b, cd.d * cd.c + 1.0, t, "phi")
    den = _affine_t_log(cd.b, cd.c, t, "phi")
    f = _scale(ScalarField2Jet(num.value - den.value, num.grad - den.grad, num.hess - den.hess), -cd.m)
    if cd.eps2 is not None:
        design = eps_design or PolyDesign(eps_basis(cd.eps_degree), x)
        f = f + _poly_field(design, cd.eps2)
    return f


field_jet_sigma = sigma_field
field_jet_phi_qe = phi_qe_field


def phi_soliton_field(sd: SolitonData, x) -> ScalarField2Jet:
    x = np.asarray(x, dtype=float)
    t = x[..., 0] + x[..., 1]
    return ScalarField2Jet(sd.coeff * t, np.full(t.shape + (2,), float(sd.coeff)), np.zeros(t.shape + (2, 2)))


# residual algebra on metric data ---------------------------------------------

def tensor_norm(R: np.ndarray) -> np.ndarray:
    """Frobenius norm of a symmetric 2x2 block (off-diagonal counted twice)."""
    return np.sqrt(R[..., 0, 0] ** 2 + 2 * R[..., 0, 1] ** 2 + R[..., 1, 1] ** 2)


def residual_components(R: np.ndarray, kind: ResidualKind) -> np.ndarray:
    """``(R11, sqrt2 R12, R22)`` for tensor kinds, ``(T,)`` for scalar ones.

    ``T = |components|`` is the norm used in the objective, but unlike the
    norm the components are smooth where ``R`` vanishes, which is what a
    Gauss-Newton model needs.
    """
    if ResidualKind(kind).tensorial:
        return np.stack([R[..., 0, 0], np.sqrt(2.0) * R[..., 0, 1], R[..., 1, 1]], -1)
    return R[..., None]


def t1_values(md: MetricData, phi: ScalarField2Jet) -> np.ndarray:
    return scalar_curvature(md) + laplacian(md, phi) - DIMENSION


def t2_tensor(md: MetricData, phi: ScalarField2Jet) -> np.ndarray:
    return ricci_xx(md) + hessian(md, phi) - md.u_ij


def qe_tensor(md: MetricData, sigma: ScalarField2Jet, phi: ScalarField2Jet, m: float) -> np.ndarray:
    """x-x block of the tensor that ``Ric(g_K)`` must equal for ``e^{2 sigma} g_K`` to be quasi-Einstein.

    Obtained by transporting ``Ric + Hess(phi) - (1/m) dphi dphi = g`` through
    the four-dimensional conformal change formulas.
    """
    ds, dp = sigma.grad, phi.grad
    outer = lambda a, b: a[..., :, None] * b[..., None, :]
    scal = (
        laplacian(md, sigma)
        + 2 * grad_inner(md, sigma, sigma)
        - grad_inner(md, sigma, phi)
        + np.exp(2 * sigma.value)
    )
    return (
        2 * hessian(md, sigma)
        - 2 * outer(ds, ds)
        - hessian(md, phi)
        + outer(ds, dp)
        + outer(dp, ds)
        + outer(dp, dp) / m
        + scal[..., None, None] * md.u_ij
    )


qe_tensor_A = qe_tensor


def t3_tensor(md: MetricData, sigma: ScalarField2Jet, phi: ScalarField2Jet, m: float) -> np.ndarray:
    return ricci_xx(md) - qe_tensor(md, sigma, phi, m)


def t4_values(md: MetricData, sigma: ScalarField2Jet, phi: ScalarField2Jet, m: float) -> np.ndarray:
    """Trace of the quasi-Einstein equation in the conformal metric ``e^{2 sigma} g_K``."""
    S = scalar_curvature(md)
    inner = (
        S
        - 6 * laplacian(md, sigma)
        - 6 * grad_inner(md, sigma, sigma)
        + laplacian(md, phi)
        + 2 * grad_inner(md, sigma, phi)
        - grad_inner(md, phi, phi) / m
    )
    return np.exp(-2 * sigma.value) * inner - DIMENSION


# pointwise API ---------------------------------------------------------------

def t1(S: SymplecticPotential, sd: SolitonData, x) -> np.ndarray:
    return t1_values(metric_data(potential_jet(S, x)), phi_soliton_field(sd, x))


def t2_components(S: SymplecticPotential, sd: SolitonData, x) -> np.ndarray:
    return t2_tensor(metric_data(potential_jet(S, x)), phi_soliton_field(sd, x))


def t3_components(S: SymplecticPotential, cd: ConformalData, x) -> np.ndarray:
    md = metric_data(potential_jet(S, x))
    return t3_tensor(md, sigma_field(cd, x), phi_qe_field(cd, x), cd.m)


def t4(S: SymplecticPotential, cd: ConformalData, x) -> np.ndarray:
    md = metric_data(potential_jet(S, x))
    return t4_values(md, sigma_field(cd, x), phi_qe_field(cd, x), cd.m)


class PointEvaluator:
    """Residual values of one kind at a fixed point set, with cached designs."""

    def __init__(self, P: Polytope, basis: MonomialBasis, points, kind: ResidualKind, eps_degree: int = 0):
        self.points = np.asarray(points, dtype=float)
        self.kind = ResidualKind(kind)
        self.can = canonical_jet(P, self.points)
        self.design = PolyDesign(basis, self.points)
        self.eps_design = PolyDesign(eps_basis(eps_degree), self.points) if eps_degree else None

    def raw(self, coeffs, data) -> np.ndarray:
        """Scalar residual, or the symmetric 2x2 block for tensor kinds.

        A 2-D ``coeffs`` (batch, n) evaluates a batch of potentials at once.
        """
        md = metric_data(self.can + self.design.jet(coeffs))
        x = self.points
        if self.kind.quasi_einstein:
            sigma = sigma_field(data, x, self.eps_design)
            phi = phi_qe_field(data, x, self.eps_design)
            if self.kind is ResidualKind.T3:
                return t3_tensor(md, sigma, phi, data.m)
            return t4_values(md, sigma, phi, data.m)
        phi = phi_soliton_field(data, x)
        if self.kind is ResidualKind.T1:
            return t1_values(md, phi)
        return t2_tensor(md, phi)

    def values(self, coeffs, data) -> np.ndarray:
        """The scalar residual ``T`` at each point."""
        R = self.raw(coeffs, data)
        return tensor_norm(R) if self.kind.tensorial else R

    def components(self, coeffs, data) -> np.ndarray:
        """Smooth components whose squares sum to ``T^2``, shape ``(..., points, k)``."""
        return residual_components(self.raw(coeffs, data), self.kind)


def residual_values(S: SymplecticPotential, data, kind: ResidualKind, x, chunk: int = 4096) -> np.ndarray:
    """Scalar residual ``T`` (tensor kinds reduced by :func:`tensor_norm`) at points ``x``."""
    x = np.asarray(x, dtype=float).reshape(-1, 2)
    eps_degree = data.eps_degree if isinstance(data, ConformalData) else 0
    out = []
    for k in range(0, len(x), chunk):
        ev = PointEvaluator(S.polytope, S.basis, x[k : k + chunk], kind, eps_degree)
        out.append(ev.values(S.coeffs, data))
    return np.concatenate(out) if out else np.zeros(0)


def quadrature_weights(scheme: QuadratureScheme, mode: WeightMode) -> np.ndarray:
    """Per-point multipliers ``omega_i`` so that ``sum (omega_i T_i)^2`` is the objective."""
    if WeightMode(mode) is WeightMode.SQRT:
        return np.sqrt(scheme.weights)
    return scheme.weights.copy()


def objective(S: SymplecticPotential, data, spec: ResidualSpec, scheme: QuadratureScheme):
    """Weighted residual vector ``r`` and ``I = sum r_i^2``."""
    T = residual_values(S, data, spec.kind, scheme.points)
    r = quadrature_weights(scheme, spec.weight_mode) * T
    return r, float(np.dot(r, r))


def max_grid(P: Polytope, grid_n: int = DEFAULT_GRID_N, delta: float = DEFAULT_DELTA) -> np.ndarray:
    lo, hi = P.bounding_box()
    g1 = np.linspace(lo[0], hi[0], grid_n)
    g2 = np.linspace(lo[1], hi[1], grid_n)
    X = np.stack(np.meshgrid(g1, g2, indexing="ij"), -1).reshape(-1, 2)
    return X[P.contains(X, delta)]


def error_metrics(
    S: SymplecticPotential,
    data,
    spec: ResidualSpec,
    scheme: QuadratureScheme,
    grid_n: int = DEFAULT_GRID_N,
    max_delta: float = DEFAULT_DELTA,
) -> ErrorMetrics:
    _, I = objective(S, data, spec, scheme)
    T = residual_values(S, data, spec.kind, max_grid(S.polytope, grid_n, max_delta))
    return ErrorMetrics(float(np.sqrt(I) / S.polytope.volume()), float(np.max(np.abs(T))), I)
