"""Curvature of toric Kaehler metrics in symplectic coordinates.

Everything is closed-form algebra on a :class:`~toric_prescribe.basis.Jet4`
of the symplectic potential; there is no numerical differentiation.  All
functions accept arbitrary leading batch dimensions.

Index conventions: ``u_ij`` is the Euclidean Hessian, ``uinv`` its inverse,
``u_ijk``/``u_ijkl`` higher partials.  The metric is
``u_ij dx_i dx_j + u^ij dtheta_i dtheta_j`` and the volume form is Euclidean in
``(x, theta)``, so the Laplacian of a torus-invariant ``f`` is
``d_i(u^ij d_j f)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import Jet4
from .errors import NonConvexPointError


@dataclass(frozen=True)
class ScalarField2Jet:
    value: np.ndarray
    grad: np.ndarray
    hess: np.ndarray

    def __add__(self, other: "ScalarField2Jet") -> "ScalarField2Jet":
        return ScalarField2Jet(self.value + other.value, self.grad + other.grad, self.hess + other.hess)

    @classmethod
    def from_jet(cls, j: Jet4) -> "ScalarField2Jet":
        return cls(j.value, j.grad, j.hess)

    @classmethod
    def zeros(cls, batch_shape) -> "ScalarField2Jet":
        batch_shape = tuple(batch_shape)
        return cls(np.zeros(batch_shape), np.zeros(batch_shape + (2,)), np.zeros(batch_shape + (2, 2)))


@dataclass(frozen=True)
class MetricData:
    u_ij: np.ndarray
    uinv: np.ndarray
    detH: np.ndarray
    G: np.ndarray
    G_k: np.ndarray
    G_kl: np.ndarray
    u_ijk: np.ndarray
    u_ijkl: np.ndarray
    dinv: np.ndarray  # dinv[..., i, k, j] = d_j u^{ik}
    christoffel: np.ndarray  # christoffel[..., k, i, j] = Gamma^k_ij


def metric_data(j: Jet4) -> MetricData:
    H = j.hess
    a, b, d = H[..., 0, 0], H[..., 0, 1], H[..., 1, 1]
    det = a * d - b * b
    if np.any(~(det > 0)) or np.any(~(a + d > 0)):
        raise NonConvexPointError("Hessian of the potential is not positive definite")
    inv = np.stack([np.stack([d, -b], -1), np.stack([-b, a], -1)], -2) / det[..., None, None]
    T3, T4 = j.third, j.fourth
    dinv = -np.einsum("...ip,...pqj,...qk->...ikj", inv, T3, inv)
    gam = 0.5 * np.einsum("...km,...ijm->...kij", inv, T3)
    Gk = np.einsum("...pq,...pqk->...k", inv, T3)
    Gkl = np.einsum("...pq,...pqkl->...kl", inv, T4) + np.einsum("...pql,...pqk->...kl", dinv, T3)
    return MetricData(H, inv, det, np.log(det), Gk, Gkl, T3, T4, dinv, gam)


def ricci_xx(md: MetricData) -> np.ndarray:
    """``Ric(d_xa, d_xb) = 1/2 (G_ab - u^kl u_abk G_l)`` with ``G = log det D^2 u``."""
    corr = np.einsum("...kl,...abk,...l->...ab", md.uinv, md.u_ijk, md.G_k)
    return 0.5 * (md.G_kl - corr)


def inverse_second_derivatives(md: MetricData) -> np.ndarray:
    """``d_k d_l u^{ij}`` as an array indexed ``[..., i, j, k, l]``."""
    U, T3, T4 = md.uinv, md.u_ijk, md.u_ijkl
    t1 = -np.einsum("...ip,...pqkl,...qj->...ijkl", U, T4, U)
    A = np.einsum("...ip,...pak,...ab->...ibk", U, T3, U)  # u^ip u_pa,k u^ab
    t2 = np.einsum("...ibk,...bql,...qj->...ijkl", A, T3, U)
    return t1 + t2 + np.swapaxes(t2, -1, -2)


def scalar_curvature(md: MetricData) -> np.ndarray:
    """Abreu's formula ``S = -sum_ij d_i d_j u^{ij}``."""
    dd = inverse_second_derivatives(md)
    return -np.einsum("...ijij->...", dd)


def div_inverse(md: MetricData) -> np.ndarray:
    """``sum_i d_i u^{ij}``, indexed by ``j``."""
    return np.einsum("...iji->...j", md.dinv)


def hessian(md: MetricData, f: ScalarField2Jet) -> np.ndarray:
    """x-x block of the Riemannian Hessian: ``f_ab - Gamma^k_ab f_k``."""
    return f.hess - np.einsum("...kab,...k->...ab", md.christoffel, f.grad)


def laplacian(md: MetricData, f: ScalarField2Jet) -> np.ndarray:
    return np.einsum("...ij,...ij->...", md.uinv, f.hess) + np.einsum("...j,...j->...", div_inverse(md), f.grad)


def grad_inner(md: MetricData, f: ScalarField2Jet, h: ScalarField2Jet) -> np.ndarray:
    return np.einsum("...ij,...i,...j->...", md.uinv, f.grad, h.grad)
