"""Finite-difference reference values built only from Hessians of the potential.

They share nothing with the closed-form curvature code beyond the exact
Hessian of ``u``, so an algebra slip there shows up as a mismatch here.
"""

import numpy as np

from toric_prescribe import curvature
from toric_prescribe.basis import potential_jet
from toric_prescribe.curvature import ScalarField2Jet

H = 1e-3


def hess(S, X):
    return potential_jet(S, X).hess


def _shift(X, i, s):
    e = np.zeros(2)
    e[i] = s
    return X + e


# fourth-order central stencils
def d1(f, X, i, h=H):
    return (-f(_shift(X, i, 2 * h)) + 8 * f(_shift(X, i, h)) - 8 * f(_shift(X, i, -h)) + f(_shift(X, i, -2 * h))) / (12 * h)


def d2(f, X, i, j, h=H):
    if i == j:
        p2, p1, m1, m2 = (f(_shift(X, i, s * h)) for s in (2, 1, -1, -2))
        return (-p2 + 16 * p1 - 30 * f(X) + 16 * m1 - m2) / (12 * h * h)
    g = lambda Y: d1(f, Y, j, h)
    return d1(g, X, i, h)


def christoffel(S, X):
    """Levi-Civita symbols ``Gamma^k_ij`` of ``g = u_ij dx dx`` from differenced metric entries."""
    g = hess(S, X)
    dg = np.stack([d1(lambda Y: hess(S, Y), X, m) for m in range(2)], -1)  # dg[..., i, j, m] = d_m g_ij
    low = 0.5 * (np.einsum("...jmi->...ijm", dg) + np.einsum("...imj->...ijm", dg) - dg)
    return np.einsum("...km,...ijm->...kij", np.linalg.inv(g), low)


def ricci(S, X):
    """``1/2 (d_a d_b G - u^kl u_abk d_l G)`` with ``G = log det`` and all derivatives differenced."""
    G = lambda Y: np.log(np.linalg.det(hess(S, Y)))
    ddG = np.stack([np.stack([d2(G, X, a, b) for b in range(2)], -1) for a in range(2)], -2)
    dG = np.stack([d1(G, X, l) for l in range(2)], -1)
    dH = np.stack([d1(lambda Y: hess(S, Y), X, k) for k in range(2)], -1)  # u_abk
    uinv = np.linalg.inv(hess(S, X))
    return 0.5 * (ddG - np.einsum("...kl,...abk,...l->...ab", uinv, dH, dG))


def scalar(S, X):
    """``-sum_ij d_i d_j u^ij`` by second differences of the inverse Hessian."""
    out = 0.0
    for i in range(2):
        for j in range(2):
            out = out - d2(lambda Y: np.linalg.inv(hess(S, Y))[..., i, j], X, i, j)
    return out


# a smooth non-polynomial test function with its exact 2-jet
def probe(X):
    x1, x2 = X[..., 0], X[..., 1]
    return np.exp(0.3 * x1 - 0.2 * x2) + x1 * x1 * x2 + np.sin(x2)


def probe_jet(X):
    x1, x2 = X[..., 0], X[..., 1]
    e = np.exp(0.3 * x1 - 0.2 * x2)
    grad = np.stack([0.3 * e + 2 * x1 * x2, -0.2 * e + x1 * x1 + np.cos(x2)], -1)
    h11 = 0.09 * e + 2 * x2
    h12 = -0.06 * e + 2 * x1
    h22 = 0.04 * e - np.sin(x2)
    hess = np.stack([np.stack([h11, h12], -1), np.stack([h12, h22], -1)], -2)
    return ScalarField2Jet(probe(X), grad, hess)


def covariant_hessian(S, X, f=probe):
    fh = np.stack([np.stack([d2(f, X, a, b) for b in range(2)], -1) for a in range(2)], -2)
    fg = np.stack([d1(f, X, k) for k in range(2)], -1)
    return fh - np.einsum("...kab,...k->...ab", christoffel(S, X), fg)


def laplacian(S, X, f=probe):
    """Divergence form ``d_i (u^ij d_j f)``."""
    def flux(i):
        return lambda Y: np.einsum("...j,...j->...", np.linalg.inv(hess(S, Y))[..., i, :], np.stack([d1(f, Y, j) for j in range(2)], -1))
    return sum(d1(flux(i), X, i) for i in range(2))


def rel_err(a, b):
    return float(np.max(np.abs(a - b)) / max(1e-300, np.max(np.abs(b))))


def oracle_errors(S, X) -> dict:
    """Relative errors of the closed-form quantities against the differenced ones."""
    md = curvature.metric_data(potential_jet(S, X))
    fj = probe_jet(X)
    return {
        "ricci": rel_err(curvature.ricci_xx(md), ricci(S, X)),
        "scalar": rel_err(curvature.scalar_curvature(md), scalar(S, X)),
        "christoffel": rel_err(md.christoffel, christoffel(S, X)),
        "hessian": rel_err(curvature.hessian(md, fj), covariant_hessian(S, X)),
        "laplacian": rel_err(curvature.laplacian(md, fj), laplacian(S, X)),
    }
