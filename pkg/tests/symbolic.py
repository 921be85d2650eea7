"""Brute-force Riemannian geometry of ``e^{2 sigma} (u_ij dx dx + u^ij dtheta dtheta)`` in sympy.

Nothing here knows about symplectic-coordinate shortcuts: Christoffel
symbols, Ricci tensor and Hessians are computed from the 4x4 metric.
"""

import numpy as np
import sympy as sp

x1, x2, y1, y2 = sp.symbols("x1 x2 y1 y2", real=True)
COORDS = (x1, x2, y1, y2)


def toric_metric(u):
    H = sp.hessian(u, (x1, x2))
    Hi = H.inv()
    g = sp.zeros(4, 4)
    g[:2, :2] = H
    g[2:, 2:] = Hi
    return g


def christoffel(g):
    gi = g.inv()
    n = 4
    return [[[sum(gi[k, l] * (sp.diff(g[l, i], COORDS[j]) + sp.diff(g[l, j], COORDS[i]) - sp.diff(g[i, j], COORDS[l])) for l in range(n)) / 2
              for j in range(n)] for i in range(n)] for k in range(n)]


def ricci(g, gam):
    n = 4
    R = sp.zeros(n, n)
    for i in range(n):
        for j in range(i, n):
            e = 0
            for k in range(n):
                e += sp.diff(gam[k][i][j], COORDS[k]) - sp.diff(gam[k][i][k], COORDS[j])
                for l in range(n):
                    e += gam[k][k][l] * gam[l][i][j] - gam[k][j][l] * gam[l][i][k]
            R[i, j] = R[j, i] = e
    return R


def hessian(f, gam):
    n = 4
    return sp.Matrix(n, n, lambda i, j: sp.diff(f, COORDS[i], COORDS[j]) - sum(gam[k][i][j] * sp.diff(f, COORDS[k]) for k in range(n)))


def qe_defect(u, sigma, phi, m, lam=1):
    """``Ric + Hess phi - dphi dphi / m - lam g`` of ``g = e^{2 sigma} g_u``, and ``g``."""
    g = sp.exp(2 * sigma) * toric_metric(u)
    gam = christoffel(g)
    dphi = sp.Matrix([sp.diff(phi, c) for c in COORDS])
    E = ricci(g, gam) + hessian(phi, gam) - dphi * dphi.T / m - lam * g
    return E, g


def evaluate(E, g, point):
    sub = {x1: point[0], x2: point[1]}
    En = np.array(E.subs(sub).evalf(30), dtype=float)
    gn = np.array(g.subs(sub).evalf(30), dtype=float)
    return En[:2, :2], float(np.trace(np.linalg.solve(gn, En)))


def field_jet(f, point):
    """Value, gradient and Hessian of a sympy function of ``(x1, x2)`` at a point."""
    sub = {x1: point[0], x2: point[1]}
    val = float(f.subs(sub))
    grad = np.array([float(sp.diff(f, v).subs(sub)) for v in (x1, x2)])
    hess = np.array([[float(sp.diff(f, a, b).subs(sub)) for b in (x1, x2)] for a in (x1, x2)])
    return val, grad, hess
