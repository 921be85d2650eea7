"""Closed parameter systems that accompany the curvature searches."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import mpmath
import numpy as np
from scipy import optimize

from .errors import BracketError, ParameterDomainError, SingularEvaluationError
from .polytope import Polytope, make_pentagon
from .quadrature import gauss_legendre, polygon_scheme

KC_SOLITON_COEFF = 0.527620
KC_INTEGRATION_CONST = -6.91561
PARAM_QUAD_ORDER = 40


# soliton vector field ---------------------------------------------------------

def soliton_coefficient(P: Polytope, n: int = PARAM_QUAD_ORDER) -> float:
    """Coefficient ``k`` of the soliton potential ``phi = k (x1 + x2)``.

    ``h(s) = int_P t e^{s t} dx`` is strictly increasing in ``s``; its root
    ``s*`` is the weighted-barycentre condition and ``k = -s*``.
    """
    sch = polygon_scheme(P, n)
    t = sch.points.sum(axis=1)
    w = sch.weights

    def h(s):
        return float(np.dot(w, t * np.exp(s * t)))

    lo, hi = -1.0, 1.0
    for _ in range(60):
        if h(lo) < 0 < h(hi):
            break
        lo, hi = 2 * lo, 2 * hi
    else:
        raise BracketError("could not bracket the soliton coefficient")
    if h(lo) == 0:
        return -lo
    s = optimize.brentq(h, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    # Newton polish
    for _ in range(3):
        dh = float(np.dot(w, t * t * np.exp(s * t)))
        s -= h(s) / dh
    return -s if s != 0 else 0.0


# conformally Kaehler quasi-Einstein metrics on the one-point blow-up ----------

@dataclass(frozen=True)
class LppParams:
    b: float
    c: float
    d: float
    m: float

    def to_dict(self) -> dict:
        return asdict(self)


def lpp_relations(b: float) -> tuple[float, float]:
    """``c`` and ``d`` in terms of ``b``: ``c^2 = b^2 + 1``, ``d = 1 / (2 (2b - c))``."""
    c = math.sqrt(b * b + 1.0)
    return c, 1.0 / (2.0 * (2.0 * b - c))


def lpp_integrand(s, b: float, m: float):
    """Integrand whose integral over ``[-1, 1]`` vanishes exactly for the LPP metrics.

    With ``L = b s + c`` it is
    ``(2+s) (d L + 1)^m ((2+s) - 2 L^2) / (L^(m+4) (b s + 4b - c)^2)``,
    the integrated form of the fibre component of the reduced equation for
    the momentum profile, which must vanish at both ends of ``[-1, 1]``.
    """
    s = np.asarray(s, dtype=float)
    c, d = lpp_relations(b)
    L = b * s + c
    q = d * L + 1.0
    k = b * s + 4 * b - c
    if np.any(L <= 0) or np.any(q <= 0) or np.any(k == 0):
        raise SingularEvaluationError("LPP constraint integrand is singular for this b")
    return (2 + s) * q**m * ((2 + s) - 2 * L * L) / (L ** (m + 4) * k * k)


def lpp_constraint(b: float, m: float, n: int = PARAM_QUAD_ORDER) -> float:
    x, w = gauss_legendre(n)
    return float(np.dot(w, lpp_integrand(x, b, m)))


def lpp_parameters(m: float, n: int = PARAM_QUAD_ORDER, b_range=(-0.45, 0.45), n_scan: int = 91) -> LppParams:
    if not m > 1:
        raise ParameterDomainError("m must exceed 1")
    grid = np.linspace(*b_range, n_scan)
    vals = []
    for b in grid:
        try:
            vals.append(lpp_constraint(b, m, n))
        except SingularEvaluationError:
            vals.append(np.nan)
    roots = []
    for i in range(len(grid) - 1):
        v0, v1 = vals[i], vals[i + 1]
        if np.isfinite(v0) and np.isfinite(v1) and v0 * v1 < 0 and max(abs(v0), abs(v1)) < 1e3:
            roots.append(optimize.brentq(lambda b: lpp_constraint(b, m, n), grid[i], grid[i + 1], xtol=1e-15))
    if not roots:
        raise BracketError(f"no sign change of the LPP constraint for m={m}")
    b = min(roots, key=abs)
    c, d = lpp_relations(b)
    return LppParams(float(b), float(c), float(d), float(m))


# two-point blow-up -----------------------------------------------------------------

@dataclass(frozen=True)
class Qe2Params:
    a: float
    b: float
    c: float
    d: float
    mu: float
    m: float

    def to_dict(self) -> dict:
        return asdict(self)


def qe2_algebraic(v, m: float, a: float) -> np.ndarray:
    b, c, d, mu = v
    p0, q0 = c - 2 * b, d * c + 1 - 2 * d * b
    p1, q1 = c + (a - 2) * b, d * c + 1 + (a - 2) * d * b
    p2, q2 = c + (a - 1) * b, d * c + 1 + (a - 1) * d * b
    return np.array(
        [
            4 * b / (p0 * q0) - (1 / p0**2 - mu / q0**2),
            1 / p1**2 - mu / q1**2,
            -2 * b / (p2 * q2) - (1 / p2**2 - mu / q2**2),
        ]
    )


def qe2_integral(v, m: float, a: float, n: int = PARAM_QUAD_ORDER, scheme=None) -> float:
    """``int_P (e^{-phi} - mu e^{(2/m - 1) phi}) e^{4 sigma} dx`` over the pentagon.

    With ``rho = q / L`` the integrand is ``L^-4 rho^(m-2) (rho^2 - mu)``; it
    is divided by the positive constant ``rho(0)^(m-2)`` so that large ``m``
    neither overflows nor underflows.  The root set is unchanged.
    """
    b, c, d, mu = v
    sch = scheme or polygon_scheme(make_pentagon(a), n)
    t = sch.points.sum(axis=1)
    L = b * t + c
    q = d * L + 1
    if c <= 0 or d * c + 1 <= 0 or np.any(L <= 0) or np.any(q <= 0):
        raise SingularEvaluationError("QE parameters give a non-positive log argument on P")
    rho = q / L
    rho0 = (d * c + 1) / c
    f = L**-4 * np.exp((m - 2) * np.log(rho / rho0)) * (rho * rho - mu)
    return float(np.dot(sch.weights, f))


def qe2_system(v, m: float, a: float, n: int = PARAM_QUAD_ORDER, scheme=None) -> np.ndarray:
    return np.append(qe2_algebraic(v, m, a), qe2_integral(v, m, a, n, scheme))


def _newton(fun, x0, tol=1e-13, max_iter=50, h=1e-7):
    x = np.asarray(x0, dtype=float)
    for _ in range(max_iter):
        f = fun(x)
        if np.max(np.abs(f)) < tol:
            return x
        J = np.empty((len(f), len(x)))
        for j in range(len(x)):
            e = np.zeros_like(x)
            e[j] = h * max(1.0, abs(x[j]))
            J[:, j] = (fun(x + e) - fun(x - e)) / (2 * e[j])
        dx = np.linalg.solve(J, -f)
        lam = 1.0
        while lam > 1e-6:
            try:
                fn = fun(x + lam * dx)
                if np.all(np.isfinite(fn)) and np.max(np.abs(fn)) < (1 - 1e-4 * lam) * np.max(np.abs(f)):
                    break
            except (SingularEvaluationError, ZeroDivisionError, FloatingPointError):
                pass
            lam /= 2
        else:
            raise BracketError("Newton line search failed")
        x = x + lam * dx
    f = fun(x)
    if np.max(np.abs(f)) < 1e3 * tol:
        return x
    raise BracketError("Newton iteration did not converge")


_QE2_START = (-0.07, 1.0, -0.46, 0.28)


def _qe2_solve(m, a, n, starts):
    sch = polygon_scheme(make_pentagon(a), n)
    fun = lambda v: qe2_system(v, m, a, n, sch)
    for x0 in starts:
        try:
            with np.errstate(all="raise"):
                return _newton(fun, x0)
        except (BracketError, SingularEvaluationError, np.linalg.LinAlgError, FloatingPointError, ZeroDivisionError):
            continue
    return None


def qe2_parameters(m: float, a: float = 2.0, cd_template=None, n: int = PARAM_QUAD_ORDER) -> Qe2Params:
    """Solve the three boundary relations and the integral constraint for ``(b, c, d, mu)``."""
    if not m > 1:
        raise ParameterDomainError("m must exceed 1")
    if not a > 1:
        raise ParameterDomainError("pentagon parameter a must exceed 1")
    starts = []
    if cd_template is not None:
        starts.append(tuple(float(v) for v in cd_template))
    starts.append(_QE2_START)
    starts += [(b0, 1.0, -0.46, 0.28) for b0 in (-0.02, -0.15, -0.3, 0.05, 0.15)]
    sol = _qe2_solve(m, a, n, starts)
    if sol is None:
        # continuation in m from the well-conditioned value m = 2
        sol = _qe2_solve(2.0, a, n, starts)
        if sol is None:
            raise BracketError(f"QE constraint system failed for m={m}, a={a}")
        for mm in np.geomspace(2.0, m, 25)[1:]:
            sol = _qe2_solve(mm, a, n, [tuple(sol)])
            if sol is None:
                raise BracketError(f"QE continuation failed at m={mm:.4g}")
    b, c, d, mu = (float(v) for v in sol)
    return Qe2Params(float(a), b, c, d, mu, float(m))


def qe_soliton_slope(p: Qe2Params) -> float:
    """``d phi / dt`` at ``t = 0`` for the unperturbed quasi-Einstein potential."""
    return p.m * p.b / (p.c * (p.d * p.c + 1))


# Koiso-Cao reference -----------------------------------------------------------------

def _kc_fpp(t, c, d):
    return (c**3 * (2 + t) / 2) / (c**3 * d * mpmath.e ** (c * (2 + t)) + c**2 * t * (2 + t) + 2 * c * (1 + t) + 2) + (
        t**2 - 2 * t - 5
    ) / 2 / ((1 - t**2) * (t + 2))


def kc_reference_fpp(t: float, c: float = KC_SOLITON_COEFF, d: float = KC_INTEGRATION_CONST) -> float:
    """Exact ``F''(t)`` of the Koiso-Cao soliton potential."""
    if not -1 < t < 1:
        raise SingularEvaluationError("F'' is only defined for t in (-1, 1)")
    with mpmath.workdps(30):
        val = _kc_fpp(mpmath.mpf(t), mpmath.mpf(c), mpmath.mpf(d))
    if not mpmath.isfinite(val) or abs(val) > 1e12:
        raise SingularEvaluationError(f"F'' has a pole near t={t}")
    return float(val)


def kc_fpp_derivatives(t: float, order: int, c: float = KC_SOLITON_COEFF, d: float = KC_INTEGRATION_CONST) -> list:
    """``[F''(t), F'''(t), ...]`` up to ``order`` extra derivatives."""
    with mpmath.workdps(40):
        ders = mpmath.taylor(lambda s: _kc_fpp(s, mpmath.mpf(c), mpmath.mpf(d)), mpmath.mpf(t), order)
        return [float(v * mpmath.factorial(j)) for j, v in enumerate(ders)]


def kc_taylor(k: int = 4, c: float = KC_SOLITON_COEFF, d: float = KC_INTEGRATION_CONST) -> np.ndarray:
    """Taylor coefficients ``k_1..k_k`` of ``F(t) = k_1 t^2 + k_2 t^3 + ...``."""
    with mpmath.workdps(40):
        ders = mpmath.taylor(lambda s: _kc_fpp(s, mpmath.mpf(c), mpmath.mpf(d)), 0, k - 1)
        return np.array([float(ders[j] / ((j + 2) * (j + 1))) for j in range(k)])
