"""Gauss-Legendre rules on polygons.

A convex polygon is cut into vertical slabs at the distinct ``x1``
coordinates of its vertices.  Inside each slab the lower and upper
boundaries are single straight lines, so the iterated integral has a
smooth (affine) inner range and a tensor Gauss-Legendre rule is exact for
polynomials of degree ``<= 2n - 1`` in each variable.  For the trapezium and
the pentagon this produces exactly two regions, i.e. ``2 n^2`` points.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb

import numpy as np

from .polytope import Polytope, PolytopeKind, shrink


@lru_cache(maxsize=None)
def _gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    k = np.arange(1, n + 1)
    x = np.cos(np.pi * (k - 0.25) / (n + 0.5))
    for _ in range(100):
        p0, p1 = np.ones_like(x), x.copy()
        for j in range(2, n + 1):
            p0, p1 = p1, ((2 * j - 1) * x * p1 - (j - 1) * p0) / j
        dp = n * (x * p1 - p0) / (x * x - 1)
        dx = p1 / dp
        x = x - dx
        if np.max(np.abs(dx)) < 1e-16:
            break
    p0, p1 = np.ones_like(x), x.copy()
    for j in range(2, n + 1):
        p0, p1 = p1, ((2 * j - 1) * x * p1 - (j - 1) * p0) / j
    dp = n * (x * p1 - p0) / (x * x - 1)
    w = 2.0 / ((1 - x * x) * dp * dp)
    order = np.argsort(x)
    x, w = x[order], w[order]
    # enforce exact symmetry
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    return x, w


def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the ``n``-point rule on ``[-1, 1]``."""
    if n < 1:
        raise ValueError("need at least one node")
    x, w = _gauss_legendre(int(n))
    return x.copy(), w.copy()


@dataclass(frozen=True)
class QuadratureScheme:
    points: np.ndarray
    weights: np.ndarray
    region: Polytope
    order: int

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))

    def __len__(self) -> int:
        return len(self.weights)


def _slab_line(P: Polytope, xm: float, lower: bool) -> tuple[float, float]:
    """Active boundary line ``x2 = s * x1 + r`` at abscissa ``xm``."""
    best = None
    for f in P.facets:
        n1, n2 = f.normal
        if (lower and n2 > 0) or (not lower and n2 < 0):
            s, r = -n1 / n2, -f.offset / n2
            y = s * xm + r
            if best is None or (lower and y > best[0]) or (not lower and y < best[0]):
                best = (y, s, r)
    return best[1], best[2]


def polygon_scheme(P: Polytope, n: int = 20) -> QuadratureScheme:
    """Slab-decomposed tensor Gauss-Legendre rule on any convex polygon."""
    xi, wi = _gauss_legendre(int(n))
    xs = np.unique(np.round(P.vertices()[:, 0], 14))
    pts, wts = [], []
    for x0, x1 in zip(xs[:-1], xs[1:]):
        if x1 - x0 < 1e-14:
            continue
        mid = 0.5 * (x0 + x1)
        sl, rl = _slab_line(P, mid, lower=True)
        su, ru = _slab_line(P, mid, lower=False)
        half = 0.5 * (x1 - x0)
        X1 = mid + half * xi
        lo, hi = sl * X1 + rl, su * X1 + ru
        c, h = 0.5 * (lo + hi), 0.5 * (hi - lo)
        X2 = c[:, None] + h[:, None] * xi[None, :]
        W = (wi * half * h)[:, None] * wi[None, :]
        pts.append(np.stack([np.broadcast_to(X1[:, None], X2.shape), X2], -1).reshape(-1, 2))
        wts.append(W.reshape(-1))
    return QuadratureScheme(np.concatenate(pts), np.concatenate(wts), P, int(n))


def scheme_trapezium(P: Polytope, n: int = 20) -> QuadratureScheme:
    if P.kind is not PolytopeKind.TRAPEZIUM:
        raise ValueError(f"expected a trapezium, got {P.kind.value}")
    return polygon_scheme(P, n)


def scheme_pentagon(P: Polytope, n: int = 20) -> QuadratureScheme:
    if P.kind is not PolytopeKind.PENTAGON:
        raise ValueError(f"expected a pentagon, got {P.kind.value}")
    return polygon_scheme(P, n)


def scheme_shrunken(P: Polytope, delta: float, n: int = 20) -> QuadratureScheme:
    return polygon_scheme(shrink(P, delta), n)


# exact oracle -------------------------------------------------------------

def _edge_term(x0: Fraction, y0: Fraction, dx: Fraction, dy: Fraction, p: int, q: int) -> Fraction:
    """``int_0^1 (x0 + s dx)^(p+1) (y0 + s dy)^q dy ds`` expanded exactly."""
    if dy == 0:
        return Fraction(0)
    xs = [comb(p + 1, i) * x0 ** (p + 1 - i) * dx**i for i in range(p + 2)]
    ys = [comb(q, j) * y0 ** (q - j) * dy**j for j in range(q + 1)]
    total = Fraction(0)
    for i, cx in enumerate(xs):
        for j, cy in enumerate(ys):
            total += cx * cy / (i + j + 1)
    return dy * total


def exact_triangle_monomial(tri, p: int, q: int) -> Fraction:
    """Exact ``int_T x1^p x2^q`` over a triangle with rational vertices.

    Uses Green's theorem, ``int_T x^p y^q = 1/(p+1) oint x^(p+1) y^q dy``.
    """
    v = [(Fraction(a), Fraction(b)) for a, b in tri]
    signed = (v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1])
    total = Fraction(0)
    for k in range(3):
        (xa, ya), (xb, yb) = v[k], v[(k + 1) % 3]
        total += _edge_term(xa, ya, xb - xa, yb - ya, p, q)
    total /= p + 1
    return total if signed > 0 else -total


def exact_polygon_monomial(vertices, p: int, q: int) -> Fraction:
    """Exact monomial integral over a convex polygon by fan triangulation."""
    v = [(Fraction(x).limit_denominator(10**9), Fraction(y).limit_denominator(10**9)) for x, y in vertices]
    return sum((exact_triangle_monomial((v[0], v[k], v[k + 1]), p, q) for k in range(1, len(v) - 1)), Fraction(0))
