"""Moment polytopes of toric surfaces.

A polytope is stored as an ordered list of affine functionals
``l(x) = nu . x + offset``; the interior is ``{x : l(x) > 0 for all facets}``.
Facet order follows the conventional listing for each family and is part of
the coefficient-file format.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DegeneratePolytopeError, ParameterDomainError

VERTEX_TOL = 1e-12


class PolytopeKind(str, Enum):
    TRAPEZIUM = "trapezium"
    PENTAGON = "pentagon"
    SIMPLEX = "simplex"
    OTHER = "other"


@dataclass(frozen=True)
class AffineFunctional:
    normal: tuple[float, float]
    offset: float

    def __post_init__(self):
        if self.normal[0] == 0 and self.normal[1] == 0:
            raise ValueError("affine functional needs a nonzero normal")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.normal[0] * x[..., 0] + self.normal[1] * x[..., 1] + self.offset

    def to_dict(self) -> dict:
        return {"normal": [float(self.normal[0]), float(self.normal[1])], "offset": float(self.offset)}

    @classmethod
    def from_dict(cls, d: dict) -> "AffineFunctional":
        n = d["normal"]
        return cls((float(n[0]), float(n[1])), float(d["offset"]))


@dataclass(frozen=True)
class Polytope:
    """Convex polygon given by facet functionals and a class parameter ``a``."""

    facets: tuple[AffineFunctional, ...]
    class_param: float
    kind: PolytopeKind

    def __post_init__(self):
        verts = _vertices(self.facets)
        if len(verts) < 3:
            raise DegeneratePolytopeError("polytope has empty interior")
        if _shoelace(verts) <= VERTEX_TOL:
            raise DegeneratePolytopeError("polytope has zero area")
        for i, f in enumerate(self.facets):
            if not np.any(np.abs(f(verts)) <= 1e-9):
                raise DegeneratePolytopeError(f"facet {i} does not touch the polytope")
        object.__setattr__(self, "_verts", verts)

    @property
    def normals(self) -> np.ndarray:
        return np.array([f.normal for f in self.facets], dtype=float)

    @property
    def offsets(self) -> np.ndarray:
        return np.array([f.offset for f in self.facets], dtype=float)

    def values(self, x) -> np.ndarray:
        """All facet functionals at ``x``; shape ``x.shape[:-1] + (n_facets,)``."""
        x = np.asarray(x, dtype=float)
        return x @ self.normals.T + self.offsets

    def vertices(self) -> np.ndarray:
        """Vertices in counter-clockwise order."""
        return self._verts.copy()

    def volume(self) -> float:
        return _shoelace(self._verts)

    def contains(self, x, strict_margin: float = 0.0):
        return np.all(self.values(x) > strict_margin, axis=-1)

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        return self._verts.min(axis=0), self._verts.max(axis=0)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "a": float(self.class_param),
            "facets": [f.to_dict() for f in self.facets],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Polytope":
        facets = tuple(AffineFunctional.from_dict(f) for f in d["facets"])
        return cls(facets, float(d["a"]), PolytopeKind(d["kind"]))


def _vertices(facets) -> np.ndarray:
    normals = np.array([f.normal for f in facets], dtype=float)
    offsets = np.array([f.offset for f in facets], dtype=float)
    pts = []
    for i, j in itertools.combinations(range(len(facets)), 2):
        m = normals[[i, j]]
        if abs(np.linalg.det(m)) < 1e-14:
            continue
        p = np.linalg.solve(m, -offsets[[i, j]])
        if np.all(normals @ p + offsets >= -VERTEX_TOL):
            if not any(np.allclose(p, q, atol=1e-12) for q in pts):
                pts.append(p)
    if len(pts) < 3:
        return np.array(pts).reshape(-1, 2)
    pts = np.array(pts)
    c = pts.mean(axis=0)
    order = np.argsort(np.arctan2(pts[:, 1] - c[1], pts[:, 0] - c[0]))
    return pts[order]


def _shoelace(v: np.ndarray) -> float:
    if len(v) < 3:
        return 0.0
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _functionals(rows) -> tuple[AffineFunctional, ...]:
    return tuple(AffineFunctional((float(n1), float(n2)), float(c)) for n1, n2, c in rows)


def make_trapezium(a: float) -> Polytope:
    """Polytope of the one-point blow-up of CP^2; ``a`` in (-1, 2)."""
    if not -1.0 < a < 2.0:
        raise ParameterDomainError(f"trapezium parameter a={a} outside (-1, 2)")
    rows = [(1, 1, a), (1, 0, 1), (0, 1, 1), (-1, -1, 1)]
    return Polytope(_functionals(rows), float(a), PolytopeKind.TRAPEZIUM)


def make_pentagon(a: float) -> Polytope:
    """Polytope of the two-point blow-up of CP^2; ``a`` > 1."""
    if not a > 1.0:
        raise ParameterDomainError(f"pentagon parameter a={a} must exceed 1")
    rows = [(1, 0, 1), (0, 1, 1), (-1, 0, a - 1), (0, -1, a - 1), (-1, -1, a - 1)]
    return Polytope(_functionals(rows), float(a), PolytopeKind.PENTAGON)


def make_simplex() -> Polytope:
    """Reflexive simplex of CP^2 (its canonical metric is Fubini-Study)."""
    rows = [(1, 0, 1), (0, 1, 1), (-1, -1, 1)]
    return Polytope(_functionals(rows), 1.0, PolytopeKind.SIMPLEX)


def make_polytope(kind: PolytopeKind | str, a: float | None = None) -> Polytope:
    kind = PolytopeKind(kind)
    if kind is PolytopeKind.TRAPEZIUM:
        return make_trapezium(a)
    if kind is PolytopeKind.PENTAGON:
        return make_pentagon(a)
    if kind is PolytopeKind.SIMPLEX:
        return make_simplex()
    raise ValueError(f"cannot build polytope of kind {kind}")


def shrink(P: Polytope, delta: float) -> Polytope:
    """The parallel polytope ``{l_r > delta}``."""
    if delta < 0:
        raise ValueError("delta must be non-negative")
    if delta == 0:
        return P
    facets = tuple(AffineFunctional(f.normal, f.offset - delta) for f in P.facets)
    return Polytope(facets, P.class_param, P.kind)


def reflect(P: Polytope) -> Polytope:
    """Point reflection ``x -> -x`` of a polytope."""
    facets = tuple(AffineFunctional((-f.normal[0], -f.normal[1]), f.offset) for f in P.facets)
    return Polytope(facets, P.class_param, PolytopeKind.OTHER)


def from_functionals(rows, a: float = 0.0) -> Polytope:
    """Arbitrary polygon from ``(nu1, nu2, offset)`` rows."""
    return Polytope(_functionals(rows), float(a), PolytopeKind.OTHER)
