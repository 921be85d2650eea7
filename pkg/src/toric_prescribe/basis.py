"""Restricted symplectic potentials ``u = u_can + F`` and their derivative jets.

``F`` is a polynomial in a symmetry-adapted basis:

* ``Z2``: generators ``(a, b)`` with ``a >= b`` standing for
  ``x1^a x2^b + x1^b x2^a`` (or ``x1^a x2^a`` when ``a == b``), ordered by
  ascending total degree and, within one degree, by descending ``b``.
* ``U2``: powers ``t^k`` of ``t = x1 + x2``.

Jets carry the value and all partial derivatives up to order four as full
symmetric numpy tensors with arbitrary leading batch dimensions.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from math import comb

import numpy as np

from .errors import SingularEvaluationError
from .polytope import Polytope

ORDERING_VERSION = 1


class Symmetry(str, Enum):
    Z2 = "z2"
    U2 = "u2"


@dataclass(frozen=True)
class MonomialBasis:
    degree: int
    symmetry: Symmetry = Symmetry.Z2
    min_degree: int = 2

    def __post_init__(self):
        object.__setattr__(self, "symmetry", Symmetry(self.symmetry))
        if self.degree < self.min_degree or self.min_degree < 1:
            raise ValueError(f"degree {self.degree} below minimum {self.min_degree}")

    @cached_property
    def generators(self) -> list:
        if self.symmetry is Symmetry.U2:
            return list(range(self.min_degree, self.degree + 1))
        gens = []
        for k in range(self.min_degree, self.degree + 1):
            for b in range(k // 2, -1, -1):
                gens.append((k - b, b))
        return gens

    def __len__(self) -> int:
        return len(self.generators)

    @cached_property
    def _monomial_map(self) -> tuple[np.ndarray, np.ndarray]:
        exps = [(i, k - i) for k in range(self.min_degree, self.degree + 1) for i in range(k, -1, -1)]
        index = {e: n for n, e in enumerate(exps)}
        mat = np.zeros((len(self), len(exps)))
        for g, gen in enumerate(self.generators):
            if self.symmetry is Symmetry.U2:
                for b in range(gen + 1):
                    mat[g, index[(gen - b, b)]] = comb(gen, b)
            else:
                a, b = gen
                mat[g, index[(a, b)]] = 1.0
                mat[g, index[(b, a)]] = 1.0
        return np.array(exps, dtype=int), mat

    @property
    def exponents(self) -> np.ndarray:
        """Monomial exponents ``(i, j)`` of ``x1^i x2^j`` spanned by the basis."""
        return self._monomial_map[0]

    @property
    def monomial_matrix(self) -> np.ndarray:
        """Map from generator coefficients to monomial coefficients, shape (n_gen, n_mono)."""
        return self._monomial_map[1]

    def describe(self) -> dict:
        return {
            "degree": self.degree,
            "symmetry": self.symmetry.value,
            "min_degree": self.min_degree,
            "ordering_version": ORDERING_VERSION,
        }


def make_basis(d: int, symmetry: Symmetry | str = Symmetry.Z2) -> MonomialBasis:
    if d < 2:
        raise ValueError("polynomial degree must be at least 2")
    return MonomialBasis(d, Symmetry(symmetry))


def z2_count(d: int) -> int:
    return sum((k + 2) // 2 for k in range(2, d + 1))


def embed_u2_in_z2(kappa, d: int) -> np.ndarray:
    """Rewrite ``sum_k kappa_k t^k`` (k = 2..d) in the Z2 generator basis."""
    kappa = np.asarray(kappa, dtype=float)
    if kappa.shape != (d - 1,):
        raise ValueError(f"expected {d - 1} coefficients, got {kappa.shape}")
    z2 = make_basis(d, Symmetry.Z2)
    out = np.zeros(len(z2))
    for g, (a, b) in enumerate(z2.generators):
        out[g] = kappa[a + b - 2] * comb(a + b, b)
    return out


def embed_lower_degree(coeffs, from_basis: MonomialBasis, to_basis: MonomialBasis) -> np.ndarray:
    """Warm start: copy coefficients into a larger basis of the same symmetry."""
    if from_basis.symmetry is not to_basis.symmetry or from_basis.min_degree != to_basis.min_degree:
        raise ValueError("bases must share symmetry and minimum degree")
    if to_basis.degree < from_basis.degree:
        raise ValueError("target basis has lower degree")
    out = np.zeros(len(to_basis))
    out[: len(from_basis)] = coeffs
    return out


@dataclass(frozen=True)
class Jet4:
    value: np.ndarray
    grad: np.ndarray
    hess: np.ndarray
    third: np.ndarray
    fourth: np.ndarray

    def __add__(self, other: "Jet4") -> "Jet4":
        return Jet4(
            self.value + other.value,
            self.grad + other.grad,
            self.hess + other.hess,
            self.third + other.third,
            self.fourth + other.fourth,
        )

    def swapped(self) -> "Jet4":
        """Jet of ``f(x2, x1)`` evaluated at swapped points, reindexed."""
        p = [1, 0]
        return Jet4(
            self.value,
            self.grad[..., p],
            self.hess[..., p, :][..., :, p],
            self.third[..., p, :, :][..., :, p, :][..., :, :, p],
            self.fourth[..., p, :, :, :][..., :, p, :, :][..., :, :, p, :][..., :, :, :, p],
        )


# index tuples of each tensor order grouped by the partial (p, q) they represent
_PARTIALS = [(p, k - p) for k in range(5) for p in range(k, -1, -1)]
_TENSOR_INDEX = {k: list(itertools.product((0, 1), repeat=k)) for k in range(5)}


def _falling(n: np.ndarray, k: int) -> np.ndarray:
    out = np.ones_like(n, dtype=float)
    for r in range(k):
        out = out * (n - r)
    return out


def monomial_partials(exponents: np.ndarray, x) -> dict:
    """Partials ``d^p/dx1^p d^q/dx2^q`` of each monomial, keyed by ``(p, q)``.

    Each entry has shape ``x.shape[:-1] + (n_mono,)``.
    """
    x = np.asarray(x, dtype=float)
    i, j = exponents[:, 0], exponents[:, 1]
    top = int(exponents.max(initial=0))
    pw1 = x[..., 0:1] ** np.arange(top + 1)
    pw2 = x[..., 1:2] ** np.arange(top + 1)
    out = {}
    for p, q in _PARTIALS:
        coef = _falling(i, p) * _falling(j, q)
        ii = np.clip(i - p, 0, None)
        jj = np.clip(j - q, 0, None)
        out[(p, q)] = coef * pw1[..., ii] * pw2[..., jj]
    return out


def jet_from_partials(partials: dict) -> Jet4:
    """Assemble full symmetric tensors from a ``(p, q) -> array`` mapping."""
    tensors = []
    for k in range(5):
        idx = _TENSOR_INDEX[k]
        comps = [partials[(k - sum(t), sum(t))] for t in idx]
        arr = np.stack(comps, axis=-1)
        tensors.append(arr.reshape(arr.shape[:-1] + (2,) * k))
    return Jet4(*tensors)


class PolyDesign:
    """Derivative tables of a basis at fixed points; ``jet(c)`` is then a matmul."""

    def __init__(self, basis: MonomialBasis, points):
        self.basis = basis
        self.points = np.asarray(points, dtype=float)
        mono = monomial_partials(basis.exponents, self.points)
        M = basis.monomial_matrix.T
        self.tables = {pq: arr @ M for pq, arr in mono.items()}

    def partials(self, coeffs) -> dict:
        """Partials at the design points; a 2-D ``coeffs`` (batch, n) adds a leading batch axis."""
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.ndim == 2:
            return {pq: (arr @ coeffs.T).T for pq, arr in self.tables.items()}
        return {pq: arr @ coeffs for pq, arr in self.tables.items()}

    def jet(self, coeffs) -> Jet4:
        return jet_from_partials(self.partials(coeffs))


def polynomial_jet(basis: MonomialBasis, coeffs, x) -> Jet4:
    return PolyDesign(basis, x).jet(coeffs)


def polynomial_value(basis: MonomialBasis, coeffs, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    e = basis.exponents
    mono = x[..., 0:1] ** e[:, 0] * x[..., 1:2] ** e[:, 1]
    return mono @ (basis.monomial_matrix.T @ np.asarray(coeffs, dtype=float))


def canonical_jet(P: Polytope, x) -> Jet4:
    """Exact jet of ``u_can = 1/2 sum_r l_r log l_r``."""
    x = np.asarray(x, dtype=float)
    lv = P.values(x)
    if np.any(lv <= 0):
        raise SingularEvaluationError("canonical potential evaluated on or outside the boundary")
    nu = P.normals
    inv = 1.0 / lv
    value = 0.5 * np.sum(lv * np.log(lv), axis=-1)
    grad = 0.5 * np.einsum("...f,fi->...i", np.log(lv) + 1.0, nu)
    hess = 0.5 * np.einsum("...f,fi,fj->...ij", inv, nu, nu)
    third = -0.5 * np.einsum("...f,fi,fj,fk->...ijk", inv**2, nu, nu, nu)
    fourth = np.einsum("...f,fi,fj,fk,fl->...ijkl", inv**3, nu, nu, nu, nu)
    return Jet4(value, grad, hess, third, fourth)


@dataclass(frozen=True)
class SymplecticPotential:
    polytope: Polytope
    basis: MonomialBasis
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.shape != (len(self.basis),):
            raise ValueError(f"expected {len(self.basis)} coefficients, got {c.shape}")
        object.__setattr__(self, "coeffs", c)

    def value(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        lv = self.polytope.values(x)
        if np.any(lv <= 0):
            raise SingularEvaluationError("potential evaluated on or outside the boundary")
        return 0.5 * np.sum(lv * np.log(lv), axis=-1) + polynomial_value(self.basis, self.coeffs, x)


def potential_jet(S: SymplecticPotential, x) -> Jet4:
    return canonical_jet(S.polytope, x) + polynomial_jet(S.basis, S.coeffs, x)
