"""Residual functions for the least-squares searches.

A :class:`CurvatureProblem` fixes the manifold, equation, residual and
search options; ``at_degree(d)`` returns a :class:`DegreeProblem`, a callable
``pack -> weighted residual vector`` as consumed by :mod:`toric_prescribe.lm`.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from enum import Enum

import numpy as np

from .basis import MonomialBasis, Symmetry, embed_lower_degree, make_basis
from .errors import DegeneratePolytopeError, InfeasibleError, NonConvexPointError, ParameterDomainError, SingularEvaluationError
from .lm import ParameterPack
from .polytope import Polytope, PolytopeKind, make_polytope, shrink
from .quadrature import QuadratureScheme, polygon_scheme
from .residual import (
    DEFAULT_DELTA,
    DEFAULT_GRID_N,
    ConformalData,
    ErrorMetrics,
    PointEvaluator,
    ResidualKind,
    ResidualSpec,
    SolitonData,
    WeightMode,
    eps_basis,
    max_grid,
    quadrature_weights,
)

_INFEASIBLE = (NonConvexPointError, SingularEvaluationError, ParameterDomainError, DegeneratePolytopeError, FloatingPointError)


class Manifold(str, Enum):
    BLOWUP1 = "cp2-blowup1"
    BLOWUP2 = "cp2-blowup2"
    SIMPLEX = "simplex"

    @property
    def polytope_kind(self) -> PolytopeKind:
        return {
            Manifold.BLOWUP1: PolytopeKind.TRAPEZIUM,
            Manifold.BLOWUP2: PolytopeKind.PENTAGON,
            Manifold.SIMPLEX: PolytopeKind.SIMPLEX,
        }[self]

    @property
    def canonical_class(self) -> float | None:
        return {Manifold.BLOWUP1: 1.0, Manifold.BLOWUP2: 2.0, Manifold.SIMPLEX: None}[self]


class Equation(str, Enum):
    SOLITON = "soliton"
    QEM = "qem"


# residual kinds reported alongside the minimised one: (scalar, tensor)
REPORT_KINDS = {
    Equation.SOLITON: (ResidualKind.T1, ResidualKind.T2),
    Equation.QEM: (ResidualKind.T4, ResidualKind.T3),
}


@dataclass(frozen=True)
class ProblemSpec:
    manifold: Manifold
    equation: Equation
    residual: ResidualKind
    symmetry: Symmetry = Symmetry.Z2
    class_param: float | None = None
    soliton_coeff: float = 0.0
    b: float = 0.0
    c: float = 1.0
    d: float = 0.0
    m: float = 2.0
    mu: float | None = None
    eps_degree: int = 0
    free: tuple = ()
    delta: float = DEFAULT_DELTA
    quad_order: int = 20
    weight_mode: WeightMode = WeightMode.SQRT
    grid_n: int = DEFAULT_GRID_N

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)
        set_("manifold", Manifold(self.manifold))
        set_("equation", Equation(self.equation))
        set_("residual", ResidualKind(self.residual))
        set_("symmetry", Symmetry(self.symmetry))
        set_("weight_mode", WeightMode(self.weight_mode))
        set_("free", tuple(self.free))
        if self.class_param is None:
            set_("class_param", self.manifold.canonical_class)
        if self.residual.quasi_einstein != (self.equation is Equation.QEM):
            raise ValueError(f"residual {self.residual.value} does not belong to equation {self.equation.value}")
        if self.symmetry is Symmetry.U2 and self.manifold is Manifold.BLOWUP2:
            raise ValueError("U(2) symmetry is only available on cp2-blowup1 and simplex")
        if self.equation is Equation.QEM and not self.m > 1:
            raise ValueError("m must exceed 1")
        allowed = {"class_param", "soliton_coeff"} if self.equation is Equation.SOLITON else {"class_param", "b", "c", "d", "eps"}
        bad = set(self.free) - allowed
        if bad:
            raise ValueError(f"cannot free {sorted(bad)} for equation {self.equation.value}")
        if "class_param" in self.free and self.manifold is Manifold.SIMPLEX:
            raise ValueError("the simplex has no class parameter")
        if "eps" in self.free and self.eps_degree < 1:
            raise ValueError("freeing eps requires eps_degree >= 1")
        if self.quad_order < 1 or self.grid_n < 2:
            raise ValueError("quadrature order and grid size must be positive")
        if self.delta < 0:
            raise ValueError("delta must be non-negative")

    def residual_spec(self, kind: ResidualKind | None = None) -> ResidualSpec:
        kind = ResidualKind(kind or self.residual)
        return ResidualSpec(kind, self.delta if kind.tensorial else 0.0, self.weight_mode)

    def to_dict(self) -> dict:
        out = asdict(self)
        for k, v in out.items():
            if isinstance(v, Enum):
                out[k] = v.value
        out["free"] = list(self.free)
        return out


class CurvatureProblem:
    def __init__(self, spec: ProblemSpec):
        self.spec = spec

    def at_degree(self, degree: int) -> "DegreeProblem":
        return DegreeProblem(self.spec, make_basis(degree, self.spec.symmetry))


@dataclass
class _Stage:
    polytope: Polytope
    scheme: QuadratureScheme
    omega: np.ndarray
    evaluator: PointEvaluator


class DegreeProblem:
    """Weighted residual vector for one basis, with ``|r|^2 = sum (omega_i T(p_i))^2``.

    Scalar kinds give ``r_i = omega_i T(p_i)``; tensor kinds stack
    ``omega_i (R11, sqrt2 R12, R22)`` per point, which has the same sum of
    squares but stays differentiable where ``R`` vanishes.

    Polytope, quadrature scheme and evaluator are rebuilt whenever the class
    parameter changes; a small cache keeps the recent ones.
    """

    def __init__(self, spec: ProblemSpec, basis: MonomialBasis):
        self.spec = spec
        self.basis = basis
        self._cache: dict = {}

    # packs ----------------------------------------------------------------
    def initial_pack(self) -> ParameterPack:
        s = self.spec
        scalars = {}
        if s.class_param is not None:
            scalars["class_param"] = s.class_param
        if s.equation is Equation.SOLITON:
            scalars["soliton_coeff"] = s.soliton_coeff
            eps = (None, None)
        else:
            scalars.update(b=s.b, c=s.c, d=s.d)
            n = len(eps_basis(s.eps_degree)) if s.eps_degree else 0
            eps = (np.zeros(n), np.zeros(n)) if n else (None, None)
        return ParameterPack(np.zeros(len(self.basis)), scalars, eps[0], eps[1], s.free)

    def embed(self, pack: ParameterPack) -> ParameterPack:
        """Carry a pack from a lower degree (or the same one) into this basis."""
        d = self.basis.min_degree
        while len(make_basis(d, self.basis.symmetry)) < len(pack.coeffs):
            d += 1
        src = make_basis(d, self.basis.symmetry)
        if len(src) != len(pack.coeffs):
            raise ValueError("coefficient vector does not match a basis of this symmetry")
        base = self.initial_pack()
        scalars = {**base.scalars, **pack.scalars}
        eps1, eps2 = pack.eps1, pack.eps2
        if base.eps1 is not None and (eps1 is None or len(eps1) != len(base.eps1)):
            eps1, eps2 = base.eps1, base.eps2
        if base.eps1 is None:
            eps1 = eps2 = None
        coeffs = embed_lower_degree(pack.coeffs, src, self.basis)
        return ParameterPack(coeffs, scalars, eps1, eps2, self.spec.free)

    def data(self, pack: ParameterPack):
        s = self.spec
        if s.equation is Equation.SOLITON:
            return SolitonData(pack.scalars["soliton_coeff"])
        sc = pack.scalars
        return ConformalData(sc["b"], sc["c"], sc["d"], s.m, s.mu, pack.eps1, pack.eps2)

    def polytope(self, pack: ParameterPack) -> Polytope:
        a = pack.scalars.get("class_param")
        return make_polytope(self.spec.manifold.polytope_kind, a)

    # evaluation -------------------------------------------------------------
    def _stage(self, pack: ParameterPack, kind: ResidualKind | None = None) -> _Stage:
        kind = ResidualKind(kind or self.spec.residual)
        key = (pack.scalars.get("class_param"), kind)
        st = self._cache.get(key)
        if st is None:
            if len(self._cache) > 8:
                self._cache.clear()
            rs = self.spec.residual_spec(kind)
            P = self.polytope(pack)
            sch = polygon_scheme(shrink(P, rs.delta), self.spec.quad_order)
            ev = PointEvaluator(P, self.basis, sch.points, kind, self.spec.eps_degree)
            st = _Stage(P, sch, quadrature_weights(sch, rs.weight_mode), ev)
            self._cache[key] = st
        return st

    def __call__(self, pack: ParameterPack) -> np.ndarray:
        try:
            with np.errstate(all="raise"):
                st = self._stage(pack)
                return (st.omega[:, None] * st.evaluator.components(pack.coeffs, self.data(pack))).ravel()
        except _INFEASIBLE as exc:
            raise InfeasibleError(str(exc)) from exc

    def batch(self, pack: ParameterPack, V) -> list:
        """Residuals at the rows of ``V``; rows changing only coefficients share one evaluation."""
        v0 = pack.vector()
        k = pack.n_coeffs
        V = np.asarray(V, dtype=float)
        coeff_rows = [i for i in range(len(V)) if np.array_equal(V[i, k:], v0[k:])]
        out: list = [None] * len(V)
        if coeff_rows:
            try:
                with np.errstate(all="raise"):
                    st = self._stage(pack)
                    C = st.evaluator.components(V[coeff_rows, :k], self.data(pack))
                    R = (st.omega[None, :, None] * C).reshape(len(coeff_rows), -1)
                for i, r in zip(coeff_rows, R):
                    out[i] = r
            except _INFEASIBLE:
                coeff_rows = []
        done = set(coeff_rows)
        for i in range(len(V)):
            if i not in done:
                try:
                    out[i] = self(pack.with_vector(V[i]))
                except InfeasibleError:
                    out[i] = None
        return out

    def objective(self, pack: ParameterPack) -> float:
        r = self(pack)
        return float(r @ r)

    def metric(self, pack: ParameterPack, kind: ResidualKind) -> ErrorMetrics:
        kind = ResidualKind(kind)
        st = self._stage(pack, kind)
        data = self.data(pack)
        T = st.evaluator.values(pack.coeffs, data)
        r = st.omega * T
        I = float(r @ r)
        X = max_grid(st.polytope, self.spec.grid_n, DEFAULT_DELTA)
        Tmax = 0.0
        for lo in range(0, len(X), 4096):
            ev = PointEvaluator(st.polytope, self.basis, X[lo : lo + 4096], kind, self.spec.eps_degree)
            Tmax = max(Tmax, float(np.max(np.abs(ev.values(pack.coeffs, data)))))
        return ErrorMetrics(float(np.sqrt(I) / st.polytope.volume()), Tmax, I)

    def metrics(self, pack: ParameterPack) -> dict:
        """Error metrics of the scalar and tensor residuals of the equation."""
        out = {}
        for kind in REPORT_KINDS[self.spec.equation]:
            try:
                with np.errstate(all="raise"):
                    out[kind.value] = self.metric(pack, kind)
            except _INFEASIBLE:
                out[kind.value] = ErrorMetrics(float("nan"), float("nan"), float("nan"))
        return out
