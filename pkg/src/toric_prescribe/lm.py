"""Levenberg-Marquardt least squares with forward-difference Jacobians."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg

from .errors import InfeasibleError, NonConvexPointError, SingularEvaluationError

SCALAR_NAMES = ("class_param", "b", "c", "d", "soliton_coeff")
FD_SCHEMES = ("forward", "central")
_EVAL_ERRORS = (NonConvexPointError, SingularEvaluationError, InfeasibleError, FloatingPointError)


class Termination:
    MAX_EVALS = "max_evals"
    RESIDUAL_CHANGE = "residual_change"
    STEP_NORM = "step_norm"


@dataclass(frozen=True)
class LMConfig:
    max_evals: int = 4000
    tol_residual_change: float = 5e-12
    tol_step_norm: float = 5e-12
    damping_init: float = 1e-3
    damping_up: float = 10.0
    damping_down: float = 0.1
    fd_step: float = 1e-7
    fd_scheme: str = "forward"

    def __post_init__(self):
        if self.max_evals < 1:
            raise ValueError("max_evals must be positive")
        if not (self.tol_residual_change > 0 and self.tol_step_norm > 0 and self.damping_init > 0):
            raise ValueError("tolerances and initial damping must be positive")
        if not self.damping_up > 1 > self.damping_down > 0:
            raise ValueError("need damping_up > 1 > damping_down > 0")
        if not self.fd_step > 0:
            raise ValueError("fd_step must be positive")
        if self.fd_scheme not in FD_SCHEMES:
            raise ValueError(f"fd_scheme must be one of {FD_SCHEMES}")


@dataclass(frozen=True)
class ParameterPack:
    """Coefficients plus optional scalars and perturbation blocks.

    Only the entries named in ``free`` (plus ``coeffs``, always free) take part
    in the optimisation; :meth:`vector` and :meth:`with_vector` are inverse
    on those entries.
    """

    coeffs: np.ndarray
    scalars: dict = field(default_factory=dict)
    eps1: np.ndarray | None = None
    eps2: np.ndarray | None = None
    free: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "coeffs", np.asarray(self.coeffs, dtype=float))
        object.__setattr__(self, "scalars", {k: float(v) for k, v in self.scalars.items()})
        for name in ("eps1", "eps2"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, np.asarray(v, dtype=float))
        free = tuple(n for n in SCALAR_NAMES + ("eps",) if n in set(self.free))
        unknown = set(self.free) - set(free)
        if unknown:
            raise ValueError(f"unknown free entries {sorted(unknown)}")
        for n in free:
            if n == "eps" and self.eps1 is None:
                raise ValueError("eps marked free but no eps blocks present")
            if n != "eps" and n not in self.scalars:
                raise ValueError(f"scalar {n} marked free but not set")
        object.__setattr__(self, "free", free)

    @property
    def n_coeffs(self) -> int:
        return len(self.coeffs)

    def vector(self) -> np.ndarray:
        parts = [self.coeffs]
        for n in self.free:
            if n == "eps":
                parts += [self.eps1, self.eps2]
            else:
                parts.append([self.scalars[n]])
        return np.concatenate([np.asarray(p, dtype=float) for p in parts])

    def with_vector(self, v) -> "ParameterPack":
        v = np.asarray(v, dtype=float)
        k = self.n_coeffs
        coeffs = v[:k]
        scalars = dict(self.scalars)
        eps1, eps2 = self.eps1, self.eps2
        for n in self.free:
            if n == "eps":
                e = len(self.eps1)
                eps1, eps2 = v[k : k + e], v[k + e : k + 2 * e]
                k += 2 * e
            else:
                scalars[n] = float(v[k])
                k += 1
        if k != len(v):
            raise ValueError(f"vector length {len(v)} does not match pack size {k}")
        return replace(self, coeffs=coeffs.copy(), scalars=scalars, eps1=eps1, eps2=eps2)

    def with_coeffs(self, coeffs) -> "ParameterPack":
        return replace(self, coeffs=np.asarray(coeffs, dtype=float))

    def to_dict(self) -> dict:
        out = {"coeffs": self.coeffs.tolist(), "scalars": dict(self.scalars), "free": list(self.free)}
        if self.eps1 is not None:
            out["eps1"], out["eps2"] = self.eps1.tolist(), self.eps2.tolist()
        return out


@dataclass
class LMReport:
    pack: ParameterPack
    history: list
    evals: int
    termination: str
    metrics: dict = field(default_factory=dict)
    wall_time: float = 0.0
    iterations: int = 0
    damping: float = 0.0

    @property
    def objective(self) -> float:
        return self.history[-1]

    def to_dict(self) -> dict:
        return {
            "objective": float(self.objective),
            "history": [float(v) for v in self.history],
            "evals": self.evals,
            "iterations": self.iterations,
            "termination": self.termination,
            "damping": self.damping,
            "metrics": {k: v.to_dict() if hasattr(v, "to_dict") else v for k, v in self.metrics.items()},
            "wall_time": self.wall_time,
        }


def _safe_eval(fn, pack):
    try:
        with np.errstate(all="raise"):
            r = np.asarray(fn(pack), dtype=float)
    except _EVAL_ERRORS + (ZeroDivisionError, np.linalg.LinAlgError, OverflowError):
        return None
    return r if np.all(np.isfinite(r)) else None


def _rows(residual_fn, pack, V):
    batch = getattr(residual_fn, "batch", None)
    if batch is not None:
        return batch(pack, V)
    return [_safe_eval(residual_fn, pack.with_vector(v)) for v in V]


def jacobian_fd(residual_fn, pack: ParameterPack, fd_step: float, r0=None, scheme: str = "forward") -> np.ndarray:
    """Finite-difference Jacobian; column ``j`` uses step ``fd_step * max(1, |v_j|)``.

    ``scheme="forward"`` is one-sided; a perturbation that makes the residual
    undefined falls back to the backward difference for that column.
    ``scheme="central"`` costs twice as much and degrades to one-sided
    columns near infeasibility.  If ``residual_fn`` has a ``batch`` method,
    ``batch(pack, V)`` must return the residual vectors at the rows of ``V``
    (``None`` rows for infeasible ones) and is used for speed.
    """
    if not fd_step > 0:
        raise ValueError("fd_step must be positive")
    if scheme not in FD_SCHEMES:
        raise ValueError(f"unknown finite-difference scheme {scheme!r}")
    v0 = pack.vector()
    if r0 is None:
        r0 = _safe_eval(residual_fn, pack)
        if r0 is None:
            raise InfeasibleError("Jacobian requested at an infeasible point")
    h = fd_step * np.maximum(1.0, np.abs(v0))
    fwd = _rows(residual_fn, pack, v0[None, :] + np.diag(h))
    bwd = _rows(residual_fn, pack, v0[None, :] - np.diag(h)) if scheme == "central" else [None] * len(v0)
    J = np.empty((len(r0), len(v0)))
    for j, (rf, rb) in enumerate(zip(fwd, bwd)):
        if rf is not None and rb is not None:
            J[:, j] = (rf - rb) / (2 * h[j])
        elif rf is not None:
            J[:, j] = (rf - r0) / h[j]
        else:
            if rb is None:
                rb = _safe_eval(residual_fn, pack.with_vector(v0 - h[j] * np.eye(len(v0))[j]))
            if rb is None:
                raise InfeasibleError(f"both one-sided differences infeasible in column {j}")
            J[:, j] = (r0 - rb) / h[j]
    return J


def lm_minimize(residual_fn, x0: ParameterPack, cfg: LMConfig = LMConfig()) -> LMReport:
    """Minimise ``|r(x)|^2`` by Levenberg-Marquardt with Marquardt diagonal scaling.

    Evaluations count every call of the residual, including Jacobian columns.
    Steps that make the residual undefined are rejected like non-improving ones.
    A small change of the objective only ends the run when the undamped
    Gauss-Newton model also predicts less than the tolerance is left to gain;
    otherwise a heavily damped first step on a badly conditioned problem
    would stop the search prematurely.
    """
    start = time.perf_counter()
    pack = x0
    r = _safe_eval(residual_fn, pack)
    if r is None:
        raise InfeasibleError("residual undefined at the starting point")
    evals = 1
    I = float(r @ r)
    history = [I]
    lam = cfg.damping_init
    n = len(pack.vector())
    reason = None
    iterations = 0

    while reason is None:
        cost = n * (2 if cfg.fd_scheme == "central" else 1)
        if evals + cost + 1 > cfg.max_evals:
            reason = Termination.MAX_EVALS
            break
        J = jacobian_fd(residual_fn, pack, cfg.fd_step, r, cfg.fd_scheme)
        evals += cost
        A = J.T @ J
        g = J.T @ r
        D = np.maximum(np.diag(A), 1e-12 * max(1.0, float(np.max(np.diag(A)))))
        x = pack.vector()
        gn = np.linalg.lstsq(J, -r, rcond=None)[0]
        predicted = I - float(np.sum((r + J @ gn) ** 2))
        while True:
            if evals >= cfg.max_evals:
                reason = Termination.MAX_EVALS
                break
            try:
                cf = linalg.cho_factor(A + lam * np.diag(D), check_finite=True)
                dx = -linalg.cho_solve(cf, g)
            except (linalg.LinAlgError, ValueError):
                lam *= cfg.damping_up
                continue
            if np.linalg.norm(dx) < cfg.tol_step_norm:
                reason = Termination.STEP_NORM
                break
            trial = pack.with_vector(x + dx)
            rt = _safe_eval(residual_fn, trial)
            evals += 1
            It = float(rt @ rt) if rt is not None else np.inf
            if It < I:
                change = I - It
                pack, r, I = trial, rt, It
                history.append(I)
                lam = max(lam * cfg.damping_down, 1e-20)
                iterations += 1
                if change < cfg.tol_residual_change and predicted < cfg.tol_residual_change:
                    reason = Termination.RESIDUAL_CHANGE
                break
            lam *= cfg.damping_up
    return LMReport(pack, history, evals, reason, wall_time=time.perf_counter() - start, iterations=iterations, damping=lam)


def continuation(problem, degrees, cfg: LMConfig = LMConfig(), start=None, callback=None) -> list:
    """Run :func:`lm_minimize` over ascending degrees, warm-starting each from the last.

    ``problem.at_degree(d)`` returns a residual function for degree ``d`` with
    ``initial_pack()`` and ``embed(pack)`` methods.  ``callback(d, fn, report)``
    is invoked after every degree (used to write per-degree outputs).
    """
    degrees = list(degrees)
    if degrees != sorted(degrees) or len(set(degrees)) != len(degrees):
        raise ValueError("degrees must be strictly ascending")
    reports = []
    pack = start
    for d in degrees:
        fn = problem.at_degree(d)
        x0 = fn.initial_pack() if pack is None else fn.embed(pack)
        rep = lm_minimize(fn, x0, cfg)
        rep.metrics = fn.metrics(rep.pack) if hasattr(fn, "metrics") else {}
        reports.append(rep)
        if callback is not None:
            callback(d, fn, rep)
        pack = rep.pack
    return reports
