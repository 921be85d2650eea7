"""Run configurations, presets and the drivers behind the command line."""

from __future__ import annotations

import csv
import io
import os
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import coeffile
from .basis import Symmetry, embed_u2_in_z2
from .errors import InfeasibleError
from .lm import LMConfig, ParameterPack, lm_minimize
from . import params
from .params import lpp_parameters, qe2_parameters, soliton_coefficient
from .polytope import make_polytope
from .quadrature import polygon_scheme
from .problem import REPORT_KINDS, CurvatureProblem, DegreeProblem, Equation, Manifold, ProblemSpec
from .residual import DEFAULT_DELTA, DEFAULT_GRID_N, ResidualKind, WeightMode

OUTPUT_ENV = "TORIC_PRESCRIBE_OUTPUT"
LM_FIELDS = tuple(f.name for f in fields(LMConfig))


@dataclass(frozen=True)
class RunConfig:
    manifold: str = "cp2-blowup1"
    equation: str = "soliton"
    residual: str = "t1"
    symmetry: str = "z2"
    degree_min: int = 2
    degree_max: int = 10
    extra_degrees: tuple = ()
    m: float = 2.0
    class_param: float | None = None
    soliton_coeff: float | None = None
    b: float | None = None
    c: float | None = None
    d: float | None = None
    mu: float | None = None
    free_class: bool = False
    free_conformal: bool = False
    free_soliton: bool = False
    eps_degree: int = 0
    delta: float = DEFAULT_DELTA
    quad_order: int = 20
    weight_mode: str = "sqrt"
    grid_n: int = DEFAULT_GRID_N
    max_evals: int = 4000
    tol_residual_change: float = 5e-12
    tol_step_norm: float = 5e-12
    damping_init: float = 1e-3
    damping_up: float = 10.0
    damping_down: float = 0.1
    fd_step: float = 1e-7
    fd_scheme: str = "forward"
    preset: str | None = None
    warm_preset: str | None = None

    def __post_init__(self):
        Manifold(self.manifold)
        Symmetry(self.symmetry)
        WeightMode(self.weight_mode)
        eq, kind = Equation(self.equation), ResidualKind(self.residual)
        if kind is ResidualKind.T4:
            raise ValueError("t4 is reported alongside t3 but is not a search residual")
        if kind.quasi_einstein != (eq is Equation.QEM):
            raise ValueError(f"residual {kind.value} requires equation {'qem' if kind.quasi_einstein else 'soliton'}")
        if self.degree_min < 2 or self.degree_max < self.degree_min:
            raise ValueError("need 2 <= degree_min <= degree_max")
        object.__setattr__(self, "extra_degrees", tuple(int(d) for d in self.extra_degrees))
        if self.free_soliton and eq is not Equation.SOLITON:
            raise ValueError("free_soliton needs the soliton equation")
        if self.free_conformal and eq is not Equation.QEM:
            raise ValueError("free_conformal needs the qem equation")
        self.lm_config()

    @property
    def degrees(self) -> list:
        return sorted(set(range(self.degree_min, self.degree_max + 1)) | set(self.extra_degrees))

    def lm_config(self) -> LMConfig:
        return LMConfig(**{k: getattr(self, k) for k in LM_FIELDS})

    def to_dict(self) -> dict:
        d = asdict(self)
        d["extra_degrees"] = list(self.extra_degrees)
        return d

    def hash(self) -> str:
        return coeffile.config_hash(self.to_dict())

    def problem_spec(self) -> ProblemSpec:
        """Resolve the derived parameters (soliton coefficient, conformal constants)."""
        man = Manifold(self.manifold)
        a = self.class_param if self.class_param is not None else man.canonical_class
        free = []
        if self.free_class:
            free.append("class_param")
        kw = {}
        if Equation(self.equation) is Equation.SOLITON:
            coeff = self.soliton_coeff
            if coeff is None:
                coeff = soliton_coefficient(make_polytope(man.polytope_kind, a))
            kw["soliton_coeff"] = coeff
            if self.free_soliton:
                free.append("soliton_coeff")
        else:
            b, c, d, mu = self.b, self.c, self.d, self.mu
            if None in (b, c, d):
                if man is Manifold.BLOWUP1:
                    p = lpp_parameters(self.m)
                    b0, c0, d0, mu0 = p.b, p.c, p.d, None
                elif man is Manifold.BLOWUP2:
                    p = qe2_parameters(self.m, a)
                    b0, c0, d0, mu0 = p.b, p.c, p.d, p.mu
                else:
                    b0, c0, d0, mu0 = 0.0, 1.0, 0.0, None
                b = b0 if b is None else b
                c = c0 if c is None else c
                d = d0 if d is None else d
                mu = mu0 if mu is None else mu
            kw.update(b=b, c=c, d=d, mu=mu, m=self.m, eps_degree=self.eps_degree)
            if self.free_conformal:
                free += ["b", "c", "d"] + (["eps"] if self.eps_degree else [])
        return ProblemSpec(
            man,
            Equation(self.equation),
            ResidualKind(self.residual),
            Symmetry(self.symmetry),
            class_param=a,
            free=tuple(free),
            delta=self.delta,
            quad_order=self.quad_order,
            weight_mode=WeightMode(self.weight_mode),
            grid_n=self.grid_n,
            **kw,
        )


PRESETS = {
    "kc-t1": dict(manifold="cp2-blowup1", equation="soliton", residual="t1", symmetry="u2"),
    "kc-t2": dict(manifold="cp2-blowup1", equation="soliton", residual="t2", symmetry="u2"),
    "wz-t1": dict(manifold="cp2-blowup2", equation="soliton", residual="t1", symmetry="z2"),
    "wz-t2": dict(manifold="cp2-blowup2", equation="soliton", residual="t2", symmetry="z2", extra_degrees=(15,)),
    "lpp-t3": dict(manifold="cp2-blowup1", equation="qem", residual="t3", symmetry="u2", m=2.0),
    "qe2-t3": dict(manifold="cp2-blowup2", equation="qem", residual="t3", symmetry="z2", m=2.0, extra_degrees=(15,)),
    "qe-free": dict(
        manifold="cp2-blowup2",
        equation="qem",
        residual="t3",
        symmetry="z2",
        m=2.0,
        degree_min=15,
        degree_max=15,
        free_class=True,
        free_conformal=True,
        warm_preset="qe2-t3",
    ),
}


def preset_config(name: str, **overrides) -> RunConfig:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return RunConfig(**{**PRESETS[name], "preset": name, **overrides})


# solving ---------------------------------------------------------------------------

def csv_header(equation: Equation) -> list:
    scalar, tensor = REPORT_KINDS[Equation(equation)]
    return ["d", "N_d", f"E({scalar.value})", f"Max({scalar.value})", f"E({tensor.value})", f"Max({tensor.value})"]


def csv_row(degree: int, n: int, metrics: dict, equation: Equation) -> list:
    scalar, tensor = REPORT_KINDS[Equation(equation)]
    m = lambda k, f: repr(float(metrics[k.value][f]))
    return [degree, n, m(scalar, "normalized"), m(scalar, "max_abs"), m(tensor, "normalized"), m(tensor, "max_abs")]


def write_csv(path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    w.writerows(rows)
    coeffile.atomic_write(path, buf.getvalue())


def coefficient_file(cfg: RunConfig, fn: DegreeProblem, pack: ParameterPack, report: dict, metrics: dict, timestamp=None) -> coeffile.CoefficientFile:
    return coeffile.CoefficientFile(
        problem=fn.spec.to_dict(),
        basis=fn.basis.describe(),
        coefficients=pack.coeffs.tolist(),
        scalars=dict(pack.scalars),
        eps1=None if pack.eps1 is None else pack.eps1.tolist(),
        eps2=None if pack.eps2 is None else pack.eps2.tolist(),
        free=list(pack.free),
        metrics=metrics,
        report=report,
        provenance={
            "config_hash": cfg.hash(),
            "config": cfg.to_dict(),
            "timestamp": timestamp or datetime.now(timezone.utc).isoformat(timespec="seconds"),
        },
    )


def default_output(cfg: RunConfig) -> Path:
    base = Path(os.environ.get(OUTPUT_ENV, "runs"))
    return base / (cfg.preset or "run")


@dataclass
class SolveResult:
    files: dict = field(default_factory=dict)  # degree -> CoefficientFile
    rows: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    output: Path | None = None


def run_solve(cfg: RunConfig, output=None, start: coeffile.CoefficientFile | None = None, resume: bool = True, log=None) -> SolveResult:
    """Degree continuation with per-degree JSON/TXT outputs and a CSV table.

    A degree whose output already exists with the same configuration hash is
    loaded instead of recomputed.
    """
    out = Path(output) if output is not None else default_output(cfg)
    log = log or (lambda msg: print(msg, file=sys.stderr))
    out.mkdir(parents=True, exist_ok=True)
    if start is None and cfg.warm_preset:
        # the warm-up run keeps the fixed class and stops at the first degree of this run
        deg = cfg.degrees[0]
        warm = preset_config(cfg.warm_preset, **{k: getattr(cfg, k) for k in ("m",) + LM_FIELDS})
        lower = [d for d in warm.degrees if d < deg]
        warm = replace(warm, degree_min=min(lower + [deg]), degree_max=max(lower + [deg]), extra_degrees=())
        if lower:
            warm = replace(warm, degree_max=max(lower), extra_degrees=(deg,))
        res = run_solve(warm, out / "warm", resume=resume, log=log)
        if not res.files:
            return SolveResult(failures=[("warm", "warm-start run produced no result")], output=out)
        start = res.files[max(res.files)]
    coeffile.atomic_write(out / "config.json", coeffile.canonical_json(cfg.to_dict()))
    spec = cfg.problem_spec()
    problem = CurvatureProblem(spec)
    lmcfg = cfg.lm_config()
    result = SolveResult(output=out)
    pack = None
    if start is not None:
        pack = start.pack(free=spec.free)
    header = csv_header(spec.equation)
    h = cfg.hash()
    for d in cfg.degrees:
        fn = problem.at_degree(d)
        path = out / f"deg_{d:02d}.json"
        if resume and path.exists():
            try:
                old = coeffile.load(path)
                if old.provenance.get("config_hash") == h:
                    result.files[d] = old
                    result.rows.append(csv_row(d, len(fn.basis), old.metrics, spec.equation))
                    pack = old.pack(free=spec.free)
                    log(f"degree {d}: reusing {path.name}")
                    continue
            except Exception as exc:  # unreadable file: recompute
                log(f"degree {d}: ignoring {path.name} ({exc})")
        try:
            x0 = fn.initial_pack() if pack is None else fn.embed(pack)
            rep = lm_minimize(fn, x0, lmcfg)
        except (InfeasibleError, ValueError) as exc:
            result.failures.append((d, str(exc)))
            log(f"degree {d}: solver failure: {exc}")
            continue
        metrics = {k: v.to_dict() for k, v in fn.metrics(rep.pack).items()}
        rep.metrics = metrics
        cf = coefficient_file(cfg, fn, rep.pack, rep.to_dict(), metrics)
        coeffile.save(cf, path)
        coeffile.atomic_write(out / f"deg_{d:02d}.txt", coeffile.export_text(rep.pack.coeffs))
        result.files[d] = cf
        result.rows.append(csv_row(d, len(fn.basis), metrics, spec.equation))
        write_csv(out / "table.csv", header, result.rows)
        pack = rep.pack
        scal, ten = REPORT_KINDS[spec.equation]
        log(
            f"degree {d}: N={len(fn.basis)} {rep.termination} evals={rep.evals} I={rep.objective:.3e} "
            f"E({scal.value})={metrics[scal.value]['normalized']:.2e} Max({ten.value})={metrics[ten.value]['max_abs']:.2e}"
        )
    write_csv(out / "table.csv", header, result.rows)
    return result


# evaluation and post-processing ---------------------------------------------------------

def problem_from_file(cf: coeffile.CoefficientFile) -> DegreeProblem:
    p = dict(cf.problem)
    p.pop("free", None)
    for k in ("class_param", "soliton_coeff", "b", "c", "d"):
        if k in cf.scalars:
            p[k] = cf.scalars[k]
    spec = ProblemSpec(**p)
    return DegreeProblem(spec, cf.monomial_basis())


def run_eval(cf: coeffile.CoefficientFile, kinds=None) -> dict:
    fn = problem_from_file(cf)
    pack = cf.pack(free=())
    kinds = kinds or [k.value for k in REPORT_KINDS[fn.spec.equation]]
    out = {}
    for k in kinds:
        kind = ResidualKind(k)
        if kind.quasi_einstein != (fn.spec.equation is Equation.QEM):
            raise ValueError(f"residual {kind.value} does not apply to a {fn.spec.equation.value} file")
        out[kind.value] = fn.metric(pack, kind).to_dict()
    return out


def taylor_coefficients(cf: coeffile.CoefficientFile) -> dict:
    """Coefficients ``k_1, k_2, ...`` of ``F = sum k_j t^(j+1)``.

    U(2) files store them directly; Z2 files are projected by least squares
    onto the span of the powers of ``t`` and the projection residual reported.
    """
    basis = cf.monomial_basis()
    c = np.array(cf.coefficients, dtype=float)
    if basis.symmetry is Symmetry.U2:
        return {"k": c.tolist(), "projection_residual": 0.0, "symmetry": "u2"}
    deg = basis.degree
    E = np.column_stack([embed_u2_in_z2(np.eye(deg - 1)[j], deg) for j in range(deg - 1)])
    k, *_ = np.linalg.lstsq(E, c, rcond=None)
    return {"k": k.tolist(), "projection_residual": float(np.linalg.norm(E @ k - c)), "symmetry": "z2"}


def params_report(system: str, m: float = 2.0, a: float | None = None, manifold: str | None = None) -> dict:
    P = params
    if system == "soliton":
        man = Manifold(manifold or "cp2-blowup1")
        a = man.canonical_class if a is None else a
        poly = make_polytope(man.polytope_kind, a)
        k = P.soliton_coefficient(poly)
        sch = polygon_scheme(poly, P.PARAM_QUAD_ORDER)
        t = sch.points.sum(axis=1)
        res = float(np.dot(sch.weights, t * np.exp(-k * t)))
        return {"system": system, "values": {"soliton_coeff": k, "class_param": a}, "residuals": {"barycentre": res}, "quadrature_order": P.PARAM_QUAD_ORDER}
    if system == "lpp":
        p = P.lpp_parameters(m)
        return {
            "system": system,
            "values": p.to_dict(),
            "residuals": {"integral": P.lpp_constraint(p.b, m), "c2_minus_b2_minus_1": p.c**2 - p.b**2 - 1},
            "quadrature_order": P.PARAM_QUAD_ORDER,
        }
    if system == "qe2":
        a = 2.0 if a is None else a
        p = P.qe2_parameters(m, a)
        r = P.qe2_system((p.b, p.c, p.d, p.mu), m, a)
        return {
            "system": system,
            "values": p.to_dict(),
            "residuals": {"algebraic": r[:3].tolist(), "integral": float(r[3])},
            "quadrature_order": P.PARAM_QUAD_ORDER,
        }
    raise ValueError(f"unknown parameter system {system!r}")
