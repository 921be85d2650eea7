"""``toric-prescribe {solve|eval|taylor|params|quadcheck}``.

Exit codes: 0 success, 1 configuration error, 2 solver or check failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields

from . import coeffile, experiments, selfcheck
from .errors import BracketError, CoefficientFileError, InfeasibleError, ToricError
from .experiments import OUTPUT_ENV, PRESETS, RunConfig

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2

_BOOL_FIELDS = {"free_class", "free_conformal", "free_soliton"}
_SKIP_FIELDS = {"preset", "warm_preset", "extra_degrees"}


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", choices=sorted(PRESETS), help="start from a bundled experiment")
    for f in fields(RunConfig):
        if f.name in _SKIP_FIELDS:
            continue
        if f.name in _BOOL_FIELDS:
            p.add_argument(_flag(f.name), action="store_true", default=None)
            continue
        typ = {int: int, float: float}.get(type(f.default), None)
        if typ is None:
            typ = float if f.name in {"class_param", "soliton_coeff", "b", "c", "d", "mu"} else str
        p.add_argument(_flag(f.name), type=typ, default=None)
    p.add_argument("--extra-degrees", type=lambda s: tuple(int(v) for v in s.split(",") if v), default=None,
                   help="comma separated degrees run after degree-max, e.g. 15")
    p.add_argument("--output", help=f"output directory (default ${OUTPUT_ENV}/<preset>)")
    p.add_argument("--start", help="coefficient file used as the initial point")
    p.add_argument("--no-resume", action="store_true", help="recompute degrees that already have output")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="toric-prescribe", description="Approximate toric solitons and quasi-Einstein metrics.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="degree continuation, writing per-degree files and a CSV table")
    _add_run_flags(s)

    e = sub.add_parser("eval", help="error metrics of a coefficient file")
    e.add_argument("file")
    e.add_argument("--residual", action="append", choices=["t1", "t2", "t3", "t4"])

    t = sub.add_parser("taylor", help="Taylor coefficients in t = x1 + x2")
    t.add_argument("file")

    p = sub.add_parser("params", help="solve a closed parameter system")
    p.add_argument("--system", choices=["soliton", "lpp", "qe2"], required=True)
    p.add_argument("--m", type=float, default=2.0)
    p.add_argument("--a", type=float, default=None)
    p.add_argument("--manifold", choices=["cp2-blowup1", "cp2-blowup2", "simplex"], default=None)

    q = sub.add_parser("quadcheck", help="built-in consistency checks")
    q.add_argument("--max-degree", type=int, default=30)
    return ap


def config_from_args(args) -> RunConfig:
    given = {}
    for f in fields(RunConfig):
        if f.name in _SKIP_FIELDS:
            continue
        v = getattr(args, f.name, None)
        if v is not None:
            given[f.name] = v
    if args.extra_degrees is not None:
        given["extra_degrees"] = args.extra_degrees
    if args.preset:
        return experiments.preset_config(args.preset, **given)
    return RunConfig(**given)


def _print_json(obj) -> None:
    print(json.dumps(obj, indent=1, sort_keys=True))


def cmd_solve(args) -> int:
    cfg = config_from_args(args)
    start = coeffile.load(args.start) if args.start else None
    res = experiments.run_solve(cfg, args.output, start=start, resume=not args.no_resume)
    print(f"wrote {len(res.files)} degree(s) to {res.output}")
    for d, msg in res.failures:
        print(f"degree {d} failed: {msg}", file=sys.stderr)
    return EXIT_SOLVER if res.failures or not res.files else EXIT_OK


def cmd_eval(args) -> int:
    _print_json(experiments.run_eval(coeffile.load(args.file), args.residual))
    return EXIT_OK


def cmd_taylor(args) -> int:
    _print_json(experiments.taylor_coefficients(coeffile.load(args.file)))
    return EXIT_OK


def cmd_params(args) -> int:
    _print_json(experiments.params_report(args.system, args.m, args.a, args.manifold))
    return EXIT_OK


def cmd_quadcheck(args) -> int:
    checks = selfcheck.run_checks(args.max_degree)
    _print_json({"checks": [c.to_dict() for c in checks], "passed": all(c.passed for c in checks)})
    return EXIT_OK if all(c.passed for c in checks) else EXIT_SOLVER


COMMANDS = {"solve": cmd_solve, "eval": cmd_eval, "taylor": cmd_taylor, "params": cmd_params, "quadcheck": cmd_quadcheck}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (InfeasibleError, BracketError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ValueError, CoefficientFileError, ToricError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
