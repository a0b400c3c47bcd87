"""Command-line driver.

Exit codes: 0 success, 1 unexpected error, 2 accuracy check failed,
3 singular or near-eigenvalue system, 4 bad configuration, 5 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import errors, kernels
from .costmodel import cost_table
from .engine import DichotomySolver, SolveOptions
from .io import make_rhs, parse_toeplitz, read_vector, write_vector
from .tridiag import GeneralTridiagonal, random_dominant

EXIT_OK, EXIT_UNEXPECTED, EXIT_ACCURACY, EXIT_SINGULAR, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3, 4, 5

SINGULAR_ERRORS = (errors.Singular, errors.ZeroPivot, errors.NearEigenvalue, errors.NoSolution,
                   errors.NonFiniteRatio, errors.DegenerateRoots)
CONFIG_ERRORS = (errors.TooManyRanks, errors.DomainError, ValueError)


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


@dataclass
class RunConfig:
    command: str
    N: int = 0
    p: int = 1
    M: int = 1
    lam: float = 0.0
    mode: str = "deterministic"
    seed: int = 0
    output: str | None = None
    format: str = "csv"

    def __post_init__(self):
        if self.command in ("solve", "series"):
            if self.p < 1 or self.N < 2 * self.p:
                raise ConfigError(f"need N >= 2p (N={self.N}, p={self.p})")
        if self.M < 1:
            raise ConfigError("M must be >= 1")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"unknown format {self.format!r}")


# -- output -------------------------------------------------------------------

def write_rows(rows, fmt, path=None):
    """Emit a list of flat dicts as CSV or JSON; both carry the same numbers."""
    out = open(path, "w", newline="") if path else sys.stdout
    try:
        if fmt == "json":
            clean = [{k: None if isinstance(v, float) and math.isnan(v) else v
                      for k, v in row.items()} for row in rows]
            json.dump(clean, out, indent=1, default=_json_default)
            out.write("\n")
        else:
            if not rows:
                return
            writer = csv.DictWriter(out, fieldnames=list(rows[0]))
            writer.writeheader()
            for row in rows:
                writer.writerow({k: _csv_value(v) for k, v in row.items()})
    finally:
        if path:
            out.close()


def _csv_value(v):
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(float(v))
    return v


def _json_default(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    raise TypeError(f"cannot serialize {type(v).__name__}")


# -- matrix / options ---------------------------------------------------------

def _matrix(args, rng):
    if args.toeplitz:
        return parse_toeplitz(args.toeplitz, args.n)
    if args.bands:
        lower, diag, upper = (read_vector(path) for path in args.bands)
        n = diag.shape[0]
        if lower.shape != (n,) or upper.shape != (n,):
            raise ConfigError("band files must all have N values")
        lower[0] = 0.0
        upper[-1] = 0.0
        return GeneralTridiagonal(lower, diag, upper)
    return random_dominant(args.n, rng)


def _options(args):
    kw = {"gamma_cap": args.gamma_cap, "preliminary": args.preliminary, "trace": bool(args.trace)}
    env = os.environ.get("DICHOTOMY_MODE")
    if args.mode:
        kw["mode"] = args.mode
    elif env:
        kw["mode"] = env.strip().lower()
    try:
        return SolveOptions(**kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _report_row(rep, index=None, **extra):
    row = {} if index is None else {"index": index}
    row.update(rep.summary())
    row.update(extra)
    return row


def _accuracy_failed(rep, ref=None, tol=1e-10):
    if "posterior_residual" in rep.warnings:
        return True
    if ref is not None:
        err = float(np.max(np.abs(rep.solution - ref))) / max(float(np.max(np.abs(ref))), 1e-300)
        return err > tol
    return False


# -- commands -------------------------------------------------------------------

def cmd_solve(args):
    rng = np.random.default_rng(args.seed)
    A = _matrix(args, rng)
    cfg = RunConfig("solve", A.n, args.p, 1, mode=args.mode or "deterministic", seed=args.seed,
                    output=args.output, format=args.format)
    f = make_rhs(args.rhs, cfg.N, rng)
    solver = DichotomySolver(A, cfg.p, _options(args))
    t0 = time.perf_counter()
    solver.prepare()
    rep = solver.solve(f)
    total = time.perf_counter() - t0
    write_rows([_report_row(rep, backend=kernels.backend_name(), p=cfg.p, t_total=total)],
               cfg.format, cfg.output)
    if args.solution:
        write_vector(args.solution, rep.solution)
    if args.trace and solver.last_fabric is not None:
        solver.last_fabric.trace_csv(args.trace)
    return EXIT_ACCURACY if _accuracy_failed(rep) else EXIT_OK


def cmd_series(args):
    rng = np.random.default_rng(args.seed)
    A = _matrix(args, rng)
    cfg = RunConfig("series", A.n, args.p, args.m, seed=args.seed, output=args.output,
                    format=args.format)
    F = rng.standard_normal((cfg.M, cfg.N))
    solver = DichotomySolver(A, cfg.p, _options(args))
    t0 = time.perf_counter()
    solver.prepare()
    reports = [solver.solve(f) for f in F]
    total = time.perf_counter() - t0
    rows = [_report_row(rep, i, p=cfg.p) for i, rep in enumerate(reports)]
    step2 = sum(r.t_step2 for r in reports)
    rows.append({"index": "total", "n": cfg.N, "p": cfg.p, "m": cfg.M,
                 "t_step1": solver.t_step1, "t_step2_sum": step2,
                 "t_step2_mean": step2 / cfg.M, "t_total": total,
                 "max_residual_inf": max(r.residual_inf for r in reports)})
    if cfg.format == "csv":
        write_rows(rows[:-1], "csv", cfg.output)
        summary_path = f"{cfg.output}.summary.csv" if cfg.output else None
        if summary_path is None:
            sys.stdout.write("\n")
        write_rows(rows[-1:], "csv", summary_path)
    else:
        write_rows(rows, "json", cfg.output)
    return EXIT_ACCURACY if any(_accuracy_failed(r) for r in reports) else EXIT_OK


def _parse_h(text):
    return [float(Fraction(s)) for s in text.split(",") if s]


def cmd_poisson(args):
    from .poisson import (
        CONVERGENCE_FIELDS,
        convergence_study,
        five_point_residual,
        poisson_solve,
        read_grid,
        write_grid,
    )
    opts = _options(args)
    if args.rhs_grid:
        f = read_grid(args.rhs_grid)
        method = "chebyshev" if args.preliminary == "auto" else args.preliminary
        u = poisson_solve(f, args.lam, args.p, opts, method)
        if args.grid_out:
            write_grid(args.grid_out, u)
        res = float(np.max(np.abs(five_point_residual(u, f, args.lam))))
        scale = max(float(np.max(np.abs(f.values))), 1e-300)
        write_rows([{"n1": u.n1, "n2": u.n2, "h": u.h, "residual_inf": res,
                     "relative_residual": res / scale}], args.format, args.output)
        return EXIT_ACCURACY if res > 1e-10 * scale else EXIT_OK
    rows = convergence_study(_parse_h(args.h), args.lam, args.p, opts)
    out = [dict(zip(CONVERGENCE_FIELDS, r)) for r in rows]
    write_rows(out, args.format, args.output)
    return EXIT_OK


def cmd_verify(args):
    from .verification import CRITERIA
    only = {int(s) for s in args.only.split(",")} if args.only else None
    results = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", errors.GammaGuardWarning)
        for fn in CRITERIA:
            number = int(fn.__name__.rsplit("_", 1)[1])
            if only and number not in only:
                continue
            res = fn()
            print(res.line(), flush=True)
            results.append(res)
    if args.output:
        rows = [{"criterion": r.number, "title": r.title, "passed": r.passed,
                 "elapsed": r.elapsed, "detail": r.detail} for r in results]
        write_rows(rows, args.format, args.output)
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed"
          + (f"; failed: {', '.join(map(str, failed))}" if failed else ""))
    return EXIT_ACCURACY if failed else EXIT_OK


def cmd_cost_model(args):
    if args.p_max < 2:
        raise ConfigError("--p-max must be >= 2")
    rows = [{"p": p, "t_dichotomy": td, "t_cyclic": tc, "approximation": ap}
            for p, td, tc, ap in cost_table(args.p_max, args.alpha, args.beta, args.gamma, args.l)]
    write_rows(rows, args.format, args.output)
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def build_parser():
    parser = _Parser(prog="dichotomy", description="Parallel dichotomy tridiagonal solver")
    parser.add_argument("--backend", choices=("cython", "python"), help="kernel backend")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--output", "-o", help="report path (stdout if omitted)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--mode", choices=("deterministic", "concurrent"),
                       help="fabric mode (default: $DICHOTOMY_MODE or deterministic)")
        p.add_argument("--gamma-cap", type=float, default=3.0)
        p.add_argument("--preliminary", default="auto",
                       choices=("auto", "general", "toeplitz", "chebyshev"))
        p.add_argument("--trace", help="write the fabric event log (CSV) here")
        p.add_argument("--seed", type=int, default=0)

    def matrix(p):
        src = p.add_mutually_exclusive_group()
        src.add_argument("--toeplitz", help="inline coefficients t_minus,t_zero,t_plus")
        src.add_argument("--bands", nargs=3, metavar=("LOWER", "DIAG", "UPPER"),
                         help="three vector files")
        p.add_argument("--n", type=int, default=1024)
        p.add_argument("--p", type=int, default=4)

    s = sub.add_parser("solve", help="solve one system")
    matrix(s)
    common(s)
    s.add_argument("--rhs", default="ones", help="ones | random | unit:<i> | vector file")
    s.add_argument("--solution", help="write the solution vector here")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("series", help="solve M right-hand sides with one preliminary step")
    matrix(s)
    common(s)
    s.add_argument("--m", type=int, default=10)
    s.set_defaults(func=cmd_series)

    s = sub.add_parser("poisson", help="2-D Dirichlet Helmholtz problem")
    common(s)
    s.add_argument("--lam", type=float, default=0.0)
    s.add_argument("--p", type=int, default=1)
    s.add_argument("--h", default="1/32,1/64,1/128", help="mesh widths for the convergence study")
    s.add_argument("--rhs-grid", help="solve for this right-hand side grid instead")
    s.add_argument("--grid-out", help="write the solution grid here")
    s.set_defaults(func=cmd_poisson)

    s = sub.add_parser("verify", help="run the acceptance checks")
    s.add_argument("--only", help="comma-separated criterion numbers")
    s.add_argument("--output", "-o")
    s.add_argument("--format", choices=("csv", "json"), default="csv")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("cost-model", help="tabulate the communication cost formulas")
    s.add_argument("--p-max", type=int, default=4096)
    s.add_argument("--alpha", type=float, default=0.0)
    s.add_argument("--beta", type=float, default=1.0)
    s.add_argument("--gamma", type=float, default=1.0)
    s.add_argument("--l", type=float, default=1.0)
    s.add_argument("--output", "-o")
    s.add_argument("--format", choices=("csv", "json"), default="csv")
    s.set_defaults(func=cmd_cost_model)
    return parser


def _glue_negative_values(argv):
    # "--toeplitz -1,4,-1" would otherwise read the value as an option
    out = []
    it = iter(argv)
    for tok in it:
        if tok == "--toeplitz":
            val = next(it, None)
            out.append(tok if val is None else f"--toeplitz={val}")
        else:
            out.append(tok)
    return out


def main(argv=None):
    try:
        argv = sys.argv[1:] if argv is None else list(argv)
        args = build_parser().parse_args(_glue_negative_values(argv))
        if args.backend:
            kernels.use_backend(args.backend)
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SINGULAR_ERRORS as exc:
        print(f"singular system: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    except CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except Exception as exc:  # noqa: BLE001 - last-resort mapping to exit status 1
        print(f"unexpected error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())
