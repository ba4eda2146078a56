"""Command line interface: check, solve, sweep, gridsearch and dump-spline.

Exit codes: 0 ok, 1 configuration error, 2 non-convergence, 3 domain
escape, 4 reference unavailable, 5 no converged grid point, 6 an
assumption check failed.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import warnings
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import ConfigError, ProblemConfig, load_config
from .constants import check_assumptions
from .expr import ExpressionError, evaluate, parse_expression, variables
from .fracops import IterateEscapedDomain
from .shooting import GridSearchSpec, NoCandidateError, grid_search, make_grid, refine
from .solver import ConvergenceError, SolveResult, solve_perturbed_ivp
from .sweep import SWEEP_PARAMS, ReferenceUnavailable, run_sweep

EXIT_OK, EXIT_CONFIG, EXIT_NONCONV, EXIT_DOMAIN, EXIT_ORACLE, EXIT_EMPTY, EXIT_ASSUMPTION = range(7)


def _fmt(x) -> str:
    return f"{x:.6g}" if isinstance(x, float) else str(x)


def _vec(v) -> str:
    return "[" + ", ".join(f"{float(x):.6g}" for x in np.atleast_1d(v)) + "]"


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])


def _write_table(out: Path, stem: str, fmt: str, header, rows, extra: dict | None = None) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        path = out / f"{stem}.json"
        payload = {"columns": list(header), "rows": [list(map(_jsonable, r)) for r in rows], **(extra or {})}
        path.write_text(json.dumps(payload, indent=2))
    else:
        path = out / f"{stem}.csv"
        _write_csv(path, header, rows)
    return path


def _jsonable(x):
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    return x


def parse_values(text: str) -> list[float]:
    """Comma-separated constants; each entry may be an expression such as 2^-3."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        ast = parse_expression(part)
        if variables(ast) - {"pi"}:
            raise ExpressionError(f"value {part!r} must be a constant", 0)
        out.append(float(evaluate(ast, {})))
    if not out:
        raise ExpressionError("no values given", 0)
    return out


def _solution_rows(res: SolveResult, n: int = 1000):
    knots = res.solution.knots
    t = np.unique(np.concatenate([np.geomspace(knots.eps, knots.T, n), knots.breakpoints]))
    x = res.solution(t)
    w = res.solution.weighted(t)
    return t, x, w


def _write_solution(res: SolveResult, out: Path, stem: str = "solution") -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    t, x, w = _solution_rows(res)
    d = x.shape[1]
    header = ["t", *[f"x{i + 1}" for i in range(d)], *[f"w{i + 1}" for i in range(d)]]
    rows = [[ti, *xi, *wi] for ti, xi, wi in zip(t, x, w)]
    csv_path = out / f"{stem}.csv"
    _write_csv(csv_path, header, rows)
    dat = out / f"{stem}.dat"
    with dat.open("w") as fh:
        fh.write("# " + " ".join(header) + "\n")
        for r in rows:
            fh.write(" ".join(f"{v:.17g}" for v in r) + "\n")
    gp = out / f"{stem}.gp"
    cols = ", ".join(f"'{dat.name}' using 1:{i + 2} with lines title 'x{i + 1}'" for i in range(d))
    gp.write_text(f"set logscale x\nset xlabel 't'\nplot {cols}\n")
    return [csv_path, dat, gp]


def cmd_check(pc: ProblemConfig, args) -> int:
    report = check_assumptions(pc.problem, pc.solver)
    if args.format == "json":
        payload = {
            "constants": report.constants.as_dict(),
            "verdicts": {k: {"status": v.status, "witness": {n: _jsonable(np.asarray(x).tolist() if isinstance(x, np.ndarray) else x) for n, x in v.witness.items()}} for k, v in report.verdicts().items()},
            "all_pass": report.all_pass,
        }
        print(json.dumps(payload, indent=2))
    else:
        print(report.to_text())
    return EXIT_OK if report.all_pass else EXIT_ASSUMPTION


def _solve(pc: ProblemConfig) -> SolveResult:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RuntimeWarning)
        res = solve_perturbed_ivp(pc.problem, pc.solver)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    return res


def cmd_solve(pc: ProblemConfig, args) -> int:
    res = _solve(pc)
    out = Path(args.out)
    files = _write_solution(res, out)
    diag = out / "diagnostics.json"
    diag.write_text(json.dumps(res.diagnostics(), indent=2))
    if args.format == "json":
        print(json.dumps(res.diagnostics(), indent=2))
    else:
        print(f"iterations         {res.iterations}")
        print(f"knots              {res.n_knots}")
        print(f"delta_T            {_vec(res.delta_T)}")
        print(f"boundary residual  {_vec(res.boundary_residual)}")
        print(f"x(eps)             {_vec(res.x_at_eps())}")
        print(f"wall time (s)      {res.wall_time:.4g}")
        print("wrote " + ", ".join(str(p) for p in [*files, diag]))
    return EXIT_OK


def cmd_sweep(pc: ProblemConfig, args) -> int:
    if args.param not in SWEEP_PARAMS:
        raise ConfigError(f"--param must be one of {SWEEP_PARAMS} for sweep")
    if not args.values:
        raise ConfigError("sweep needs --values")
    values = parse_values(args.values)
    try:
        table = run_sweep(pc, args.param, values, reference=args.reference, threads=args.threads)
        code = EXIT_OK
    except ReferenceUnavailable as exc:
        print(f"reference unavailable: {exc}; error columns left empty", file=sys.stderr)
        table = run_sweep(pc, args.param, values, threads=args.threads, with_errors=False)
        code = EXIT_ORACLE
    path = _write_table(Path(args.out), f"sweep_{args.param}", args.format, table.header(), table.as_rows(),
                        {"reference": table.reference, "order": table.order})
    print(" ".join(f"{h:>14}" for h in table.header()))
    for row in table.as_rows():
        print(" ".join(f"{_fmt(float(v)) if not isinstance(v, int) else v:>14}" for v in row))
    if table.order is not None:
        print(f"empirical order (sup error vs {args.param}): {table.order:.4f}")
    print(f"wrote {path}")
    return code


def _grid_values(args) -> list[float]:
    if args.values:
        return parse_values(args.values)
    if None in (args.grid_start, args.grid_stop, args.grid_step):
        raise ConfigError("gridsearch needs --values or all of --grid-start/--grid-stop/--grid-step")
    try:
        return make_grid(args.grid_start, args.grid_stop, args.grid_step).tolist()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def cmd_gridsearch(pc: ProblemConfig, args) -> int:
    param = args.param or "T"
    if param not in ("T", "x0") and not param.startswith("x0_"):
        raise ConfigError("--param for gridsearch is T, x0 or x0_<component>")
    component = int(param.split("_")[1]) - 1 if param.startswith("x0_") else 0
    try:
        spec = GridSearchSpec(pc.problem, pc.solver, tuple(_grid_values(args)), "T" if param == "T" else "x0",
                              component, args.threads)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    dumps = parse_values(args.dump) if args.dump else []
    try:
        result = grid_search(spec, keep_solutions=bool(dumps))
        for _ in range(args.refine):
            result = refine(result, keep_solutions=bool(dumps))
    except NoCandidateError as exc:
        print(f"no candidate: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    out = Path(args.out)
    path = _write_table(out, "gridsearch", args.format, result.header(), result.rows(),
                        {"argmin": result.argmin, "min_abs_delta": result.min_abs_delta})
    for v in dumps:
        hit = [p for p in result.table if math.isclose(p.value, v, rel_tol=1e-9, abs_tol=1e-12)]
        if not hit or not hit[0].converged:
            print(f"warning: no converged solution at {v:g} to dump", file=sys.stderr)
            continue
        _write_solution(hit[0].result, out, f"solution_{v:g}")
    for note in result.warnings:
        print(f"note: {note}", file=sys.stderr)
    best = result.best
    print(f"argmin {result.header()[0]} = {result.argmin:.6g}")
    print(f"delta_T at argmin = {_vec(best.delta_T)} (|delta| = {result.min_abs_delta:.4g})")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_dump_spline(pc: ProblemConfig, args) -> int:
    res = _solve(pc)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.format == "json":
        path = out / "spline.json"
        path.write_text(res.solution.to_json())
    else:
        path = out / "spline.csv"
        d = res.solution.d
        header = ["knot", "left", "right", "node", "t", *[f"w{i + 1}" for i in range(d)]]
        _write_csv(path, header, res.solution.to_csv_rows())
    print(f"wrote {path}")
    return EXIT_OK


COMMANDS = {
    "check": cmd_check,
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "gridsearch": cmd_gridsearch,
    "dump-spline": cmd_dump_spline,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hilferbvp",
        description="Fractional-periodic Hilfer BVPs via a perturbed IVP and spline Picard iteration.",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="YAML problem file")
    parser.add_argument("--out", default=".", help="output directory (default: current)")
    parser.add_argument("--param", help="sweep: h, q, eps or beta; gridsearch: T, x0 or x0_<i>")
    parser.add_argument("--values", help="comma-separated values, e.g. '1, 2^-1, 2^-2'")
    parser.add_argument("--grid-start", type=float)
    parser.add_argument("--grid-stop", type=float)
    parser.add_argument("--grid-step", type=float)
    parser.add_argument("--refine", type=int, default=0, help="gridsearch refinement rounds")
    parser.add_argument("--dump", help="gridsearch: values whose solutions are written out")
    parser.add_argument("--reference", choices=("auto", "eps", "limit"), default="auto",
                        help="sweep error reference: eps-shifted or unshifted solution")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--seed", type=int, default=None, help="reserved; all computations are deterministic")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        pc = load_config(args.config)
        return COMMANDS[args.command](pc, args)
    except (ConfigError, ExpressionError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"no convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONV
    except IterateEscapedDomain as exc:
        print(f"domain escape: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except ReferenceUnavailable as exc:
        print(f"reference unavailable: {exc}", file=sys.stderr)
        return EXIT_ORACLE


if __name__ == "__main__":
    sys.exit(main())
