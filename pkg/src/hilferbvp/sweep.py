"""Convergence tables: one solve per parameter value, errors against a reference.

Errors are weighted, |t^(1-gamma) (x_num - x_ref)|, sampled on a uniform
grid of ``ERROR_GRID_POINTS`` points on [eps, T] and reported as mean and sup.
"""

from __future__ import annotations

import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .config import ProblemConfig
from .oracle import OracleFailure, linear_closed_form, linear_closed_form_eps, reference_solution_eps
from .solver import SolveResult, solve_perturbed_ivp
from .splines import GradedKnotParams

__all__ = [
    "ERROR_GRID_POINTS",
    "SWEEP_PARAMS",
    "SweepRow",
    "SweepTable",
    "ReferenceUnavailable",
    "error_grid",
    "weighted_errors",
    "reference_for",
    "configure",
    "run_sweep",
    "fit_order",
]

ERROR_GRID_POINTS = 10_000
SWEEP_PARAMS = ("h", "q", "eps", "beta")


class ReferenceUnavailable(RuntimeError):
    """No reference solution can be built for the requested comparison."""


def error_grid(eps: float, T: float, n: int = ERROR_GRID_POINTS) -> np.ndarray:
    return np.linspace(eps, T, n)


def reference_for(pc: ProblemConfig, kind: str = "eps") -> Callable[[np.ndarray], np.ndarray]:
    """Weighted reference values t -> t^(1-gamma) x_ref(t), shape (n, d).

    ``kind="eps"`` compares with the solution of the eps-shifted equation,
    ``kind="limit"`` with the unshifted solution. The monomial forcing has
    closed forms for both; other problems use the dense product-integration
    solver for ``eps`` and have no ``limit`` reference.
    """
    p, eps = pc.problem, pc.solver.eps
    g = p.gamma
    if pc.is_monomial:
        k = pc.rhs_params["k"]

        def ref(t):
            t = np.asarray(t, dtype=float)
            # closed forms are affine in x0~: evaluate the forced part once, add x0~ per component
            if kind == "limit":
                forced = linear_closed_form(p.alpha, p.beta, k, 0.0, p.T, t)
            else:
                forced = linear_closed_form_eps(p.alpha, p.beta, k, 0.0, p.T, eps, t)
            w = t ** (1.0 - g)
            return p.x0_tilde[None, :] / math.gamma(g) + (w * forced)[:, None]

        return ref
    if kind == "limit":
        raise ReferenceUnavailable("no unshifted reference for a general right-hand side")
    try:
        sol = reference_solution_eps(p, eps)
    except OracleFailure as exc:
        raise ReferenceUnavailable(str(exc)) from exc
    return sol.weighted


def weighted_errors(result: SolveResult, ref: Callable, eps: float, T: float) -> tuple[float, float]:
    t = error_grid(eps, T)
    err = np.abs(result.solution.weighted(t) - ref(t))
    per_point = np.max(err, axis=1)
    return float(np.mean(per_point)), float(np.max(per_point))


def configure(pc: ProblemConfig, param: str, value: float) -> ProblemConfig:
    """The config with one sweep parameter replaced."""
    if param == "h":
        k = pc.solver.knots
        if isinstance(k, GradedKnotParams):
            return pc.with_solver(knots=replace(k, h_max=value))
        return pc.with_solver(knots=float(value))
    if param == "q":
        if value != int(value) or value < 1:
            raise ValueError(f"spline order must be a positive integer, got {value}")
        return pc.with_solver(q=int(value))
    if param == "eps":
        return pc.with_solver(eps=float(value))
    if param == "beta":
        return pc.with_problem(beta=float(value))
    raise ValueError(f"cannot sweep {param!r}; choose from {SWEEP_PARAMS}")


@dataclass
class SweepRow:
    value: float
    mean_error: float
    sup_error: float
    delta_T: np.ndarray
    wall_time: float
    x_at_eps: np.ndarray
    iterations: int
    knots: int


@dataclass
class SweepTable:
    param: str
    reference: str
    rows: list[SweepRow]
    order: Optional[float] = None
    notes: list[str] = field(default_factory=list)

    def header(self) -> list[str]:
        d = self.rows[0].delta_T.size if self.rows else 1
        cols = [self.param, "mean_weighted_error", "sup_weighted_error"]
        cols += [f"delta_T_{i + 1}" for i in range(d)] + ["time_s"]
        cols += [f"x_eps_{i + 1}" for i in range(d)] + ["iterations", "knots"]
        return cols

    def as_rows(self) -> list[list]:
        return [
            [r.value, r.mean_error, r.sup_error, *r.delta_T.tolist(), r.wall_time, *r.x_at_eps.tolist(), r.iterations, r.knots]
            for r in self.rows
        ]


def fit_order(values: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of log(error) against log(value)."""
    v = np.log(np.asarray(values, dtype=float))
    e = np.log(np.asarray(errors, dtype=float))
    if v.size < 2:
        raise ValueError("an order fit needs at least two points")
    slope, _ = np.polyfit(v, e, 1)
    return float(slope)


def _row(pc: ProblemConfig, param: str, value: float, reference: str, with_errors: bool) -> SweepRow:
    cfg = configure(pc, param, value)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        start = time.perf_counter()
        res = solve_perturbed_ivp(cfg.problem, cfg.solver)
        elapsed = time.perf_counter() - start
    if with_errors:
        mean, sup = weighted_errors(res, reference_for(cfg, reference), cfg.solver.eps, cfg.problem.T)
    else:
        mean = sup = math.nan
    return SweepRow(value, mean, sup, res.delta_T, elapsed, res.x_at_eps(), res.iterations, res.n_knots)


def run_sweep(pc: ProblemConfig, param: str, values: Sequence[float], reference: str = "auto",
              threads: int = 1, with_errors: bool = True) -> SweepTable:
    """Solve once per value. ``reference="auto"`` uses the unshifted solution
    for eps sweeps of the monomial problem and the eps-shifted one otherwise."""
    if param not in SWEEP_PARAMS:
        raise ValueError(f"cannot sweep {param!r}; choose from {SWEEP_PARAMS}")
    if reference == "auto":
        reference = "limit" if param == "eps" and pc.is_monomial else "eps"
    if with_errors and reference == "limit" and not pc.is_monomial:
        raise ReferenceUnavailable("no unshifted reference for a general right-hand side")

    def one(v):
        return _row(pc, param, float(v), reference, with_errors)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(one, values))
    else:
        rows = [one(v) for v in values]
    table = SweepTable(param, reference, rows)
    if with_errors and param in ("h", "eps", "q") and len(rows) >= 2:
        errs = [r.sup_error for r in rows]
        if all(e > 0 for e in errs):
            table.order = fit_order([r.value for r in rows], errs)
    return table
