"""Grid search for a root of Delta_T over the horizon T or one component of x0~.

A zero of Delta_T means the perturbed IVP needs no perturbation, so its
solution also solves the fractional-periodic BVP.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .fracops import IterateEscapedDomain
from .solver import ConvergenceError, ProblemSpec, SolveResult, SolverConfig, solve_perturbed_ivp

__all__ = [
    "GridSearchSpec",
    "GridPoint",
    "GridSearchResult",
    "NoCandidateError",
    "grid_search",
    "refine",
    "make_grid",
]


class NoCandidateError(RuntimeError):
    """No grid point produced a converged solve."""


def make_grid(start: float, stop: float, step: float) -> np.ndarray:
    """Inclusive arithmetic grid start, start+step, ..., with stop kept when it lies on the lattice."""
    if not step > 0:
        raise ValueError("grid step must be positive")
    if stop < start:
        raise ValueError("grid stop must not precede start")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(n)


@dataclass(frozen=True)
class GridSearchSpec:
    """What to vary and where.

    ``variable`` is ``"T"`` or ``"x0"``; for ``"x0"`` the entry ``component``
    of x0~ is replaced by the grid value. Graded knots are regenerated for
    each grid point because they depend on T.
    """

    problem: ProblemSpec
    config: SolverConfig
    grid: tuple
    variable: str = "T"
    component: int = 0
    threads: int = 1

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float).ravel()
        if g.size == 0:
            raise ValueError("grid is empty")
        if np.any(np.diff(g) <= 0):
            raise ValueError("grid must be strictly increasing")
        if self.variable not in ("T", "x0"):
            raise ValueError("variable must be 'T' or 'x0'")
        if self.variable == "T" and g[0] <= self.config.eps:
            raise ValueError("every T on the grid must exceed eps")
        if self.variable == "x0" and not 0 <= self.component < self.problem.d:
            raise ValueError(f"component must lie in [0, {self.problem.d})")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")
        object.__setattr__(self, "grid", tuple(g.tolist()))

    def instantiate(self, value: float) -> ProblemSpec:
        if self.variable == "T":
            return self.problem.with_T(value)
        x0 = self.problem.x0_tilde.copy()
        x0[self.component] = value
        return self.problem.with_x0(x0)


@dataclass
class GridPoint:
    value: float
    delta_T: Optional[np.ndarray]
    converged: bool
    error: str = ""
    result: Optional[SolveResult] = field(default=None, repr=False)

    @property
    def abs_delta(self) -> float:
        """Max-norm of Delta_T, infinite for failed points."""
        return float(np.max(np.abs(self.delta_T))) if self.converged else math.inf


@dataclass
class GridSearchResult:
    spec: GridSearchSpec
    table: list[GridPoint]
    argmin: float
    min_abs_delta: float
    warnings: list[str] = field(default_factory=list)

    @property
    def best(self) -> GridPoint:
        return next(p for p in self.table if p.value == self.argmin)

    def rows(self) -> list[list]:
        """One row per grid point: value, |Delta|, converged flag, then Delta components."""
        d = self.spec.problem.d
        out = []
        for p in self.table:
            comps = p.delta_T.tolist() if p.converged else [math.nan] * d
            out.append([p.value, p.abs_delta if p.converged else math.nan, int(p.converged), *comps])
        return out

    def header(self) -> list[str]:
        name = "T" if self.spec.variable == "T" else f"x0_{self.spec.component + 1}"
        return [name, "abs_delta", "converged", *[f"delta_{i + 1}" for i in range(self.spec.problem.d)]]


def _solve_point(spec: GridSearchSpec, value: float, keep: bool) -> GridPoint:
    try:
        res = solve_perturbed_ivp(spec.instantiate(value), spec.config)
    except (ConvergenceError, IterateEscapedDomain) as exc:
        return GridPoint(value, None, False, f"{type(exc).__name__}: {exc}")
    return GridPoint(value, res.delta_T, True, result=res if keep else None)


def _run(spec: GridSearchSpec, keep_solutions: bool) -> list[GridPoint]:
    with warnings.catch_warnings():
        # certification warnings repeat per point; the checker reports them separately
        warnings.simplefilter("ignore", RuntimeWarning)
        if spec.threads == 1:
            return [_solve_point(spec, v, keep_solutions) for v in spec.grid]
        with ThreadPoolExecutor(max_workers=spec.threads) as pool:
            return list(pool.map(lambda v: _solve_point(spec, v, keep_solutions), spec.grid))


def _select(spec: GridSearchSpec, table: list[GridPoint], notes: list[str]) -> GridSearchResult:
    ok = [p for p in table if p.converged]
    if not ok:
        raise NoCandidateError(f"none of the {len(table)} grid points converged")
    skipped = len(table) - len(ok)
    if skipped:
        notes.append(f"{skipped} grid point(s) did not converge and were excluded")
    # strict < keeps the first of tied points
    best = ok[0]
    for p in ok[1:]:
        if p.abs_delta < best.abs_delta:
            best = p
    return GridSearchResult(spec, table, best.value, best.abs_delta, notes)


def grid_search(spec: GridSearchSpec, keep_solutions: bool = False) -> GridSearchResult:
    """Solve at every grid value and pick the one with the smallest max-norm Delta_T."""
    return _select(spec, _run(spec, keep_solutions), [])


def refine(result: GridSearchResult, factor: int = 10, keep_solutions: bool = False) -> GridSearchResult:
    """Re-grid one coarse step either side of the argmin at step/factor and search again.

    At a grid boundary the window is extended outward by one coarse step,
    staying above eps for T, and a warning is recorded.
    """
    if factor < 2:
        raise ValueError("refinement factor must be at least 2")
    spec = result.spec
    grid = np.asarray(spec.grid)
    if grid.size < 2:
        raise ValueError("refinement needs a grid with at least two points")
    i = int(np.flatnonzero(grid == result.argmin)[0])
    notes: list[str] = []
    lo_step = grid[i] - grid[i - 1] if i > 0 else grid[1] - grid[0]
    hi_step = grid[i + 1] - grid[i] if i < grid.size - 1 else grid[-1] - grid[-2]
    lo, hi = grid[i] - lo_step, grid[i] + hi_step
    if i == 0 or i == grid.size - 1:
        msg = f"argmin {grid[i]:.6g} lies on the grid boundary; window extended past it"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        notes.append(msg)
    if spec.variable == "T":
        lo = max(lo, spec.config.eps + lo_step / factor)
    fine = np.union1d(
        np.linspace(lo, grid[i], int(round((grid[i] - lo) / (lo_step / factor))) + 1),
        np.linspace(grid[i], hi, int(round((hi - grid[i]) / (hi_step / factor))) + 1),
    )
    new_spec = replace(spec, grid=tuple(fine.tolist()))
    table = _run(new_spec, keep_solutions)
    out = _select(new_spec, table, notes)
    # the coarse optimum sits on the fine grid, so this never increases
    if out.min_abs_delta > result.min_abs_delta:
        notes.append("refined minimum exceeds the coarse one; Delta_T may be discontinuous here")
    return out
