"""Picard iteration for the perturbed initial value problem on a spline space.

The unknown is the weighted part w = t^(1-gamma) x, stored by its values at
the Bernstein nodes of a fixed knot collection. One step reads

    w_{m+1} = x0~ / Gamma(gamma) + S^q [ t^(1-gamma) F_eps yhat_m ],
    yhat_m  = spline of s^(1-gamma) f(s, x_m(s)),

and after convergence the perturbation Delta_T and the boundary residual are
evaluated on the final iterate.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Union

import numpy as np
from scipy.special import gammaln

from .constants import ConvergenceConstants, compute_constants
from .fracops import INTEGRAND_MODES, IterateEscapedDomain, MapParams, SplineMap, frac_int_weighted_spline
from .specfun import incomplete_beta
from .splines import GradedKnotParams, KnotCollection, WeightedSpline, uniform_knots

__all__ = [
    "ProblemSpec",
    "SolverConfig",
    "SolveResult",
    "ConvergenceError",
    "BoundUnavailable",
    "IterateEscapedDomain",
    "initial_iterate",
    "iterate_once",
    "solve_perturbed_ivp",
    "delta_T",
    "boundary_residual",
    "apriori_error_bound",
    "residual_budget",
]

RHS = Callable[[np.ndarray, np.ndarray], np.ndarray]


class ConvergenceError(RuntimeError):
    """Picard iteration hit max_iter without meeting the tolerance."""

    def __init__(self, message: str, history: list[float], last_ratio: float | None):
        super().__init__(message)
        self.history = history
        self.last_ratio = last_ratio


class BoundUnavailable(ValueError):
    """The a-priori bound needs rho(Q) < 1."""


@dataclass(frozen=True)
class ProblemSpec:
    """A fractional-periodic BVP turned perturbed IVP.

    ``f(t, x)`` is vectorized: ``t`` has shape (n,), ``x`` has shape (n, d)
    and the result has shape (n, d). ``D`` is a box ``(lower, upper)`` on
    weighted values t^(1-gamma) x, or None for all of R^d.
    """

    f: RHS
    alpha: float
    beta: float
    T: float
    x0_tilde: np.ndarray
    D: Optional[tuple] = None
    m: Optional[np.ndarray] = None
    K: Optional[np.ndarray] = None
    name: str = ""

    def __post_init__(self):
        x0 = np.atleast_1d(np.asarray(self.x0_tilde, dtype=float))
        object.__setattr__(self, "x0_tilde", x0)
        MapParams(self.alpha, self.beta, self.T)  # validates ranges
        d = x0.size
        if self.m is not None:
            m = np.broadcast_to(np.asarray(self.m, dtype=float), (d,)).copy()
            if np.any(m < 0):
                raise ValueError("bound m must be nonnegative")
            object.__setattr__(self, "m", m)
        if self.K is not None:
            K = np.asarray(self.K, dtype=float)
            K = np.broadcast_to(K, (d, d)).copy() if K.ndim < 2 else K
            if K.shape != (d, d) or np.any(K < 0):
                raise ValueError(f"K must be a nonnegative {d}x{d} matrix")
            object.__setattr__(self, "K", K)
        if self.D is not None:
            lo, hi = (np.broadcast_to(np.asarray(b, dtype=float), (d,)).copy() for b in self.D)
            if np.any(lo >= hi):
                raise ValueError("domain box needs lower < upper")
            object.__setattr__(self, "D", (lo, hi))

    @property
    def d(self) -> int:
        return self.x0_tilde.size

    @property
    def gamma(self) -> float:
        return self.alpha + self.beta - self.alpha * self.beta

    @property
    def zeta(self) -> float:
        return 1.0 - self.gamma + self.alpha

    def map_params(self, eps: float) -> MapParams:
        return MapParams(self.alpha, self.beta, self.T, eps)

    def with_T(self, T: float) -> "ProblemSpec":
        return replace(self, T=T)

    def with_x0(self, x0_tilde) -> "ProblemSpec":
        return replace(self, x0_tilde=np.atleast_1d(np.asarray(x0_tilde, dtype=float)))


KnotSpec = Union[KnotCollection, GradedKnotParams, float]


@dataclass(frozen=True)
class SolverConfig:
    """Discretization and stopping rule.

    ``knots`` is an explicit collection, graded-knot parameters (their eps and
    T are replaced by the solve's), or a float width for uniform knots.
    """

    eps: float
    q: int = 1
    knots: KnotSpec = 0.01
    tol: float = 1e-12
    max_iter: int = 200
    integrand: str = "plain"

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.q < 1:
            raise ValueError("spline order q must be at least 1")
        if not self.tol > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.integrand not in INTEGRAND_MODES:
            raise ValueError(f"integrand projection must be one of {INTEGRAND_MODES}")

    def resolve_knots(self, gamma_exp: float, T: float) -> KnotCollection:
        from .splines import graded_knots

        k = self.knots
        if isinstance(k, KnotCollection):
            if not (math.isclose(k.eps, self.eps) and math.isclose(k.T, T)):
                raise ValueError(f"explicit knots must span [{self.eps}, {T}]")
            return k
        if isinstance(k, GradedKnotParams):
            return graded_knots(replace(k, eps=self.eps, T=T), gamma_exp)
        return uniform_knots(self.eps, T, float(k))


@dataclass
class SolveResult:
    solution: WeightedSpline
    iterations: int
    delta_T: np.ndarray
    boundary_residual: np.ndarray
    apriori_bound: Optional[np.ndarray]
    aposteriori_bound: Optional[np.ndarray]
    history: list[float]
    wall_time: float
    constants: Optional[ConvergenceConstants] = None
    warnings: list[str] = field(default_factory=list)
    residual_budget: Optional[np.ndarray] = None

    @property
    def n_knots(self) -> int:
        return len(self.solution.knots)

    def x_at_eps(self) -> np.ndarray:
        return self.solution(np.array([self.solution.knots.eps]))[0]

    def diagnostics(self) -> dict:
        out = {
            "iterations": self.iterations,
            "knots": self.n_knots,
            "q": self.solution.q,
            "delta_T": self.delta_T.tolist(),
            "boundary_residual": self.boundary_residual.tolist(),
            "x_at_eps": self.x_at_eps().tolist(),
            "apriori_bound": None if self.apriori_bound is None else self.apriori_bound.tolist(),
            "aposteriori_bound": None if self.aposteriori_bound is None else self.aposteriori_bound.tolist(),
            "history": list(self.history),
            "wall_time": self.wall_time,
            "warnings": list(self.warnings),
            "residual_budget": None if self.residual_budget is None else self.residual_budget.tolist(),
        }
        if self.constants is not None:
            out["constants"] = self.constants.as_dict()
        return out


class _Discretization:
    """Knots, operator and node bookkeeping shared by all steps of one solve."""

    def __init__(self, problem: ProblemSpec, cfg: SolverConfig):
        self.problem = problem
        self.cfg = cfg
        self.params = problem.map_params(cfg.eps)
        self.knots = cfg.resolve_knots(problem.gamma, problem.T)
        self.smap = SplineMap(self.knots, cfg.q, self.params, integrand=cfg.integrand)
        nodes = self.smap.nodes
        self.node_pow = (nodes ** (problem.gamma - 1.0))[..., None]
        self.w0 = problem.x0_tilde / math.exp(gammaln(problem.gamma))

    def spline(self, w: np.ndarray) -> WeightedSpline:
        return WeightedSpline(self.knots, self.problem.gamma, self.cfg.q, w)

    def integrand(self, w: np.ndarray) -> np.ndarray:
        return self.smap.sample_integrand(self.problem.f, w * self.node_pow)

    def step(self, w: np.ndarray) -> np.ndarray:
        return self.w0 + self.smap.apply(self.integrand(w))

    def check_domain(self, w: np.ndarray) -> None:
        if self.problem.D is None:
            return
        lo, hi = self.problem.D
        bad = np.any((w < lo) | (w > hi), axis=-1)
        if np.any(bad):
            i, j = np.argwhere(bad)[0]
            t = self.smap.nodes[i, j]
            raise IterateEscapedDomain(
                f"weighted iterate left D at t={t!r}: {w[i, j].tolist()}", t=t, x=w[i, j] * self.node_pow[i, j]
            )


def _coeffs_of(x: WeightedSpline, disc: _Discretization) -> np.ndarray:
    if x.knots != disc.knots or x.q != disc.cfg.q:
        raise ValueError("iterate does not live on the configured knots")
    return np.asarray(x.coeffs)


def initial_iterate(problem: ProblemSpec, cfg: SolverConfig) -> WeightedSpline:
    """x_0(t) = x0~ t^(gamma-1) / Gamma(gamma): a constant weighted part."""
    knots = cfg.resolve_knots(problem.gamma, problem.T)
    w0 = problem.x0_tilde / math.exp(gammaln(problem.gamma))
    coeffs = np.broadcast_to(w0, (len(knots), cfg.q + 1, problem.d))
    return WeightedSpline(knots, problem.gamma, cfg.q, coeffs)


def iterate_once(problem: ProblemSpec, cfg: SolverConfig, x_m: WeightedSpline) -> WeightedSpline:
    disc = _Discretization(problem, cfg)
    return disc.spline(disc.step(_coeffs_of(x_m, disc)))


def delta_T(problem: ProblemSpec, cfg: SolverConfig, x: WeightedSpline) -> np.ndarray:
    """Perturbation -Gamma(zeta+1) T^-zeta I_eps^T (zeta) f(., x(.)) that enforces the boundary condition."""
    disc = _Discretization(problem, cfg)
    return disc.smap.delta_T(disc.integrand(_coeffs_of(x, disc)))


def boundary_residual(problem: ProblemSpec, cfg: SolverConfig, x: WeightedSpline) -> np.ndarray:
    """|I^(1-gamma) x (T) - x0~| componentwise; |x(T) - x0~| when gamma = 1.

    Below eps the weighted part is continued by its value at eps, so the
    integral over [0, eps] is w(eps) B(eps/T; gamma, 1-gamma) / Gamma(1-gamma).
    An iterate equal to x_0 then has residual zero up to roundoff.
    """
    g = problem.gamma
    if g >= 1.0:
        value = x(np.array([problem.T]))[0]
    else:
        mu = 1.0 - g
        head = x.weighted(np.array([cfg.eps]))[0] * incomplete_beta(cfg.eps / problem.T, g, mu) / math.gamma(mu)
        value = head + frac_int_weighted_spline(x, mu, cfg.eps, problem.T)
    return np.abs(value - problem.x0_tilde)


def apriori_error_bound(constants: ConvergenceConstants, m, iterations: int, use_star: bool = False) -> np.ndarray:
    """Q^n (I - Q)^-1 Xi m, the weighted distance of the n-th iterate to the limit.

    With ``use_star`` the spline-iteration matrix (Xi + Omega) K is used in
    place of Xi K, and the final factor becomes (Xi + Omega) m.
    """
    Q = np.atleast_2d(constants.Q_star if use_star else constants.Q)
    rho = constants.rho_Q_star if use_star else constants.rho_Q
    if rho >= 1.0:
        raise BoundUnavailable(f"spectral radius {rho:.4g} >= 1, bound unavailable")
    scale = constants.Xi + (constants.Omega_Aq if use_star else 0.0)
    m = np.broadcast_to(np.asarray(m, dtype=float), (Q.shape[0],))
    tail = np.linalg.solve(np.eye(Q.shape[0]) - Q, scale * m)
    return np.linalg.matrix_power(Q, iterations) @ tail


def residual_budget(gamma_exp: float, constants: ConvergenceConstants, m, aposteriori=None) -> np.ndarray:
    """Upper bound on the boundary residual of a converged spline iterate.

    The exact perturbed solution meets the boundary condition, and the spline
    fixed point sits within (I - Q*)^-1 (Theta_eps + Omega^q_A) m of it in the
    weighted norm. Since I^(1-gamma) t^(gamma-1) = Gamma(gamma), a weighted
    gap e moves the residual by at most Gamma(gamma) |e|. The a-posteriori
    iteration error is added on top, with 1e-12 for roundoff.
    """
    Qs = np.atleast_2d(constants.Q_star)
    if constants.rho_Q_star >= 1.0:
        raise BoundUnavailable(f"spectral radius {constants.rho_Q_star:.4g} >= 1, budget unavailable")
    m = np.broadcast_to(np.asarray(m, dtype=float), (Qs.shape[0],))
    gap = np.linalg.solve(np.eye(Qs.shape[0]) - Qs, (constants.Theta_eps + constants.Omega_Aq) * m)
    if aposteriori is not None:
        gap = gap + np.asarray(aposteriori, dtype=float)
    return math.gamma(gamma_exp) * gap + 1e-12


def solve_perturbed_ivp(problem: ProblemSpec, cfg: SolverConfig, constants: ConvergenceConstants | None = None) -> SolveResult:
    """Iterate to the tolerance and evaluate Delta_T and the boundary residual.

    ``iterations`` counts Picard steps up to the last one that moved the
    iterate by at least ``tol`` (at least one step is always taken); the
    history also holds the confirming step that fell below the tolerance.
    """
    start = time.perf_counter()
    disc = _Discretization(problem, cfg)
    notes: list[str] = []
    if constants is None and problem.K is not None:
        constants = compute_constants(disc.params, disc.knots, cfg.q, problem.K)
    if constants is not None and constants.rho_Q_star >= 1.0:
        msg = f"rho((Xi+Omega)K) = {constants.rho_Q_star:.4g} >= 1; convergence is not certified"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        notes.append(msg)

    w = np.broadcast_to(disc.w0, disc.smap.nodes.shape + (problem.d,)).copy()
    history: list[float] = []
    last_change = np.zeros(problem.d)
    converged = False
    for _ in range(cfg.max_iter):
        w_new = disc.step(w)
        disc.check_domain(w_new)
        change = np.max(np.abs(w_new - w).reshape(-1, problem.d), axis=0)
        history.append(float(np.max(change)))
        w, last_change = w_new, change
        if history[-1] < cfg.tol:
            converged = True
            break
    if not converged:
        ratio = history[-1] / history[-2] if len(history) > 1 and history[-2] > 0 else None
        raise ConvergenceError(
            f"no convergence after {cfg.max_iter} iterations (last change {history[-1]:.3e}, "
            f"last ratio {ratio if ratio is None else f'{ratio:.4f}'})" + (f"; {notes[0]}" if notes else ""),
            history,
            ratio,
        )

    solution = disc.spline(w)
    dT = disc.smap.delta_T(disc.integrand(w))
    resid = boundary_residual(problem, cfg, solution)
    iterations = max(1, sum(1 for h in history if h >= cfg.tol))
    apriori = aposteriori = budget = None
    if constants is not None and constants.rho_Q_star < 1.0:
        Qs = np.atleast_2d(constants.Q_star)
        aposteriori = np.linalg.solve(np.eye(Qs.shape[0]) - Qs, Qs @ last_change)
        if problem.m is not None:
            apriori = apriori_error_bound(constants, problem.m, iterations, use_star=True)
            budget = residual_budget(problem.gamma, constants, problem.m, aposteriori)
    return SolveResult(
        solution=solution,
        iterations=iterations,
        delta_T=dT,
        boundary_residual=resid,
        apriori_bound=apriori,
        aposteriori_bound=aposteriori,
        history=history,
        wall_time=time.perf_counter() - start,
        constants=constants,
        warnings=notes,
        residual_budget=budget,
    )
