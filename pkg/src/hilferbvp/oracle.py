"""Reference computations used to validate the spline solver.

Nothing here shares code with the spline integration path: quadrature goes
through QUADPACK's algebraic-weight rule, the linear example is solved in
closed form, and the eps-shifted reference solution uses product
integration on a fine geometric-then-uniform grid with piecewise-linear
interpolation of the integrand.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from .specfun import DomainError, frac_int_monomial_full, frac_int_monomial_right

__all__ = [
    "QuadratureSpec",
    "QuadratureError",
    "OracleFailure",
    "ReferenceSolution",
    "ResidualReport",
    "quad_frac_integral",
    "linear_nu",
    "linear_closed_form",
    "linear_closed_form_eps",
    "reference_solution_eps",
    "hilfer_residual",
]


class QuadratureError(ArithmeticError):
    def __init__(self, message: str, estimate: float, error: float):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class OracleFailure(RuntimeError):
    """The reference computation itself did not converge."""


@dataclass(frozen=True)
class QuadratureSpec:
    abs_tol: float = 1e-13
    rel_tol: float = 1e-12
    max_subdivisions: int = 400
    # factor the kernel (t-s)^(mu-1) out analytically; off means plain quadrature
    singular_weight: bool = True

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("quadrature tolerances must be positive")


def _g(x):
    return math.exp(gammaln(x))


def quad_frac_integral(
    y: Callable[[float], float],
    order: float,
    a: float,
    t: float,
    left_exp: float = 0.0,
    spec: QuadratureSpec | None = None,
    breakpoints=None,
) -> float:
    """(1/Gamma(mu)) int_a^t (t-s)^(mu-1) (s-a)^left_exp y(s) ds by adaptive quadrature.

    Both endpoint singularities are integrated exactly by the algebraic
    weight. ``breakpoints`` splits the range where ``y`` has kinks (spline knots).
    """
    spec = spec or QuadratureSpec()
    if not order > 0:
        raise DomainError("fractional order must be positive")
    if a > t:
        raise DomainError("lower limit exceeds evaluation point")
    if a == t:
        return 0.0
    cuts = [a]
    if breakpoints is not None:
        cuts += [float(b) for b in np.asarray(breakpoints) if a < b < t]
    cuts.append(t)
    total = err = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        first, last = lo == a, hi == t
        alg = (left_exp if first else 0.0, order - 1.0 if last else 0.0)
        def fun(s, lo=lo, hi=hi, first=first, last=last):
            v = y(s)
            if not first and left_exp:
                v *= (s - a) ** left_exp
            if not last:
                v *= (t - s) ** (order - 1.0)
            return v
        if spec.singular_weight and (alg[0] or alg[1]):
            with warnings.catch_warnings():
                warnings.simplefilter("error", integrate.IntegrationWarning)
                try:
                    val, e = integrate.quad(fun, lo, hi, weight="alg", wvar=alg, epsabs=spec.abs_tol,
                                            epsrel=spec.rel_tol, limit=spec.max_subdivisions)
                except integrate.IntegrationWarning as w:
                    val, e = integrate.quad(fun, lo, hi, weight="alg", wvar=alg, epsabs=spec.abs_tol,
                                            epsrel=spec.rel_tol, limit=spec.max_subdivisions)
                    if e > 1e3 * max(spec.abs_tol, spec.rel_tol * abs(val)):
                        raise QuadratureError(str(w), val, e) from None
        else:
            kern = (lambda s, fun=fun, first=first, last=last: fun(s) * ((s - a) ** left_exp if first else 1.0)
                    * ((t - s) ** (order - 1.0) if last else 1.0))
            val, e = integrate.quad(kern, lo, hi, epsabs=spec.abs_tol, epsrel=spec.rel_tol,
                                    limit=spec.max_subdivisions)
        total += val
        err += e
    return total / _g(order)


def linear_nu(alpha: float, beta: float, k: float, T: float) -> float:
    """Perturbation of the linear example f = t^k: -Gamma(zeta+1) Gamma(k+1) T^k / Gamma(zeta+k+1)."""
    gamma_exp = alpha + beta - alpha * beta
    zeta = 1.0 - gamma_exp + alpha
    return -math.exp(gammaln(zeta + 1) + gammaln(k + 1) - gammaln(zeta + k + 1)) * T**k


def linear_closed_form(alpha, beta, k, x0_tilde, T, t):
    """Exact solution of the perturbed IVP with forcing t^k (unshifted)."""
    gamma_exp = alpha + beta - alpha * beta
    t = np.asarray(t, dtype=float)
    nu = linear_nu(alpha, beta, k, T)
    return (
        x0_tilde * t ** (gamma_exp - 1.0) / _g(gamma_exp)
        + frac_int_monomial_full(alpha, k, t)
        + nu * t**alpha / _g(alpha + 1.0)
    )


def linear_closed_form_eps(alpha, beta, k, x0_tilde, T, eps, t):
    """Exact solution of the eps-shifted integral equation with forcing t^k."""
    gamma_exp = alpha + beta - alpha * beta
    zeta = 1.0 - gamma_exp + alpha
    t = np.asarray(t, dtype=float)
    c = _g(zeta + 1.0) / (_g(alpha + 1.0) * T**zeta)
    return (
        x0_tilde * t ** (gamma_exp - 1.0) / _g(gamma_exp)
        + frac_int_monomial_right(alpha, k, eps, t)
        - c * t**alpha * frac_int_monomial_right(zeta, k, eps, T)
    )


def _reference_grid(eps: float, T: float, n_uniform: int, ratio: float) -> np.ndarray:
    h = (T - eps) / n_uniform
    pts = [eps]
    while pts[-1] * (ratio - 1.0) < h and pts[-1] + pts[-1] * (ratio - 1.0) < T:
        pts.append(pts[-1] * ratio)
    uniform = np.linspace(pts[-1], T, max(2, int(math.ceil((T - pts[-1]) / h)) + 1))
    return np.concatenate([pts[:-1], uniform])


def _hat_weights(grid: np.ndarray, t: np.ndarray, mu: float) -> np.ndarray:
    """W[m, j] with I^mu g(t_m) = sum_j W[m, j] g(grid_j) for g piecewise linear on ``grid``."""
    lo, hi = grid[:-1], grid[1:]
    h = hi - lo
    W = np.zeros((t.size, grid.size))
    for start in range(0, t.size, 512):
        tt = t[start:start + 512, None]
        A = tt - lo[None, :]
        Bfull = tt - hi[None, :]
        B = np.maximum(Bfull, 0.0)
        active = A > 0
        As = np.where(active, A, 1.0)
        ratio = np.where(active, B / As, 0.0)
        log_r = np.log(np.where(ratio > 0, ratio, 1.0))

        def moment(p):
            # (A^p - B^p) / p without cancellation when B is close to A
            full = As**p / p
            return np.where(ratio > 0, -full * np.expm1(p * log_r), full)

        d0, d1 = moment(mu), moment(mu + 1.0)
        left = np.where(active, (d1 - Bfull * d0) / h, 0.0)
        right = np.where(active, (A * d0 - d1) / h, 0.0)
        block = np.zeros((tt.shape[0], grid.size))
        block[:, :-1] += left
        block[:, 1:] += right
        W[start:start + 512] = block
    return W / _g(mu)


@dataclass
class ReferenceSolution:
    """Tabulated eps-shifted solution with Nystrom evaluation off the grid."""

    grid: np.ndarray
    x: np.ndarray
    g: np.ndarray
    alpha: float
    gamma_exp: float
    zeta: float
    T: float
    x0_tilde: np.ndarray
    tail: np.ndarray = field(repr=False)
    iterations: int = 0

    def __call__(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t < self.grid[0]) or np.any(t > self.T):
            raise DomainError("reference evaluated outside [eps, T]")
        c = _g(self.zeta + 1.0) / (_g(self.alpha + 1.0) * self.T**self.zeta)
        Wa = _hat_weights(self.grid, t, self.alpha)
        x0 = self.x0_tilde[None, :] * (t ** (self.gamma_exp - 1.0))[:, None] / _g(self.gamma_exp)
        return x0 + Wa @ self.g - c * (t**self.alpha)[:, None] * self.tail[None, :]

    def weighted(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return self(t) * (t ** (1.0 - self.gamma_exp))[:, None]


def reference_solution_eps(problem, eps: float, dense_grid_size: int = 4000, ratio: float = 1.05,
                           tol: float = 1e-13, max_iter: int = 500) -> ReferenceSolution:
    """Solve x = x0 + F_eps f(., x) by Picard iteration with product integration.

    The grid is geometric with the given ratio from eps until its spacing
    reaches (T - eps) / dense_grid_size, then uniform.
    """
    T, a = problem.T, problem.alpha
    g_exp, z = problem.gamma, problem.zeta
    grid = _reference_grid(eps, T, dense_grid_size, ratio)
    Wa = _hat_weights(grid, grid, a)
    Wz = _hat_weights(grid, np.array([T]), z)[0]
    c = _g(z + 1.0) / (_g(a + 1.0) * T**z)
    x0 = problem.x0_tilde[None, :] * (grid ** (g_exp - 1.0))[:, None] / _g(g_exp)
    weight = (grid ** (1.0 - g_exp))[:, None]
    x = x0.copy()
    for it in range(1, max_iter + 1):
        g = np.asarray(problem.f(grid, x), dtype=float).reshape(grid.size, -1)
        if not np.all(np.isfinite(g)):
            raise OracleFailure("right-hand side not finite on the reference grid")
        tail = Wz @ g
        x_new = x0 + Wa @ g - c * (grid**a)[:, None] * tail[None, :]
        change = float(np.max(np.abs((x_new - x) * weight)))
        x = x_new
        if change < tol:
            g = np.asarray(problem.f(grid, x), dtype=float).reshape(grid.size, -1)
            return ReferenceSolution(grid, x, g, a, g_exp, z, T, problem.x0_tilde, Wz @ g, it)
    raise OracleFailure(f"reference Picard iteration did not converge in {max_iter} steps")


@dataclass
class ResidualReport:
    t: np.ndarray
    residual: np.ndarray
    skipped: list[tuple[float, str]]

    @property
    def max(self) -> float:
        return float(np.max(self.residual)) if self.residual.size else float("nan")


def hilfer_residual(x: Callable[[float], float], problem, t_samples, nu=None, lower: float = 0.0,
                    knots=None, component: int = 0, spec: QuadratureSpec | None = None) -> ResidualReport:
    """|D^{alpha,beta} x(t) - f(t, x(t)) - nu| at sample times, validation grade.

    D^{alpha,beta} = I^{beta(1-alpha)} d/dt I^{(1-beta)(1-alpha)}: the inner
    integral by quadrature, the derivative by a Richardson-extrapolated
    central difference with step 1e-5 t, the outer integral by quadrature
    at 100 times the tolerances of ``spec``.
    ``x`` maps a scalar time to the scalar component being checked.
    """
    spec = spec or QuadratureSpec(abs_tol=1e-11, rel_tol=1e-10)
    # the outer integrand carries finite-difference noise, so ask less of it
    outer_spec = QuadratureSpec(100 * spec.abs_tol, 100 * spec.rel_tol, 200)
    a, b = problem.alpha, problem.beta
    inner_order = (1.0 - b) * (1.0 - a)
    outer_order = b * (1.0 - a)
    nu = np.zeros(problem.d) if nu is None else np.atleast_1d(np.asarray(nu, dtype=float))
    left_exp = problem.gamma - 1.0 if lower == 0.0 else 0.0
    scale = (lambda s: s ** (1.0 - problem.gamma)) if lower == 0.0 else (lambda s: 1.0)
    # QUADPACK's algebraic-weight rule samples the endpoints, so keep s = 0 off x
    y = (lambda s: x(max(s, 1e-300)) * scale(max(s, 1e-300))) if lower == 0.0 else x
    bps = None if knots is None else knots.breakpoints

    def inner(s):
        if inner_order == 0:
            return x(s)
        return quad_frac_integral(y, inner_order, lower, s, left_exp=left_exp, spec=spec, breakpoints=bps)

    def deriv(s):
        h = 1e-5 * s
        d1 = (inner(s + h) - inner(s - h)) / (2 * h)
        d2 = (inner(s + h / 2) - inner(s - h / 2)) / h
        return (4 * d2 - d1) / 3

    res, ts, skipped = [], [], []
    for t in np.atleast_1d(np.asarray(t_samples, dtype=float)):
        if knots is not None:
            gap = np.min(np.abs(knots.breakpoints - t))
            if gap < 1e-3 * t:
                skipped.append((float(t), "too close to a knot boundary"))
                continue
        if t - lower < 1e-3 * t:
            skipped.append((float(t), "too close to the lower limit"))
            continue
        if outer_order == 0:
            dval = deriv(t)
        else:
            lo_guard = lower * (1.0 + 3e-5) if lower > 0 else 1e-12 * t
            dval = quad_frac_integral(deriv, outer_order, lo_guard, t, spec=outer_spec, breakpoints=bps)
        xt = np.atleast_1d(x(t))
        fval = np.asarray(problem.f(np.array([t]), np.full((1, problem.d), xt[0] if xt.size == 1 else xt)))
        res.append(abs(dval - fval.reshape(-1)[component] - nu[component]))
        ts.append(float(t))
    return ResidualReport(np.array(ts), np.array(res), skipped)
