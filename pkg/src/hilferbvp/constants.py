"""Convergence constants of the Picard iteration and the assumption checker.

Every constant here is an explicit formula in alpha, gamma, zeta, T and the
knot geometry: the map-norm profile xi(t) and its supremum Xi, the eps-shift
defect Theta_eps, the weighted modulus Omega(t, t') and the spline budget
Omega^q_A built from it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import gammaln

from .fracops import MapParams
from .specfun import DomainError, beta, incomplete_beta
from .splines import KnotCollection

if TYPE_CHECKING:
    from .solver import ProblemSpec, SolverConfig

__all__ = [
    "ConvergenceConstants",
    "AssumptionReport",
    "Verdict",
    "xi_of_t",
    "xi_sup",
    "theta_eps",
    "omega",
    "omega_spline",
    "omega_spline_dense",
    "spectral_radius",
    "compute_constants",
    "check_assumptions",
]

PASS, FAIL, NOT_CHECKABLE, USER_CERTIFIED = "pass", "fail", "not-checkable", "user-certified"


def _g(x: float) -> float:
    return math.exp(gammaln(x))


def xi_of_t(p: MapParams, t) -> np.ndarray | float:
    """Pointwise bound xi(t) with |t^(1-gamma) F y(t)| <= xi(t) ||y||_(1-gamma)."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= 0) or np.any(t_arr > p.T):
        raise DomainError(f"xi(t) needs 0 < t <= T = {p.T}")
    a, g, z, T = p.alpha, p.gamma, p.zeta, p.T
    r = np.clip(t_arr / T, 0.0, 1.0)
    scale = t_arr**z * T ** (a - z)
    local = _g(g) * t_arr**a / _g(g + a)
    # (1-gamma)/alpha - 1 = -beta, so this term is never positive
    middle = ((1.0 - g) / a - 1.0) * scale / _g(a) * incomplete_beta(r, g, z)
    tail = z * scale / _g(a + 1.0) * incomplete_beta(1.0 - r, z, g)
    out = local + middle + tail
    return out.item() if np.ndim(out) == 0 else out


def xi_sup(p: MapParams, grid_points: int = 4096, rtol: float = 1e-10) -> float:
    """Xi = sup over (0, T] of xi(t): log-spaced scan, then golden-section polish."""
    t = p.T * np.logspace(-12, 0, grid_points)
    vals = xi_of_t(p, t)
    k = int(np.argmax(vals))
    best = float(vals[k])
    if 0 < k < grid_points - 1:
        lo, hi = math.log(t[k - 1]), math.log(t[k + 1])
        res = minimize_scalar(
            lambda u: -xi_of_t(p, min(math.exp(u), p.T)),
            bracket=(lo, math.log(t[k]), hi),
            method="golden",
            tol=rtol,
        )
        best = max(best, -float(res.fun))
    return best


def theta_eps(p: MapParams, eps: float | None = None) -> float:
    """Bound on the weighted gap between the shifted and unshifted maps."""
    eps = p.eps if eps is None else eps
    if not 0 < eps < p.T:
        raise DomainError("Theta_eps needs 0 < eps < T")
    a, g, z, T = p.alpha, p.gamma, p.zeta, p.T
    return eps**a / _g(a) * beta(g, a) + z * T**a / _g(a + 1.0) * incomplete_beta(eps / T, g, z)


def omega(p: MapParams, t, t_prime) -> np.ndarray | float:
    """Weighted modulus of continuity of the shifted map image, for t < t'."""
    t = np.asarray(t, dtype=float)
    tp = np.asarray(t_prime, dtype=float)
    if np.any(t >= tp):
        raise DomainError("omega needs t < t'")
    if np.any(t <= 0):
        raise DomainError("omega needs t > 0")
    a, g, z, T = p.alpha, p.gamma, p.zeta, p.T
    gap = tp - t
    first = gap**a / _g(a + 1.0) * (a * beta(g, a) + 2.0 * (tp / t) ** (1.0 - g))
    second = gap**z * T ** (a - z) / _g(a + 1.0) * z * beta(g, z)
    out = first + second
    return out.item() if np.ndim(out) == 0 else out


def _corner_pairs(knots: KnotCollection, q: int):
    if np.any(knots.widths <= 0):
        raise DomainError("degenerate knot")
    t = knots.left
    tp = np.minimum(t + knots.widths / math.sqrt(q), knots.right)
    return t, tp


def omega_spline(knots: KnotCollection, q: int, p: MapParams) -> float:
    """Spline-projection budget Omega^q_A = (5/4) max_i Omega(t_i, t_i + h_i / sqrt(q)).

    Omega grows with t' - t and shrinks as t moves right at a fixed gap, so the
    left corner of each knot is the worst admissible pair.
    """
    if q < 1:
        raise ValueError("Bernstein order must be at least 1")
    t, tp = _corner_pairs(knots, q)
    return 1.25 * float(np.max(omega(p, t, tp)))


def omega_spline_dense(knots: KnotCollection, q: int, p: MapParams, pairs_per_knot: int = 64) -> float:
    """Brute-force Omega^q_A over sampled admissible pairs; cross-check for :func:`omega_spline`."""
    best = 0.0
    s = np.linspace(0.0, 1.0, pairs_per_knot)
    for a, b in zip(knots.left, knots.right):
        delta = (b - a) / math.sqrt(q)
        t = a + s * (b - a)
        gaps = np.linspace(0.0, delta, pairs_per_knot + 1)[1:]
        tt, gg = np.meshgrid(t, gaps, indexing="ij")
        tp = tt + gg
        ok = tp <= b
        if np.any(ok):
            best = max(best, float(np.max(omega(p, tt[ok], tp[ok]))))
    return 1.25 * best


def spectral_radius(M) -> float:
    """Largest eigenvalue modulus of a nonnegative square matrix."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[0] != M.shape[1]:
        raise ValueError("spectral radius needs a square matrix")
    if np.any(M < 0):
        raise DomainError("matrix must be entrywise nonnegative")
    if not np.any(M):
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(M))))


@dataclass(frozen=True)
class ConvergenceConstants:
    Xi: float
    Theta_eps: float
    Omega_Aq: float
    Q: np.ndarray
    rho_Q: float
    Q_star: np.ndarray
    rho_Q_star: float

    def as_dict(self) -> dict:
        return {
            "Xi": self.Xi,
            "Theta_eps": self.Theta_eps,
            "Omega_Aq": self.Omega_Aq,
            "Xi_plus_Omega": self.Xi + self.Omega_Aq,
            "Q": np.asarray(self.Q).tolist(),
            "rho_Q": self.rho_Q,
            "Q_star": np.asarray(self.Q_star).tolist(),
            "rho_Q_star": self.rho_Q_star,
        }


def compute_constants(p: MapParams, knots: KnotCollection, q: int, K=None) -> ConvergenceConstants:
    """All constants for one configuration; ``K`` defaults to the zero matrix."""
    Xi = xi_sup(p)
    theta = theta_eps(p) if p.eps > 0 else 0.0
    om = omega_spline(knots, q, p)
    K = np.zeros((1, 1)) if K is None else np.atleast_2d(np.asarray(K, dtype=float))
    Q = Xi * K
    Qs = (Xi + om) * K
    return ConvergenceConstants(Xi, theta, om, Q, spectral_radius(Q), Qs, spectral_radius(Qs))


@dataclass(frozen=True)
class Verdict:
    status: str
    witness: dict = field(default_factory=dict)


@dataclass(frozen=True)
class AssumptionReport:
    constants: ConvergenceConstants
    a1: Verdict
    a2: Verdict
    a3: Verdict
    a1s: Verdict
    a2s: Verdict
    a3s: Verdict

    NAMES = ("a1", "a2", "a3", "a1s", "a2s", "a3s")
    LABELS = {"a1": "A.1", "a2": "A.2", "a3": "A.3", "a1s": "A.1*", "a2s": "A.2*", "a3s": "A.3*"}

    def verdicts(self) -> dict[str, Verdict]:
        return {n: getattr(self, n) for n in self.NAMES}

    @property
    def all_pass(self) -> bool:
        """True when no checkable assumption failed; not-checkable items do not count against it."""
        return all(v.status != FAIL for v in self.verdicts().values())

    @property
    def certified(self) -> bool:
        """Both spectral-radius conditions were checked and hold."""
        return self.a3.status == PASS and self.a3s.status == PASS

    def to_pairs(self) -> list[tuple[str, str]]:
        c = self.constants
        pairs = [
            ("Xi", f"{c.Xi:.6g}"),
            ("Theta_eps", f"{c.Theta_eps:.6g}"),
            ("Omega_Aq", f"{c.Omega_Aq:.6g}"),
            ("Xi+Omega_Aq", f"{c.Xi + c.Omega_Aq:.6g}"),
            ("rho_Q", f"{c.rho_Q:.6g}"),
            ("rho_Q_star", f"{c.rho_Q_star:.6g}"),
        ]
        pairs += [(self.LABELS[n], v.status) for n, v in self.verdicts().items()]
        return pairs

    def to_text(self) -> str:
        lines = [f"{k:<14} {v}" for k, v in self.to_pairs()]
        for n, v in self.verdicts().items():
            if v.witness:
                detail = ", ".join(f"{k}={_fmt(x)}" for k, x in v.witness.items())
                lines.append(f"  {self.LABELS[n]}: {detail}")
        return "\n".join(lines)


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return f"{x:.6g}"
    if isinstance(x, np.ndarray):
        return np.array2string(x, precision=6)
    return str(x)


def _domain_verdict(problem: "ProblemSpec", radius_factor: float) -> Verdict:
    if problem.m is None:
        return Verdict(NOT_CHECKABLE, {"reason": "bound m not declared"})
    centre = np.asarray(problem.x0_tilde, dtype=float) / _g(problem.gamma)
    radius = radius_factor * np.asarray(problem.m, dtype=float)
    witness = {"centre": centre, "radius": radius}
    if problem.D is None:
        witness["D"] = "all space"
        return Verdict(PASS, witness)
    lower, upper = (np.asarray(b, dtype=float) for b in problem.D)
    witness["D"] = f"[{lower.tolist()}, {upper.tolist()}]"
    ok = np.all(lower <= centre - radius) and np.all(centre + radius <= upper)
    return Verdict(PASS if ok else FAIL, witness)


def _bound_verdict(problem: "ProblemSpec") -> Verdict:
    missing = [n for n in ("m", "K") if getattr(problem, n) is None]
    if missing:
        return Verdict(NOT_CHECKABLE, {"reason": f"{' and '.join(missing)} not declared"})
    return Verdict(USER_CERTIFIED, {"m": np.asarray(problem.m), "K": np.asarray(problem.K)})


def _radius_verdict(rho: float, K) -> Verdict:
    if K is None:
        return Verdict(NOT_CHECKABLE, {"reason": "K not declared"})
    return Verdict(PASS if rho < 1.0 else FAIL, {"rho": rho})


def check_assumptions(problem: "ProblemSpec", cfg: "SolverConfig") -> AssumptionReport:
    """Evaluate A.1-A.3 (exact iteration) and A.1*-A.3* (spline iteration).

    Boundedness and Lipschitz constants are inputs; their verdict records
    them as user-certified instead of claiming a proof.
    """
    p = problem.map_params(cfg.eps)
    knots = cfg.resolve_knots(problem.gamma, problem.T)
    c = compute_constants(p, knots, cfg.q, problem.K)
    return AssumptionReport(
        constants=c,
        a1=_domain_verdict(problem, c.Xi),
        a2=_bound_verdict(problem),
        a3=_radius_verdict(c.rho_Q, problem.K),
        a1s=_domain_verdict(problem, c.Xi + c.Omega_Aq),
        a2s=_bound_verdict(problem),
        a3s=_radius_verdict(c.rho_Q_star, problem.K),
    )
