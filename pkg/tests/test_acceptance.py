"""Acceptance suite: one PASS/FAIL line per criterion.

Each test prints its line; the lines are repeated in an "acceptance
criteria" section of the pytest terminal summary.
"""

import math
import time
from pathlib import Path

import numpy as np
from scipy import integrate
from scipy.special import gamma as G

from hilferbvp import (
    GradedKnotParams,
    KnotCollection,
    MapParams,
    SolverConfig,
    WeightedSpline,
    apply_F_eps,
    frac_int_monomial_full,
    incomplete_beta,
    omega_spline,
    registry_problem,
    solve_perturbed_ivp,
    spline_project,
    theta_eps,
    uniform_knots,
    xi_sup,
)
from hilferbvp.config import load_config
from hilferbvp.oracle import linear_nu
from hilferbvp.shooting import GridSearchSpec, grid_search, make_grid, refine
from hilferbvp.sweep import fit_order, run_sweep

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
NU = -1.600

TABLE1_SUP = [3.208e-1, 1.537e-1, 8.000e-2, 4.402e-2, 2.506e-2, 1.455e-2, 8.537e-3, 5.041e-3, 2.987e-3]
TABLE2_SUP = [6.081e-3, 3.952e-3, 2.484e-3, 1.521e-3, 9.224e-4]
TABLE3_SUP = [2.224e-1, 7.479e-2, 2.444e-2, 7.886e-3, 2.528e-3, 8.079e-4, 8.866e-4, 1.700e-3, 2.559e-3]
TABLE4 = {  # beta: (knots, x(eps), Delta_T)
    0.0: (61, 2.581e2, 1.360e-1),
    0.2: (59, 8.589e1, 1.126e-1),
    0.4: (56, 2.843e1, 9.338e-2),
    0.6: (54, 9.358e0, 7.767e-2),
    0.8: (52, 3.066e0, 6.512e-2),
    1.0: (50, 1.000e0, 5.547e-2),
}

LINES: dict[int, str] = {}


def report(n: int, title: str, checks: dict[str, tuple[bool, str]]):
    ok = all(passed for passed, _ in checks.values())
    detail = "; ".join(f"{name}: {'ok' if passed else 'FAIL'} ({info})" for name, (passed, info) in checks.items())
    LINES[n] = f"criterion {n} {'PASS' if ok else 'FAIL'} - {title} - {detail}"
    print("\n" + LINES[n])
    failed = [name for name, (passed, _) in checks.items() if not passed]
    assert ok, f"criterion {n} failed checks: {failed}"


def within_factor(got, want, factor):
    return all(w / factor <= g <= w * factor for g, w in zip(got, want))


def fmt(values, spec=".4g"):
    return "[" + ", ".join(format(float(v), spec) for v in values) + "]"


# ---------------------------------------------------------------- 1

def test_criterion_1_knot_width_table():
    pc = load_config(CONFIGS / "linear.yaml")
    hs = [2.0**-k for k in range(9)]
    start = time.perf_counter()
    table = run_sweep(pc, "h", hs, reference="eps")
    elapsed = time.perf_counter() - start
    sup = [r.sup_error for r in table.rows]
    dT = [float(r.delta_T[0]) for r in table.rows]
    its = [r.iterations for r in table.rows]
    report(1, "linear example, h sweep", {
        "sup error within x2": (within_factor(sup, TABLE1_SUP, 2.0), fmt(sup)),
        "Delta_T within 0.005 of -1.600": (all(abs(d - NU) <= 0.005 for d in dT), fmt(dT, ".5f")),
        "one iteration": (all(i == 1 for i in its), str(its)),
        "runtime <= 10 s": (elapsed <= 10.0, f"{elapsed:.2f} s"),
    })


# ---------------------------------------------------------------- 2

def test_criterion_2_order_table():
    pc = load_config(CONFIGS / "linear.yaml").with_solver(knots=0.01)
    table = run_sweep(pc, "q", [1, 2, 4, 8, 16], reference="eps")
    sup = [r.sup_error for r in table.rows]
    report(2, "linear example, q sweep", {
        "strictly decreasing": (all(a > b for a, b in zip(sup, sup[1:])), fmt(sup)),
        "sup error within x2": (within_factor(sup, TABLE2_SUP, 2.0), f"reference {fmt(TABLE2_SUP)}"),
    })


# ---------------------------------------------------------------- 3

def test_criterion_3_eps_table():
    # the tabulated errors are reproduced on h = 1e-2 knots against the unshifted solution
    pc = load_config(CONFIGS / "linear.yaml").with_solver(knots=0.01)
    eps_values = [2.0**-k for k in range(1, 10)]
    table = run_sweep(pc, "eps", eps_values, reference="limit")
    sup = [r.sup_error for r in table.rows]
    dT = [float(r.delta_T[0]) for r in table.rows]
    x_eps = [float(r.x_at_eps[0]) for r in table.rows]
    order = fit_order(eps_values[:6], sup[:6])
    plateau = within_factor(sup[6:], TABLE3_SUP[6:], 3.0)
    report(3, "linear example, eps sweep", {
        "pre-plateau order in [0.35, 0.65]": (0.35 <= order <= 0.65, f"{order:.3f}"),
        "Delta_T -> -1.600": (abs(dT[-1] - NU) <= 0.005 and abs(dT[-1] - NU) < abs(dT[0] - NU), fmt(dT, ".4f")),
        "x(eps) increasing": (all(a < b for a, b in zip(x_eps, x_eps[1:])), fmt(x_eps)),
        "plateau within x3": (plateau, fmt(sup[6:])),
    })


# ---------------------------------------------------------------- 4

def test_criterion_4_closed_form_oracle():
    nu = linear_nu(0.5, 0.5, 0.9, 3.0)
    # independent evaluation: zeta = 3/4, so nu = -Gamma(7/4) Gamma(19/10) 3^0.9 / Gamma(53/20)
    independent = -G(1.75) * G(1.9) * 3.0**0.9 / G(2.65)
    pc = load_config(CONFIGS / "linear.yaml")
    res = solve_perturbed_ivp(pc.problem, pc.solver)
    dT = float(res.delta_T[0])
    report(4, "closed-form perturbation", {
        "nu = -1.5997 (4 s.f.)": (float(f"{nu:.5g}") == -1.5997 and float(f"{independent:.5g}") == -1.5997,
                                  f"{nu:.8f} vs {independent:.8f}"),
        "solver Delta_T at h=2^-8 within 1e-3": (abs(dT - nu) <= 1e-3, f"{dT:.6f}"),
    })


# ---------------------------------------------------------------- 5

def test_criterion_5_nonlinear_certification():
    rows = {}
    for beta in TABLE4:
        problem = registry_problem("cosine-2pi", 0.75, beta, 0.5, 1.0)
        cfg = SolverConfig(1e-10, knots=GradedKnotParams(1.5, 1e-2, 1e-10, 0.5))
        res = solve_perturbed_ivp(problem, cfg)
        c = res.constants
        rows[beta] = (c.Xi + c.Omega_Aq, res.n_knots, float(res.delta_T[0]), float(res.x_at_eps()[0]))
    xo = [r[0] for r in rows.values()]
    knots = [r[1] for r in rows.values()]
    dT = [r[2] for r in rows.values()]
    report(5, "nonlinear example, beta sweep", {
        "Xi+Omega <= 0.7064": (all(v <= 0.7064 for v in xo), fmt(xo)),
        "knots within 2": (all(abs(k - TABLE4[b][0]) <= 2 for b, k in zip(TABLE4, knots)), str(knots)),
        "Delta_T within 10%": (all(abs(d - TABLE4[b][2]) <= 0.1 * TABLE4[b][2] for b, d in zip(TABLE4, dT)), fmt(dT)),
        "x(eps) at beta=1 is 1 +- 1e-3": (abs(rows[1.0][3] - 1.0) <= 1e-3, f"{rows[1.0][3]:.6f}"),
    })


# ---------------------------------------------------------------- 6

def test_criterion_6_grid_search():
    problem = registry_problem("cosine-2pi", 0.75, 0.5, 0.5, 1.0)
    cfg = SolverConfig(1e-10, knots=GradedKnotParams(1.5, 1e-2, 1e-10, 0.5))
    spec = GridSearchSpec(problem, cfg, tuple(make_grid(0.005, 0.5, 0.005)), "T", threads=4)
    coarse = grid_search(spec)
    fine = refine(coarse)
    report(6, "grid search over T", {
        # 1e-9 absorbs the binary representation of the grid values
        "T* = 0.185 +- 0.005": (abs(coarse.argmin - 0.185) <= 0.005 + 1e-9, f"{coarse.argmin:.4f}"),
        "|Delta| <= 0.01": (coarse.min_abs_delta <= 0.01, f"{coarse.min_abs_delta:.3e}"),
        "refinement does not increase |Delta|": (fine.min_abs_delta <= coarse.min_abs_delta,
                                                 f"{fine.min_abs_delta:.3e} at T = {fine.argmin:.4f}"),
    })


# ---------------------------------------------------------------- 7

def _incbeta_cross_check():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(100):
        z, a, b = rng.uniform(0.01, 0.99), rng.uniform(0.1, 3.0), rng.uniform(0.1, 3.0)
        ref, _ = integrate.quad(lambda s: (1 - s) ** (b - 1), 0.0, z, weight="alg", wvar=(a - 1, 0.0),
                                epsabs=1e-15, epsrel=1e-13)
        worst = max(worst, abs(float(incomplete_beta(z, a, b)) - ref) / max(1.0, abs(ref)))
    return worst


def _semigroup():
    worst = 0.0
    for a1 in (0.25, 0.5, 0.75):
        for a2 in (0.25, 0.5, 0.75):
            for k in (0.0, 0.9, 2.0):
                for t in (0.5, 1.0, 3.0):
                    inner = math.gamma(k + 1) / math.gamma(a2 + k + 1)
                    lhs = inner * frac_int_monomial_full(a1, a2 + k, t)
                    rhs = frac_int_monomial_full(a1 + a2, k, t)
                    worst = max(worst, abs(float(lhs) - float(rhs)) / max(1.0, abs(float(rhs))))
    return worst


def _bernstein_margin():
    rng = np.random.default_rng(3)
    w = lambda t: t**0.9
    worst = -np.inf
    for _ in range(30):
        bps = np.sort(np.concatenate([[0.1, 3.0], rng.uniform(0.1, 3.0, rng.integers(1, 8))]))
        knots = KnotCollection(np.unique(bps))
        q = int(rng.integers(1, 17))
        ws = spline_project(w, knots, q)
        bound = 1.25 * max(w(min(a + (b - a) / math.sqrt(q), b)) - w(a) for a, b in zip(knots.left, knots.right))
        t = np.concatenate([np.linspace(a, b, 129) for a, b in zip(knots.left, knots.right)])
        err = np.max(np.abs(ws.weighted(t)[:, 0] - w(t)))
        worst = max(worst, err / bound)
    return worst


def _operator_norm_ratio():
    rng = np.random.default_rng(5)
    worst = 0.0
    for alpha, beta in ((0.5, 0.5), (0.75, 0.0), (0.75, 1.0)):
        p = MapParams(alpha, beta, 1.0, 1e-6)
        knots = uniform_knots(p.eps, p.T, 0.1)
        t = np.geomspace(2 * p.eps, p.T, 150)
        grid = np.geomspace(p.eps, p.T, 1500)
        Xi = xi_sup(p)
        for _ in range(16):
            y = WeightedSpline(knots, p.gamma, 2, rng.uniform(-1, 1, (len(knots), 3, 1)))
            img = np.max(np.abs(t ** (1 - p.gamma) * apply_F_eps(y, p, t)[:, 0]))
            worst = max(worst, img / np.max(np.abs(y.weighted(grid))) / Xi)
    return worst


def _rates():
    theta_dev = max(
        abs(math.log2(theta_eps(MapParams(a, b, 1.0, 0.0), 2e-30) / theta_eps(MapParams(a, b, 1.0, 0.0), 1e-30)) - a)
        for a in (0.25, 0.5, 0.75, 0.95)
        for b in (0.0, 0.5, 1.0)
    )
    omega_dev = 0.0
    for a, b in ((0.5, 0.5), (0.75, 0.8), (0.3, 0.0)):
        p = MapParams(a, b, 1.0, 0.5)
        hs = [1e-4 / 2**k for k in range(4)]
        vals = [omega_spline(uniform_knots(p.eps, p.T, h), 1, p) for h in hs]
        omega_dev = max(omega_dev, abs(np.polyfit(np.log(hs), np.log(vals), 1)[0] - a))
    return theta_dev, omega_dev


def _residual_budgets():
    out = []
    for name in ("linear", "nonlinear", "nonlinear_expr", "zero"):
        pc = load_config(CONFIGS / f"{name}.yaml")
        res = solve_perturbed_ivp(pc.problem, pc.solver)
        out.append(bool(np.all(res.boundary_residual <= res.residual_budget)))
    return out


def _deterministic():
    pc = load_config(CONFIGS / "nonlinear.yaml")
    a = solve_perturbed_ivp(pc.problem, pc.solver)
    b = solve_perturbed_ivp(pc.problem, pc.solver)
    return np.array_equal(np.asarray(a.solution.coeffs), np.asarray(b.solution.coeffs)) and a.history == b.history


def test_criterion_7_property_suites():
    incbeta = _incbeta_cross_check()
    semigroup = _semigroup()
    bern = _bernstein_margin()
    norm = _operator_norm_ratio()
    theta_dev, omega_dev = _rates()
    budgets = _residual_budgets()
    det = _deterministic()
    report(7, "property suites", {
        "incomplete beta vs quadrature (100 cases) to 1e-10": (incbeta <= 1e-10, f"{incbeta:.2e}"),
        "semigroup to 1e-11": (semigroup <= 1e-11, f"{semigroup:.2e}"),
        "Bernstein bound": (bern <= 1.0, f"worst err/bound {bern:.3f}"),
        "sampled norm <= Xi": (norm <= 1.0 + 1e-9, f"worst ratio {norm:.3f}"),
        "Theta rate within 0.02": (theta_dev < 0.02, f"{theta_dev:.4f}"),
        "Omega rate within 0.02": (omega_dev < 0.02, f"{omega_dev:.4f}"),
        "residual within budget": (all(budgets), str(budgets)),
        "bit-identical reruns": (det, str(det)),
    })
