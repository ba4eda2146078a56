"""Hilfer fractional-periodic boundary value problems.

Perturbed-IVP Picard iteration with Bernstein-spline fractional integration,
a-priori convergence constants, and a grid search on the perturbation
``delta_T`` connecting the perturbed problem back to the original BVP.
"""

from .specfun import (
    DomainError,
    beta,
    frac_int_monomial_full,
    frac_int_monomial_left,
    frac_int_monomial_right,
    frac_int_monomial_segment,
    gamma,
    incomplete_beta,
)
from .splines import (
    GradedKnotParams,
    KnotCollection,
    WeightedSpline,
    bernstein_eval,
    bernstein_fit,
    graded_knots,
    spline_project,
    uniform_knots,
    weighted_eval,
)
from .fracops import (
    INTEGRAND_MODES,
    MapParams,
    SplineMap,
    apply_F,
    apply_F_eps,
    apply_spline_F,
    frac_int_weighted_spline,
    rl_weights,
)
from .constants import (
    AssumptionReport,
    ConvergenceConstants,
    check_assumptions,
    compute_constants,
    omega,
    omega_spline,
    omega_spline_dense,
    Verdict,
    spectral_radius,
    theta_eps,
    xi_of_t,
    xi_sup,
)
from .solver import (
    BoundUnavailable,
    ConvergenceError,
    IterateEscapedDomain,
    ProblemSpec,
    SolveResult,
    SolverConfig,
    apriori_error_bound,
    residual_budget,
    boundary_residual,
    delta_T,
    initial_iterate,
    iterate_once,
    solve_perturbed_ivp,
)
from .shooting import GridSearchResult, GridSearchSpec, NoCandidateError, grid_search, make_grid, refine
from .oracle import (
    OracleFailure,
    QuadratureError,
    QuadratureSpec,
    hilfer_residual,
    linear_closed_form,
    linear_closed_form_eps,
    linear_nu,
    quad_frac_integral,
    reference_solution_eps,
)
from .expr import ExpressionError, parse_expression, to_source
from .config import ConfigError, ProblemConfig, load_config, parse_config, registry_problem

__version__ = "0.1.0"

__all__ = [
    "DomainError",
    "beta",
    "frac_int_monomial_full",
    "frac_int_monomial_left",
    "frac_int_monomial_right",
    "frac_int_monomial_segment",
    "gamma",
    "incomplete_beta",
    "GradedKnotParams",
    "KnotCollection",
    "WeightedSpline",
    "bernstein_eval",
    "bernstein_fit",
    "graded_knots",
    "spline_project",
    "uniform_knots",
    "weighted_eval",
    "INTEGRAND_MODES",
    "MapParams",
    "SplineMap",
    "apply_F",
    "apply_F_eps",
    "apply_spline_F",
    "frac_int_weighted_spline",
    "rl_weights",
    "AssumptionReport",
    "ConvergenceConstants",
    "check_assumptions",
    "compute_constants",
    "omega",
    "omega_spline",
    "omega_spline_dense",
    "Verdict",
    "spectral_radius",
    "theta_eps",
    "xi_of_t",
    "xi_sup",
    "BoundUnavailable",
    "ConvergenceError",
    "IterateEscapedDomain",
    "ProblemSpec",
    "SolveResult",
    "SolverConfig",
    "apriori_error_bound",
    "residual_budget",
    "boundary_residual",
    "delta_T",
    "initial_iterate",
    "iterate_once",
    "solve_perturbed_ivp",
    "GridSearchResult",
    "GridSearchSpec",
    "NoCandidateError",
    "grid_search",
    "make_grid",
    "refine",
    "OracleFailure",
    "QuadratureError",
    "QuadratureSpec",
    "hilfer_residual",
    "linear_closed_form",
    "linear_closed_form_eps",
    "linear_nu",
    "quad_frac_integral",
    "reference_solution_eps",
    "ExpressionError",
    "parse_expression",
    "to_source",
    "ConfigError",
    "ProblemConfig",
    "load_config",
    "parse_config",
    "registry_problem",
    "__version__",
]
