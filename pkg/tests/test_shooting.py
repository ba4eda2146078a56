import numpy as np
import pytest
from hypothesis import given, strategies as st

from hilferbvp import GradedKnotParams, ProblemSpec, SolverConfig, registry_problem
from hilferbvp.shooting import GridSearchSpec, NoCandidateError, grid_search, make_grid, refine


def zero_rhs(t, x):
    return np.zeros_like(x)


def monomial_spec(grid, variable="x0", threads=1):
    p = registry_problem("monomial", 0.5, 0.5, 3.0, [1.0], k=0.9)
    return GridSearchSpec(p, SolverConfig(1e-10, knots=0.1), tuple(grid), variable, threads=threads)


def nonlinear_spec(grid, threads=1):
    p = registry_problem("cosine-2pi", 0.75, 0.8, 0.5, 1.0)
    return GridSearchSpec(p, SolverConfig(1e-10, knots=GradedKnotParams(1.5, 0.02, 1e-10, 0.5)), tuple(grid), "T",
                          threads=threads)


# ---------------------------------------------------------------- make_grid

def test_make_grid_examples():
    np.testing.assert_allclose(make_grid(0.1, 0.5, 0.1), [0.1, 0.2, 0.3, 0.4, 0.5])
    np.testing.assert_allclose(make_grid(0.0, 1.0, 0.3), [0.0, 0.3, 0.6, 0.9])
    np.testing.assert_allclose(make_grid(2.0, 2.0, 1.0), [2.0])


def test_make_grid_errors():
    with pytest.raises(ValueError):
        make_grid(0.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        make_grid(1.0, 0.0, 0.1)


@given(start=st.floats(-5, 5), n=st.integers(0, 200), step=st.floats(1e-3, 1.0))
def test_make_grid_keeps_lattice_endpoint(start, n, step):
    g = make_grid(start, start + n * step, step)
    assert g.size == n + 1
    assert np.all(np.diff(g) > 0)


# ---------------------------------------------------------------- spec validation

@pytest.mark.parametrize("grid,variable", [((), "T"), ((0.3, 0.2), "T"), ((0.1, 0.2), "y"), ((1e-12, 0.2), "T")])
def test_spec_validation(grid, variable):
    with pytest.raises(ValueError):
        nonlinear_spec(grid) if variable == "T" else monomial_spec(grid, variable)


def test_spec_rejects_bad_component_and_threads():
    p = registry_problem("monomial", 0.5, 0.5, 3.0, [1.0], k=0.9)
    with pytest.raises(ValueError):
        GridSearchSpec(p, SolverConfig(1e-10, knots=0.1), (0.0, 1.0), "x0", component=1)
    with pytest.raises(ValueError):
        GridSearchSpec(p, SolverConfig(1e-10, knots=0.1), (0.0, 1.0), "x0", threads=0)


# ---------------------------------------------------------------- search behaviour

def test_zero_forcing_picks_first_point():
    p = ProblemSpec(zero_rhs, 0.5, 0.5, 1.0, [1.0])
    spec = GridSearchSpec(p, SolverConfig(1e-6, knots=0.1), (0.5, 0.75, 1.0, 1.25), "T")
    res = grid_search(spec)
    assert res.argmin == 0.5 and res.min_abs_delta == 0.0
    with pytest.warns(RuntimeWarning, match="boundary"):
        fine = refine(res)
    assert fine.argmin == pytest.approx(fine.spec.grid[0])
    assert fine.min_abs_delta == 0.0
    assert any("boundary" in n for n in fine.warnings)


def test_delta_is_constant_in_x0_for_x_independent_forcing():
    res = grid_search(monomial_spec(make_grid(-2.0, 2.0, 1.0)))
    deltas = np.array([p.delta_T[0] for p in res.table])
    np.testing.assert_allclose(deltas, deltas[0], rtol=1e-13)
    assert deltas[0] == pytest.approx(-1.5997, abs=0.05)
    # ties keep the first point
    assert res.argmin == -2.0


def test_result_independent_of_threads():
    grid = (0.15, 0.2, 0.25, 0.3)
    one = grid_search(nonlinear_spec(grid))
    many = grid_search(nonlinear_spec(grid, threads=4))
    assert one.argmin == many.argmin
    for a, b in zip(one.table, many.table):
        np.testing.assert_array_equal(a.delta_T, b.delta_T)


def test_table_rows_and_header():
    res = grid_search(nonlinear_spec((0.15, 0.2, 0.25)))
    assert res.header() == ["T", "abs_delta", "converged", "delta_1"]
    rows = res.rows()
    assert [r[0] for r in rows] == [0.15, 0.2, 0.25]
    assert all(r[2] == 1 for r in rows)
    assert res.best.value == res.argmin


def test_nonconverging_points_are_excluded():
    p = registry_problem("cosine-2pi", 0.75, 0.8, 0.5, 1.0)
    spec = GridSearchSpec(p, SolverConfig(1e-10, knots=0.05, max_iter=2), (0.2, 0.3), "T")
    with pytest.raises(NoCandidateError):
        grid_search(spec)


def test_domain_escape_marks_point_failed():
    p = registry_problem("monomial", 0.5, 0.5, 3.0, [1.0], k=0.9)
    boxed = ProblemSpec(p.f, p.alpha, p.beta, p.T, p.x0_tilde, D=([-10.0], [1.2]))
    spec = GridSearchSpec(boxed, SolverConfig(1e-10, knots=0.1), (0.5, 3.0), "T")
    res = grid_search(spec)
    assert res.table[0].converged and not res.table[1].converged
    assert "IterateEscapedDomain" in res.table[1].error
    assert res.argmin == 0.5


def test_refine_does_not_increase_minimum():
    coarse = grid_search(nonlinear_spec((0.1, 0.15, 0.2, 0.25, 0.3)))
    fine = refine(coarse, factor=5)
    assert fine.min_abs_delta <= coarse.min_abs_delta
    assert abs(fine.argmin - coarse.argmin) <= 0.05 + 1e-12


def test_refine_validation():
    res = grid_search(monomial_spec((0.0,)))
    with pytest.raises(ValueError):
        refine(res)
    res = grid_search(monomial_spec((0.0, 1.0)))
    with pytest.raises(ValueError):
        refine(res, factor=1)
