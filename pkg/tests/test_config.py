import math
from pathlib import Path

import numpy as np
import pytest

from hilferbvp import GradedKnotParams, KnotCollection
from hilferbvp.config import ConfigError, load_config, parse_config, registry_problem

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def base(**over):
    data = {"alpha": 0.5, "beta": 0.5, "T": 3, "x0_tilde": 1.0, "f": {"registry": "monomial", "k": 0.9}}
    data.update(over)
    return data


@pytest.mark.parametrize("name", ["linear", "nonlinear", "nonlinear_expr", "zero"])
def test_shipped_configs_load(name):
    pc = load_config(CONFIGS / f"{name}.yaml")
    assert pc.problem.T > pc.solver.eps
    assert pc.problem.m is not None and pc.problem.K is not None


def test_linear_config_values():
    pc = load_config(CONFIGS / "linear.yaml")
    assert pc.is_monomial and pc.rhs_params == {"k": 0.9}
    assert pc.solver.eps == 1e-10 and pc.solver.knots == 2.0**-8
    np.testing.assert_array_equal(pc.problem.K, [[0.0]])
    # m bounds t^(1-gamma) t^k on (0, T]
    assert pc.problem.m[0] == pytest.approx(3.0 ** (0.25 + 0.9))


def test_nonlinear_config_uses_graded_knots():
    pc = load_config(CONFIGS / "nonlinear.yaml")
    assert isinstance(pc.solver.knots, GradedKnotParams)
    assert pc.solver.knots.c == 1.5 and pc.solver.knots.h_max == 0.01
    np.testing.assert_allclose(pc.problem.K, [[1.0]])
    assert pc.problem.m[0] == pytest.approx(0.5 ** (1 - pc.problem.gamma) / (2 * math.pi))


def test_expression_config_matches_registry(rng):
    expr = load_config(CONFIGS / "nonlinear_expr.yaml")
    reg = registry_problem("cosine-2pi", 0.75, 0.5, 0.5, 1.0)
    assert expr.rhs_kind == "expression" and expr.m_declared and expr.K_declared
    t = rng.uniform(0, 0.5, 1000)
    x = rng.uniform(-2, 2, (1000, 1))
    np.testing.assert_allclose(expr.problem.f(t, x), reg.f(t, x), rtol=1e-14, atol=1e-15)


@pytest.mark.parametrize("key", ["alpha", "beta", "T", "x0_tilde", "f"])
def test_required_keys(key):
    data = base()
    del data[key]
    with pytest.raises(ConfigError, match=key):
        parse_config(data)


@pytest.mark.parametrize(
    "over",
    [
        {"alpha": 1.5},
        {"alpha": "abc"},
        {"beta": float("nan")},
        {"colour": "red"},
        {"f": {"registry": "nope"}},
        {"f": {"registry": "monomial"}},
        {"f": {"registry": "monomial", "k": 1, "j": 2}},
        {"f": ["t", "t"]},
        {"f": "t + y"},
        {"m": [1, 2]},
        {"K": [[1, 2]]},
        {"K": -1},
        {"domain": {"lower": 0}},
        {"domain": {"lower": 1, "upper": 0}},
        {"solver": {"eps": 0}},
        {"solver": {"eps": 5}},
        {"solver": {"h": 0.1, "graded": {"c": 1.5, "h_max": 0.1}}},
        {"solver": {"graded": {"c": 1.0, "h_max": 0.1}}},
        {"solver": {"graded": {"c": 1.5, "width": 0.1}}},
        {"solver": {"graded": 3}},
        {"solver": {"knots": [0.5, 1.0]}},
        {"solver": {"h": -1}},
        {"solver": {"integrand": "magic"}},
        {"solver": {"turbo": True}},
        {"solver": [1, 2]},
    ],
)
def test_invalid_configs(over):
    with pytest.raises(ConfigError):
        parse_config(base(**over))


def test_non_mapping_config():
    with pytest.raises(ConfigError):
        parse_config([1, 2])


def test_yaml_numeric_strings(tmp_path):
    # YAML 1.1 leaves 1e-10 (no dot) as a string
    path = tmp_path / "c.yaml"
    path.write_text("alpha: 0.5\nbeta: 0.5\nT: 3\nx0_tilde: 1\nf: {registry: monomial, k: 0.9}\nsolver: {eps: 1e-10, h: 1e-1}\n")
    pc = load_config(path)
    assert pc.solver.eps == 1e-10 and pc.solver.knots == 0.1


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("alpha: [1,\n")
    with pytest.raises(ConfigError, match="invalid YAML"):
        load_config(bad)


def test_explicit_knots():
    pc = parse_config(base(solver={"eps": 0.1, "knots": [0.1, 1.0, 3.0]}))
    assert isinstance(pc.solver.knots, KnotCollection)
    assert len(pc.solver.resolve_knots(pc.problem.gamma, 3.0)) == 2


def test_defaults():
    pc = parse_config(base())
    assert pc.solver.eps == 1e-10 and pc.solver.q == 1 and pc.solver.knots == 0.01
    assert pc.solver.tol == 1e-12 and pc.solver.integrand == "plain"
    assert pc.problem.name == "monomial"


def test_vector_broadcasting():
    pc = parse_config(base(x0_tilde=[1, 2], m=0.5, K=0.1, domain={"lower": -5, "upper": [5, 6]}))
    np.testing.assert_array_equal(pc.problem.m, [0.5, 0.5])
    np.testing.assert_array_equal(pc.problem.K, np.full((2, 2), 0.1))
    np.testing.assert_array_equal(pc.problem.D[1], [5, 6])


def test_registry_defaults_track_parameters():
    pc = parse_config(base())
    other = pc.with_problem(T=1.0)
    assert other.problem.m[0] == pytest.approx(1.0)
    declared = parse_config(base(m=7.0)).with_problem(T=1.0)
    assert declared.problem.m[0] == 7.0


def test_monomial_bound_unavailable_for_negative_exponent():
    pc = parse_config(base(alpha=0.5, beta=0.0, f={"registry": "monomial", "k": -0.9}))
    assert pc.problem.m is None


def test_cosine_is_scalar():
    with pytest.raises(ConfigError):
        parse_config(base(x0_tilde=[1, 1], f={"registry": "cosine-2pi"}))


def test_with_solver_keeps_problem():
    pc = parse_config(base())
    changed = pc.with_solver(q=3)
    assert changed.solver.q == 3 and changed.problem is pc.problem
