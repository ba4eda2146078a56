"""Problem configuration files (YAML) and the built-in problem registry.

A config names alpha, beta, T and x0_tilde, a right-hand side and a solver
block. The right-hand side is a registry entry::

    f: {registry: monomial, k: 0.9}
    f: {registry: cosine-2pi}

or one expression per state component::

    f: ["cos(x1*4*pi*t)/(2*pi)"]

The solver block takes ``eps``, ``q``, ``tol``, ``max_iter``, ``integrand``
and exactly one knot source: ``h`` (uniform width), ``graded: {c, h_max}``
or ``knots`` (explicit breakpoints from eps to T).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable

import numpy as np
import yaml

from .expr import ExpressionError, compile_rhs, parse_expression, to_source
from .solver import ProblemSpec, SolverConfig
from .splines import GradedKnotParams, KnotCollection

__all__ = ["ConfigError", "ProblemConfig", "load_config", "parse_config", "REGISTRY", "registry_problem"]


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


@dataclass(frozen=True)
class RegistryEntry:
    build: Callable[..., Callable]
    params: tuple[str, ...]
    default_m: Callable[..., np.ndarray]
    default_K: Callable[..., np.ndarray]
    description: str


def _monomial(k: float, d: int):
    def f(t, x):
        return np.broadcast_to((np.asarray(t, dtype=float) ** k)[:, None], (np.size(t), d)).copy()

    return f


def _monomial_m(k, d, alpha, beta, T):
    g = alpha + beta - alpha * beta
    e = 1.0 - g + k
    if e < 0:
        return None  # t^(1-gamma+k) is unbounded near 0
    return np.full(d, T**e)


def _cosine(d: int):
    if d != 1:
        raise ConfigError("cosine-2pi is a scalar problem")

    def f(t, x):
        return np.cos(x * 4 * np.pi * np.asarray(t, dtype=float)[:, None]) / (2 * np.pi)

    return f


def _cosine_m(d, alpha, beta, T):
    g = alpha + beta - alpha * beta
    return np.array([T ** (1.0 - g) / (2 * np.pi)])


REGISTRY: dict[str, RegistryEntry] = {
    "monomial": RegistryEntry(
        build=lambda d, k: _monomial(k, d),
        params=("k",),
        default_m=lambda d, alpha, beta, T, k: _monomial_m(k, d, alpha, beta, T),
        default_K=lambda d, alpha, beta, T, **_: np.zeros((d, d)),
        description="f(t, x) = t^k in every component (x-independent)",
    ),
    "cosine-2pi": RegistryEntry(
        build=lambda d: _cosine(d),
        params=(),
        default_m=lambda d, alpha, beta, T: _cosine_m(d, alpha, beta, T),
        # |df/dx| = 2t |sin(4 pi t x)| <= 2T
        default_K=lambda d, alpha, beta, T: np.array([[2.0 * T]]),
        description="f(t, x) = cos(4 pi t x) / (2 pi)",
    ),
}


def registry_problem(name: str, alpha: float, beta: float, T: float, x0_tilde, **params) -> ProblemSpec:
    """A registry problem with its default m and K."""
    entry = REGISTRY[name]
    x0 = np.atleast_1d(np.asarray(x0_tilde, dtype=float))
    d = x0.size
    f = entry.build(d, **params)
    return ProblemSpec(
        f,
        alpha,
        beta,
        T,
        x0,
        m=entry.default_m(d, alpha, beta, T, **params),
        K=entry.default_K(d, alpha, beta, T, **params),
        name=name,
    )


@dataclass(frozen=True)
class ProblemConfig:
    """Parsed config: the problem, the solver settings and where the right-hand side came from."""

    problem: ProblemSpec
    solver: SolverConfig
    rhs_kind: str
    rhs_params: dict = field(default_factory=dict)
    rhs_source: tuple = ()
    m_declared: bool = False
    K_declared: bool = False
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def is_monomial(self) -> bool:
        return self.rhs_kind == "monomial"

    def with_problem(self, **changes) -> "ProblemConfig":
        """Rebuild with alpha/beta/T/x0_tilde replaced; registry m and K are recomputed unless declared."""
        raw = dict(self.raw)
        raw.update(changes)
        return parse_config(raw)

    def with_solver(self, **changes) -> "ProblemConfig":
        return replace(self, solver=replace(self.solver, **changes))


def _num(value, key: str) -> float:
    try:
        out = float(value)  # YAML 1.1 reads "1e-10" as a string
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must be a number, got {value!r}") from None
    if not math.isfinite(out):
        raise ConfigError(f"{key} must be finite")
    return out


def _vector(value, key: str, d: int) -> np.ndarray:
    out = np.array([_num(v, key) for v in (value if isinstance(value, list) else [value])])
    if out.size == 1 and d > 1:
        out = np.full(d, out[0])
    if out.size != d:
        raise ConfigError(f"{key} needs {d} entries, got {out.size}")
    return out


def _matrix(value, key: str, d: int) -> np.ndarray:
    if not isinstance(value, list):
        return np.full((d, d), _num(value, key))
    rows = value if value and isinstance(value[0], list) else [value]
    try:
        out = np.array([[_num(v, key) for v in row] for row in rows])
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from None
    if out.shape != (d, d):
        raise ConfigError(f"{key} must be {d}x{d}, got shape {out.shape}")
    return out


_TOP_KEYS = {"name", "alpha", "beta", "T", "x0_tilde", "f", "domain", "m", "K", "solver"}
_SOLVER_KEYS = {"eps", "q", "tol", "max_iter", "integrand", "h", "graded", "knots"}


def _knot_source(block: dict, eps: float, T: float):
    sources = [k for k in ("h", "graded", "knots") if k in block]
    if len(sources) > 1:
        raise ConfigError(f"solver block gives more than one knot source: {sources}")
    if not sources:
        return 0.01
    kind = sources[0]
    if kind == "h":
        h = _num(block["h"], "solver.h")
        if h <= 0:
            raise ConfigError("solver.h must be positive")
        return h
    if kind == "graded":
        g = block["graded"]
        if not isinstance(g, dict):
            raise ConfigError("solver.graded must be a mapping with c and h_max")
        unknown = set(g) - {"c", "h_max"}
        if unknown:
            raise ConfigError(f"unknown keys in solver.graded: {sorted(unknown)}")
        try:
            return GradedKnotParams(_num(g.get("c", 1.5), "graded.c"), _num(g.get("h_max", 0.01), "graded.h_max"), eps, T)
        except ValueError as exc:
            raise ConfigError(f"solver.graded: {exc}") from None
    try:
        return KnotCollection(np.array([_num(v, "solver.knots") for v in block["knots"]]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"solver.knots: {exc}") from None


def parse_config(data: dict) -> ProblemConfig:
    """Validate a config mapping and build the problem and solver settings."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    for key in ("alpha", "beta", "T", "x0_tilde", "f"):
        if key not in data:
            raise ConfigError(f"missing required key {key!r}")
    alpha, beta, T = (_num(data[k], k) for k in ("alpha", "beta", "T"))
    x0_raw = data["x0_tilde"]
    x0 = np.array([_num(v, "x0_tilde") for v in (x0_raw if isinstance(x0_raw, list) else [x0_raw])])
    d = x0.size

    spec_f = data["f"]
    params: dict[str, Any] = {}
    sources: tuple = ()
    if isinstance(spec_f, dict):
        name = spec_f.get("registry")
        if name not in REGISTRY:
            raise ConfigError(f"unknown registry problem {name!r}; choose from {sorted(REGISTRY)}")
        entry = REGISTRY[name]
        extra = set(spec_f) - {"registry", *entry.params}
        if extra:
            raise ConfigError(f"registry problem {name!r} takes {list(entry.params)}, got extra {sorted(extra)}")
        missing = [p for p in entry.params if p not in spec_f]
        if missing:
            raise ConfigError(f"registry problem {name!r} needs {missing}")
        params = {p: _num(spec_f[p], f"f.{p}") for p in entry.params}
        kind = name
        f = entry.build(d, **params)
    else:
        exprs = spec_f if isinstance(spec_f, list) else [spec_f]
        if len(exprs) != d:
            raise ConfigError(f"f needs one expression per component ({d}), got {len(exprs)}")
        try:
            asts = [parse_expression(str(e), dim=d) for e in exprs]
        except ExpressionError as exc:
            raise ConfigError(f"f: {exc}") from None
        kind = "expression"
        sources = tuple(to_source(a) for a in asts)
        f = compile_rhs(asts)

    try:
        probe = ProblemSpec(f, alpha, beta, T, x0)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    m = _vector(data["m"], "m", d) if "m" in data else None
    K = _matrix(data["K"], "K", d) if "K" in data else None
    if kind in REGISTRY:
        entry = REGISTRY[kind]
        if m is None:
            m = entry.default_m(d, alpha, beta, T, **params)
        if K is None:
            K = entry.default_K(d, alpha, beta, T, **params)
    D = None
    if "domain" in data and data["domain"] is not None:
        dom = data["domain"]
        if not isinstance(dom, dict) or set(dom) != {"lower", "upper"}:
            raise ConfigError("domain must be a mapping with lower and upper")
        D = (_vector(dom["lower"], "domain.lower", d), _vector(dom["upper"], "domain.upper", d))

    try:
        problem = replace(probe, m=m, K=K, D=D, name=str(data.get("name", kind)))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    block = data.get("solver") or {}
    if not isinstance(block, dict):
        raise ConfigError("solver must be a mapping")
    unknown = set(block) - _SOLVER_KEYS
    if unknown:
        raise ConfigError(f"unknown solver keys: {sorted(unknown)}")
    eps = _num(block.get("eps", 1e-10), "solver.eps")
    try:
        solver = SolverConfig(
            eps=eps,
            q=int(block.get("q", 1)),
            knots=_knot_source(block, eps, T),
            tol=_num(block.get("tol", 1e-12), "solver.tol"),
            max_iter=int(block.get("max_iter", 200)),
            integrand=str(block.get("integrand", "plain")),
        )
        if not eps < T:
            raise ValueError("solver.eps must be smaller than T")
        solver.resolve_knots(problem.gamma, T)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return ProblemConfig(problem, solver, kind, params, sources, "m" in data, "K" in data, dict(data))


def load_config(path: str | Path) -> ProblemConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from None
    return parse_config(data)
