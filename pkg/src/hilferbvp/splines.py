"""Knot collections and Bernstein spline operators on weighted functions.

A :class:`WeightedSpline` stores, per knot interval and per component, the
q+1 Bernstein coefficients of the weighted part ``w(t) = t**(1-gamma) x(t)``.
For the Bernstein operator the coefficients are just samples of ``w`` at
the equispaced nodes, so fitting is sampling and evaluation is a convex
combination.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import comb

from .specfun import DomainError

__all__ = [
    "KnotCollection",
    "GradedKnotParams",
    "WeightedSpline",
    "bernstein_basis",
    "bernstein_eval",
    "bernstein_fit",
    "spline_project",
    "graded_knots",
    "uniform_knots",
    "weighted_eval",
]

# widths below this fraction of T are merged into the previous interval
_MERGE_FRACTION = 1e-12


@dataclass(frozen=True)
class KnotCollection:
    """Disjoint intervals [t_0, t_1), ..., [t_k, t_{k+1}] covering [t_0, T].

    ``breakpoints`` must be strictly increasing. The left end is normally the
    shift eps > 0; a left end of exactly 0 is accepted for the unshifted map.
    """

    breakpoints: np.ndarray

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float).copy()
        if bp.ndim != 1 or bp.size < 2:
            raise ValueError("a knot collection needs at least two breakpoints")
        if not np.all(np.isfinite(bp)):
            raise ValueError("breakpoints must be finite")
        if bp[0] < 0:
            raise ValueError("knot collection must start at a nonnegative time")
        if np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        bp.setflags(write=False)
        object.__setattr__(self, "breakpoints", bp)

    @property
    def eps(self) -> float:
        return float(self.breakpoints[0])

    @property
    def T(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def left(self) -> np.ndarray:
        return self.breakpoints[:-1]

    @property
    def right(self) -> np.ndarray:
        return self.breakpoints[1:]

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    def __len__(self) -> int:
        return self.breakpoints.size - 1

    def locate(self, t) -> np.ndarray:
        """Index of the interval containing each ``t`` (half-open, last closed)."""
        t = np.asarray(t, dtype=float)
        if np.any(t < self.eps) or np.any(t > self.T):
            raise DomainError(f"t outside [{self.eps}, {self.T}]")
        idx = np.searchsorted(self.breakpoints, t, side="right") - 1
        return np.minimum(idx, len(self) - 1)

    def nodes(self, q: int) -> np.ndarray:
        """Bernstein nodes a + j h / q, shape (intervals, q+1)."""
        j = np.arange(q + 1) / q
        nodes = self.left[:, None] + self.widths[:, None] * j[None, :]
        nodes[:, -1] = self.right
        return nodes

    def __eq__(self, other):
        return isinstance(other, KnotCollection) and np.array_equal(self.breakpoints, other.breakpoints)

    def __hash__(self):
        return hash(self.breakpoints.tobytes())


def uniform_knots(eps: float, T: float, h: float) -> KnotCollection:
    """Knots of width ``h`` starting at ``eps``; the last one is clipped to ``T``."""
    if not (h > 0 and T > eps >= 0):
        raise ValueError("uniform knots need h > 0 and 0 <= eps < T")
    n = max(1, int(math.ceil((T - eps) / h - 1e-9)))
    bp = eps + h * np.arange(n + 1)
    bp[-1] = T
    return KnotCollection(_merge_tail(bp, T))


@dataclass(frozen=True)
class GradedKnotParams:
    """Parameters of the graded knot rule h_i = min(h_max, c^(1/(1-gamma)-1) t_i)."""

    c: float
    h_max: float
    eps: float
    T: float

    def __post_init__(self):
        if not self.c > 1:
            raise ValueError(f"grading bound c must exceed 1, got {self.c}")
        if not self.h_max > 0:
            raise ValueError("h_max must be positive")
        if not 0 < self.eps < self.T:
            raise ValueError("need 0 < eps < T")


def _merge_tail(bp: np.ndarray, T: float) -> np.ndarray:
    bp = np.asarray(bp, dtype=float)
    if bp.size > 2 and bp[-1] - bp[-2] < _MERGE_FRACTION * T:
        bp = np.delete(bp, -2)
    return bp


def graded_knots(params: GradedKnotParams, gamma_exp: float) -> KnotCollection:
    """Graded knots keeping (t_{i+1} / t_i)^(1-gamma) <= c.

    Widths follow h_i = min(h_max, c^(1/(1-gamma)-1) t_i) for gamma < 1 and
    h_max for gamma = 1. For small gamma that growth factor alone can exceed
    the ratio bound, so the width is additionally capped at
    (c^(1/(1-gamma)) - 1) t_i; for gamma >= 1/2 with c >= 3/2 the cap never binds.
    """
    if not 0 < gamma_exp <= 1:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma_exp}")
    p = params
    bp = [p.eps]
    t = p.eps
    if gamma_exp < 1:
        # for gamma near 1 these powers overflow; h_max then governs anyway
        log_c = math.log(p.c) / (1.0 - gamma_exp)
        growth = math.exp(min(log_c - math.log(p.c), 700.0))
        cap = math.expm1(min(log_c, 700.0))
        factor = min(growth, cap)
    while t < p.T:
        h = p.h_max if gamma_exp == 1 else min(p.h_max, factor * t)
        t = t + h
        bp.append(min(t, p.T))
    return KnotCollection(_merge_tail(np.array(bp), p.T))


@lru_cache(maxsize=64)
def _binomials(q: int) -> np.ndarray:
    return comb(q, np.arange(q + 1), exact=False)


def bernstein_basis(u, q: int) -> np.ndarray:
    """Bernstein basis C(q,j) u^j (1-u)^(q-j) for u in [0, 1]; shape u.shape + (q+1,)."""
    u = np.asarray(u, dtype=float)[..., None]
    j = np.arange(q + 1)
    return _binomials(q) * u**j * (1.0 - u) ** (q - j)


def bernstein_eval(node_values, interval, t):
    """Evaluate the Bernstein polynomial with the given node values at ``t``."""
    v = np.asarray(node_values, dtype=float)
    a, b = (float(x) for x in interval)
    if not b > a:
        raise DomainError(f"degenerate interval [{a}, {b}]")
    q = v.shape[0] - 1
    if q < 1:
        raise ValueError("Bernstein order must be at least 1")
    t = np.asarray(t, dtype=float)
    if np.any(t < a) or np.any(t > b):
        raise DomainError(f"t outside [{a}, {b}]")
    u = (t - a) / (b - a)
    out = np.tensordot(bernstein_basis(u, q), v, axes=([-1], [0]))
    return out.item() if out.ndim == 0 else out


def bernstein_fit(f: Callable, q: int, interval=(0.0, 1.0)) -> np.ndarray:
    """Node values f(a + j (b-a)/q), j = 0..q, i.e. the Bernstein coefficients of B^q f."""
    if q < 1:
        raise ValueError("Bernstein order must be at least 1")
    a, b = (float(x) for x in interval)
    nodes = a + (b - a) * np.arange(q + 1) / q
    nodes[-1] = b
    return np.array([f(x) for x in nodes], dtype=float)


@dataclass(frozen=True, eq=False)
class WeightedSpline:
    """Piecewise Bernstein form of the weighted part w = t^(1-gamma) x.

    Attributes:
        knots: the knot collection.
        gamma_exp: the weight exponent gamma; x(t) = t^(gamma-1) w(t).
        q: Bernstein order.
        coeffs: node values, shape (intervals, q+1, d).
    """

    knots: KnotCollection
    gamma_exp: float
    q: int
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim == 2:
            c = c[:, :, None]
        if c.ndim != 3 or c.shape[0] != len(self.knots) or c.shape[1] != self.q + 1:
            raise ValueError(
                f"coefficients must have shape ({len(self.knots)}, {self.q + 1}, d), got {np.shape(self.coeffs)}"
            )
        if self.q < 1:
            raise ValueError("Bernstein order must be at least 1")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def d(self) -> int:
        return self.coeffs.shape[2]

    def nodes(self) -> np.ndarray:
        return self.knots.nodes(self.q)

    def weighted(self, t) -> np.ndarray:
        """Weighted part w(t); returns shape t.shape + (d,)."""
        t = np.asarray(t, dtype=float)
        idx = self.knots.locate(t)
        a = self.knots.left[idx]
        h = self.knots.widths[idx]
        u = np.clip((t - a) / h, 0.0, 1.0)
        basis = bernstein_basis(u, self.q)
        return np.einsum("...j,...jc->...c", basis, self.coeffs[idx])

    def __call__(self, t) -> np.ndarray:
        """Solution value x(t) = t^(gamma-1) w(t)."""
        t = np.asarray(t, dtype=float)
        if self.gamma_exp < 1 and np.any(t <= 0):
            raise DomainError("x(t) is singular at t = 0")
        return self.weighted(t) * (t ** (self.gamma_exp - 1.0))[..., None]

    def with_coeffs(self, coeffs) -> "WeightedSpline":
        return WeightedSpline(self.knots, self.gamma_exp, self.q, coeffs)

    def to_dict(self) -> dict:
        return {
            "format": "weighted-bernstein-spline",
            "version": 1,
            "gamma": self.gamma_exp,
            "q": self.q,
            "d": self.d,
            "breakpoints": self.knots.breakpoints.tolist(),
            "coeffs": self.coeffs.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "WeightedSpline":
        if data.get("format") != "weighted-bernstein-spline":
            raise ValueError("not a weighted spline dump")
        return cls(KnotCollection(np.array(data["breakpoints"])), float(data["gamma"]), int(data["q"]),
                   np.array(data["coeffs"], dtype=float))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "WeightedSpline":
        return cls.from_dict(json.loads(text))

    def to_csv_rows(self) -> list[list]:
        """Rows: interval, t_left, t_right, node index, node time, coefficient per component."""
        rows = []
        nodes = self.nodes()
        for i in range(len(self.knots)):
            for j in range(self.q + 1):
                rows.append([i, self.knots.left[i], self.knots.right[i], j, nodes[i, j], *self.coeffs[i, j]])
        return rows


def weighted_eval(ws: WeightedSpline, t) -> np.ndarray:
    """Solution value x(t) = t^(gamma-1) w(t) of a weighted spline."""
    return ws(t)


def spline_project(w: Callable, knots: KnotCollection, q: int, gamma_exp: float = 1.0) -> WeightedSpline:
    """Bernstein spline projection S^q w, stored as node samples of ``w``.

    ``w`` maps an array of times to values of shape (n,) or (n, d).
    """
    nodes = knots.nodes(q)
    vals = np.asarray(w(nodes.ravel()), dtype=float)
    vals = vals.reshape(nodes.shape + (-1,))
    return WeightedSpline(knots, gamma_exp, q, vals)
