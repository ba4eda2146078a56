"""Riemann-Liouville integration of weighted Bernstein splines and the
iteration maps built on it.

A weighted spline with node values ``v`` represents y(s) = s^(gamma-1) w(s),
w piecewise Bernstein. Its fractional integral is linear in ``v``:

    I^mu y(t) = sum_{i,j} W[t, i, j] v[i, j],
    W[t, i, j] = 1/Gamma(mu) int_{A_i, s<t} (t-s)^(mu-1) s^(gamma-1) b_j(u_i(s)) ds.

Each weight is computed in closed form with incomplete beta functions after
expanding b_j in a *local* monomial basis: powers of (t-s)/h for segments at
most one width away from ``t``, powers of s/h for segments at most one width
away from 0. Both expansions stay well conditioned because the expansion
centre is within two widths of the segment. The remaining segments are at
least one width away from both singular points, where the integrand is
analytic and Gauss-Legendre reaches machine precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import gammaln, roots_jacobi

from .specfun import DomainError
from .splines import KnotCollection, WeightedSpline, bernstein_basis

__all__ = [
    "MapParams",
    "SplineMap",
    "IterateEscapedDomain",
    "rl_weights",
    "frac_int_weighted_spline",
    "apply_F",
    "apply_F_eps",
    "apply_spline_F",
]

# dense operator matrices above this many entries are recomputed per use
DENSE_LIMIT = 12_000_000
_CHUNK_ELEMENTS = 3_000_000
INTEGRAND_MODES = ("weighted", "plain")


class IterateEscapedDomain(RuntimeError):
    """The iterate (or a sample of f) left the admissible domain."""

    def __init__(self, message: str, t=None, x=None):
        super().__init__(message)
        self.t = t
        self.x = x


@dataclass(frozen=True)
class MapParams:
    """Order alpha, type beta, horizon T and shift eps of the iteration map."""

    alpha: float
    beta: float
    T: float
    eps: float = 0.0

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError(f"order alpha must lie in (0, 1), got {self.alpha}")
        if not 0 <= self.beta <= 1:
            raise ValueError(f"type beta must lie in [0, 1], got {self.beta}")
        if not self.T > 0:
            raise ValueError("horizon T must be positive")
        if not 0 <= self.eps < self.T:
            raise ValueError("shift eps must satisfy 0 <= eps < T")

    @property
    def gamma(self) -> float:
        return self.alpha + self.beta - self.alpha * self.beta

    @property
    def zeta(self) -> float:
        return 1.0 - self.gamma + self.alpha

    @property
    def boundary_factor(self) -> float:
        """Gamma(zeta+1) / (Gamma(alpha+1) T^zeta), the prefactor of t^alpha."""
        z, a = self.zeta, self.alpha
        return math.exp(gammaln(z + 1) - gammaln(a + 1)) / self.T**z


@lru_cache(maxsize=16)
def _gauss_legendre(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=64)
def _gauss_jacobi(n: int, exponent: float):
    """Nodes on [0, 1] and weights for int_0^1 (1-x)^exponent g(x) dx."""
    x, w = roots_jacobi(n, exponent, 0.0)
    return 0.5 * (x + 1.0), w * 0.5 ** (exponent + 1.0)


def _n_nodes(q: int) -> int:
    # pieces sit at least one length away from singularities, so the Bernstein
    # ellipse parameter is >= 3 + 2 sqrt(2); this many nodes reach round-off
    return q // 2 + 12


def rl_weights(knots: KnotCollection, q: int, gamma_exp: float, mu: float, t, lower: float | None = None) -> np.ndarray:
    """Weights W[m, i, j] of I^mu (s^(gamma-1) b_{ij}) at t[m], integrating from ``lower``.

    ``lower`` defaults to the left end of the knots. Returns shape (len(t), intervals, q+1).
    """
    if not mu > 0:
        raise DomainError(f"fractional order must be positive, got {mu}")
    t = np.atleast_1d(np.asarray(t, dtype=float))
    lower = knots.eps if lower is None else float(lower)
    if lower < knots.eps:
        raise DomainError("lower limit precedes the first knot")
    if np.any(t < lower) or np.any(t > knots.T * (1 + 1e-14)):
        raise DomainError("evaluation point outside [lower, T]")
    n_int = len(knots)
    out = np.empty((t.size, n_int, q + 1))
    per_row = max(1, _CHUNK_ELEMENTS // (n_int * (_n_nodes(q) + q)))
    for start in range(0, t.size, per_row):
        sl = slice(start, start + per_row)
        out[sl] = _weights_block(knots, q, gamma_exp, mu, t[sl], lower)
    return out


def _split_left(lo, hi):
    """Pieces of [lo, hi] graded toward the singular point 0 < lo."""
    owners, plo, phi = [], [], []
    idx = np.arange(lo.size)
    while idx.size:
        done = lo >= hi - lo
        owners.append(idx[done])
        plo.append(lo[done])
        phi.append(hi[done])
        keep = ~done
        idx, lo, hi = idx[keep], lo[keep], hi[keep]
        owners.append(idx)
        plo.append(lo.copy())
        phi.append(2.0 * lo)
        lo = 2.0 * lo
    return np.concatenate(owners), np.concatenate(plo), np.concatenate(phi)


def _weights_block(knots, q, gamma_exp, mu, t, lower):
    n_int = len(knots)
    lo_all = np.broadcast_to(np.maximum(knots.left, lower)[None, :], (t.size, n_int))
    hi_all = np.minimum(knots.right[None, :], t[:, None])
    m_idx, i_idx = np.nonzero(hi_all > lo_all)
    lo, hi = lo_all[m_idx, i_idx], hi_all[m_idx, i_idx]
    tp = t[m_idx]
    length = hi - lo
    right_sing = mu != 1.0
    left_sing = gamma_exp != 1.0
    r_close = right_sing & (tp - hi < length)
    l_close = left_sing & (lo < length)

    # a piece close to both singular points is halved so each half sees only one
    both = r_close & l_close
    owner = np.concatenate([np.nonzero(~both)[0], np.nonzero(both)[0], np.nonzero(both)[0]])
    mid = 0.5 * (lo[both] + hi[both])
    plo = np.concatenate([lo[~both], lo[both], mid])
    phi = np.concatenate([hi[~both], mid, hi[both]])
    pt = tp[owner]
    plen = phi - plo
    r_close = right_sing & (pt - phi < plen)
    l_close = left_sing & (plo < plen)
    # each half sits exactly one length from the other singular point; pin it so
    # roundoff cannot grade the left half toward t and leave s = 0 unresolved
    n_keep, n_both = int(np.count_nonzero(~both)), int(np.count_nonzero(both))
    r_close[n_keep:n_keep + n_both] = False
    l_close[n_keep + n_both:] = False

    pieces = {"gl": [], "gjr": [], "gjl": []}
    plain = ~r_close & ~l_close
    pieces["gl"].append((owner[plain], plo[plain], phi[plain]))
    touch_r = r_close & (pt - phi <= 1e-14 * plen)
    pieces["gjr"].append((owner[touch_r], plo[touch_r], phi[touch_r]))
    touch_l = l_close & (plo <= 1e-14 * plen)
    pieces["gjl"].append((owner[touch_l], plo[touch_l], phi[touch_l]))
    sel = r_close & ~touch_r
    if np.any(sel):
        o, a, b = _split_right(plo[sel], phi[sel], pt[sel])
        pieces["gl"].append((owner[sel][o], a, b))
    sel = l_close & ~touch_l
    if np.any(sel):
        o, a, b = _split_left(plo[sel], phi[sel])
        pieces["gl"].append((owner[sel][o], a, b))

    n = _n_nodes(q)
    flat = np.zeros((m_idx.size, q + 1))
    gm1 = gamma_exp - 1.0
    for kind, parts in pieces.items():
        own = np.concatenate([p[0] for p in parts]).astype(int)
        if own.size == 0:
            continue
        a = np.concatenate([p[1] for p in parts])
        b = np.concatenate([p[2] for p in parts])
        L = (b - a)[:, None]
        tt = tp[own][:, None]
        if kind == "gl":
            x, w = _gauss_legendre(n)
            s = a[:, None] + L * x
            wt = w * L * (tt - s) ** (mu - 1.0) * s**gm1
        elif kind == "gjr":
            # singular factor (t - s)^(mu-1) with t at the right end
            x, w = _gauss_jacobi(n, mu - 1.0)
            s = a[:, None] + L * x
            wt = w * L**mu * s**gm1
        else:
            x, w = _gauss_jacobi(n, gm1)
            s = b[:, None] - L * x
            wt = w * L**gamma_exp * (tt - s) ** (mu - 1.0)
        seg = i_idx[own]
        contrib = np.empty((own.size, q + 1))
        # pieces spanning a whole knot interval share one basis table
        whole = (a == knots.left[seg]) & (b == knots.right[seg]) if kind == "gl" else np.zeros(own.size, bool)
        if np.any(whole):
            contrib[whole] = wt[whole] @ bernstein_basis(x, q)
        part = ~whole
        if np.any(part):
            u = np.clip((s[part] - knots.left[seg[part]][:, None]) / knots.widths[seg[part]][:, None], 0.0, 1.0)
            contrib[part] = np.einsum("pk,pkj->pj", wt[part], bernstein_basis(u, q))
        np.add.at(flat, own, contrib)

    W = np.zeros((t.size, n_int, q + 1))
    W[m_idx, i_idx] = flat * math.exp(-gammaln(mu))
    return W


def _split_right(lo, hi, t):
    """Pieces of [lo, hi] graded toward the singular point t > hi; each piece
    lies at least its own length away from t."""
    owners, plo, phi = [], [], []
    idx = np.arange(lo.size)
    while idx.size:
        gap = t - hi
        done = gap >= hi - lo
        owners.append(idx[done])
        plo.append(lo[done])
        phi.append(hi[done])
        keep = ~done
        idx, lo, hi, gap, t = idx[keep], lo[keep], hi[keep], gap[keep], t[keep]
        owners.append(idx)
        plo.append(hi - gap)
        phi.append(hi.copy())
        hi = hi - gap
    return np.concatenate(owners), np.concatenate(plo), np.concatenate(phi)


def frac_int_weighted_spline(ws: WeightedSpline, order: float, a: float, t) -> np.ndarray:
    """Closed-form I_a^t (order) of y(s) = s^(gamma-1) w(s); shape t.shape + (d,)."""
    if not order > 0:
        raise DomainError(f"fractional order must be positive, got {order}")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < a):
        raise DomainError("lower limit exceeds evaluation point")
    W = rl_weights(ws.knots, ws.q, ws.gamma_exp, order, t_arr.ravel(), lower=a)
    out = np.einsum("mij,ijc->mc", W, ws.coeffs)
    return out.reshape(t_arr.shape + (ws.d,))


def _apply_map(y: WeightedSpline, p: MapParams, t) -> np.ndarray:
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= p.eps) or np.any(t_arr > p.T):
        raise DomainError(f"map evaluated outside ({p.eps}, {p.T}]")
    if not math.isclose(y.knots.T, p.T):
        raise ValueError("spline horizon does not match map horizon")
    if not math.isclose(y.gamma_exp, p.gamma, abs_tol=1e-15):
        raise ValueError("spline weight exponent does not match gamma")
    local = frac_int_weighted_spline(y, p.alpha, p.eps, t_arr)
    tail = frac_int_weighted_spline(y, p.zeta, p.eps, p.T)
    return local - p.boundary_factor * (t_arr**p.alpha)[..., None] * tail


def apply_F(y: WeightedSpline, p: MapParams, t) -> np.ndarray:
    """Unshifted map F y(t) = I_0^t (alpha) y - Gamma(zeta+1) t^alpha / (Gamma(alpha+1) T^zeta) I_0^T (zeta) y.

    The spline must be defined from 0, i.e. its knots start at 0.
    """
    if p.eps != 0:
        raise ValueError("apply_F is the unshifted map; use apply_F_eps for eps > 0")
    if y.knots.eps != 0:
        raise DomainError("the unshifted map needs a spline defined from t = 0")
    return _apply_map(y, p, t)


def apply_F_eps(y: WeightedSpline, p: MapParams, t) -> np.ndarray:
    """Shifted map F_eps: both fractional integrals start at eps."""
    if not p.eps > 0:
        raise ValueError("apply_F_eps needs eps > 0")
    if y.knots.eps > p.eps:
        raise DomainError("spline does not cover [eps, T]")
    return _apply_map(y, p, t)


class SplineMap:
    """The spline iteration map on a fixed knot collection and order.

    Maps weighted node values of an integrand y to weighted node values of
    t^(1-gamma) F_eps y, and evaluates the perturbation -Gamma(zeta+1) T^-zeta I^zeta y(T).
    Operator weights are built once and reused across iterations when they
    fit in memory.

    ``integrand`` selects how the integrand is projected before integration:
    "weighted" interpolates s^(1-gamma) y(s), "plain" interpolates y itself.
    """

    def __init__(self, knots: KnotCollection, q: int, params: MapParams, dense_limit: int = DENSE_LIMIT,
                 integrand: str = "weighted"):
        if integrand not in INTEGRAND_MODES:
            raise ValueError(f"integrand projection must be one of {INTEGRAND_MODES}, got {integrand!r}")
        if not math.isclose(knots.T, params.T):
            raise ValueError("knots must end at the map horizon")
        if not math.isclose(knots.eps, params.eps):
            raise ValueError("knots must start at the map shift eps")
        self.knots = knots
        self.q = q
        self.params = params
        self.nodes = knots.nodes(q)
        self._t = self.nodes.ravel()
        g = params.gamma
        self.integrand_mode = integrand
        # weight exponent of the integrand spline: y = s^(ig-1) * (Bernstein piece)
        self._ig = g if integrand == "weighted" else 1.0
        self._tail = rl_weights(knots, q, self._ig, params.zeta, [params.T])[0]
        self._dense = None
        size = self._t.size
        if size * size <= dense_limit:
            self._dense = rl_weights(knots, q, self._ig, params.alpha, self._t).reshape(size, -1)
        self._weight = self._t ** (1.0 - g)
        self._sample_weight = self._t ** (1.0 - self._ig)
        self._bfac = params.boundary_factor * self._t**params.alpha

    @property
    def n_nodes(self) -> int:
        return self._t.size

    def integrate(self, v: np.ndarray) -> np.ndarray:
        """I_eps^t (alpha) of the integrand at every node; shape (nodes, d)."""
        flat = v.reshape(len(self.knots) * (self.q + 1), -1)
        if self._dense is not None:
            return self._dense @ flat
        out = np.empty((self._t.size, flat.shape[1]))
        rows = max(1, DENSE_LIMIT // (4 * flat.shape[0]))
        for start in range(0, self._t.size, rows):
            sl = slice(start, start + rows)
            w = rl_weights(self.knots, self.q, self._ig, self.params.alpha, self._t[sl]).reshape(-1, flat.shape[0])
            out[sl] = w @ flat
        return out

    def tail_integral(self, v: np.ndarray) -> np.ndarray:
        """I_eps^T (zeta) of the integrand at T; shape (d,)."""
        return np.einsum("ij,ijc->c", self._tail, v)

    def delta_T(self, v: np.ndarray) -> np.ndarray:
        p = self.params
        return -math.exp(gammaln(p.zeta + 1)) * p.T ** (-p.zeta) * self.tail_integral(v)

    def apply(self, v: np.ndarray) -> np.ndarray:
        """Weighted node values of t^(1-gamma) F_eps y for integrand node values ``v``."""
        v = np.asarray(v, dtype=float)
        local = self.integrate(v)
        tail = self.tail_integral(v)
        out = self._weight[:, None] * (local - self._bfac[:, None] * tail[None, :])
        return out.reshape(v.shape)

    def sample_integrand(self, f: Callable, x_nodes: np.ndarray) -> np.ndarray:
        """Integrand node values: s^(1-gamma) f(s, x(s)), or f(s, x(s)) in "plain" mode.

        ``x_nodes`` has shape (intervals, q+1, d). Raises IterateEscapedDomain
        on a non-finite sample.
        """
        d = x_nodes.shape[-1]
        flat_x = x_nodes.reshape(-1, d)
        vals = np.asarray(f(self._t, flat_x), dtype=float).reshape(-1, d)
        bad = ~np.all(np.isfinite(vals), axis=1)
        if np.any(bad):
            k = int(np.argmax(bad))
            raise IterateEscapedDomain(
                f"f is not finite at t={self._t[k]!r}, x={flat_x[k].tolist()}", t=self._t[k], x=flat_x[k]
            )
        return (self._sample_weight[:, None] * vals).reshape(x_nodes.shape)


def apply_spline_F(y_source: Callable, knots: KnotCollection, q: int, p: MapParams,
                   integrand: str = "weighted") -> WeightedSpline:
    """Spline map S^q (t^(1-gamma) F_eps y) for an integrand given as a function.

    ``y_source(t)`` returns the (unweighted) integrand values, shape (n,) or
    (n, d). The integrand is first projected to its own spline and then
    integrated exactly.
    """
    smap = SplineMap(knots, q, p, integrand=integrand)
    vals = np.asarray(y_source(smap._t), dtype=float).reshape(smap._t.size, -1)
    if not np.all(np.isfinite(vals)):
        k = int(np.argmax(~np.all(np.isfinite(vals), axis=1)))
        raise IterateEscapedDomain(f"integrand not finite at t={smap._t[k]!r}", t=smap._t[k])
    v = (smap._sample_weight[:, None] * vals).reshape(smap.nodes.shape + (-1,))
    return WeightedSpline(knots, p.gamma, q, smap.apply(v))
