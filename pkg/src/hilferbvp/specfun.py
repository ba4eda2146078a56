"""Gamma, beta and incomplete beta functions, and closed-form fractional
integrals of monomials.

All functions accept scalars or numpy arrays and broadcast. The incomplete
beta function is the *non-regularized* one,

    B_z(a, b) = int_0^z v^(a-1) (1 - v)^(b-1) dv,

which is the form the fractional integral formulas are written in. A
regularized variant is deliberately not exported.
"""

from __future__ import annotations

import numpy as np
from scipy import special

__all__ = [
    "DomainError",
    "gamma",
    "beta",
    "incomplete_beta",
    "frac_int_monomial_full",
    "frac_int_monomial_left",
    "frac_int_monomial_right",
    "frac_int_monomial_segment",
]

_CF_EPS = 1e-16
_CF_TINY = 1e-300
_CF_MAXIT = 500


class DomainError(ValueError):
    """Argument outside the domain of a special function or integral."""


def _scalar_or_array(x):
    x = np.asarray(x, dtype=float)
    return x.item() if x.ndim == 0 else x


def gamma(x):
    """Gamma function for positive real arguments."""
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise DomainError(f"gamma requires x > 0, got {x}")
    return _scalar_or_array(special.gamma(x))


def beta(a, b):
    """Complete beta function B(a, b) = Gamma(a) Gamma(b) / Gamma(a + b)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(~(a > 0)) or np.any(~(b > 0)):
        raise DomainError(f"beta requires a, b > 0, got a={a}, b={b}")
    return _scalar_or_array(np.exp(special.gammaln(a) + special.gammaln(b) - special.gammaln(a + b)))


def _betacf(a, b, x):
    """Continued fraction for the incomplete beta function (modified Lentz).

    Vectorized over broadcast arrays; iterates until every entry converged.
    """
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = np.ones_like(x)
    d = 1.0 - qab * x / qap
    d = np.where(np.abs(d) < _CF_TINY, _CF_TINY, d)
    d = 1.0 / d
    h = d.copy()
    for m in range(1, _CF_MAXIT + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < _CF_TINY, _CF_TINY, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < _CF_TINY, _CF_TINY, c)
        d = 1.0 / d
        h = h * d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < _CF_TINY, _CF_TINY, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < _CF_TINY, _CF_TINY, c)
        d = 1.0 / d
        delta = d * c
        h = h * delta
        if np.all(np.abs(delta - 1.0) < _CF_EPS):
            return h
    if np.all(np.abs(delta - 1.0) < 1e-13):
        return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def _incbeta_direct(z, a, b):
    # z^a (1-z)^b / a * cf, valid where the continued fraction converges fast
    front = np.exp(a * np.log(z) + b * np.log1p(-z)) / a
    return front * _betacf(a, b, z)


def incomplete_beta(z, a, b):
    """Non-regularized incomplete beta function B_z(a, b).

    Evaluated by continued fraction; for ``z`` beyond the convergence switch
    point the reflection ``B_z(a, b) = B(a, b) - B_{1-z}(b, a)`` is used.

    Args:
        z: upper limit in [0, 1].
        a, b: positive shape parameters.
    """
    z, a, b = np.broadcast_arrays(
        np.asarray(z, dtype=float), np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    )
    if np.any(~(a > 0)) or np.any(~(b > 0)):
        raise DomainError("incomplete_beta requires a, b > 0")
    if np.any(~((z >= 0) & (z <= 1))):
        raise DomainError(f"incomplete_beta requires 0 <= z <= 1, got {z}")

    out = np.zeros(z.shape, dtype=float)
    full = np.asarray(beta(a, b), dtype=float)
    one = z == 1.0
    out[one] = full[one]
    inner = (z > 0) & ~one
    if np.any(inner):
        zi, ai, bi = z[inner], a[inner], b[inner]
        flip = zi > (ai + 1.0) / (ai + bi + 2.0)
        res = np.empty_like(zi)
        keep = ~flip
        if np.any(keep):
            res[keep] = _incbeta_direct(zi[keep], ai[keep], bi[keep])
        if np.any(flip):
            res[flip] = full[inner][flip] - _incbeta_direct(1.0 - zi[flip], bi[flip], ai[flip])
        out[inner] = res
    return _scalar_or_array(out)


def _check_alpha_k(alpha, k):
    if np.any(~(np.asarray(alpha) > 0)):
        raise DomainError(f"fractional order must be positive, got {alpha}")
    if np.any(~(np.asarray(k) > -1)):
        raise DomainError(f"monomial exponent must exceed -1 (divergent integral), got {k}")


def frac_int_monomial_full(alpha, k, t):
    """Riemann-Liouville integral of ``s**k`` over [0, t]:
    Gamma(k+1) / Gamma(alpha+k+1) * t**(alpha+k)."""
    _check_alpha_k(alpha, k)
    alpha, k, t = (np.asarray(v, dtype=float) for v in (alpha, k, t))
    if np.any(~(t > 0)):
        raise DomainError("frac_int_monomial_full requires t > 0")
    logc = special.gammaln(k + 1.0) - special.gammaln(alpha + k + 1.0)
    return _scalar_or_array(np.exp(logc) * t ** (alpha + k))


def frac_int_monomial_left(alpha, k, b, t):
    """Integral of ``s**k`` over (0, b] with kernel (t-s)^(alpha-1)/Gamma(alpha), 0 < b <= t."""
    _check_alpha_k(alpha, k)
    alpha, k, b, t = (np.asarray(v, dtype=float) for v in (alpha, k, b, t))
    if np.any(~(b > 0)) or np.any(b > t):
        raise DomainError("left-local support requires 0 < b <= t")
    z = np.minimum(b / t, 1.0)
    return _scalar_or_array(t ** (alpha + k) / special.gamma(alpha) * incomplete_beta(z, k + 1.0, alpha))


def frac_int_monomial_right(alpha, k, b, t):
    """Integral of ``s**k`` over [b, t] with kernel (t-s)^(alpha-1)/Gamma(alpha), 0 <= b <= t."""
    _check_alpha_k(alpha, k)
    alpha, k, b, t = (np.asarray(v, dtype=float) for v in (alpha, k, b, t))
    if np.any(b < 0) or np.any(b > t) or np.any(~(t > 0)):
        raise DomainError("right-local support requires 0 <= b <= t, t > 0")
    z = np.clip(1.0 - b / t, 0.0, 1.0)
    return _scalar_or_array(t ** (alpha + k) / special.gamma(alpha) * incomplete_beta(z, alpha, k + 1.0))


def frac_int_monomial_segment(alpha, k, a, b, t):
    """Integral of ``s**k`` over [a, b] with kernel (t-s)^(alpha-1)/Gamma(alpha), 0 <= a <= b <= t.

    Uses whichever pair of local-support formulas keeps the incomplete beta
    arguments away from 1, so short segments near ``t`` do not cancel.
    """
    _check_alpha_k(alpha, k)
    alpha, k, a, b, t = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (alpha, k, a, b, t)))
    if np.any(a < 0) or np.any(a > b) or np.any(b > t) or np.any(~(t > 0)):
        raise DomainError("segment integral requires 0 <= a <= b <= t, t > 0")
    scale = t ** (alpha + k) / special.gamma(alpha)
    near_t = b > 0.5 * t
    # near t: right-local difference in 1 - s/t; otherwise left-local difference in s/t
    zr_a = np.clip(1.0 - a / t, 0.0, 1.0)
    zr_b = np.clip(1.0 - b / t, 0.0, 1.0)
    right = incomplete_beta(np.where(near_t, zr_a, 0.0), alpha, k + 1.0) - incomplete_beta(
        np.where(near_t, zr_b, 0.0), alpha, k + 1.0
    )
    left = incomplete_beta(np.where(near_t, 0.0, b / t), k + 1.0, alpha) - incomplete_beta(
        np.where(near_t, 0.0, a / t), k + 1.0, alpha
    )
    out = scale * np.where(near_t, right, left)
    return _scalar_or_array(np.where(a == b, 0.0, out))
