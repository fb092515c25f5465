"""Exponential integral E1, its inverse, and a Bessel-K wrapper.

E1(x) = int_x^inf e^{-t}/t dt for x > 0.  Small arguments use the
convergent power series

    E1(x) = -euler_gamma - log(x) - sum_{k>=1} (-x)^k / (k k!),

large arguments use the continued fraction

    E1(x) = e^{-x} / (x + 1 - 1/(x + 3 - 4/(x + 5 - ...)))

evaluated with the modified Lentz algorithm.  Both branches are
vectorised over numpy arrays.
"""

import numpy as np
from scipy import special as _sp

from .errors import DomainError, NumericalError

EULER_GAMMA = 0.57721566490153286060651209008240243
_SERIES_TERMS = 30
_CF_MAX_ITER = 500
_TINY = 1e-300


def _series(x):
    term = np.ones_like(x)
    acc = np.zeros_like(x)
    for k in range(1, _SERIES_TERMS + 1):
        term = term * (-x) / k
        acc += term / k
    return -EULER_GAMMA - np.log(x) - acc


def _continued_fraction(x):
    out = np.empty_like(x)
    # working set shrinks as entries converge
    live = np.arange(x.size)
    b = x + 1.0
    c = np.full_like(x, 1.0 / _TINY)
    d = 1.0 / b
    h = d.copy()
    for i in range(1, _CF_MAX_ITER + 1):
        an = -float(i * i)
        b = b + 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h = h * delta
        done = np.abs(delta - 1.0) <= 1e-16
        if done.any():
            out[live[done]] = h[done]
            keep = ~done
            live, b, c, d, h = live[keep], b[keep], c[keep], d[keep], h[keep]
            if live.size == 0:
                break
    else:
        raise NumericalError("E1 continued fraction did not converge")
    return out * np.exp(-x)


def exp1(x):
    """Exponential integral E1 for real x > 0 (scalar or array).

    Returns +inf at x = 0 is not allowed; x <= 0 raises DomainError.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(arr) & ~np.isposinf(arr)) or np.any(arr <= 0):
        raise DomainError("E1 requires x > 0")
    flat = np.atleast_1d(arr).ravel()
    out = np.empty_like(flat)
    small = flat <= 1.0
    if small.any():
        out[small] = _series(flat[small])
    big = ~small
    if big.any():
        xb = flat[big]
        res = np.zeros_like(xb)
        finite = xb < 745.0
        if finite.any():
            res[finite] = _continued_fraction(xb[finite])
        out[big] = res
    out = out.reshape(np.shape(arr))
    return float(out) if np.ndim(arr) == 0 else out


def exp1_inv(v, rtol=1e-10):
    """Inverse of E1 on (0, inf): returns x > 0 with E1(x) = v.

    Newton iteration on log E1(x) - log v, safeguarded by bisection on a
    maintained bracket.  For v above roughly 745 the root underflows and
    0.0 is returned, which is the limit of the inverse.  Arguments above
    40 use the closed form exp(-v - euler_gamma), exact to double precision.
    """
    arr = np.asarray(v, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0):
        raise DomainError("E1 inverse requires a finite v > 0")
    flat = np.atleast_1d(arr).ravel().copy()
    logv = np.log(flat)
    # starting points from the two asymptotic regimes
    x = np.where(
        flat > 1.0,
        np.exp(-flat - EULER_GAMMA),
        np.maximum(-logv - np.log(np.maximum(-logv, 1.0)), 1e-3),
    )
    # for v > 40 the root is below 1e-17 and E1(x) = -gamma - log(x) + x
    # holds to double precision, so the starting point is already exact
    under = flat > 40.0
    x = np.where(under, 1.0, x)
    lo = np.zeros_like(x)
    hi = np.full_like(x, np.inf)
    converged = under.copy()
    for _ in range(200):
        work = ~converged
        if not work.any():
            break
        xw = x[work]
        e = exp1(xw)
        f = np.log(e) - logv[work]
        # E1 is decreasing: f > 0 means x is too small
        lo_w = np.where(f > 0, np.maximum(lo[work], xw), lo[work])
        hi_w = np.where(f < 0, np.minimum(hi[work], xw), hi[work])
        dlog = -np.exp(-xw) / (xw * e)
        step = f / dlog
        new = xw - step
        bad = ~np.isfinite(new) | (new <= lo_w) | (new >= hi_w)
        bis = np.where(np.isfinite(hi_w), np.sqrt(np.maximum(lo_w, 1e-320) * hi_w), 2.0 * xw)
        new = np.where(bad, bis, new)
        done = np.abs(new - xw) <= 1e-15 * new
        x[work] = new
        lo[work] = lo_w
        hi[work] = hi_w
        converged[work] = done
    else:
        raise NumericalError("E1 inverse did not converge")
    x = np.where(under, np.exp(-flat - EULER_GAMMA), x)
    check = ~under
    if check.any():
        err = np.abs(exp1(x[check]) / flat[check] - 1.0)
        if np.any(err > rtol):
            raise NumericalError("E1 inverse residual above tolerance")
    x = x.reshape(np.shape(arr))
    return float(x) if np.ndim(arr) == 0 else x


def exp1_difference(w, ratio):
    """E1(ratio * w) - E1(w) for w >= 0, ratio > 0, stable as w -> 0.

    At w = 0 the value is the limit -log(ratio).
    """
    w = np.asarray(w, dtype=float)
    ratio = np.broadcast_to(np.asarray(ratio, dtype=float), w.shape)
    out = np.empty(np.broadcast(w, ratio).shape)
    small = (w <= 1.0) & (ratio * w <= 1.0)
    if small.any():
        ws, rs = w[small], ratio[small]
        acc = np.zeros_like(ws)
        term = np.ones_like(ws)
        for k in range(1, _SERIES_TERMS + 1):
            term = term * (-ws) / k
            acc += term * (rs**k - 1.0) / k
        out[small] = -np.log(rs) - acc
    big = ~small
    if big.any():
        out[big] = exp1(ratio[big] * w[big]) - exp1(w[big])
    return out if out.ndim else float(out)


def bessel_kv_scaled(order, x):
    """Exponentially scaled modified Bessel function K_order(x) * e^x.

    Thin wrapper over scipy.special.kve so callers can form
    K(x) e^{-x} products without overflow.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("Bessel K requires x > 0")
    return _sp.kve(order, x)
