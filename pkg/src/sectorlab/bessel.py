"""Bessel functions of the first kind and their zeros.

``J_nu(x)`` for real ``nu >= 0`` and ``x >= 0`` is evaluated by

* the ascending power series when ``x^2/4 <= nu + 1`` or ``x < 2``;
* the Hankel asymptotic expansion when ``x >= max(30, nu^2)``;
* Miller's backward recurrence otherwise, normalised with the Neumann-type sum
  ``(x/2)^nu0 = sum_k (nu0 + 2k) Gamma(nu0 + k) / k! J_{nu0 + 2k}(x)``,
  ``nu0 = nu - floor(nu)``.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

NU_MAX = 1000.0
X_MAX = 1.0e4
_RESCALE = 1e200


class BesselRangeError(ValueError):
    pass


def _series(nu: float, x: np.ndarray) -> np.ndarray:
    out = np.zeros_like(x)
    pos = x > 0
    if nu == 0:
        out[~pos] = 1.0
    xp = x[pos]
    if xp.size == 0:
        return out
    h2 = 0.25 * xp * xp
    term = np.ones_like(xp)
    total = np.ones_like(xp)
    k = 1
    while True:
        term *= -h2 / (k * (k + nu))
        total += term
        if np.all(np.abs(term) <= 1e-17 * np.abs(total)) and k > 1:
            break
        k += 1
        if k > 500:
            break
    # log(x) - log 2 rather than log(x/2): halving the smallest subnormal underflows to zero
    log_pref = nu * (np.log(xp) - math.log(2.0)) - gammaln(nu + 1.0)
    out[pos] = total * np.exp(log_pref)
    return out


def _hankel(nu: float, x: np.ndarray) -> np.ndarray:
    mu = 4.0 * nu * nu
    p = np.ones_like(x)
    q = np.zeros_like(x)
    term = np.ones_like(x)
    best = np.full_like(x, np.inf)
    done = np.zeros(x.shape, dtype=bool)
    for k in range(1, 200):
        term = term * (mu - (2 * k - 1) ** 2) / (k * 8.0 * x)
        mag = np.abs(term)
        # stop each point at its smallest term (optimal truncation of the asymptotic series)
        grow = mag > best
        done |= grow
        upd = ~done
        if k % 2 == 1:
            q = np.where(upd, q + (-1) ** ((k - 1) // 2) * term, q)
        else:
            p = np.where(upd, p + (-1) ** (k // 2) * term, p)
        best = np.where(upd, mag, best)
        done |= mag < 1e-17
        if np.all(done):
            break
    chi = x - (0.5 * nu + 0.25) * np.pi
    return np.sqrt(2.0 / (np.pi * x)) * (p * np.cos(chi) - q * np.sin(chi))


def _miller(nu: float, x: np.ndarray) -> np.ndarray:
    nu0 = nu - math.floor(nu)
    n_top = int(math.floor(nu))
    big = max(nu, float(x.max()))
    m = int(math.ceil(big + 30 + 15 * big ** (1 / 3)))
    m += m % 2  # start on an even offset so the normalisation picks nu0 + 2k terms
    f_next = np.zeros_like(x)  # J_{nu0 + m + 1}
    f = np.full_like(x, 1e-30)  # J_{nu0 + m}
    want = np.zeros_like(x)
    norm = np.zeros_like(x)
    # log of Gamma(nu0 + k)/k! weights evaluated on the fly
    for j in range(m, -1, -1):
        if j == n_top:
            want = f.copy()
        if j % 2 == 0:
            k = j // 2
            if nu0 == 0.0:
                w = 1.0 if k == 0 else 2.0
            else:
                w = (nu0 + 2 * k) * math.exp(gammaln(nu0 + k) - gammaln(k + 1.0))
            norm += w * f
        if j == 0:
            break
        order = nu0 + j
        f_prev = (2.0 * order / x) * f - f_next
        f_next, f = f, f_prev
        big_mask = np.abs(f) > _RESCALE
        if np.any(big_mask):
            s = np.where(big_mask, 1.0 / _RESCALE, 1.0)
            f *= s
            f_next *= s
            want *= s
            norm *= s
    scale = np.exp(nu0 * np.log(0.5 * x)) if nu0 else 1.0
    return want * scale / norm


def bessel_j(nu: float, x):
    """``J_nu(x)`` for ``0 <= nu <= 1000`` and ``0 <= x <= 1e4``.

    Absolute error is below 1e-12 over that range. Arrays in ``x`` are
    evaluated together; ``nu`` is a scalar.
    """
    nu = float(nu)
    xa = np.asarray(x, dtype=float)
    scalar = xa.ndim == 0
    xa = np.atleast_1d(xa)
    if not 0.0 <= nu <= NU_MAX:
        raise BesselRangeError(f"order {nu} outside [0, {NU_MAX}]")
    if np.any(xa < 0) or np.any(xa > X_MAX) or not np.all(np.isfinite(xa)):
        raise BesselRangeError(f"argument outside [0, {X_MAX}]")
    out = np.empty_like(xa)
    ser = (xa < 2.0) | (0.25 * xa * xa <= nu + 1.0)
    hank = ~ser & (xa >= max(30.0, nu * nu))
    mil = ~ser & ~hank
    if np.any(ser):
        out[ser] = _series(nu, xa[ser])
    if np.any(hank):
        out[hank] = _hankel(nu, xa[hank])
    if np.any(mil):
        out[mil] = _miller(nu, xa[mil])
    return float(out[0]) if scalar else out


def bessel_zeros(nu: float, x_max: float, step: float = 0.5, xtol: float = 1e-13) -> np.ndarray:
    """All positive zeros of ``J_nu`` up to ``x_max``, ascending.

    Zeros of ``J_nu`` lie above ``nu`` and are separated by nearly ``pi``, so
    sign changes on a grid of spacing ``step`` bracket each zero exactly once;
    the brackets are refined together by bisection.
    """
    if x_max <= nu:
        return np.empty(0)
    x0 = max(nu, 1e-3)
    grid = np.arange(x0, x_max + step, step)
    grid[-1] = min(grid[-1], X_MAX)
    f = bessel_j(nu, grid)
    exact = grid[(f == 0.0) & (grid > 0)]
    sign_change = np.flatnonzero(f[:-1] * f[1:] < 0)
    a, b = grid[sign_change], grid[sign_change + 1]
    fa = f[sign_change]
    while np.any(b - a > xtol * np.maximum(1.0, a)):
        mid = 0.5 * (a + b)
        fm = bessel_j(nu, mid)
        left = np.sign(fm) == np.sign(fa)
        a = np.where(left, mid, a)
        fa = np.where(left, fm, fa)
        b = np.where(left, b, mid)
    roots = np.sort(np.concatenate([0.5 * (a + b), exact]))
    return roots[roots <= x_max]
