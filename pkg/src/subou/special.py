"""Hermite polynomials, Gaussian integrals and modified Bessel functions.

Everything here is pure real-variable numerics used by the expansion
machinery: the physicists' Hermite recursion, its overflow-free normalized
variant, the one- and two-polynomial Gaussian integral coefficients

    b_n(w) = integral of H_n(x) exp(-x^2) over (-inf, w],
    a_{n,m}(w) = integral of H_n(x) H_m(x) exp(-x^2) over (-inf, w],

and the modified Bessel function of the first kind I_nu, including a
log-scale evaluator that stays finite for the extreme orders and arguments
produced by square-root diffusion transition densities.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special as sc

__all__ = [
    "hermite_eval",
    "norm_hermite_eval",
    "gauss_cdf",
    "coeff_b",
    "coeff_b_normalized",
    "coeff_a",
    "coeff_a_normalized",
    "bessel_i",
    "bessel_i_scaled",
    "log_bessel_i",
]

SQRT_PI = math.sqrt(math.pi)


def hermite_eval(x: float, n_max: int) -> np.ndarray:
    """Table of physicists' Hermite polynomials H_0(x)..H_n(x).

    Uses the classical three-term recursion
    H_n(x) = 2 x H_{n-1}(x) - 2 (n-1) H_{n-2}(x).
    Raw values overflow near n ~ 150; use :func:`norm_hermite_eval` for
    high orders.
    """
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    out = np.empty(n_max + 1)
    out[0] = 1.0
    if n_max >= 1:
        out[1] = 2.0 * x
    for n in range(2, n_max + 1):
        out[n] = 2.0 * x * out[n - 1] - 2.0 * (n - 1) * out[n - 2]
    return out


def norm_hermite_eval(z, n_max: int) -> np.ndarray:
    """Normalized Hermite table h_n(z) = H_n(z) / sqrt(2^n n!).

    The rescaled recursion

        h_n = sqrt(2/n) z h_{n-1} - sqrt((n-1)/n) h_{n-2}

    never forms 2^n n! and stays bounded by ~1.09 exp(z^2/2) (Cramer's
    inequality), so it is safe for orders in the hundreds.  `z` may be a
    scalar or an array; the order axis is appended last.
    """
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    z = np.asarray(z, dtype=float)
    out = np.empty(z.shape + (n_max + 1,))
    out[..., 0] = 1.0
    if n_max >= 1:
        out[..., 1] = math.sqrt(2.0) * z
    for n in range(2, n_max + 1):
        out[..., n] = (math.sqrt(2.0 / n) * z * out[..., n - 1]
                       - math.sqrt((n - 1) / n) * out[..., n - 2])
    return out


def gauss_cdf(x):
    """Standard normal CDF, accurate to full double precision."""
    return sc.ndtr(x)


def coeff_b(w: float, n_max: int) -> np.ndarray:
    """Coefficients b_n(w) = integral of H_n(x) e^{-x^2} over (-inf, w].

    b_0(w) = sqrt(pi) Phi(sqrt(2) w) and, because H_n e^{-x^2} is the
    derivative of -H_{n-1} e^{-x^2}, b_n(w) = -H_{n-1}(w) e^{-w^2} for
    n >= 1.
    """
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    out = np.empty(n_max + 1)
    out[0] = SQRT_PI * gauss_cdf(math.sqrt(2.0) * w)
    if n_max >= 1:
        h = hermite_eval(w, n_max - 1)
        out[1:] = -h * math.exp(-w * w)
    return out


def coeff_b_normalized(w: float, n_max: int) -> np.ndarray:
    """b_n(w) / sqrt(2^n n!), overflow-free for large n."""
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    out = np.empty(n_max + 1)
    out[0] = SQRT_PI * gauss_cdf(math.sqrt(2.0) * w)
    if n_max >= 1:
        h = norm_hermite_eval(w, n_max - 1)
        n = np.arange(1, n_max + 1, dtype=float)
        out[1:] = -h * math.exp(-w * w) / np.sqrt(2.0 * n)
    return out


def coeff_a(w: float, n_max: int, m_max: int) -> np.ndarray:
    """Matrix a_{n,m}(w) = integral of H_n(x) H_m(x) e^{-x^2} over (-inf, w].

    Diagonal entries follow the recursion
        a_{0,0} = sqrt(pi) Phi(sqrt(2) w),
        a_{n,n} = 2 n a_{n-1,n-1} - H_{n-1}(w) H_n(w) e^{-w^2},
    and off-diagonal entries the closed form
        a_{n,m} = (H_n H_{m+1} - H_m H_{n+1}) e^{-w^2} / (2 (m - n)).
    The result is symmetric in (n, m).
    """
    if n_max < 0 or m_max < 0:
        raise ValueError("orders must be >= 0")
    k = max(n_max, m_max)
    h = hermite_eval(w, k + 1)
    ew = math.exp(-w * w)

    a = np.empty((n_max + 1, m_max + 1))
    diag = np.empty(k + 1)
    diag[0] = SQRT_PI * gauss_cdf(math.sqrt(2.0) * w)
    for n in range(1, k + 1):
        diag[n] = 2.0 * n * diag[n - 1] - h[n - 1] * h[n] * ew

    n_idx = np.arange(n_max + 1)[:, None]
    m_idx = np.arange(m_max + 1)[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        off = ((h[: n_max + 1][:, None] * h[1: m_max + 2][None, :]
                - h[: m_max + 1][None, :] * h[1: n_max + 2][:, None])
               * ew / (2.0 * (m_idx - n_idx)))
    a[:, :] = off
    d = np.arange(min(n_max, m_max) + 1)
    a[d, d] = diag[d]
    return a


def coeff_a_normalized(w, n_max: int, m_max: int) -> np.ndarray:
    """a_{n,m}(w) / sqrt(2^n n! 2^m m!), overflow-free for large orders.

    `w` may be a scalar or a 1-d array of evaluation points; the (n, m)
    axes are appended last.
    """
    if n_max < 0 or m_max < 0:
        raise ValueError("orders must be >= 0")
    w = np.asarray(w, dtype=float)
    scalar = w.ndim == 0
    w1 = np.atleast_1d(w)

    k = max(n_max, m_max)
    h = norm_hermite_eval(w1, k + 1)          # (..., k+2)
    ew = np.exp(-w1 * w1)

    # Normalized diagonal recursion: the 2n factor cancels exactly.
    dmax = min(n_max, m_max)
    diag = np.empty(w1.shape + (dmax + 1,))
    diag[..., 0] = SQRT_PI * gauss_cdf(math.sqrt(2.0) * w1)
    for n in range(1, dmax + 1):
        diag[..., n] = (diag[..., n - 1]
                        - h[..., n - 1] * h[..., n] * ew / math.sqrt(2.0 * n))

    n_idx = np.arange(n_max + 1, dtype=float)
    m_idx = np.arange(m_max + 1, dtype=float)
    sn = np.sqrt(2.0 * (n_idx + 1.0))         # sqrt(2 (n+1))
    sm = np.sqrt(2.0 * (m_idx + 1.0))
    hn = h[..., : n_max + 1]
    hm = h[..., : m_max + 1]
    hn1 = h[..., 1: n_max + 2]
    hm1 = h[..., 1: m_max + 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        num = (hn[..., :, None] * (hm1 * sm)[..., None, :]
               - hm[..., None, :] * (hn1 * sn)[..., :, None])
        a = num * ew[..., None, None] / (2.0 * (m_idx[None, :] - n_idx[:, None]))
    d = np.arange(dmax + 1)
    a[..., d, d] = diag[..., d]
    return a[0] if scalar else a


def log_bessel_i(order: float, x) -> np.ndarray:
    """log I_nu(x) for nu >= 0, x >= 0, finite over extreme ranges.

    Three regimes: the ascending series when x is small relative to the
    order (where scipy's `ive` underflows), scipy's exponentially scaled
    `ive` in the ordinary regime, and the uniform large-order asymptotic
    expansion when both the order and argument are huge.
    """
    if order < 0:
        raise ValueError("order must be >= 0")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("argument must be >= 0")
    scalar = x.ndim == 0
    x1 = np.atleast_1d(x).astype(float)
    out = np.full(x1.shape, -np.inf)

    zero = x1 == 0.0
    if order == 0:
        out[zero] = 0.0

    small = (~zero) & (x1 * x1 < 4.0 * (order + 1.0))
    if np.any(small):
        xs = x1[small]
        # I_nu(x) = (x/2)^nu / Gamma(nu+1) sum_k (x^2/4)^k / (k! (nu+1)_k)
        q = 0.25 * xs * xs
        term = np.ones_like(xs)
        ssum = np.ones_like(xs)
        for kk in range(1, 40):
            term = term * q / (kk * (order + kk))
            ssum += term
            if np.all(term < 1e-18 * ssum):
                break
        out[small] = (order * np.log(0.5 * xs) - math.lgamma(order + 1.0)
                      + np.log(ssum))

    big = (~zero) & (~small)
    if np.any(big):
        xb = x1[big]
        if order <= 250.0:
            v = sc.ive(order, xb)
            out[big] = np.log(v) + xb
        else:
            # Uniform asymptotic expansion for large order.
            z = xb / order
            s = np.sqrt(1.0 + z * z)
            eta = s + np.log(z / (1.0 + s))
            t = 1.0 / s
            u1 = (3.0 * t - 5.0 * t ** 3) / 24.0
            u2 = (81.0 * t ** 2 - 462.0 * t ** 4 + 385.0 * t ** 6) / 1152.0
            u3 = (30375.0 * t ** 3 - 369603.0 * t ** 5 + 765765.0 * t ** 7
                  - 425425.0 * t ** 9) / 414720.0
            corr = 1.0 + u1 / order + u2 / order ** 2 + u3 / order ** 3
            out[big] = (order * eta - 0.5 * np.log(2.0 * math.pi * order * s)
                        + np.log(corr))
    return out[0] if scalar else out


def bessel_i(order: float, x):
    """Modified Bessel function of the first kind I_nu(x), x >= 0."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("argument must be >= 0")
    v = sc.iv(order, x)
    bad = ~np.isfinite(v) | ((v == 0.0) & (x > 0.0) & (order > 0.0))
    if np.any(bad):
        v = np.where(bad, np.exp(log_bessel_i(order, x)), v)
    return float(v) if v.ndim == 0 else v


def bessel_i_scaled(order: float, x):
    """Exponentially scaled Bessel function e^{-x} I_nu(x)."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("argument must be >= 0")
    v = sc.ive(order, x)
    bad = ~np.isfinite(v) | ((v == 0.0) & (x > 0.0) & (order > 0.0))
    if np.any(bad):
        v = np.where(bad, np.exp(log_bessel_i(order, x) - x), v)
    return float(v) if v.ndim == 0 else v
