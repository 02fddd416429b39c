"""CIR activity rate process and its Laplace transforms.

The stochastic clock used for stochastic volatility is
T_t = integral of (a(u) + Z_u) du, where a is a deterministic
nonnegative piecewise-constant function and Z is a square-root
diffusion

    dZ = kappa (theta - Z) dt + sigma sqrt(Z) dB,   Z_0 = z0,

restricted to the Feller regime d := 2 theta kappa / sigma^2 >= 1 so
that zero is inaccessible.  The transition density, the Laplace
transform of the integrated process, and the Laplace transform
conditional on the terminal state are all closed form; everything here
is evaluated in log space so that large orders and long horizons do not
overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import SubouError
from .special import log_bessel_i

__all__ = [
    "CirActivity",
    "cir_density",
    "cir_laplace",
    "cir_laplace_factors",
    "cir_laplace_conditional",
    "activity_value",
    "activity_integral",
    "cir_quantile",
    "sample_cir_path",
]


@dataclass(frozen=True)
class CirActivity:
    """CIR parameters plus the deterministic activity function a(t).

    ``a_breaks`` are the ascending breakpoints of the piecewise-constant
    a(t) and ``a_levels`` its values, with len(a_levels) equal to
    len(a_breaks) + 1.  The default is a identically zero.
    """

    kappa: float
    theta: float
    sigma: float
    z0: float
    a_breaks: tuple[float, ...] = ()
    a_levels: tuple[float, ...] = (0.0,)

    def __post_init__(self):
        if min(self.kappa, self.theta, self.sigma, self.z0) <= 0:
            raise ValueError("CIR parameters and z0 must be > 0")
        if self.feller < 1.0:
            raise ValueError(
                f"Feller condition violated: 2 theta kappa / sigma^2 = "
                f"{self.feller:.6g} < 1")
        object.__setattr__(self, "a_breaks", tuple(float(b) for b in self.a_breaks))
        object.__setattr__(self, "a_levels", tuple(float(v) for v in self.a_levels))
        if len(self.a_levels) != len(self.a_breaks) + 1:
            raise ValueError("need exactly len(a_breaks) + 1 activity levels")
        if any(b2 <= b1 for b1, b2 in zip(self.a_breaks, self.a_breaks[1:])):
            raise ValueError("activity breakpoints must be strictly increasing")
        if any(v < 0 for v in self.a_levels):
            raise ValueError("activity levels must be >= 0")

    @property
    def feller(self) -> float:
        """Feller ratio d = 2 theta kappa / sigma^2."""
        return 2.0 * self.theta * self.kappa / self.sigma ** 2


def activity_value(act: CirActivity, t: float) -> float:
    """Deterministic activity a(t)."""
    idx = 0
    for b in act.a_breaks:
        if t < b:
            break
        idx += 1
    return act.a_levels[idx]


def activity_integral(act: CirActivity, s: float, t: float) -> float:
    """Exact integral of a(u) over [s, t] for the piecewise-constant a."""
    if s > t:
        raise ValueError("need s <= t")
    edges = [s] + [b for b in act.a_breaks if s < b < t] + [t]
    total = 0.0
    for left, right in zip(edges, edges[1:]):
        total += activity_value(act, left) * (right - left)
    return total


def cir_density(act: CirActivity, t: float, z0: float, z):
    """CIR transition density p(t, z0, z).

    Scaled noncentral chi-square law written with the exponentially
    scaled Bessel function so it stays finite for extreme Feller ratios.
    """
    if t <= 0:
        raise ValueError("t must be > 0")
    if z0 <= 0:
        raise ValueError("z0 must be > 0")
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0):
        raise ValueError("z must be > 0")
    k, sig, d = act.kappa, act.sigma, act.feller
    decay = math.exp(-k * t)
    c = 2.0 * k / (sig * sig * (1.0 - decay))
    arg = 2.0 * c * np.sqrt(z0 * z * decay)
    log_p = (math.log(c) - c * (z0 * decay + z)
             + 0.5 * (d - 1.0) * np.log(z / (z0 * decay))
             + log_bessel_i(d - 1.0, arg))
    out = np.exp(log_p)
    return float(out) if out.ndim == 0 else out


def cir_laplace_factors(act: CirActivity, t: float, lam):
    """(log C(t, lam), B(t, lam)) of the integrated-CIR Laplace transform.

    E[exp(-lam * integral of Z over [0, t]) | Z_0 = z] equals
    exp(log_C - B z) with gamma(lam) = sqrt(kappa^2 + 2 sigma^2 lam).
    """
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0):
        raise ValueError("lambda must be >= 0")
    k, sig, d = act.kappa, act.sigma, act.feller
    g = np.sqrt(k * k + 2.0 * sig * sig * lam)
    eg = np.exp(-g * t)
    den = (g + k) + (g - k) * eg
    log_c = d * (np.log(2.0 * g) - 0.5 * (g - k) * t - np.log(den))
    b = 2.0 * lam * (1.0 - eg) / den
    return log_c, b


def cir_laplace(act: CirActivity, t: float, lam, z0: float | None = None):
    """Laplace transform of the integrated CIR process started at z0."""
    if t < 0:
        raise ValueError("t must be >= 0")
    if z0 is None:
        z0 = act.z0
    lam = np.asarray(lam, dtype=float)
    if t == 0:
        out = np.ones_like(lam)
        return float(out) if out.ndim == 0 else out
    log_c, b = cir_laplace_factors(act, t, lam)
    out = np.exp(log_c - b * z0)
    return float(out) if out.ndim == 0 else out


def cir_laplace_conditional(act: CirActivity, t: float, lam, z0: float, zt):
    """Laplace transform of the integrated CIR conditional on Z_t = zt.

    Both Bessel factors are combined in log space, otherwise they
    underflow separately for small t or large lambda.  Broadcasts over
    ``lam`` and ``zt``.
    """
    if t <= 0:
        raise ValueError("t must be > 0")
    if z0 <= 0:
        raise ValueError("z0 must be > 0")
    lam = np.asarray(lam, dtype=float)
    zt = np.asarray(zt, dtype=float)
    if np.any(lam < 0):
        raise ValueError("lambda must be >= 0")
    if np.any(zt <= 0):
        raise ValueError("zt must be > 0")
    k, sig, d = act.kappa, act.sigma, act.feller
    g = np.sqrt(k * k + 2.0 * sig * sig * lam)
    ekt = np.exp(-k * t)
    egt = np.exp(-g * t)
    sq = np.sqrt(z0 * zt)

    log_pref = (np.log(g) - 0.5 * (g - k) * t + math.log1p(-ekt)
                - math.log(k) - np.log1p(-egt))
    exp_term = ((z0 + zt) / sig ** 2
                * (k * (1.0 + ekt) / (1.0 - ekt) - g * (1.0 + egt) / (1.0 - egt)))
    arg_g = 4.0 * g * sq / sig ** 2 * np.sqrt(egt) / (1.0 - egt)
    arg_k = 4.0 * k * sq / sig ** 2 * np.sqrt(ekt) / (1.0 - ekt)
    log_ratio = log_bessel_i(d - 1.0, arg_g) - log_bessel_i(d - 1.0, arg_k)

    log_out = log_pref + exp_term + log_ratio
    if not np.all(np.isfinite(log_out)):
        raise SubouError(
            f"conditional Laplace transform not evaluable at t={t}, "
            f"lam range [{np.min(lam)}, {np.max(lam)}], z0={z0}")
    out = np.exp(log_out)
    return float(out) if out.ndim == 0 else out


def _step_parameters(act: CirActivity, dt: float):
    decay = math.exp(-act.kappa * dt)
    c = 2.0 * act.kappa / (act.sigma ** 2 * (1.0 - decay))
    df = 2.0 * act.feller
    return decay, c, df


def cir_quantile(act: CirActivity, t: float, prob: float,
                 z0: float | None = None) -> float:
    """Quantile of Z_t given Z_0 = z0, from the noncentral chi-square law."""
    if z0 is None:
        z0 = act.z0
    decay, c, df = _step_parameters(act, t)
    nc = 2.0 * c * z0 * decay
    return float(stats.ncx2.ppf(prob, df, nc) / (2.0 * c))


def sample_cir_path(act: CirActivity, grid, rng: np.random.Generator,
                    n_paths: int = 1) -> np.ndarray:
    """Exact CIR path sampling on the given time grid.

    Transitions use the scaled noncentral chi-square representation with
    2d degrees of freedom, so there is no discretization bias.  Returns
    an array of shape (n_paths, len(grid)); the path starts at z0 at
    time zero and the grid must be strictly increasing and positive.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("grid must be a nonempty 1-d array")
    if np.any(np.diff(grid) <= 0) or grid[0] < 0:
        raise ValueError("grid must be strictly increasing and nonnegative")
    out = np.empty((n_paths, grid.size))
    current = np.full(n_paths, act.z0)
    prev_t = 0.0
    for j, tj in enumerate(grid):
        dt = tj - prev_t
        if dt > 0:
            decay, c, df = _step_parameters(act, dt)
            nc = 2.0 * c * current * decay
            current = rng.noncentral_chisquare(df, nc) / (2.0 * c)
        out[:, j] = current
        prev_t = tj
    return out
