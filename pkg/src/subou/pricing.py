"""Futures curves and European option pricing.

The commodity spot price is modeled as S_t = F(0,t) e^{X_t - G(t)} where
X is a subordinate OU process (optionally run on an additional CIR++
clock for stochastic volatility) and G(t) = log E[e^{X_t}] pins the mean
spot price to the initial futures curve.  Futures prices and European
puts then admit eigenfunction expansions whose coefficients are the
Gaussian integrals from :mod:`subou.special`; calls follow from
put-call parity.

All series are evaluated through normalized Hermite quantities so that
truncation orders of several hundred remain overflow free, and every
truncation is certified against the pointwise tail bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammaln

from .cir import (CirActivity, activity_integral, cir_density,
                  cir_laplace_conditional, cir_laplace_factors, cir_quantile)
from .errors import (BracketingError, ConvergenceError, PrecisionLimitError,
                     QuadratureError)
from .process import (CRAMER_BOUND, DEFAULT_CONFIG, ExpansionConfig,
                      GeneratingTuple, _adaptive_order, _compensated_sum,
                      _empirical_tail, eigenfunction_table, eigenvalues)
from .special import gauss_cdf, norm_hermite_eval

__all__ = [
    "Quote",
    "MarketData",
    "ModelState",
    "MIN_OPTION_EXPIRY",
    "exp_coefficients",
    "exp_coefficients_scaled",
    "g_compensator",
    "futures_price",
    "critical_state",
    "put_price",
    "call_price",
    "spot_option_price",
]

# Below roughly two weeks to expiry the double-precision expansions are
# not certified; shorter-dated option requests raise PrecisionLimitError.
MIN_OPTION_EXPIRY = 10.0 / 365.0

SQRT_PI = math.sqrt(math.pi)


@dataclass(frozen=True)
class Quote:
    """One option quote: expiry t, futures maturity t*, strike, Black-76 vol."""

    expiry: float
    maturity: float
    strike: float
    implied_vol: float
    bid: float | None = None
    ask: float | None = None

    def __post_init__(self):
        if not 0 < self.expiry <= self.maturity:
            raise ValueError("need 0 < expiry <= maturity")
        if self.strike <= 0:
            raise ValueError("strike must be > 0")


def _interp_log_linear(t, times: np.ndarray, log_values: np.ndarray):
    return np.exp(np.interp(t, times, log_values))


@dataclass(frozen=True)
class MarketData:
    """Initial futures curve, discount curve and option quotes.

    Both curves are interpolated log-linearly (flat extrapolation
    outside the quoted range), which keeps them positive.
    """

    futures_times: tuple[float, ...]
    futures_prices: tuple[float, ...]
    discount_times: tuple[float, ...]
    discount_factors: tuple[float, ...]
    quotes: tuple[Quote, ...] = ()

    def __post_init__(self):
        ft = np.asarray(self.futures_times, float)
        fp = np.asarray(self.futures_prices, float)
        dt = np.asarray(self.discount_times, float)
        df = np.asarray(self.discount_factors, float)
        if ft.size == 0 or ft.size != fp.size or dt.size == 0 or dt.size != df.size:
            raise ValueError("curve times and values must be nonempty and aligned")
        if np.any(np.diff(ft) <= 0) or np.any(np.diff(dt) <= 0):
            raise ValueError("curve times must be strictly increasing")
        if np.any(fp <= 0):
            raise ValueError("futures prices must be > 0")
        if np.any((df <= 0) | (df > 1)):
            raise ValueError("discount factors must lie in (0, 1]")
        object.__setattr__(self, "futures_times", tuple(ft))
        object.__setattr__(self, "futures_prices", tuple(fp))
        object.__setattr__(self, "discount_times", tuple(dt))
        object.__setattr__(self, "discount_factors", tuple(df))
        object.__setattr__(self, "quotes", tuple(self.quotes))

    @classmethod
    def flat(cls, f0: float = 100.0, rate: float = 0.0,
             horizon: float = 50.0, quotes=()) -> "MarketData":
        """Flat futures curve at f0 with continuously compounded discounting."""
        return cls(futures_times=(0.0, horizon),
                   futures_prices=(f0, f0),
                   discount_times=(0.0, horizon),
                   discount_factors=(1.0, math.exp(-rate * horizon)),
                   quotes=quotes)

    def futures(self, t):
        """Initial futures curve F(0, t)."""
        return _interp_log_linear(t, np.asarray(self.futures_times),
                                  np.log(self.futures_prices))

    def discount(self, t):
        """Discount factor B(0, t)."""
        return _interp_log_linear(t, np.asarray(self.discount_times),
                                  np.log(self.discount_factors))


@dataclass(frozen=True)
class ModelState:
    """Generating tuple plus starting state; ``sv`` switches on the CIR clock."""

    gen: GeneratingTuple
    x0: float = 0.0
    sv: CirActivity | None = None

    def __post_init__(self):
        if not math.isfinite(self.x0):
            raise ValueError("x0 must be finite")


# ---------------------------------------------------------------------
# Expansion coefficients of the exponential function
# ---------------------------------------------------------------------

def exp_coefficients_scaled(gen: GeneratingTuple, n_max: int) -> np.ndarray:
    """c_n = (sigma / sqrt(2 kappa))^n / sqrt(n!), computed in log space."""
    n = np.arange(n_max + 1, dtype=float)
    log_r = math.log(gen.sigma / math.sqrt(2.0 * gen.kappa))
    return np.exp(n * log_r - 0.5 * gammaln(n + 1.0))


def exp_coefficients(gen: GeneratingTuple, n_max: int) -> np.ndarray:
    """Expansion coefficients f_n of e^x in the eigenfunction basis.

    f_n = e^{theta + sigma^2/(4 kappa)} (sigma / sqrt(2 kappa))^n / sqrt(n!).
    """
    pref = math.exp(gen.theta + gen.sigma ** 2 / (4.0 * gen.kappa))
    return pref * exp_coefficients_scaled(gen, n_max)


def _exp_norm(gen: GeneratingTuple) -> float:
    """L2 norm of e^x under the stationary Gaussian measure."""
    return math.exp(gen.theta + gen.sigma ** 2 / (2.0 * gen.kappa))


def _exp_series_order(gen: GeneratingTuple, gap: float, x,
                      config: ExpansionConfig) -> int:
    """Truncation order for the e^x expansion at eigenvalue gap ``gap``.

    The factorial decay of the coefficients certifies this series for
    any gap; failure to certify within the cap is a genuine error.
    """
    if not config.adaptive:
        return config.n_max
    coeffs = exp_coefficients(gen, config.n_max)
    order, bound = _adaptive_order(gen, max(gap, 0.0), _exp_norm(gen), x,
                                   config, coeff_abs=coeffs)
    if bound is None:
        raise ConvergenceError(
            f"exponential expansion cannot reach tol {config.tol:.2e} within "
            f"order {config.n_max}", order=config.n_max)
    return order


# ---------------------------------------------------------------------
# Compensator and futures prices
# ---------------------------------------------------------------------

def _sv_weights(act: CirActivity, gen: GeneratingTuple, s: float, t: float,
                lam: np.ndarray, z) -> np.ndarray:
    """Series weights e^{-phi(kn) int_s^t a} L(t-s, phi(kn) | z).

    For scalar z the result matches lam's shape; for a 1-d z the node
    axis comes first.
    """
    a_int = activity_integral(act, s, t)
    gap = t - s
    z = np.asarray(z, dtype=float)
    if gap == 0:
        base = np.exp(-lam * a_int)
        if z.ndim == 0:
            return base
        return np.broadcast_to(base, z.shape + lam.shape).copy()
    log_c, b = cir_laplace_factors(act, gap, lam)
    if z.ndim == 0:
        return np.exp(-lam * a_int + log_c - b * float(z))
    return np.exp(-lam[None, :] * a_int + log_c[None, :]
                  - b[None, :] * z[:, None])


def g_compensator(state: ModelState, t: float,
                  config: ExpansionConfig = DEFAULT_CONFIG) -> float:
    """G(t) = log E[e^{X_t}] (stochastic-volatility clock included if set)."""
    if t < 0:
        raise ValueError("t must be >= 0")
    gen = state.gen
    order = _exp_series_order(gen, t, state.x0, config)
    lam = eigenvalues(gen, order)
    f = exp_coefficients(gen, order)
    phi0 = eigenfunction_table(gen, state.x0, order)
    if state.sv is None:
        weights = np.exp(-lam * t)
    else:
        weights = _sv_weights(state.sv, gen, 0.0, t, lam, state.sv.z0)
    total = _compensated_sum(weights * f * phi0)
    if total <= 0:
        raise ConvergenceError(
            f"compensator series summed to {total}; expansion not converged",
            order=order)
    return math.log(total)


def futures_price(state: ModelState, market: MarketData, s: float, t: float,
                  x, z=None, config: ExpansionConfig = DEFAULT_CONFIG):
    """Futures price F(s, t) given the driving state X_s = x (and Z_s = z).

    Vectorized over ``x`` (with a matching ``z`` under stochastic
    volatility); strictly increasing in x.
    """
    if not 0 <= s <= t:
        raise ValueError("need 0 <= s <= t")
    gen = state.gen
    if state.sv is not None and z is None:
        raise ValueError("stochastic volatility model requires the state z")
    if state.sv is None and z is not None:
        raise ValueError("z supplied but the model has no stochastic volatility")

    g_t = g_compensator(state, t, config)
    order = _exp_series_order(gen, t - s, x, config)
    lam = eigenvalues(gen, order)
    f = exp_coefficients(gen, order)
    table = eigenfunction_table(gen, x, order)
    if state.sv is None:
        series = (table * (np.exp(-lam * (t - s)) * f)).sum(axis=-1)
    else:
        z_arr = np.asarray(z, dtype=float)
        weights = _sv_weights(state.sv, gen, s, t, lam, z_arr)
        series = (table * weights * f).sum(axis=-1)
    out = market.futures(t) * np.exp(-g_t) * series
    return float(out) if np.ndim(out) == 0 else out


def _bracket_increasing(f, guess: float, unit: float, target: float,
                        max_steps: int = 240):
    """Bracket target for an increasing function, stepping out from guess."""
    lo, hi = guess - unit, guess + unit
    f_lo, f_hi = f(lo), f(hi)
    for _ in range(max_steps):
        if f_lo <= target <= f_hi:
            return lo, hi
        if target < f_lo:
            hi, f_hi = lo, f_lo
            lo -= unit
            f_lo = f(lo)
        else:
            lo, f_lo = hi, f_hi
            hi += unit
            f_hi = f(hi)
    raise BracketingError(
        f"target {target} outside the attainable range [{f_lo}, {f_hi}]",
        attainable=(f_lo, f_hi))


def critical_state(state: ModelState, market: MarketData, t: float,
                   t_star: float, strike: float, z=None,
                   config: ExpansionConfig = DEFAULT_CONFIG) -> float:
    """State level x* at which the time-t futures price equals the strike.

    Brackets the root around an OU-based seed and polishes with a
    bracketing solve to |F - K| <= 1e-10 K.
    """
    if strike <= 0:
        raise ValueError("strike must be > 0")
    gen = state.gen

    def f_of_x(xx):
        try:
            return futures_price(state, market, t, t_star, xx, z=z,
                                 config=config)
        except ConvergenceError as exc:
            raise BracketingError(
                f"futures expansion not evaluable at x={xx:.6g}: {exc}") from exc

    # Seed from the pure-OU closed form, where log F is affine in x.
    decay = math.exp(-gen.kappa * (t_star - t))
    guess = gen.theta + (math.log(strike / market.futures(t_star))
                         + g_compensator(state, t_star, config)
                         - gen.theta) / max(decay, 1e-6)
    unit = gen.sigma / math.sqrt(2.0 * gen.kappa)

    lo, hi = _bracket_increasing(f_of_x, guess, unit, strike)
    root = brentq(lambda xx: f_of_x(xx) - strike, lo, hi,
                  xtol=1e-14, rtol=8.882e-16, maxiter=200)
    if abs(f_of_x(root) - strike) > 1e-10 * strike:
        raise BracketingError(
            f"root polish failed at strike {strike}: residual "
            f"{abs(f_of_x(root) - strike):.3e}")
    return float(root)


# ---------------------------------------------------------------------
# Option pricing
# ---------------------------------------------------------------------

def _coeff_b_normalized_vec(h_table: np.ndarray, w, n_max: int) -> np.ndarray:
    """b_n(w)/sqrt(2^n n!) from a precomputed normalized Hermite table."""
    w = np.asarray(w, dtype=float)
    out = np.empty(w.shape + (n_max + 1,))
    out[..., 0] = SQRT_PI * gauss_cdf(math.sqrt(2.0) * w)
    if n_max >= 1:
        n = np.arange(1, n_max + 1, dtype=float)
        out[..., 1:] = (-h_table[..., : n_max]
                        * np.exp(-w * w)[..., None] / np.sqrt(2.0 * n))
    return out


def _coeff_a_normalized_vec(h_table: np.ndarray, w, n_max: int,
                            m_max: int) -> np.ndarray:
    """a_{n,m}(w)/sqrt(2^n n! 2^m m!) from a normalized Hermite table."""
    w = np.asarray(w, dtype=float)
    ew = np.exp(-w * w)
    dmax = min(n_max, m_max)
    diag = np.empty(w.shape + (dmax + 1,))
    diag[..., 0] = SQRT_PI * gauss_cdf(math.sqrt(2.0) * w)
    for n in range(1, dmax + 1):
        diag[..., n] = (diag[..., n - 1]
                        - h_table[..., n - 1] * h_table[..., n] * ew
                        / math.sqrt(2.0 * n))

    n_idx = np.arange(n_max + 1, dtype=float)
    m_idx = np.arange(m_max + 1, dtype=float)
    sn = np.sqrt(2.0 * (n_idx + 1.0))
    sm = np.sqrt(2.0 * (m_idx + 1.0))
    hn = h_table[..., : n_max + 1]
    hm = h_table[..., : m_max + 1]
    hn1 = h_table[..., 1: n_max + 2]
    hm1 = h_table[..., 1: m_max + 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        num = (hn[..., :, None] * (hm1 * sm)[..., None, :]
               - hm[..., None, :] * (hn1 * sn)[..., :, None])
        a = num * ew[..., None, None] / (2.0 * (m_idx[None, :] - n_idx[:, None]))
    d = np.arange(dmax + 1)
    a[..., d, d] = diag[..., d]
    return a


def _inner_order(gen: GeneratingTuple, pref: float,
                 config: ExpansionConfig) -> int:
    """Truncation of the inner (maturity-gap) sum of the put expansion.

    The inner weights are bounded by the exponential expansion
    coefficients c_m and |a_{n,m}| <= sqrt(pi) after normalization, so
    the coefficient tail certifies the truncation for every gap and
    every stochastic clock.
    """
    c = exp_coefficients_scaled(gen, config.n_max)
    tail = np.cumsum(c[::-1])[::-1] * abs(pref) * SQRT_PI
    idx = np.nonzero(tail <= 0.1 * config.tol)[0]
    if idx.size == 0:
        raise ConvergenceError(
            f"inner expansion tail {tail[-1]:.2e} exceeds tolerance at the "
            f"order cap {config.n_max}", bound=float(tail[-1]),
            order=config.n_max)
    return int(idx[0])


def _check_expiry(t: float):
    if t <= 0:
        raise ValueError("option expiry must be > 0")
    if t < MIN_OPTION_EXPIRY:
        raise PrecisionLimitError(
            f"expiry {t:.6g}y is below the supported minimum "
            f"{MIN_OPTION_EXPIRY:.6g}y; double precision cannot certify the "
            "expansion this close to expiration")


def _clip_negative(price: float, strike: float, disc: float) -> float:
    # Far out of the money the series can land a hair below zero.
    if -1e-9 * strike * disc < price < 0.0:
        return 0.0
    return price


def put_price(state: ModelState, market: MarketData, t: float, t_star: float,
              strike: float, config: ExpansionConfig = DEFAULT_CONFIG) -> float:
    """European put on the t*-maturity futures, expiring at t <= t*."""
    _check_expiry(t)
    if t > t_star:
        raise ValueError("need t <= t_star")
    if strike <= 0:
        raise ValueError("strike must be > 0")
    if state.sv is not None:
        return _sv_put_price(state, market, t, t_star, strike, config)

    gen = state.gen
    tau = t_star - t
    g_star = g_compensator(state, t_star, config)
    x_star = critical_state(state, market, t, t_star, strike, config=config)
    w_star = float(gen.scaled_state(x_star))

    pref = market.futures(t_star) * math.exp(
        gen.theta + gen.sigma ** 2 / (4.0 * gen.kappa) - g_star)
    n_out, certified = _adaptive_order(gen, t, strike, state.x0, config)
    m_in = _inner_order(gen, pref, config)

    lam = eigenvalues(gen, max(n_out, m_in))
    h = norm_hermite_eval(w_star, max(n_out, m_in) + 1)
    b_hat = _coeff_b_normalized_vec(h, w_star, n_out)
    a_hat = _coeff_a_normalized_vec(h, w_star, n_out, m_in)
    c = exp_coefficients_scaled(gen, m_in)
    v_in = np.exp(-lam[: m_in + 1] * tau) * c
    inner = a_hat @ v_in

    p_tilde = (strike * b_hat - pref * inner) / SQRT_PI
    phi0 = eigenfunction_table(gen, state.x0, n_out)
    terms = np.exp(-lam[: n_out + 1] * t) * p_tilde * phi0
    core = _compensated_sum(terms)
    if config.adaptive and certified is None:
        est = _empirical_tail(terms)
        if est > config.tol * max(1.0, strike, abs(core)):
            raise ConvergenceError(
                f"put expansion tail estimate {est:.3e} exceeds tol "
                f"{config.tol:.2e} (strike scaled) at the order cap {n_out}",
                bound=est, order=n_out)
    price = float(market.discount(t)) * core
    return _clip_negative(price, strike, float(market.discount(t)))


def call_price(state: ModelState, market: MarketData, t: float, t_star: float,
               strike: float, config: ExpansionConfig = DEFAULT_CONFIG) -> float:
    """European call via put-call parity C = B (F - K) + P."""
    p = put_price(state, market, t, t_star, strike, config)
    value = (float(market.discount(t))
             * (float(market.futures(t_star)) - strike) + p)
    return _clip_negative(value, strike, float(market.discount(t)))


def spot_option_price(state: ModelState, market: MarketData, t: float,
                      strike: float, config: ExpansionConfig = DEFAULT_CONFIG,
                      kind: str = "put") -> float:
    """European option on the spot price S_t.

    Equivalent to a futures option with maturity equal to expiry.  With
    stochastic volatility only the unconditional Laplace transform of
    the time change enters, and the exercise boundary
    y* = log(K / F(0,t)) + G(t) does not depend on the variance state.
    """
    if kind not in ("put", "call"):
        raise ValueError("kind must be 'put' or 'call'")
    _check_expiry(t)
    if state.sv is None:
        price = put_price(state, market, t, t, strike, config)
    else:
        price = _sv_spot_put(state, market, t, strike, config)
    if kind == "call":
        price = (float(market.discount(t))
                 * (float(market.futures(t)) - strike) + price)
        price = _clip_negative(price, strike, float(market.discount(t)))
    return price


# ---------------------------------------------------------------------
# Stochastic volatility pricing
# ---------------------------------------------------------------------

def _sv_outer_order(state: ModelState, t: float, f_norm: float,
                    config: ExpansionConfig) -> tuple[int, np.ndarray]:
    """Outer truncation for the SV expansion.

    Certified through the z-integrated weights
    e^{-phi(kn) A(0,t)} L(t, phi(kn) | z0), which dominate the variance
    integral of the conditional weights.
    """
    gen, act = state.gen, state.sv
    lam = eigenvalues(gen, config.n_max)
    w = _sv_weights(act, gen, 0.0, t, lam, act.z0)
    z0s = float(gen.scaled_state(state.x0))
    growth = CRAMER_BOUND * math.exp(0.5 * z0s * z0s) * f_norm

    if w[-2] > 0.0 and w[-1] > 0.0:
        ratio = w[-1] / w[-2]
        remainder = math.inf if ratio >= 1.0 else w[-1] * ratio / (1.0 - ratio)
    else:
        remainder = 0.0
    tail = np.cumsum(w[::-1])[::-1]
    bound = growth * (tail + remainder)
    idx = np.nonzero(bound <= config.tol)[0]
    if idx.size == 0:
        raise ConvergenceError(
            f"stochastic volatility expansion tail {bound[-1]:.3e} exceeds "
            f"tol {config.tol:.2e} at order {config.n_max}",
            bound=float(bound[-1]), order=config.n_max)
    return int(idx[0]), lam


def _sv_put_on_grid(state: ModelState, market: MarketData, t: float,
                    t_star: float, strike: float, nodes: np.ndarray,
                    config: ExpansionConfig) -> np.ndarray:
    """Integrand of the SV put variance integral at the given nodes."""
    gen, act = state.gen, state.sv
    g_star = g_compensator(state, t_star, config)
    pref = market.futures(t_star) * math.exp(
        gen.theta + gen.sigma ** 2 / (4.0 * gen.kappa) - g_star)

    n_out, lam_full = _sv_outer_order(state, t, strike, config)
    m_in = _inner_order(gen, pref, config)
    k_hi = max(n_out, m_in)
    lam = lam_full[: k_hi + 1]

    # Inner weights e^{-phi A(t,t*)} L(tau, phi | z) c_m, one row per node.
    c = exp_coefficients_scaled(gen, m_in)
    v_in = _sv_weights(act, gen, t, t_star, lam[: m_in + 1], nodes) * c[None, :]

    def futures_at(y: float, k: int) -> float:
        table = eigenfunction_table(gen, y, m_in)
        return pref * float((table * v_in[k]).sum())

    # Exercise boundary y*(z) per node; consecutive nodes give close
    # roots, so the previous root seeds the next bracket.
    unit = gen.sigma / math.sqrt(2.0 * gen.kappa)
    w_star = np.empty(nodes.size)
    guess = gen.theta
    for k in range(nodes.size):
        lo, hi = _bracket_increasing(lambda yy: futures_at(yy, k),
                                     guess, unit, strike)
        y_star = brentq(lambda yy: futures_at(yy, k) - strike, lo, hi,
                        xtol=1e-14, rtol=8.882e-16, maxiter=200)
        guess = y_star
        w_star[k] = float(gen.scaled_state(y_star))

    h = norm_hermite_eval(w_star, k_hi + 1)
    b_hat = _coeff_b_normalized_vec(h, w_star, n_out)
    a_hat = _coeff_a_normalized_vec(h, w_star, n_out, m_in)
    inner = np.einsum("knm,km->kn", a_hat, v_in)
    p_tilde = (strike * b_hat - pref * inner) / SQRT_PI

    a0 = activity_integral(act, 0.0, t)
    l_cond = cir_laplace_conditional(act, t, lam[: n_out + 1][None, :],
                                     act.z0, nodes[:, None])
    w_out = np.exp(-lam[: n_out + 1] * a0)[None, :] * l_cond
    phi0 = eigenfunction_table(gen, state.x0, n_out)
    series = (w_out * p_tilde * phi0[None, :]).sum(axis=1)
    return series * cir_density(act, t, act.z0, nodes)


def _simpson(values: np.ndarray, x: np.ndarray) -> float:
    step = x[1] - x[0]
    weights = np.ones(values.size)
    weights[1:-1:2] = 4.0
    weights[2:-1:2] = 2.0
    return float(step / 3.0 * np.sum(weights * values))


def _sv_put_price(state: ModelState, market: MarketData, t: float,
                  t_star: float, strike: float,
                  config: ExpansionConfig) -> float:
    """SV futures put: conditional expansion integrated over the CIR state.

    The variance integral is truncated where the CIR transition density
    mass drops below the configured tail probability and discretized by
    the Simpson rule, doubling the node count until the price moves less
    than the configured fraction of the futures level.
    """
    act = state.sv
    z_lo = cir_quantile(act, t, config.sv_tail_prob)
    z_hi = cir_quantile(act, t, 1.0 - config.sv_tail_prob)
    f_star = float(market.futures(t_star))

    n_nodes = config.sv_nodes if config.sv_nodes % 2 == 1 else config.sv_nodes + 1
    price_prev = None
    price = math.nan
    for _ in range(config.sv_max_refinements + 1):
        nodes = np.linspace(z_lo, z_hi, n_nodes)
        integrand = _sv_put_on_grid(state, market, t, t_star, strike,
                                    nodes, config)
        price = float(market.discount(t)) * _simpson(integrand, nodes)
        if price_prev is not None and abs(price - price_prev) <= \
                config.sv_price_rel_tol * f_star:
            return _clip_negative(price, strike, float(market.discount(t)))
        price_prev = price
        n_nodes = 2 * (n_nodes - 1) + 1
    raise QuadratureError(
        f"variance integral did not stabilize below "
        f"{config.sv_price_rel_tol:.1e} * F within "
        f"{config.sv_max_refinements} refinements",
        achieved_tol=abs(price - price_prev))


def _sv_spot_put(state: ModelState, market: MarketData, t: float,
                 strike: float, config: ExpansionConfig) -> float:
    """Spot put under stochastic volatility via the unconditional transform."""
    gen, act = state.gen, state.sv
    g_t = g_compensator(state, t, config)
    f0t = float(market.futures(t))
    pref = f0t * math.exp(gen.theta + gen.sigma ** 2 / (4.0 * gen.kappa) - g_t)

    y_star = math.log(strike / f0t) + g_t
    w_star = float(gen.scaled_state(y_star))

    n_out, lam_full = _sv_outer_order(state, t, strike, config)
    m_in = _inner_order(gen, pref, config)
    k_hi = max(n_out, m_in)

    h = norm_hermite_eval(w_star, k_hi + 1)
    b_hat = _coeff_b_normalized_vec(h, w_star, n_out)
    a_hat = _coeff_a_normalized_vec(h, w_star, n_out, m_in)
    c = exp_coefficients_scaled(gen, m_in)
    inner = a_hat @ c
    p_tilde = (strike * b_hat - pref * inner) / SQRT_PI

    w_out = _sv_weights(act, gen, 0.0, t, lam_full[: n_out + 1], act.z0)
    phi0 = eigenfunction_table(gen, state.x0, n_out)
    price = (float(market.discount(t))
             * _compensated_sum(w_out * p_tilde * phi0))
    return _clip_negative(price, strike, float(market.discount(t)))
