"""Black-76 quoting and least-squares model calibration.

Option quotes are expressed as Black-76 implied volatilities, the market
convention for futures options.  Calibration minimizes the sum of
squared differences between market and model implied vols: a
Nelder-Mead warm start followed by an L-BFGS-B polish, both running in
an unconstrained parameterization (logs for positive parameters, a
square root for the subordinator drift so that zero stays reachable,
and a Feller-respecting volatility ratio for the variance process).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import optimize

from .cir import CirActivity
from .errors import CalibrationError, SubouError
from .pricing import (MarketData, ModelState, Quote, call_price, put_price)
from .process import DEFAULT_CONFIG, ExpansionConfig, GeneratingTuple
from .special import gauss_cdf
from .subordinators import SubordinatorSpec

__all__ = [
    "black76_price",
    "implied_vol",
    "FitOptions",
    "FitResult",
    "calibrate_smile",
    "calibrate_surface",
    "model_implied_vol",
]

# Lower bound kept on the variance-process volatility during surface
# fits; the degenerate limit is represented by this bound going active.
SIGMA_Z_FLOOR = 0.05


def black76_price(forward: float, strike: float, vol: float, expiry: float,
                  discount: float, kind: str = "call") -> float:
    """Lognormal futures option price."""
    if forward <= 0 or strike <= 0 or expiry <= 0 or discount <= 0:
        raise ValueError("forward, strike, expiry and discount must be > 0")
    if vol < 0:
        raise ValueError("vol must be >= 0")
    if kind not in ("call", "put"):
        raise ValueError("kind must be 'call' or 'put'")
    if vol == 0:
        intrinsic = forward - strike if kind == "call" else strike - forward
        return discount * max(intrinsic, 0.0)
    s = vol * math.sqrt(expiry)
    d1 = (math.log(forward / strike) + 0.5 * s * s) / s
    d2 = d1 - s
    if kind == "call":
        return discount * (forward * gauss_cdf(d1) - strike * gauss_cdf(d2))
    return discount * (strike * gauss_cdf(-d2) - forward * gauss_cdf(-d1))


def _vega(forward: float, strike: float, vol: float, expiry: float,
          discount: float) -> float:
    s = vol * math.sqrt(expiry)
    d1 = (math.log(forward / strike) + 0.5 * s * s) / s
    return (discount * forward * math.sqrt(expiry)
            * math.exp(-0.5 * d1 * d1) / math.sqrt(2.0 * math.pi))


def implied_vol(price: float, forward: float, strike: float, expiry: float,
                discount: float, kind: str = "call") -> float:
    """Invert the Black-76 formula by safeguarded Newton iteration.

    Converges to |price error| <= 1e-12 * forward; prices outside the
    static no-arbitrage bounds raise ValueError.
    """
    if kind not in ("call", "put"):
        raise ValueError("kind must be 'call' or 'put'")
    if kind == "call":
        lower, upper = discount * max(forward - strike, 0.0), discount * forward
    else:
        lower, upper = discount * max(strike - forward, 0.0), discount * strike
    if not lower <= price <= upper:
        raise ValueError(
            f"price {price} outside the no-arbitrage range [{lower}, {upper}]")

    target = 1e-12 * forward
    lo, hi = 1e-9, 10.0
    vol = 0.3
    for _ in range(100):
        diff = black76_price(forward, strike, vol, expiry, discount, kind) - price
        if abs(diff) <= target:
            return vol
        if diff > 0:
            hi = vol
        else:
            lo = vol
        vega = _vega(forward, strike, vol, expiry, discount)
        if vega > 1e-14:
            step = vol - diff / vega
        else:
            step = math.nan
        vol = step if lo < step < hi else 0.5 * (lo + hi)
    diff = black76_price(forward, strike, vol, expiry, discount, kind) - price
    if abs(diff) <= 1e3 * target:
        return vol
    raise ValueError(f"implied vol iteration stalled at residual {diff:.3e}")


def model_implied_vol(state: ModelState, market: MarketData, quote: Quote,
                      config: ExpansionConfig = DEFAULT_CONFIG) -> float:
    """Black-76 vol implied by the model price of one quote.

    Prices the put expansion, checks static bounds, and inverts on the
    out-of-the-money side (identical vol by parity, better conditioned).
    """
    fwd = float(market.futures(quote.maturity))
    disc = float(market.discount(quote.expiry))
    p = put_price(state, market, quote.expiry, quote.maturity, quote.strike,
                  config)
    if not 0.0 <= p <= disc * quote.strike + 1e-9:
        raise CalibrationError(
            f"model put {p} violates its static bounds for strike "
            f"{quote.strike}")
    if quote.strike >= fwd:
        return implied_vol(p, fwd, quote.strike, quote.expiry, disc, "put")
    c = disc * (fwd - quote.strike) + p
    return implied_vol(c, fwd, quote.strike, quote.expiry, disc, "call")


@dataclass(frozen=True)
class FitOptions:
    """Calibration controls."""

    config: ExpansionConfig = DEFAULT_CONFIG
    nm_max_iter: int = 500
    polish: bool = True
    polish_max_iter: int = 120
    f_tol: float = 1e-14

    def light_config(self) -> ExpansionConfig:
        """Cheaper quadrature used inside surface objective evaluations."""
        return replace(self.config, sv_nodes=101, sv_max_refinements=0)


@dataclass(frozen=True)
class FitResult:
    """Fitted state plus residual diagnostics."""

    state: ModelState
    residuals: np.ndarray
    rmse: float
    converged: bool
    n_eval: int
    message: str = ""

    @property
    def params(self) -> dict:
        gen = self.state.gen
        sub = gen.subordinator
        out = {"kappa": gen.kappa, "theta": gen.theta, "sigma": gen.sigma,
               "drift": sub.drift, "c": sub.c, "p": sub.p, "eta": sub.eta,
               "x0": self.state.x0}
        if self.state.sv is not None:
            act = self.state.sv
            out.update({"kappa_z": act.kappa, "theta_z": act.theta,
                        "sigma_z": act.sigma, "z0": act.z0,
                        "a_breaks": act.a_breaks, "a_levels": act.a_levels})
        return out


def _ig_rates(spec: SubordinatorSpec) -> tuple[float, float]:
    """Recover (mean rate, variance rate) from an IG spec's (c, eta)."""
    delta = spec.c * math.sqrt(2.0 * math.pi)
    gam = math.sqrt(2.0 * spec.eta)
    mu = delta / gam
    return mu, delta / gam ** 3


def _residuals(state: ModelState, market: MarketData,
               config: ExpansionConfig) -> np.ndarray:
    out = np.empty(len(market.quotes))
    for i, quote in enumerate(market.quotes):
        out[i] = model_implied_vol(state, market, quote, config) - quote.implied_vol
    return out


def _run_minimize(objective, u0: np.ndarray, options: FitOptions):
    warm = optimize.minimize(
        objective, u0, method="Nelder-Mead",
        options={"maxiter": options.nm_max_iter, "xatol": 1e-6,
                 "fatol": options.f_tol, "adaptive": True})
    best = warm
    if options.polish:
        polish = optimize.minimize(
            objective, warm.x, method="L-BFGS-B",
            options={"maxiter": options.polish_max_iter, "ftol": 1e-16,
                     "gtol": 1e-12})
        if polish.fun <= warm.fun:
            best = polish
    return best, warm.nfev + (polish.nfev if options.polish else 0)


def calibrate_smile(market: MarketData, initial: ModelState,
                    options: FitOptions | None = None) -> FitResult:
    """Fit the six-parameter IG-subordinated model to a single smile.

    Free parameters: kappa, theta, sigma, subordinator drift, IG mean
    rate and variance rate; the starting state x0 stays fixed at the
    initial state's value.  Requires at least six quotes.
    """
    options = options or FitOptions()
    if initial.sv is not None:
        raise ValueError("smile calibration expects a model without "
                         "stochastic volatility")
    if initial.gen.subordinator.p != 0.5:
        raise ValueError("smile calibration fits the IG-subordinated model")
    if len(market.quotes) < 6:
        raise ValueError("need at least as many quotes as free parameters (6)")

    gen0 = initial.gen
    mu0, nu0 = _ig_rates(gen0.subordinator)
    u0 = np.array([math.log(gen0.kappa), gen0.theta, math.log(gen0.sigma),
                   math.sqrt(gen0.subordinator.drift),
                   math.log(mu0), math.log(nu0)])

    def decode(u: np.ndarray) -> ModelState:
        spec = SubordinatorSpec.inverse_gaussian(
            mean_rate=math.exp(u[4]), variance_rate=math.exp(u[5]),
            drift=u[3] * u[3])
        gen = GeneratingTuple(kappa=math.exp(u[0]), theta=u[1],
                              sigma=math.exp(u[2]), subordinator=spec)
        return ModelState(gen=gen, x0=initial.x0)

    def objective(u: np.ndarray) -> float:
        try:
            res = _residuals(decode(u), market, options.config)
        except CalibrationError:
            raise
        except (SubouError, ValueError, OverflowError):
            return 1e6 * (1.0 + float(np.sum(u * u)))
        return float(np.sum(res * res))

    best, n_eval = _run_minimize(objective, u0, options)
    state = decode(best.x)
    residuals = _residuals(state, market, options.config)
    rmse = float(np.sqrt(np.mean(residuals ** 2)))
    return FitResult(state=state, residuals=residuals, rmse=rmse,
                     converged=bool(best.success) or rmse < 1e-6,
                     n_eval=n_eval, message=str(best.message))


def calibrate_surface(market: MarketData, initial: ModelState,
                      options: FitOptions | None = None) -> FitResult:
    """Fit the stochastic-volatility model to a full quote surface.

    Adds the CIR parameters, z0 and the piecewise-constant activity
    levels (one per interval between distinct quoted futures
    maturities) to the smile parameter set.  The Feller condition is
    enforced through the parameterization sigma_z^2 = 2 kappa_z theta_z
    * ratio with ratio in (0, 1], and sigma_z is floored at
    SIGMA_Z_FLOOR so the degenerate limit stays evaluable.
    """
    options = options or FitOptions()
    if initial.sv is None:
        raise ValueError("surface calibration requires a stochastic "
                         "volatility block")
    if initial.gen.subordinator.p != 0.5:
        raise ValueError("surface calibration fits the IG-subordinated model")

    maturities = sorted({q.maturity for q in market.quotes})
    breaks = tuple(maturities[:-1])
    n_levels = len(breaks) + 1
    n_params = 6 + 4 + n_levels
    if len(market.quotes) < n_params:
        raise ValueError(f"need at least {n_params} quotes, "
                         f"got {len(market.quotes)}")

    gen0 = initial.gen
    act0 = initial.sv
    mu0, nu0 = _ig_rates(gen0.subordinator)
    ratio0 = min(act0.sigma ** 2 / (2.0 * act0.kappa * act0.theta), 1.0)
    levels0 = list(act0.a_levels)
    if len(levels0) != n_levels:
        levels0 = [levels0[0] if levels0 else 0.1] * n_levels

    u0 = np.concatenate([
        [math.log(gen0.kappa), gen0.theta, math.log(gen0.sigma),
         math.sqrt(gen0.subordinator.drift), math.log(mu0), math.log(nu0),
         math.log(act0.kappa), math.log(act0.theta),
         math.log(ratio0), math.log(act0.z0)],
        np.sqrt(levels0),
    ])

    def decode(u: np.ndarray) -> ModelState:
        spec = SubordinatorSpec.inverse_gaussian(
            mean_rate=math.exp(u[4]), variance_rate=math.exp(u[5]),
            drift=u[3] * u[3])
        gen = GeneratingTuple(kappa=math.exp(u[0]), theta=u[1],
                              sigma=math.exp(u[2]), subordinator=spec)
        kz, tz = math.exp(u[6]), math.exp(u[7])
        ratio = min(math.exp(u[8]), 1.0)
        sz = max(math.sqrt(2.0 * kz * tz * ratio), SIGMA_Z_FLOOR)
        sz = min(sz, math.sqrt(2.0 * kz * tz))
        act = CirActivity(kappa=kz, theta=tz, sigma=sz, z0=math.exp(u[9]),
                          a_breaks=breaks,
                          a_levels=tuple(v * v for v in u[10:]))
        return ModelState(gen=gen, x0=initial.x0, sv=act)

    light = options.light_config()

    def objective(u: np.ndarray) -> float:
        try:
            res = _residuals(decode(u), market, light)
        except CalibrationError:
            raise
        except (SubouError, ValueError, OverflowError):
            return 1e6 * (1.0 + float(np.sum(u * u)))
        return float(np.sum(res * res))

    best, n_eval = _run_minimize(objective, u0, options)
    state = decode(best.x)
    residuals = _residuals(state, market, light)
    rmse = float(np.sqrt(np.mean(residuals ** 2)))
    return FitResult(state=state, residuals=residuals, rmse=rmse,
                     converged=bool(best.success) or rmse < 1e-5,
                     n_eval=n_eval, message=str(best.message))
