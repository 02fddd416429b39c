"""Path simulation and the maturity effect in futures volatility.

Simulation of the subordinate OU process is exact in distribution: each
grid step draws the subordinator increment for the elapsed calendar
time and then the OU transition over that internal time.  Under the
CIR++ clock the variance path is sampled exactly on a refined grid and
the clock increment is integrated by the trapezoid rule before being
fed to the same internal-time transition.

Realized quadratic variation of futures returns is estimated by the
discrete sum of squared log-price increments along each path, the
standard realized-variance estimator; its mean decreasing in the
contract maturity is the Samuelson maturity effect.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cir import (CirActivity, activity_integral, activity_value,
                  cir_laplace_factors, sample_cir_path)
from .errors import SubouError
from .pricing import (MarketData, ModelState, _exp_series_order, _sv_weights,
                      exp_coefficients, exp_coefficients_scaled)
from .process import (DEFAULT_CONFIG, ExpansionConfig, GeneratingTuple,
                      eigenfunction_table, eigenvalues, ou_mean_variance)
from .subordinators import sample_increment

__all__ = [
    "PathBundle",
    "simulate_subou",
    "simulate_sv_subou",
    "realized_qv",
    "check_maturity_condition",
    "MaturityReport",
]

# Trapezoid integration of the CIR clock uses steps no longer than this.
SV_CLOCK_MAX_STEP = 1.0 / 500.0


@dataclass(frozen=True)
class PathBundle:
    """Simulated paths on a common grid.

    ``x_paths`` has shape (n_paths, len(grid)); ``z_paths`` is present
    only for stochastic volatility simulations.
    """

    grid: np.ndarray
    x_paths: np.ndarray
    z_paths: np.ndarray | None = None
    seed: int | None = None

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        if grid.ndim != 1 or np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be 1-d and strictly increasing")
        if self.x_paths.shape[1] != grid.size:
            raise ValueError("x_paths and grid are misaligned")
        if self.z_paths is not None and self.z_paths.shape != self.x_paths.shape:
            raise ValueError("z_paths and x_paths must have the same shape")
        object.__setattr__(self, "grid", grid)


def _ou_step(gen: GeneratingTuple, x: np.ndarray, elapsed: np.ndarray,
             rng: np.random.Generator) -> np.ndarray:
    """Exact OU transition over (per-path) elapsed internal time."""
    mean, var = ou_mean_variance(gen, elapsed, x)
    return mean + np.sqrt(var) * rng.standard_normal(x.shape)


def simulate_subou(gen: GeneratingTuple, grid, n_paths: int,
                   rng: np.random.Generator, x0: float = 0.0) -> PathBundle:
    """Exact simulation of X at the grid times, starting from x0 at time 0.

    Each step draws the subordinator increment over the calendar step
    and then the OU transition over that internal elapsed time; both
    draws are exact, so the marginals carry no discretization bias.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be 1-d and strictly increasing")
    if grid[0] < 0:
        raise ValueError("grid times must be >= 0")
    x = np.full(n_paths, float(x0))
    out = np.empty((n_paths, grid.size))
    prev = 0.0
    for j, tj in enumerate(grid):
        dt = tj - prev
        if dt > 0:
            internal = np.asarray(
                sample_increment(gen.subordinator, dt, rng, size=n_paths),
                dtype=float)
            positive = internal > 0
            if np.any(positive):
                x = np.where(positive,
                             _ou_step(gen, x, np.maximum(internal, 1e-300), rng),
                             x)
        out[:, j] = x
        prev = tj
    return PathBundle(grid=grid, x_paths=out)


def simulate_sv_subou(state: ModelState, grid, n_paths: int,
                      rng: np.random.Generator) -> PathBundle:
    """Simulate Y = X evaluated at the CIR++ clock T, plus the Z path.

    The CIR path is sampled exactly on a refinement of the grid with
    step at most SV_CLOCK_MAX_STEP; clock increments are trapezoid
    integrals of a(u) + Z_u and feed the internal-time transition of the
    subordinate OU process.
    """
    if state.sv is None:
        raise ValueError("state has no stochastic volatility block")
    act: CirActivity = state.sv
    gen = state.gen
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be 1-d and strictly increasing")
    if grid[0] <= 0:
        raise ValueError("grid times must be > 0")

    # Refine every interval (starting from time zero) to the clock step.
    fine = [np.array([0.0])]
    prev = 0.0
    index_of = np.empty(grid.size, dtype=int)
    count = 1
    for j, tj in enumerate(grid):
        n_sub = max(1, int(math.ceil((tj - prev) / SV_CLOCK_MAX_STEP)))
        seg = np.linspace(prev, tj, n_sub + 1)[1:]
        fine.append(seg)
        count += seg.size
        index_of[j] = count - 1
        prev = tj
    fine_grid = np.concatenate(fine)

    z_fine = np.empty((n_paths, fine_grid.size))
    z_fine[:, 0] = act.z0
    z_fine[:, 1:] = sample_cir_path(act, fine_grid[1:], rng, n_paths)

    a_vals = np.array([activity_value(act, u) for u in fine_grid])
    rate = z_fine + a_vals[None, :]
    steps = np.diff(fine_grid)
    x = np.full(n_paths, float(state.x0))
    out_x = np.empty((n_paths, grid.size))
    out_z = np.empty((n_paths, grid.size))
    next_out = 0
    for j in range(1, fine_grid.size):
        clock = 0.5 * (rate[:, j - 1] + rate[:, j]) * steps[j - 1]
        internal = np.asarray(
            sample_increment(gen.subordinator, clock, rng), dtype=float)
        positive = internal > 0
        if np.any(positive):
            x = np.where(positive,
                         _ou_step(gen, x, np.maximum(internal, 1e-300), rng),
                         x)
        if next_out < grid.size and j == index_of[next_out]:
            out_x[:, next_out] = x
            out_z[:, next_out] = z_fine[:, j]
            next_out += 1
    return PathBundle(grid=grid, x_paths=out_x, z_paths=out_z)


def realized_qv(bundle: PathBundle, maturity: float, state: ModelState,
                market: MarketData,
                config: ExpansionConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Realized quadratic variation of futures log returns, one per path.

    Sums the squared increments of log F(s_i, maturity) along the grid,
    with the futures price given by the model expansion at the simulated
    state.  The curve-level factor F(0, maturity) e^{-G} is common to
    all grid times and cancels from the increments.
    """
    grid = bundle.grid
    if grid[-1] > maturity + 1e-12:
        raise ValueError("grid extends beyond the futures maturity")
    gen = state.gen
    order = _exp_series_order(gen, 0.0, bundle.x_paths, config)
    lam = eigenvalues(gen, order)
    f = exp_coefficients(gen, order)

    log_f_prev = None
    qv = np.zeros(bundle.x_paths.shape[0])
    for j, s in enumerate(grid):
        table = eigenfunction_table(gen, bundle.x_paths[:, j], order)
        if state.sv is None:
            series = table @ (np.exp(-lam * (maturity - s)) * f)
        else:
            w = _sv_weights(state.sv, gen, s, maturity, lam,
                            bundle.z_paths[:, j]) * f
            series = (table * w).sum(axis=1)
        if np.any(series <= 0):
            raise SubouError("futures expansion returned a nonpositive price "
                             f"at grid time {s}")
        log_f = np.log(series)
        if log_f_prev is not None:
            qv += (log_f - log_f_prev) ** 2
        log_f_prev = log_f
    return qv


@dataclass(frozen=True)
class MaturityReport:
    """Outcome of the maturity-effect sufficient condition check."""

    holds: bool
    violations: tuple = ()
    n_checked: int = 0


def check_maturity_condition(state: ModelState, market: MarketData,
                             x_grid, t_grid, z_grid=None,
                             config: ExpansionConfig = DEFAULT_CONFIG
                             ) -> MaturityReport:
    """Numerically test the sufficient condition for the maturity effect.

    Evaluates g(x, 0, t) = sum_n e^{-phi(kn) t} (sigma/(2 sqrt(kappa)))^n
    H_n(sqrt(kappa)/sigma (x - theta)) / n! and its state derivatives by
    term-wise differentiation (H_n' = 2n H_{n-1}; the variance-state
    derivative of the Laplace transform is -B(t, lam) times itself), and
    requires g_x / g (plus (g_z / g)^2 under stochastic volatility) to
    be decreasing in t pointwise on the supplied grids.  Violations are
    reported, not raised.
    """
    gen = state.gen
    x_grid = np.asarray(x_grid, dtype=float)
    t_grid = np.sort(np.asarray(t_grid, dtype=float))
    if np.any(t_grid <= 0):
        raise ValueError("t grid must be positive")

    order = _exp_series_order(gen, float(t_grid[0]), x_grid, config)
    lam = eigenvalues(gen, order)
    c = exp_coefficients_scaled(gen, order)
    table = eigenfunction_table(gen, x_grid, order)
    # d/dx phi_n = sqrt(kappa)/sigma sqrt(2n) phi_{n-1}
    deriv = np.zeros_like(table)
    n_idx = np.arange(1, order + 1)
    deriv[:, 1:] = (math.sqrt(gen.kappa) / gen.sigma
                    * np.sqrt(2.0 * n_idx) * table[:, :-1])

    violations = []
    n_checked = 0
    if state.sv is None:
        ratios = np.empty((t_grid.size, x_grid.size))
        for i, t in enumerate(t_grid):
            w = np.exp(-lam * t) * c
            g = table @ w
            gx = deriv @ w
            if np.any(g <= 0) or np.any(gx <= 0):
                raise SubouError(f"g or g_x nonpositive at t={t}")
            ratios[i] = gx / g
        for i in range(1, t_grid.size):
            n_checked += x_grid.size
            bad = ratios[i] >= ratios[i - 1]
            for k in np.nonzero(bad)[0]:
                violations.append((float(x_grid[k]), float(t_grid[i - 1]),
                                   float(t_grid[i]), float(ratios[i - 1, k]),
                                   float(ratios[i, k])))
    else:
        act = state.sv
        if z_grid is None:
            raise ValueError("stochastic volatility check needs a z grid")
        z_grid = np.asarray(z_grid, dtype=float)
        ratios_x = np.empty((t_grid.size, x_grid.size, z_grid.size))
        ratios_z = np.empty_like(ratios_x)
        for i, t in enumerate(t_grid):
            a_int = activity_integral(act, 0.0, t)
            log_cc, b = cir_laplace_factors(act, t, lam)
            for kz, z in enumerate(z_grid):
                w = np.exp(-lam * a_int + log_cc - b * z) * c
                g = table @ w
                gx = deriv @ w
                gz = table @ (-b * w)
                if np.any(g <= 0) or np.any(gx <= 0):
                    raise SubouError(f"g or g_x nonpositive at t={t}, z={z}")
                ratios_x[i, :, kz] = gx / g
                ratios_z[i, :, kz] = (gz / g) ** 2
        for i in range(1, t_grid.size):
            n_checked += x_grid.size * z_grid.size
            bad = (ratios_x[i] >= ratios_x[i - 1]) | \
                  (ratios_z[i] >= ratios_z[i - 1] + 1e-15)
            for k, kz in zip(*np.nonzero(bad)):
                violations.append((float(x_grid[k]), float(z_grid[kz]),
                                   float(t_grid[i - 1]), float(t_grid[i])))
    return MaturityReport(holds=not violations,
                          violations=tuple(violations),
                          n_checked=n_checked)
