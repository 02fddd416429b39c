"""Levy subordinator specifications.

A subordinator is a nondecreasing Levy process characterized by a drift
``gamma >= 0`` and a Levy measure ``nu`` through the Laplace exponent

    phi(lambda) = gamma lambda + integral of (1 - e^{-lambda s}) nu(ds).

All jump parts handled here belong to the tempered stable family

    nu(s) = C s^{-1-p} e^{-eta s},   C > 0, p < 1, eta >= 0,

which contains the Gamma subordinator (p = 0), the Inverse Gaussian
subordinator (p = 1/2), and the compound Poisson subordinator with
exponential jumps (p = -1) as special cases.  Those three members admit
exact increment sampling; the general tempered stable case is evaluated
analytically but not sampled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma as gamma_fn

from .errors import UnsupportedFamilyError

__all__ = [
    "SubordinatorSpec",
    "laplace_exponent",
    "levy_density",
    "bg_index",
    "sample_increment",
]

_SAMPLEABLE_P = (-1.0, 0.0, 0.5)


@dataclass(frozen=True)
class SubordinatorSpec:
    """Tempered stable subordinator with drift.

    Attributes
    ----------
    drift : float
        Linear drift gamma >= 0 of the subordinator.
    c, p, eta : float
        Parameters of the tempered stable Levy density
        C s^{-1-p} e^{-eta s}.  ``c = 0`` means no jump part.
    """

    drift: float = 0.0
    c: float = 0.0
    p: float = 0.0
    eta: float = 0.0

    def __post_init__(self):
        if self.drift < 0:
            raise ValueError("subordinator drift must be >= 0")
        if self.c < 0:
            raise ValueError("Levy density scale C must be >= 0")
        if self.c > 0:
            if not self.p < 1:
                raise ValueError("stability index p must be < 1")
            if self.eta < 0:
                raise ValueError("tempering rate eta must be >= 0")
            if self.eta == 0 and not 0 < self.p < 1:
                raise ValueError("eta = 0 (stable case) requires 0 < p < 1")

    # -- constructors -------------------------------------------------

    @classmethod
    def pure_drift(cls, drift: float) -> "SubordinatorSpec":
        """Deterministic time change T_t = drift * t."""
        return cls(drift=drift)

    @classmethod
    def tempered_stable(cls, c: float, p: float, eta: float,
                        drift: float = 0.0) -> "SubordinatorSpec":
        return cls(drift=drift, c=c, p=p, eta=eta)

    @classmethod
    def gamma_process(cls, c: float, eta: float,
                      drift: float = 0.0) -> "SubordinatorSpec":
        """Gamma subordinator: nu(s) = C s^{-1} e^{-eta s}."""
        return cls(drift=drift, c=c, p=0.0, eta=eta)

    @classmethod
    def inverse_gaussian(cls, mean_rate: float, variance_rate: float,
                         drift: float = 0.0) -> "SubordinatorSpec":
        """IG subordinator with E[T_1] = mean_rate, Var[T_1] = variance_rate.

        Matching the first two cumulants of the tempered stable Laplace
        exponent at p = 1/2 gives C = mu^{3/2} / sqrt(2 pi nu) and
        eta = mu / (2 nu), equivalently the closed form
        phi(lam) = (mu^2/nu) (sqrt(1 + 2 nu lam / mu^2) - 1).
        """
        if mean_rate <= 0 or variance_rate <= 0:
            raise ValueError("IG mean and variance rates must be > 0")
        c = mean_rate ** 1.5 / math.sqrt(2.0 * math.pi * variance_rate)
        eta = mean_rate / (2.0 * variance_rate)
        return cls(drift=drift, c=c, p=0.5, eta=eta)

    @classmethod
    def compound_poisson_exp(cls, rate: float, mean_jump: float,
                             drift: float = 0.0) -> "SubordinatorSpec":
        """Compound Poisson subordinator with exponential jumps.

        Arrival rate alpha >= 0 and mean jump size 1/eta map onto the
        tempered stable member with p = -1 and C = alpha * eta.
        """
        if rate < 0:
            raise ValueError("arrival rate must be >= 0")
        if mean_jump <= 0:
            raise ValueError("mean jump size must be > 0")
        eta = 1.0 / mean_jump
        return cls(drift=drift, c=rate * eta, p=-1.0, eta=eta)

    # -- simple structure queries -------------------------------------

    @property
    def has_jumps(self) -> bool:
        return self.c > 0

    @property
    def infinite_activity(self) -> bool:
        return self.c > 0 and self.p >= 0

    def mean_rate(self) -> float:
        """E[T_1] = phi'(0)."""
        if self.c == 0:
            return self.drift
        if self.eta == 0:
            return math.inf
        return self.drift + self.c * gamma_fn(1.0 - self.p) * self.eta ** (self.p - 1.0)

    def variance_rate(self) -> float:
        """Var[T_1] = -phi''(0)."""
        if self.c == 0:
            return 0.0
        if self.eta == 0:
            return math.inf
        return self.c * gamma_fn(2.0 - self.p) * self.eta ** (self.p - 2.0)


def laplace_exponent(spec: SubordinatorSpec, lam):
    """Laplace exponent phi(lambda) of the subordinator, lambda >= 0.

    For the tempered stable family,
    phi(lam) = gamma lam - C Gamma(-p) [(lam + eta)^p - eta^p] when
    p != 0 and phi(lam) = gamma lam + C log(1 + lam/eta) when p = 0.
    """
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0):
        raise ValueError("lambda must be >= 0")
    out = spec.drift * lam
    if spec.c > 0:
        if spec.p == 0.0:
            out = out + spec.c * np.log1p(lam / spec.eta)
        else:
            out = out - spec.c * gamma_fn(-spec.p) * (
                (lam + spec.eta) ** spec.p - spec.eta ** spec.p)
    return float(out) if out.ndim == 0 else out


def levy_density(spec: SubordinatorSpec, s):
    """Levy density nu(s) = C s^{-1-p} e^{-eta s} at s > 0."""
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0):
        raise ValueError("jump size s must be > 0")
    out = spec.c * s ** (-1.0 - spec.p) * np.exp(-spec.eta * s)
    return float(out) if out.ndim == 0 else out


def bg_index(spec: SubordinatorSpec) -> float:
    """Blumenthal-Getoor index of the subordinator: max(p, 0)."""
    if not spec.has_jumps:
        return 0.0
    return max(spec.p, 0.0)


def sample_increment(spec: SubordinatorSpec, dt,
                     rng: np.random.Generator, size=None):
    """Draw T_{t+dt} - T_t exactly.

    ``dt`` may be a scalar (optionally with ``size`` independent draws)
    or an array of per-draw elapsed times.  Supported jump families:
    Inverse Gaussian (p = 1/2), Gamma (p = 0) and compound Poisson with
    exponential jumps (p = -1).  The general tempered stable case has no
    exact sampler here and raises :class:`UnsupportedFamilyError`.
    """
    dt = np.asarray(dt, dtype=float)
    if np.any(dt <= 0):
        raise ValueError("dt must be > 0")
    if dt.ndim > 0 and size is not None and tuple(np.shape(size)) != ():
        raise ValueError("pass either an array dt or a size, not both")
    base = spec.drift * dt
    if spec.c == 0:
        if size is None:
            return base if dt.ndim > 0 else float(base)
        return np.broadcast_to(base, size).copy() if dt.ndim == 0 \
            else np.full(size, base)

    if spec.p == 0.5:
        if spec.eta == 0:
            raise UnsupportedFamilyError(
                "stable 1/2 subordinator has no finite-mean sampler")
        delta = spec.c * math.sqrt(2.0 * math.pi)
        gam = math.sqrt(2.0 * spec.eta)
        mean = delta * dt / gam
        shape = (delta * dt) ** 2
        return base + rng.wald(mean, shape, size=size)

    if spec.p == 0.0:
        return base + rng.gamma(spec.c * dt, 1.0 / spec.eta, size=size)

    if spec.p == -1.0:
        rate = spec.c / spec.eta
        counts = rng.poisson(rate * dt, size=size)
        # Gamma with integer shape k is the sum of k unit-rate exponentials.
        return base + rng.gamma(counts, 1.0 / spec.eta)

    raise UnsupportedFamilyError(
        f"no exact sampler for tempered stable index p={spec.p}; "
        f"supported values are {_SAMPLEABLE_P}")
