"""Equivalent measure change checks between generating tuples.

Two subordinate OU processes (say under the pricing and the physical
measure) admit locally equivalent laws only under exact algebraic
restrictions on their generating tuples.  For tempered stable
subordinators the Hellinger integrability condition collapses to

    gamma sigma^2 = gamma' sigma'^2,   p = p',   C sigma^{2p} = C' sigma'^{2p}

when both jump parts have infinite activity (p, p' >= 0).  Two finite
activity jump parts are always compatible, and a finite activity part
can never be transformed into an infinite activity one.  The mean
reversion parameters kappa and theta never enter: the small-jump
asymptotics of the state-dependent Levy density do not depend on them.

The tempering rate eta is treated as freely changeable for p, p' >= 0,
consistent with the small-jump asymptotics argument; only the triplet
above is binding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UnsupportedFamilyError
from .process import GeneratingTuple

__all__ = ["Verdict", "check_equivalence", "check_physical_drift"]


@dataclass(frozen=True)
class Verdict:
    """Outcome of an equivalence check; ``reason`` explains a rejection."""

    equivalent: bool
    reason: str | None = None

    def __bool__(self) -> bool:
        return self.equivalent


def _close(a: float, b: float, tol: float) -> bool:
    return abs(a - b) <= tol * max(abs(a), abs(b), 1e-300)


def check_equivalence(tq: GeneratingTuple, tp: GeneratingTuple,
                      tol: float = 1e-9) -> Verdict:
    """Can a locally equivalent measure change map one tuple to the other?

    Both subordinators must belong to the tempered stable family (all
    specs constructed in this library do).  The check is symmetric in
    its arguments.
    """
    sq, sp = tq.subordinator, tp.subordinator
    for s in (sq, sp):
        if s.has_jumps and not s.p < 1:
            raise UnsupportedFamilyError("subordinator outside the tempered "
                                         "stable family")

    if not _close(sq.drift * tq.sigma ** 2, sp.drift * tp.sigma ** 2, tol):
        return Verdict(False, "diffusion parts differ: gamma sigma^2 != "
                              "gamma' sigma'^2")

    q_inf = sq.infinite_activity
    p_inf = sp.infinite_activity
    if q_inf != p_inf:
        return Verdict(False, "mixed finite/infinite jump activity")
    if not q_inf:
        # Both finite activity: the Hellinger condition holds automatically.
        return Verdict(True)

    if not _close(sq.p, sp.p, tol):
        return Verdict(False, "p != p'")
    if not _close(sq.c * tq.sigma ** (2.0 * sq.p),
                  sp.c * tp.sigma ** (2.0 * sp.p), tol):
        return Verdict(False, "C sigma^{2p} != C' sigma'^{2p}")
    return Verdict(True)


def check_physical_drift(tq: GeneratingTuple, tp: GeneratingTuple,
                         h_times, h_values,
                         tol: float = 1e-9) -> Verdict:
    """Equivalence check when the physical dynamics carry a drift H(t).

    ``h_times``/``h_values`` give H as a piecewise-linear function
    (hence absolutely continuous).  H must vanish identically when the
    pricing-measure subordinator has no drift, and must start at
    H(0) = 0 otherwise; the remaining conditions are those of
    :func:`check_equivalence`.
    """
    h_times = np.asarray(h_times, dtype=float)
    h_values = np.asarray(h_values, dtype=float)
    if h_times.shape != h_values.shape or h_times.ndim != 1 or h_times.size == 0:
        raise ValueError("H must be given as matching 1-d knot arrays")
    if np.any(np.diff(h_times) <= 0):
        raise ValueError("H knot times must be strictly increasing")

    h0 = float(np.interp(0.0, h_times, h_values))
    if tq.subordinator.drift == 0:
        if np.any(np.abs(h_values) > tol):
            return Verdict(False, "pure-jump drift: H must vanish identically "
                                  "when gamma = 0")
    elif abs(h0) > tol:
        return Verdict(False, "H(0) != 0")

    return check_equivalence(tq, tp, tol)
