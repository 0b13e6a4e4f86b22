"""Retrieval-efficiency models for a ring-cavity DLCZ memory.

Times are in milliseconds throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class MemoryParams:
    finesse: float
    cooperativity: float

    def __post_init__(self):
        if not self.finesse > 0:
            raise ValueError(f"finesse must be positive, got {self.finesse}")
        if not self.cooperativity >= 0:
            raise ValueError(f"cooperativity must be non-negative, got {self.cooperativity}")

    @property
    def enhancement(self) -> float:
        return cavity_factor(self.finesse)


@dataclass(frozen=True)
class DecayParams:
    """Two-component exponential decay ``A1 exp(-t/tau1) + A2 exp(-t/tau2)``.

    ``covariance`` is ordered (A1, A2, tau1, tau2) when present.
    """

    A1: float
    A2: float
    tau1: float
    tau2: float
    covariance: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.A1 < 0 or self.A2 < 0:
            raise ValueError("decay amplitudes must be non-negative")
        if not (self.tau1 > 0 and self.tau2 > 0):
            raise ValueError("decay time constants must be positive")
        allowance = 0.0
        if self.covariance is not None:
            cov = np.asarray(self.covariance, dtype=float)
            if cov.shape != (4, 4):
                raise ValueError("covariance must be 4x4")
            object.__setattr__(self, "covariance", cov)
            var_sum = cov[0, 0] + cov[1, 1] + 2 * cov[0, 1]
            allowance = 3.0 * math.sqrt(max(var_sum, 0.0))
        if self.A1 + self.A2 > 1.0 + allowance + 1e-12:
            raise ValueError(f"A1 + A2 = {self.A1 + self.A2:.4f} exceeds unit efficiency")

    @property
    def initial(self) -> float:
        return self.A1 + self.A2

    @property
    def errors(self) -> np.ndarray | None:
        if self.covariance is None:
            return None
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    def as_array(self) -> np.ndarray:
        return np.array([self.A1, self.A2, self.tau1, self.tau2])

    def to_dict(self) -> dict:
        out = {"A1": self.A1, "A2": self.A2, "tau1": self.tau1, "tau2": self.tau2}
        if self.covariance is not None:
            out["covariance"] = self.covariance.tolist()
        return out


def cavity_factor(finesse: float) -> float:
    """Cavity enhancement of the cooperativity, ``2F/pi``."""
    if not finesse > 0:
        raise ValueError(f"finesse must be positive, got {finesse}")
    return 2.0 * finesse / math.pi


def free_space_efficiency(C: float) -> float:
    if C < 0:
        raise ValueError(f"cooperativity must be non-negative, got {C}")
    return C / (C + 1.0)


def single_mode_efficiency(m: MemoryParams) -> float:
    x = m.enhancement * m.cooperativity
    return x / (x + 1.0)


def double_mode_efficiency(m: MemoryParams) -> float:
    """Dual read beams: one into the cavity, one into a free-space phase-matched
    direction, plus spontaneous emission into random directions."""
    C = m.cooperativity
    x = m.enhancement * C
    return x / (x + C + 2.0)


def double_from_single(r_sg: float, finesse: float) -> float:
    """Dual-mode efficiency expressed through the single-mode efficiency."""
    if not 0.0 < r_sg < 1.0:
        raise ValueError(f"single-mode efficiency must lie in (0, 1), got {r_sg}")
    if not finesse > 0:
        raise ValueError(f"finesse must be positive, got {finesse}")
    return 1.0 / (1.0 + math.pi / (2.0 * finesse) + 2.0 * (1.0 - r_sg) / r_sg)


def cooperativity_from_single(r_sg: float, finesse: float) -> float:
    """Invert the single-mode model for C."""
    if not 0.0 <= r_sg < 1.0:
        raise ValueError(f"single-mode efficiency must lie in [0, 1), got {r_sg}")
    return r_sg / (1.0 - r_sg) / cavity_factor(finesse)


def efficiency_at(t, d: DecayParams):
    """Retrieval efficiency after storage time ``t`` (ms); accepts arrays."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValueError("storage time must be non-negative")
    eta = d.A1 * np.exp(-t_arr / d.tau1) + d.A2 * np.exp(-t_arr / d.tau2)
    return float(eta) if eta.ndim == 0 else eta


def one_over_e_lifetime(d: DecayParams, rtol: float = 1e-9) -> float:
    """Storage time at which the efficiency has fallen to 1/e of its start value."""
    target = d.initial / math.e
    lo, hi = 0.0, 10.0 * max(d.tau1, d.tau2)
    f = lambda t: efficiency_at(t, d) - target  # noqa: E731
    if d.initial == 0:
        raise ValueError("zero initial efficiency has no lifetime")
    if f(hi) > 0:
        raise ValueError("lifetime lies outside the bisection bracket")
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
