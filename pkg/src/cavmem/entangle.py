"""Atom-photon entanglement as seen through its photon-pair image.

The atomic qubit is only ever observed after conversion to the read-out photon,
so the state lives entirely in the two-photon polarization space of
:mod:`cavmem.qstate`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import qstate
from .qstate import X_AXIS, Y_AXIS, Z_AXIS

PLATEAU_END_MS = 1000.0


class PlateauExtrapolationWarning(UserWarning):
    """Requested a storage time past the measured visibility plateau with no decay slope."""


@dataclass(frozen=True)
class NoiseParams:
    p: float = 0.0
    d: float = 1.0
    phi0: float = 0.0
    sigma_phi: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")
        if not 0.0 <= self.d <= 1.0:
            raise ValueError(f"d must lie in [0, 1], got {self.d}")
        if not math.isfinite(self.phi0):
            raise ValueError("phi0 must be finite")
        if not self.sigma_phi >= 0:
            raise ValueError("sigma_phi must be non-negative")

    @property
    def effective_damping(self) -> float:
        # Gaussian phase jitter averages the coherence by exp(-sigma^2/2)
        return self.d * math.exp(-0.5 * self.sigma_phi**2)


@dataclass(frozen=True)
class VisibilityPair:
    v_hv: float
    v_da: float

    def __post_init__(self):
        for name in ("v_hv", "v_da"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")


@dataclass(frozen=True)
class Visibilities:
    v_hv: float
    v_da: float
    v_rl: float

    @property
    def pair(self) -> VisibilityPair:
        return VisibilityPair(min(self.v_hv, 1.0), min(self.v_da, 1.0))


def _basis_visibility(rho, axis) -> float:
    pp, pm, mp, mm = qstate.outcome_probabilities(rho, axis, axis)
    return float(abs(pm + mp - pp - mm) / (pp + pm + mp + mm))


def visibilities(rho) -> Visibilities:
    """Coincidence visibilities in the H/V, D/A and R/L bases."""
    return Visibilities(
        v_hv=_basis_visibility(rho, Z_AXIS),
        v_da=_basis_visibility(rho, X_AXIS),
        v_rl=_basis_visibility(rho, Y_AXIS),
    )


def noise_from_visibilities(v: VisibilityPair) -> NoiseParams:
    if v.v_da > v.v_hv + 1e-12:
        raise ValueError(
            f"v_da={v.v_da} exceeds v_hv={v.v_hv}; not representable by white noise plus damping"
        )
    if v.v_hv == 0.0:
        # fully depolarized; the damping factor is irrelevant
        return NoiseParams(p=1.0, d=1.0, phi0=0.0)
    return NoiseParams(p=1.0 - v.v_hv, d=min(v.v_da / v.v_hv, 1.0), phi0=0.0)


def fidelity_estimate(v: VisibilityPair) -> float:
    """Fidelity lower estimate from H/V and D/A visibilities.

    Assumes the unmeasured circular-basis visibility equals the D/A one.
    """
    return (1.0 + v.v_hv + 2.0 * v.v_da) / 4.0


def fidelity_exact(rho, phase: float = 0.0) -> float:
    psi = qstate.pure_state_vector(phase)
    return float((psi.conj() @ np.asarray(rho) @ psi).real)


def state_at(t: float, v: VisibilityPair, snr_slope: float = 0.0) -> np.ndarray:
    """Photon-pair state after storing for ``t`` ms.

    Visibilities are flat up to 1 s.  Beyond that an extra white-noise weight
    ``snr_slope * (t - 1000)`` (per ms, capped at 1) is mixed in.
    """
    if t < 0:
        raise ValueError("storage time must be non-negative")
    rho = qstate.apply_noise(qstate.make_entangled_pair(0.0), noise_from_visibilities(v))
    if t <= PLATEAU_END_MS:
        return rho
    if snr_slope == 0.0:
        warnings.warn(
            f"t={t} ms lies beyond the visibility plateau; no degradation slope configured",
            PlateauExtrapolationWarning,
            stacklevel=2,
        )
        return rho
    extra = min(1.0, snr_slope * (t - PLATEAU_END_MS))
    return (1.0 - extra) * rho + extra * qstate.maximally_mixed()
