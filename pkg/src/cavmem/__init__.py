"""Simulation and analysis toolkit for a cavity-enhanced atomic-ensemble memory node."""

from .bell import ChshResult, ChshSettings, brute_force_chsh, chsh_error, chsh_value, optimal_chsh
from .entangle import NoiseParams, VisibilityPair, fidelity_estimate, fidelity_exact, state_at, visibilities
from .memory import (
    DecayParams,
    MemoryParams,
    cavity_factor,
    double_from_single,
    double_mode_efficiency,
    efficiency_at,
    free_space_efficiency,
    one_over_e_lifetime,
    single_mode_efficiency,
)
from .qstate import BlochVector, apply_noise, correlation, make_entangled_pair, outcome_probabilities

__version__ = "0.1.0"
