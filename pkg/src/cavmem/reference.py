"""Reported experimental values used as defaults and comparison targets."""

from __future__ import annotations

from .memory import DecayParams

FINESSE_H = 43.4
FINESSE_V = 44.3

# decay fits, times in ms
SINGLE_MODE_DECAY = DecayParams(A1=0.26, A2=0.51, tau1=0.047, tau2=697.0)
DUAL_MODE_DECAY = DecayParams(A1=0.17, A2=0.41, tau1=0.060, tau2=703.0)
SINGLE_MODE_DECAY_ERR = (0.04, 0.01, 0.018, 32.0)
DUAL_MODE_DECAY_ERR = (0.02, 0.01, 0.021, 31.0)

INITIAL_EFFICIENCY_SINGLE = (0.77, 0.04)
INITIAL_EFFICIENCY_DUAL = (0.58, 0.02)
LIFETIME_SINGLE_MS = (407.0, 42.0)
LIFETIME_DUAL_MS = (458.0, 35.0)
HEADLINE_EFFICIENCY_100MS = 0.38

# plateau averages of the H/V and D/A visibilities for t <= 1 s
V_HV = 0.935
V_DA = 0.879
FIDELITY_ESTIMATE = 0.923
BELL_THRESHOLD_VISIBILITY = 0.707

# storage time (ms) -> (S, sigma_S)
CHSH_TABLE = {
    0.005: (2.64, 0.09),
    200.0: (2.59, 0.11),
    500.0: (2.41, 0.12),
    1000.0: (2.36, 0.14),
}
VIOLATION_SIGMA_1S = 2.57

# experiment sequence
LOADING_TIME_S = 1.5
WRITE_PERIOD_US = 5.0
P_WRITEOUT = 0.004
MAX_ATTEMPTS = 400
RELOCK_PAUSE_MS = 3.0
RELOCK_THRESHOLD_MS = 100.0
PRODUCTION_RATE_HZ = 800.0
HERALD_PROBABILITY = 0.80
MEAN_PULSES_PER_HERALD = 250.0
