"""Two-node entanglement swapping.

Each node holds a write-out photon entangled with its memory (represented by
the read-out photon image).  The two write-out photons meet at a linear-optics
Bell-state measurement; on success the two memories share an entangled pair.

Everything in this module is an extension beyond the single-node experiment;
reports carry an ``extension`` flag to say so.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import bell, entangle, qstate, reference
from .entangle import VisibilityPair
from .memory import DecayParams, efficiency_at
from .sequencer import SequenceConfig

LINEAR_OPTICS_BSM = 0.5

_PAULI_CORRECTIONS = {"I": qstate.IDENTITY2, "X": qstate.SIGMA_X, "Y": qstate.SIGMA_Y, "Z": qstate.SIGMA_Z}


def _bell_ket(name: str) -> np.ndarray:
    s = 1 / np.sqrt(2)
    kets = {
        "phi+": [s, 0, 0, s],
        "phi-": [s, 0, 0, -s],
        "psi+": [0, s, s, 0],
        "psi-": [0, s, -s, 0],
    }
    if name not in kets:
        raise ValueError(f"unknown Bell outcome {name!r}")
    return np.array(kets[name], dtype=complex)


@dataclass(frozen=True)
class NodeSpec:
    decay: DecayParams = reference.DUAL_MODE_DECAY
    visib: VisibilityPair = field(
        default_factory=lambda: VisibilityPair(reference.V_HV, reference.V_DA)
    )
    seq: SequenceConfig = field(default_factory=SequenceConfig)
    link_transmission: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.link_transmission <= 1.0:
            raise ValueError("link_transmission must lie in [0, 1]")

    def state(self, t_store: float) -> np.ndarray:
        return entangle.state_at(t_store, self.visib)

    def to_dict(self) -> dict:
        return {
            "decay": self.decay.to_dict(),
            "visib": {"v_hv": self.visib.v_hv, "v_da": self.visib.v_da},
            "seq": self.seq.to_dict(),
            "link_transmission": self.link_transmission,
        }


def ideal_node() -> NodeSpec:
    """Lossless node: unit visibilities and retrieval, deterministic heralding."""
    decay = DecayParams(A1=0.0, A2=1.0, tau1=1.0, tau2=1e300)
    seq = SequenceConfig(loading_time=0.0, p_writeout=1.0, decay=decay, visib=VisibilityPair(1.0, 1.0))
    return NodeSpec(decay=decay, visib=VisibilityPair(1.0, 1.0), seq=seq, link_transmission=1.0)


@dataclass(frozen=True)
class SwapOutcome:
    success_prob: float
    joint_state: np.ndarray
    end_to_end_rate: float
    outcome_prob: float = 0.0
    bsm_outcome: str = "psi-"
    correction: str = "I"

    def to_json(self) -> dict:
        vis = entangle.visibilities(self.joint_state)
        return {
            "schema_version": 1,
            "extension": True,
            "success_prob": self.success_prob,
            "end_to_end_rate_hz": self.end_to_end_rate,
            "bsm_outcome": self.bsm_outcome,
            "bsm_outcome_prob": self.outcome_prob,
            "correction": self.correction,
            "joint_visibilities": {"v_hv": vis.v_hv, "v_da": vis.v_da, "v_rl": vis.v_rl},
            "joint_chsh_max": bell.optimal_chsh(self.joint_state).s,
            "joint_state": {
                "real": self.joint_state.real.tolist(),
                "imag": self.joint_state.imag.tolist(),
            },
        }


def project_photons(rho_a, rho_b, outcome: str = "psi-") -> tuple[np.ndarray, float]:
    """Project the write-out photons of ``rho_a (x) rho_b`` onto a Bell state.

    Qubit order of each node state is (write-out, memory).  Returns the
    normalized memory-memory state and the probability of the outcome.
    """
    beta = _bell_ket(outcome).reshape(2, 2)
    full = np.kron(np.asarray(rho_a), np.asarray(rho_b)).reshape([2] * 8)
    # indices: wa ra wb rb | wa' ra' wb' rb'
    out = np.einsum("ac,arcsbtdu,bd->rstu", beta.conj(), full, beta)
    out = out.reshape(4, 4)
    prob = float(np.trace(out).real)
    if prob <= 1e-15:
        return qstate.maximally_mixed(), 0.0
    return out / prob, prob


def _correction_for(outcome: str) -> str:
    ideal = qstate.make_entangled_pair(0.0)
    target = qstate.pure_state_vector(0.0)
    rho, _ = project_photons(ideal, ideal, outcome)
    for name, p in _PAULI_CORRECTIONS.items():
        fixed = qstate.local_unitary(rho, qstate.IDENTITY2, p)
        if abs((target.conj() @ fixed @ target).real - 1.0) < 1e-9:
            return name
    raise RuntimeError(f"no Pauli correction found for outcome {outcome}")


def swap_states(rho_a, rho_b, outcome: str = "psi-", interference_visibility: float = 1.0):
    """Heralded memory-memory state after the Bell measurement and correction."""
    if not 0.0 <= interference_visibility <= 1.0:
        raise ValueError("interference_visibility must lie in [0, 1]")
    rho, prob = project_photons(rho_a, rho_b, outcome)
    corr = _correction_for(outcome)
    rho = qstate.local_unitary(rho, qstate.IDENTITY2, _PAULI_CORRECTIONS[corr])
    if interference_visibility < 1.0:
        # distinguishable photons wash out the swapped coherences
        diag = np.diag(np.diag(rho))
        rho = interference_visibility * rho + (1.0 - interference_visibility) * diag
    return rho, prob, corr


def composed_visibilities(a: VisibilityPair, b: VisibilityPair) -> VisibilityPair:
    """Closed form for swapping two states of the white-noise/damping family:
    correlation-tensor diagonals multiply."""
    return VisibilityPair(a.v_hv * b.v_hv, a.v_da * b.v_da)


def success_probability(a: NodeSpec, b: NodeSpec, t_store: float, bsm_efficiency: float = LINEAR_OPTICS_BSM) -> float:
    return (
        bsm_efficiency
        * a.link_transmission
        * b.link_transmission
        * efficiency_at(t_store, a.decay)
        * efficiency_at(t_store, b.decay)
        * a.seq.detector_efficiency
        * b.seq.detector_efficiency
    )


def _both_herald(a: NodeSpec, b: NodeSpec) -> tuple[float, float, int]:
    """(P both herald within the budget, expected lockstep write rounds, budget)."""
    n = int(min(a.seq.max_attempts, b.seq.max_attempts))
    qa, qb = 1.0 - a.seq.p_writeout, 1.0 - b.seq.p_writeout
    k = np.arange(n)
    # P(max(Ga, Gb) > k) summed over k gives E[min(max, n)]
    rounds = float(np.sum(1.0 - (1.0 - qa**k) * (1.0 - qb**k)))
    p_both = (1.0 - qa**n) * (1.0 - qb**n)
    return p_both, rounds, n


def herald_coincidence_rate(a: NodeSpec, b: NodeSpec, t_store: float = 0.0, include_loading: bool = False) -> float:
    """Rate (Hz) at which both nodes hold a heralded excitation.

    The nodes pulse in lockstep at the slower write period.  Without loading
    only write-phase time is counted, matching the single-node production
    rate convention; with loading each cycle also pays the loading time and,
    when both herald, the storage and relock time.
    """
    p_both, rounds, _ = _both_herald(a, b)
    period_ms = max(a.seq.write_period, b.seq.write_period) * 1e-3
    cycle_ms = rounds * period_ms
    if include_loading:
        relock = a.seq.relock_pause if t_store > reference.RELOCK_THRESHOLD_MS else 0.0
        cycle_ms += max(a.seq.loading_time, b.seq.loading_time) * 1e3 + p_both * (t_store + relock)
    if cycle_ms <= 0:
        return 0.0
    return p_both / (cycle_ms * 1e-3)


def end_to_end_rate(
    a: NodeSpec,
    b: NodeSpec,
    t_store: float,
    bsm_efficiency: float = LINEAR_OPTICS_BSM,
    include_loading: bool = False,
) -> float:
    """Expected successful swaps per second."""
    return herald_coincidence_rate(a, b, t_store, include_loading) * success_probability(a, b, t_store, bsm_efficiency)


def simulate_end_to_end_rate(
    a: NodeSpec,
    b: NodeSpec,
    t_store: float,
    n_cycles: int,
    seed: int = 0,
    bsm_efficiency: float = LINEAR_OPTICS_BSM,
    include_loading: bool = False,
) -> float:
    """Monte Carlo estimate of :func:`end_to_end_rate`."""
    rng = np.random.default_rng(seed)
    n = int(min(a.seq.max_attempts, b.seq.max_attempts))
    ga = rng.geometric(a.seq.p_writeout, size=n_cycles) if a.seq.p_writeout > 0 else np.full(n_cycles, n + 1)
    gb = rng.geometric(b.seq.p_writeout, size=n_cycles) if b.seq.p_writeout > 0 else np.full(n_cycles, n + 1)
    both = (ga <= n) & (gb <= n)
    rounds = np.minimum(np.maximum(ga, gb), n)
    period_ms = max(a.seq.write_period, b.seq.write_period) * 1e-3
    elapsed_ms = rounds.sum() * period_ms
    if include_loading:
        relock = a.seq.relock_pause if t_store > reference.RELOCK_THRESHOLD_MS else 0.0
        elapsed_ms += n_cycles * max(a.seq.loading_time, b.seq.loading_time) * 1e3
        elapsed_ms += both.sum() * (t_store + relock)
    p_success = success_probability(a, b, t_store, bsm_efficiency)
    successes = both & (rng.random(n_cycles) < p_success)
    return successes.sum() / (elapsed_ms * 1e-3)


def swap(
    a: NodeSpec,
    b: NodeSpec,
    t_store: float,
    bsm_efficiency: float = LINEAR_OPTICS_BSM,
    interference_visibility: float = 1.0,
    outcome: str = "psi-",
    include_loading: bool = False,
) -> SwapOutcome:
    if t_store < 0:
        raise ValueError("t_store must be non-negative")
    if not 0.0 <= bsm_efficiency <= 1.0:
        raise ValueError("bsm_efficiency must lie in [0, 1]")
    rho, prob, corr = swap_states(a.state(t_store), b.state(t_store), outcome, interference_visibility)
    return SwapOutcome(
        success_prob=success_probability(a, b, t_store, bsm_efficiency),
        joint_state=rho,
        end_to_end_rate=end_to_end_rate(a, b, t_store, bsm_efficiency, include_loading),
        outcome_prob=prob,
        bsm_outcome=outcome,
        correction=corr,
    )


def with_overrides(node: NodeSpec, **kwargs) -> NodeSpec:
    return replace(node, **kwargs)
