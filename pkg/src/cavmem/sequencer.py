"""Seeded Monte Carlo of the loading / write / store / read cycle.

One trial is one atom-loading cycle: load, then alternate pump and write
pulses until a write-out photon is heralded or the attempt budget runs out.
A heralded excitation is stored, read out, and the read-out photon is
detected behind a polarization analyzer.

Trials are simulated in fixed-size blocks, each with its own child seed
spawned from the run seed, so results do not depend on how blocks are
scheduled.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import entangle, qstate, reference
from .bell import ChshSettings
from .entangle import VisibilityPair
from .memory import DecayParams, efficiency_at
from .qstate import BASES, BlochVector

BLOCK_SIZE = 4096


@dataclass(frozen=True)
class SequenceConfig:
    """Units: ``loading_time`` in s, ``write_period`` in us, other times in ms."""

    loading_time: float = reference.LOADING_TIME_S
    write_period: float = reference.WRITE_PERIOD_US
    p_writeout: float = reference.P_WRITEOUT
    max_attempts: int = reference.MAX_ATTEMPTS
    storage_time: float = 0.005
    relock_pause: float = reference.RELOCK_PAUSE_MS
    detector_efficiency: float = 1.0
    dark_count_prob: float = 0.0
    decay: DecayParams = reference.DUAL_MODE_DECAY
    visib: VisibilityPair = field(
        default_factory=lambda: VisibilityPair(reference.V_HV, reference.V_DA)
    )
    settings: str | ChshSettings = "HV"
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p_writeout <= 1.0:
            raise ValueError("p_writeout must lie in [0, 1]")
        if not 0.0 <= self.detector_efficiency <= 1.0:
            raise ValueError("detector_efficiency must lie in [0, 1]")
        if not 0.0 <= self.dark_count_prob < 1.0:
            raise ValueError("dark_count_prob must lie in [0, 1)")
        if int(self.max_attempts) != self.max_attempts or self.max_attempts < 1:
            raise ValueError("max_attempts must be a positive integer")
        if self.loading_time < 0 or self.write_period <= 0:
            raise ValueError("loading_time must be >= 0 and write_period > 0")
        if self.storage_time < 0 or self.relock_pause < 0:
            raise ValueError("storage_time and relock_pause must be non-negative")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if isinstance(self.settings, str) and self.settings not in BASES:
            raise ValueError(f"unknown basis {self.settings!r}; choose from {sorted(BASES)}")

    @property
    def relock_applied(self) -> bool:
        return self.storage_time > reference.RELOCK_THRESHOLD_MS

    def setting_pairs(self) -> list[tuple[BlochVector, BlochVector]]:
        if isinstance(self.settings, ChshSettings):
            return self.settings.pairs()
        axis = BASES[self.settings]
        return [(axis, axis)]

    def setting_labels(self) -> list[str]:
        if isinstance(self.settings, ChshSettings):
            return ["a,b", "a,b'", "a',b", "a',b'"]
        return [self.settings]

    def to_dict(self) -> dict:
        settings = self.settings if isinstance(self.settings, str) else self.settings.to_dict()
        return {
            "loading_time": self.loading_time,
            "write_period": self.write_period,
            "p_writeout": self.p_writeout,
            "max_attempts": int(self.max_attempts),
            "storage_time": self.storage_time,
            "relock_pause": self.relock_pause,
            "detector_efficiency": self.detector_efficiency,
            "dark_count_prob": self.dark_count_prob,
            "decay": self.decay.to_dict(),
            "visib": {"v_hv": self.visib.v_hv, "v_da": self.visib.v_da},
            "settings": settings,
            "seed": self.seed,
        }


@dataclass
class EventLog:
    """Per-trial records; times are in ms from the start of the run.

    ``write_outcome`` / ``read_outcome`` hold +1/-1 for analyzer outcomes and 0
    when there is nothing to record (no herald, or no read-out click).
    """

    config: SequenceConfig
    n_attempts: np.ndarray
    heralded: np.ndarray
    setting: np.ndarray
    t_start: np.ndarray
    t_herald: np.ndarray
    t_read: np.ndarray
    t_end: np.ndarray
    retrieved: np.ndarray
    photon_detected: np.ndarray
    dark_plus: np.ndarray
    dark_minus: np.ndarray
    write_outcome: np.ndarray
    read_outcome: np.ndarray

    def __len__(self):
        return self.n_attempts.size

    @property
    def n_heralds(self) -> int:
        return int(self.heralded.sum())

    @property
    def write_phase_time_ms(self) -> float:
        return float(self.n_attempts.sum()) * self.config.write_period * 1e-3

    @property
    def total_time_ms(self) -> float:
        return float(self.t_end[-1] - self.t_start[0])

    _FIELDS = (
        "n_attempts", "heralded", "setting", "t_start", "t_herald", "t_read", "t_end",
        "retrieved", "photon_detected", "dark_plus", "dark_minus", "write_outcome", "read_outcome",
    )

    def to_json(self) -> dict:
        out = {"schema_version": 1, "config": self.config.to_dict(), "n_trials": len(self)}
        for name in self._FIELDS:
            arr = getattr(self, name)
            if arr.dtype == bool:
                out[name] = arr.astype(int).tolist()
            elif np.issubdtype(arr.dtype, np.floating):
                out[name] = [None if math.isnan(v) else v for v in arr.tolist()]
            else:
                out[name] = arr.tolist()
        return out

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["trial", *self._FIELDS])
            cols = [getattr(self, name) for name in self._FIELDS]
            for i in range(len(self)):
                row = [i]
                for col in cols:
                    v = col[i]
                    if col.dtype == bool:
                        row.append(int(v))
                    elif np.issubdtype(col.dtype, np.floating):
                        row.append("" if math.isnan(v) else repr(float(v)))
                    else:
                        row.append(int(v))
                w.writerow(row)


@dataclass(frozen=True)
class CoincidenceTable:
    """Counts ``(n++, n+-, n-+, n--)`` per analyzer setting pair.

    First index is the write-out outcome, second the read-out outcome; ``+`` is
    H for the H/V basis and D for the D/A basis.
    """

    labels: tuple[str, ...]
    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.shape != (len(self.labels), 4):
            raise ValueError("counts must have one row of 4 outcomes per setting")
        if np.any(c < 0):
            raise ValueError("counts must be non-negative")
        object.__setattr__(self, "counts", c)

    def visibility(self, k: int = 0) -> float:
        pp, pm, mp, mm = self.counts[k]
        total = pp + pm + mp + mm
        if total == 0:
            raise ValueError(f"setting {self.labels[k]!r} has no coincidences")
        return float(abs(pm + mp - pp - mm) / total)

    def to_json(self) -> dict:
        return {
            "schema_version": 1,
            "outcome_order": ["++", "+-", "-+", "--"],
            "settings": {lab: row.tolist() for lab, row in zip(self.labels, self.counts)},
        }


def herald_probability(cfg: SequenceConfig) -> float:
    return 1.0 - (1.0 - cfg.p_writeout) ** cfg.max_attempts


def mean_attempts(cfg: SequenceConfig) -> float:
    """Expected write pulses per loading cycle, ``E[min(G, N)]``."""
    if cfg.p_writeout == 0:
        return float(cfg.max_attempts)
    return herald_probability(cfg) / cfg.p_writeout


def expected_production_rate(cfg: SequenceConfig, include_loading: bool = False) -> float:
    """Heralds per second from the timing model, without sampling."""
    ph = herald_probability(cfg)
    write_ms = mean_attempts(cfg) * cfg.write_period * 1e-3
    if not include_loading:
        return ph / (write_ms * 1e-3)
    hold = cfg.storage_time + (cfg.relock_pause if cfg.relock_applied else 0.0)
    total_ms = cfg.loading_time * 1e3 + write_ms + ph * hold
    return ph / (total_ms * 1e-3)


def _sample_attempts(rng: np.random.Generator, cfg: SequenceConfig, n: int) -> tuple[np.ndarray, np.ndarray]:
    # attempts-until-success is geometric; identical to repeated Bernoulli pulses
    if cfg.p_writeout == 0:
        return np.full(n, cfg.max_attempts, dtype=np.int64), np.zeros(n, dtype=bool)
    g = rng.geometric(cfg.p_writeout, size=n)
    heralded = g <= cfg.max_attempts
    return np.minimum(g, cfg.max_attempts).astype(np.int64), heralded


def _simulate_block(cfg: SequenceConfig, n: int, seed_seq: np.random.SeedSequence, joint: np.ndarray) -> dict:
    rng = np.random.default_rng(seed_seq)
    n_attempts, heralded = _sample_attempts(rng, cfg, n)
    setting = rng.integers(0, joint.shape[0], size=n)

    # joint analyzer outcome index in (++, +-, -+, --) order
    u = rng.random(n)
    cdf = np.cumsum(joint, axis=1)
    cdf[:, -1] = 1.0
    outcome = (u[:, None] > cdf[setting]).sum(axis=1)
    w_sign = np.where(outcome < 2, 1, -1)
    r_sign = np.where(outcome % 2 == 0, 1, -1)

    eta = efficiency_at(cfg.storage_time, cfg.decay)
    retrieved = heralded & (rng.random(n) < eta)
    detected = retrieved & (rng.random(n) < cfg.detector_efficiency)
    dark_p = heralded & (rng.random(n) < cfg.dark_count_prob)
    dark_m = heralded & (rng.random(n) < cfg.dark_count_prob)
    tie = rng.random(n) < 0.5

    click_p = (detected & (r_sign == 1)) | dark_p
    click_m = (detected & (r_sign == -1)) | dark_m
    # a double click is resolved to a random outcome
    read = np.where(click_p & click_m, np.where(tie, 1, -1), np.where(click_p, 1, np.where(click_m, -1, 0)))
    return {
        "n_attempts": n_attempts,
        "heralded": heralded,
        "setting": setting,
        "retrieved": retrieved,
        "photon_detected": detected,
        "dark_plus": dark_p,
        "dark_minus": dark_m,
        "write_outcome": np.where(heralded, w_sign, 0),
        "read_outcome": np.where(heralded, read, 0),
    }


def _timeline(cfg: SequenceConfig, n_attempts: np.ndarray, heralded: np.ndarray):
    load = cfg.loading_time * 1e3
    write = n_attempts * cfg.write_period * 1e-3
    hold = cfg.storage_time + (cfg.relock_pause if cfg.relock_applied else 0.0)
    duration = load + write + np.where(heralded, hold, 0.0)
    t_end = np.cumsum(duration)
    t_start = np.concatenate(([0.0], t_end[:-1]))
    t_herald = np.where(heralded, t_start + load + write, np.nan)
    t_read = np.where(heralded, t_herald + cfg.storage_time, np.nan)
    return t_start, t_herald, t_read, t_end


def run_trials(cfg: SequenceConfig, n_trials: int, workers: int = 1) -> EventLog:
    """Simulate ``n_trials`` loading cycles; reproducible from ``cfg.seed``."""
    if n_trials < 1:
        raise ValueError("n_trials must be at least 1")
    rho = entangle.state_at(cfg.storage_time, cfg.visib)
    joint = np.array([qstate.outcome_probabilities(rho, a, b) for a, b in cfg.setting_pairs()])

    sizes = [BLOCK_SIZE] * (n_trials // BLOCK_SIZE)
    if n_trials % BLOCK_SIZE:
        sizes.append(n_trials % BLOCK_SIZE)
    children = np.random.SeedSequence(cfg.seed).spawn(len(sizes))
    jobs = list(zip(sizes, children))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            blocks = list(pool.map(lambda job: _simulate_block(cfg, job[0], job[1], joint), jobs))
    else:
        blocks = [_simulate_block(cfg, n, ss, joint) for n, ss in jobs]
    merged = {k: np.concatenate([b[k] for b in blocks]) for k in blocks[0]}
    t_start, t_herald, t_read, t_end = _timeline(cfg, merged["n_attempts"], merged["heralded"])
    return EventLog(config=cfg, t_start=t_start, t_herald=t_herald, t_read=t_read, t_end=t_end, **merged)


def production_rate(log: EventLog, include_loading: bool = False) -> float:
    """Heralds per second of write-phase time, or of total wall-clock time."""
    if len(log) == 0:
        raise ValueError("event log is empty")
    elapsed_ms = log.total_time_ms if include_loading else log.write_phase_time_ms
    return log.n_heralds / (elapsed_ms * 1e-3)


def tally_coincidences(log: EventLog) -> CoincidenceTable:
    labels = tuple(log.config.setting_labels())
    mask = (log.write_outcome != 0) & (log.read_outcome != 0)
    idx = 2 * (log.write_outcome[mask] == -1) + (log.read_outcome[mask] == -1)
    flat = log.setting[mask] * 4 + idx
    counts = np.bincount(flat, minlength=4 * len(labels)).reshape(len(labels), 4)
    return CoincidenceTable(labels=labels, counts=counts)


def summary(log: EventLog) -> dict:
    cfg = log.config
    table = tally_coincidences(log)
    vis = {}
    for k, lab in enumerate(table.labels):
        vis[lab] = table.visibility(k) if table.counts[k].sum() else None
    return {
        "n_trials": len(log),
        "n_heralds": log.n_heralds,
        "herald_fraction": log.n_heralds / len(log),
        "herald_probability_expected": herald_probability(cfg),
        "pulses_per_herald": float(log.n_attempts.sum()) / max(log.n_heralds, 1),
        "production_rate_hz": production_rate(log, include_loading=False),
        "production_rate_with_loading_hz": production_rate(log, include_loading=True),
        "coincidences": int(table.counts.sum()),
        "visibility": vis,
        "retrieval_efficiency_model": efficiency_at(cfg.storage_time, cfg.decay),
    }


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"
