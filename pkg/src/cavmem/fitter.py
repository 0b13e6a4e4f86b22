"""Weighted least-squares fit of the double-exponential storage decay.

The optimizer is a Levenberg-Marquardt loop over ``(A1, A2, ln tau1, ln tau2)``
with the amplitudes clamped at zero.  Covariances are reported in the natural
``(A1, A2, tau1, tau2)`` parameters.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass

import numpy as np

from .memory import DecayParams

log = logging.getLogger(__name__)

MIN_POINTS = 5
MAX_ITER = 500
CHI2_RTOL = 1e-10
LAMBDA_INIT = 1e-3
LAMBDA_MAX = 1e16


class FitError(ValueError):
    """Raised when a dataset cannot support a four-parameter fit."""


@dataclass(frozen=True)
class DecayDataset:
    t: np.ndarray
    eta: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        eta = np.asarray(self.eta, dtype=float)
        sigma = np.asarray(self.sigma, dtype=float)
        if not (t.shape == eta.shape == sigma.shape) or t.ndim != 1:
            raise ValueError("t, eta and sigma must be 1-D arrays of equal length")
        if t.size < MIN_POINTS:
            raise ValueError(f"need at least {MIN_POINTS} points, got {t.size}")
        if not np.all(np.isfinite(t) & np.isfinite(eta) & np.isfinite(sigma)):
            raise ValueError("dataset contains non-finite values")
        if np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        if np.any(t < 0):
            raise ValueError("times must be non-negative")
        if np.any(sigma <= 0):
            raise ValueError("all sigma must be positive")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "sigma", sigma)

    def __len__(self):
        return self.t.size

    @classmethod
    def from_csv(cls, path) -> "DecayDataset":
        """Read a ``t_ms,eta,sigma`` CSV with a header row."""
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            missing = {"t_ms", "eta", "sigma"} - set(reader.fieldnames or [])
            if missing:
                raise ValueError(f"CSV is missing columns: {sorted(missing)}")
            rows = [(float(r["t_ms"]), float(r["eta"]), float(r["sigma"])) for r in reader]
        if not rows:
            raise ValueError("CSV contains no data rows")
        t, eta, sigma = map(np.array, zip(*rows))
        return cls(t, eta, sigma)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t_ms", "eta", "sigma"])
            for row in zip(self.t, self.eta, self.sigma):
                w.writerow([repr(float(x)) for x in row])


@dataclass(frozen=True)
class FitResult:
    params: DecayParams
    chi2: float
    dof: int
    iterations: int
    converged: bool
    chi2_history: tuple[float, ...]
    pinned: tuple[str, ...] = ()

    @property
    def reduced_chi2(self) -> float:
        return self.chi2 / self.dof if self.dof > 0 else math.nan


def model(t, x: np.ndarray) -> np.ndarray:
    """Decay curve at internal parameters ``x = (A1, A2, ln tau1, ln tau2)``."""
    a1, a2, l1, l2 = x
    return a1 * np.exp(-t / math.exp(l1)) + a2 * np.exp(-t / math.exp(l2))


def _jacobian(t, x: np.ndarray) -> np.ndarray:
    a1, a2, l1, l2 = x
    tau1, tau2 = math.exp(l1), math.exp(l2)
    e1 = np.exp(-t / tau1)
    e2 = np.exp(-t / tau2)
    # d/d(ln tau) of A exp(-t/tau) = A (t/tau) exp(-t/tau)
    return np.column_stack([e1, e2, a1 * (t / tau1) * e1, a2 * (t / tau2) * e2])


def chi_square(data: DecayDataset, d: DecayParams) -> float:
    r = (d.A1 * np.exp(-data.t / d.tau1) + d.A2 * np.exp(-data.t / d.tau2) - data.eta) / data.sigma
    return float(r @ r)


def _chi2(data: DecayDataset, x: np.ndarray) -> float:
    r = (model(data.t, x) - data.eta) / data.sigma
    return float(r @ r)


def _canonical(x: np.ndarray) -> np.ndarray:
    if x[2] > x[3]:
        return np.array([x[1], x[0], x[3], x[2]])
    return x


def _natural_covariance(data: DecayDataset, x: np.ndarray, chi2: float) -> tuple[np.ndarray, tuple[str, ...]]:
    """Scaled inverse normal matrix over the parameters not pinned at a bound.

    A component whose amplitude sits at zero has no identifiable time
    constant; both are dropped from the inversion and get zero variance.
    """
    a1, a2, l1, l2 = x
    tau1, tau2 = math.exp(l1), math.exp(l2)
    t = data.t
    e1 = np.exp(-t / tau1)
    e2 = np.exp(-t / tau2)
    jac = np.column_stack([e1, e2, a1 * t / tau1**2 * e1, a2 * t / tau2**2 * e2]) / data.sigma[:, None]
    active = np.ones(4, dtype=bool)
    # amplitudes below round-off of the larger one count as pinned at zero
    floor = 1e-12 * max(a1, a2)
    if a1 <= floor:
        active[[0, 2]] = False
    if a2 <= floor:
        active[[1, 3]] = False
    normal = jac[:, active].T @ jac[:, active]
    if not active.any() or np.linalg.cond(normal) > 1e15:
        raise FitError("normal matrix is singular at the optimum; dataset is degenerate")
    dof = len(data) - 4
    scale = chi2 / dof if dof > 0 else 1.0
    cov = np.zeros((4, 4))
    cov[np.ix_(active, active)] = np.linalg.inv(normal) * scale
    pinned = tuple(name for name, on in zip(("A1", "A2", "tau1", "tau2"), active) if not on)
    return cov, pinned


def fit_double_exponential(data: DecayDataset, init: DecayParams) -> FitResult:
    """Fit ``A1 exp(-t/tau1) + A2 exp(-t/tau2)`` to ``data``.

    Iterates until an accepted step changes chi^2 by less than 1e-10 relative,
    or 500 iterations.  On hitting the iteration cap the best point so far is
    returned with ``converged=False``.
    """
    x = np.array([init.A1, init.A2, math.log(init.tau1), math.log(init.tau2)], dtype=float)
    lam = LAMBDA_INIT
    w = 1.0 / data.sigma
    chi2 = _chi2(data, x)
    history = [chi2]
    converged = False
    it = 0
    for it in range(1, MAX_ITER + 1):
        r = (model(data.t, x) - data.eta) * w
        jac = _jacobian(data.t, x) * w[:, None]
        jtj = jac.T @ jac
        grad = jac.T @ r
        accepted = False
        while lam <= LAMBDA_MAX:
            damped = jtj + lam * np.diag(np.diag(jtj) + 1e-300)
            try:
                step = np.linalg.solve(damped, -grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = x + step
            trial[:2] = np.maximum(trial[:2], 0.0)
            # keep exp(ln tau) finite
            trial[2:] = np.clip(trial[2:], -700.0, 700.0)
            chi2_trial = _chi2(data, trial)
            if np.isfinite(chi2_trial) and chi2_trial <= chi2:
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            # no downhill step at any damping: stationary point
            converged = True
            break
        rel = (chi2 - chi2_trial) / chi2 if chi2 > 0 else 0.0
        x, chi2 = trial, chi2_trial
        history.append(chi2)
        lam = max(lam / 10.0, 1e-12)
        if rel < CHI2_RTOL or chi2 == 0.0:
            converged = True
            break
    if not converged:
        log.warning("double-exponential fit hit %d iterations without converging", MAX_ITER)

    x = _canonical(x)
    if x[0] == 0.0 and x[1] == 0.0:
        raise FitError("both amplitudes collapsed to zero")
    cov, pinned = _natural_covariance(data, x, chi2)
    params = DecayParams(
        A1=float(x[0]),
        A2=float(x[1]),
        tau1=math.exp(x[2]),
        tau2=math.exp(x[3]),
        covariance=cov,
    )
    return FitResult(
        params=params,
        chi2=chi2,
        dof=len(data) - 4,
        iterations=it,
        converged=converged,
        chi2_history=tuple(history),
        pinned=pinned,
    )


def initial_guess(data: DecayDataset, n_grid: int = 40) -> DecayParams:
    """Starting point from a coarse scan of (tau1, tau2).

    For each pair on a log grid spanning the sampled times the amplitudes enter
    linearly, so they are solved by weighted least squares; the pair with the
    smallest chi^2 and non-negative amplitudes wins.
    """
    t_pos = data.t[data.t > 0]
    lo = (t_pos[0] if t_pos.size else 1.0) / 3.0
    hi = 3.0 * data.t[-1]
    taus = np.logspace(math.log10(lo), math.log10(hi), n_grid)
    w = 1.0 / data.sigma
    y = data.eta * w
    best = None
    for i in range(n_grid):
        e1 = np.exp(-data.t / taus[i]) * w
        for j in range(i + 1, n_grid):
            e2 = np.exp(-data.t / taus[j]) * w
            basis = np.column_stack([e1, e2])
            amps, *_ = np.linalg.lstsq(basis, y, rcond=None)
            if np.any(amps < 0):
                continue
            r = basis @ amps - y
            chi2 = float(r @ r)
            if best is None or chi2 < best[0]:
                best = (chi2, amps, taus[i], taus[j])
    if best is None:
        a = float(np.clip(data.eta[0], 1e-3, 1.0))
        return DecayParams(A1=0.5 * a, A2=0.5 * a, tau1=lo, tau2=hi)
    _, amps, tau1, tau2 = best
    a1, a2 = (float(max(v, 1e-3)) for v in amps)
    total = a1 + a2
    if total > 1.0:
        a1, a2 = a1 / total, a2 / total
    return DecayParams(A1=a1, A2=a2, tau1=float(tau1), tau2=float(tau2))


def synthesize(
    params: DecayParams,
    t,
    sigma: float | np.ndarray,
    rng: np.random.Generator | None = None,
) -> DecayDataset:
    """Dataset drawn from the decay model, with Gaussian noise when ``rng`` is given."""
    t = np.asarray(t, dtype=float)
    eta = params.A1 * np.exp(-t / params.tau1) + params.A2 * np.exp(-t / params.tau2)
    sig = np.broadcast_to(np.asarray(sigma, dtype=float), t.shape).copy()
    if rng is not None:
        eta = eta + rng.normal(scale=sig)
    return DecayDataset(t, eta, sig)


def log_times(t_min: float = 0.005, t_max: float = 2000.0, n: int = 20) -> np.ndarray:
    return np.logspace(math.log10(t_min), math.log10(t_max), n)

