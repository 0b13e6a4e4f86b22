"""CHSH values, optimal analyzer settings and count-based error propagation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import qstate
from .qstate import BlochVector

TSIRELSON = 2.0 * math.sqrt(2.0)


@dataclass(frozen=True)
class ChshSettings:
    a: BlochVector
    a_prime: BlochVector
    b: BlochVector
    b_prime: BlochVector

    def pairs(self) -> list[tuple[BlochVector, BlochVector]]:
        """Setting pairs in CHSH order: (a,b), (a,b'), (a',b), (a',b')."""
        return [
            (self.a, self.b),
            (self.a, self.b_prime),
            (self.a_prime, self.b),
            (self.a_prime, self.b_prime),
        ]

    def to_dict(self) -> dict:
        return {
            "a": self.a.to_list(),
            "a_prime": self.a_prime.to_list(),
            "b": self.b.to_list(),
            "b_prime": self.b_prime.to_list(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ChshSettings":
        return cls(*(BlochVector.from_array(d[k]) for k in ("a", "a_prime", "b", "b_prime")))


# signs of the four correlators in the CHSH combination
CHSH_SIGNS = np.array([1.0, 1.0, 1.0, -1.0])

# maximal for Psi+, whose z correlation is -1
TSIRELSON_SETTINGS = ChshSettings(
    a=qstate.X_AXIS,
    a_prime=qstate.Z_AXIS,
    b=BlochVector.from_array([1.0, 0.0, -1.0]),
    b_prime=BlochVector.from_array([1.0, 0.0, 1.0]),
)


@dataclass(frozen=True)
class ChshResult:
    s: float
    sigma_s: float
    settings: ChshSettings

    def to_dict(self) -> dict:
        return {"s": self.s, "sigma_s": self.sigma_s, "settings": self.settings.to_dict()}


def chsh_value(rho, st: ChshSettings) -> float:
    corr = [qstate.correlation(rho, a, b) for a, b in st.pairs()]
    return float(np.dot(CHSH_SIGNS, corr))


def _unit_or(v: np.ndarray, fallback: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    return v / n if n > 1e-12 else fallback


def _orthogonal_to(v: np.ndarray) -> np.ndarray:
    trial = np.array([1.0, 0.0, 0.0]) if abs(v[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    w = trial - np.dot(trial, v) * v
    return w / np.linalg.norm(w)


def optimal_chsh(rho) -> ChshResult:
    """Maximal CHSH value from the correlation tensor.

    With ``u1 >= u2`` the two largest eigenvalues of ``T^T T`` the optimum is
    ``2 sqrt(u1 + u2)``.  Settings are rebuilt from the eigenvectors and the
    returned ``s`` is evaluated on them.
    """
    t = qstate.correlation_tensor(rho)
    u, vecs = np.linalg.eigh(t.T @ t)
    order = np.argsort(u)[::-1]
    u = np.clip(u[order], 0.0, None)
    c1, c2 = vecs[:, order[0]], vecs[:, order[1]]
    theta = math.atan2(math.sqrt(u[1]), math.sqrt(u[0])) if u[0] > 0 else 0.0
    b = math.cos(theta) * c1 + math.sin(theta) * c2
    b_prime = math.cos(theta) * c1 - math.sin(theta) * c2
    a = _unit_or(t @ (b + b_prime), c1)
    a_prime = _unit_or(t @ (b - b_prime), _orthogonal_to(a))
    st = ChshSettings(
        BlochVector.from_array(a),
        BlochVector.from_array(a_prime),
        BlochVector.from_array(b),
        BlochVector.from_array(b_prime),
    )
    return ChshResult(s=chsh_value(rho, st), sigma_s=0.0, settings=st)


def chsh_max_formula(rho) -> float:
    t = qstate.correlation_tensor(rho)
    u = np.sort(np.linalg.eigvalsh(t.T @ t))[::-1]
    return 2.0 * math.sqrt(max(u[0] + u[1], 0.0))


def brute_force_chsh(rho, grid_step: float = 0.02) -> ChshResult:
    """Grid search over analyzer settings, independent of the eigenvalue criterion.

    Bob's pair is written as ``b, b' = cos(delta/2) m +/- sin(delta/2) n`` with
    ``m`` on a (polar, azimuth) grid and ``n = cos(psi) e1 + sin(psi) e2`` on a
    grid of the circle orthogonal to ``m``.  For fixed Bob settings Alice's best
    choice aligns ``a`` with ``T(b+b')`` (Cauchy-Schwarz), and the remaining
    opening angle ``delta`` maximizes ``A cos + B sin`` exactly.
    """
    t = qstate.correlation_tensor(rho)
    polar = np.arange(0.0, math.pi + 1e-12, grid_step)
    azim = np.arange(0.0, 2.0 * math.pi, grid_step)
    psi = np.arange(0.0, math.pi, grid_step)

    th, ph = np.meshgrid(polar, azim, indexing="ij")
    m = np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], axis=-1).reshape(-1, 3)
    # orthonormal frame around each m
    e1 = np.stack([np.cos(th) * np.cos(ph), np.cos(th) * np.sin(ph), -np.sin(th)], axis=-1).reshape(-1, 3)
    e2 = np.cross(m, e1)

    tm = m @ t.T
    te1 = e1 @ t.T
    te2 = e2 @ t.T
    norm_m = np.linalg.norm(tm, axis=1)
    g11 = np.einsum("ij,ij->i", te1, te1)
    g22 = np.einsum("ij,ij->i", te2, te2)
    g12 = np.einsum("ij,ij->i", te1, te2)

    c, s = np.cos(psi), np.sin(psi)
    norm_n2 = np.outer(g11, c**2) + np.outer(g22, s**2) + 2.0 * np.outer(g12, c * s)
    norm_n = np.sqrt(np.clip(norm_n2, 0.0, None))
    # S = 2 (cos(delta/2) |Tm| + sin(delta/2) |Tn|) maximized over delta
    s_grid = 2.0 * np.sqrt(norm_m[:, None] ** 2 + norm_n**2)
    i, j = np.unravel_index(np.argmax(s_grid), s_grid.shape)

    m_best = m[i]
    n_best = c[j] * e1[i] + s[j] * e2[i]
    half = math.atan2(np.linalg.norm(t @ n_best), np.linalg.norm(t @ m_best))
    b = math.cos(half) * m_best + math.sin(half) * n_best
    b_prime = math.cos(half) * m_best - math.sin(half) * n_best
    a = _unit_or(t @ (b + b_prime), m_best)
    a_prime = _unit_or(t @ (b - b_prime), _orthogonal_to(a))
    st = ChshSettings(
        BlochVector.from_array(a),
        BlochVector.from_array(a_prime),
        BlochVector.from_array(b),
        BlochVector.from_array(b_prime),
    )
    return ChshResult(s=chsh_value(rho, st), sigma_s=0.0, settings=st)


def _counts_array(counts) -> np.ndarray:
    arr = np.asarray(getattr(counts, "counts", counts), dtype=float)
    if arr.shape != (4, 4):
        raise ValueError(f"expected 4 settings x 4 outcomes, got shape {arr.shape}")
    if np.any(arr < 0):
        raise ValueError("counts must be non-negative")
    if np.any(arr.sum(axis=1) <= 0):
        raise ValueError("every setting needs a positive total count")
    return arr


def correlations_from_counts(counts) -> tuple[np.ndarray, np.ndarray]:
    """Per-setting correlation and its Poisson standard error.

    Outcome columns are ordered (++, +-, -+, --).  Treating each count as an
    independent Poisson variable gives ``var(E) = (1 - E^2) / N``.
    """
    n = _counts_array(counts)
    total = n.sum(axis=1)
    e = (n[:, 0] + n[:, 3] - n[:, 1] - n[:, 2]) / total
    same = n[:, 0] + n[:, 3]
    diff = n[:, 1] + n[:, 2]
    var = (same * (1.0 - e) ** 2 + diff * (1.0 + e) ** 2) / total**2
    return e, np.sqrt(var)


def chsh_from_counts(counts) -> float:
    e, _ = correlations_from_counts(counts)
    return float(np.dot(CHSH_SIGNS, e))


def chsh_error(counts) -> float:
    _, sigma_e = correlations_from_counts(counts)
    return float(math.sqrt(np.sum(sigma_e**2)))


def violation_significance(s: float, sigma_s: float) -> float:
    """Number of standard deviations by which ``|S|`` exceeds the local bound 2."""
    if sigma_s <= 0:
        raise ValueError("sigma_s must be positive")
    return (abs(s) - 2.0) / sigma_s


def chsh_result_from_counts(counts, settings: ChshSettings) -> ChshResult:
    return ChshResult(s=chsh_from_counts(counts), sigma_s=chsh_error(counts), settings=settings)


def simulate_chsh_counts(rho, st: ChshSettings, n_per_setting: int, rng: np.random.Generator) -> np.ndarray:
    """Multinomial coincidence counts for each CHSH setting pair."""
    out = np.empty((4, 4), dtype=np.int64)
    for k, (a, b) in enumerate(st.pairs()):
        out[k] = rng.multinomial(n_per_setting, qstate.outcome_probabilities(rho, a, b))
    return out
