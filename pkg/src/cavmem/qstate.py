"""Two-qubit polarization states.

Basis order is fixed to ``|HH>, |HV>, |VH>, |VV>`` with the write-out photon
as the first qubit and the read-out photon (image of the atomic qubit) as the
second.  ``H`` is the +z eigenstate, ``D`` is +x and right-circular is +y.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HH, HV, VH, VV = range(4)

TRACE_TOL = 1e-12
HERMITIAN_TOL = 1e-12
PSD_TOL = -1e-10

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (SIGMA_X, SIGMA_Y, SIGMA_Z)
IDENTITY2 = np.eye(2, dtype=complex)


@dataclass(frozen=True)
class BlochVector:
    """Unit vector selecting the +/-1 observable ``x*sx + y*sy + z*sz``."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        norm = np.sqrt(self.x**2 + self.y**2 + self.z**2)
        if not np.isfinite(norm) or abs(norm - 1.0) > 1e-9:
            raise ValueError(f"Bloch vector must have unit norm, got {norm!r}")

    @classmethod
    def from_array(cls, v) -> "BlochVector":
        v = np.asarray(v, dtype=float)
        n = np.linalg.norm(v)
        if n == 0:
            raise ValueError("cannot normalize a zero vector")
        v = v / n
        return cls(float(v[0]), float(v[1]), float(v[2]))

    @classmethod
    def from_angles(cls, theta: float, phi: float) -> "BlochVector":
        """Polar angle ``theta`` from +z, azimuth ``phi`` from +x."""
        return cls(
            float(np.sin(theta) * np.cos(phi)),
            float(np.sin(theta) * np.sin(phi)),
            float(np.cos(theta)),
        )

    def __array__(self, dtype=None, copy=None):
        return np.array([self.x, self.y, self.z], dtype=dtype or float)

    def observable(self) -> np.ndarray:
        return self.x * SIGMA_X + self.y * SIGMA_Y + self.z * SIGMA_Z

    def to_list(self) -> list[float]:
        return [self.x, self.y, self.z]


X_AXIS = BlochVector(1.0, 0.0, 0.0)
Y_AXIS = BlochVector(0.0, 1.0, 0.0)
Z_AXIS = BlochVector(0.0, 0.0, 1.0)

# basis name -> analyzer axis; first outcome of each pair is the +1 eigenstate
BASES = {"HV": Z_AXIS, "DA": X_AXIS, "RL": Y_AXIS}


def _as_unit(v) -> np.ndarray:
    if isinstance(v, BlochVector):
        return np.asarray(v)
    arr = np.asarray(v, dtype=float).reshape(3)
    if abs(np.linalg.norm(arr) - 1.0) > 1e-9:
        raise ValueError("measurement direction must be a unit vector")
    return arr


def _observable(v) -> np.ndarray:
    x, y, z = _as_unit(v)
    return x * SIGMA_X + y * SIGMA_Y + z * SIGMA_Z


def check_density_matrix(rho) -> np.ndarray:
    """Return ``rho`` as a complex 4x4 array, raising if it is not a valid state."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise ValueError(f"expected a 4x4 density matrix, got shape {rho.shape}")
    if abs(np.trace(rho) - 1.0) > TRACE_TOL * 10:
        raise ValueError(f"trace must be 1, got {np.trace(rho)!r}")
    if np.max(np.abs(rho - rho.conj().T)) > HERMITIAN_TOL * 10:
        raise ValueError("density matrix is not Hermitian")
    if np.min(np.linalg.eigvalsh(rho)) < PSD_TOL:
        raise ValueError("density matrix has a negative eigenvalue")
    return rho


def is_density_matrix(rho) -> bool:
    try:
        check_density_matrix(rho)
    except ValueError:
        return False
    return True


def pure_state_vector(phase: float = 0.0) -> np.ndarray:
    """Ket ``(|HV> + exp(-i phase)|VH>)/sqrt(2)``."""
    psi = np.zeros(4, dtype=complex)
    psi[HV] = 1.0
    psi[VH] = np.exp(-1j * phase)
    return psi / np.sqrt(2.0)


def make_entangled_pair(phase: float = 0.0) -> np.ndarray:
    """Density matrix of the write-out/read-out photon pair.

    ``phase`` is the summed write and read phase difference; the actively
    stabilized operating point is 0, which gives the Psi+ Bell state.
    """
    if not np.isfinite(phase):
        raise ValueError("phase must be finite")
    psi = pure_state_vector(phase)
    return np.outer(psi, psi.conj())


def maximally_mixed() -> np.ndarray:
    return np.eye(4, dtype=complex) / 4.0


def apply_noise(rho, noise) -> np.ndarray:
    """White noise plus coherence damping and phase offset.

    ``noise`` is an :class:`cavmem.entangle.NoiseParams` (or anything with
    ``p``, ``effective_damping`` and ``phi0``).  The ``|HV><VH|`` coherence is
    multiplied by ``d * exp(i phi0)`` before mixing with ``I/4`` at weight ``p``.
    """
    rho = np.array(rho, dtype=complex)
    p = noise.p
    d = noise.effective_damping
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"white-noise weight p must lie in [0, 1], got {p}")
    if not 0.0 <= d <= 1.0:
        raise ValueError(f"coherence damping d must lie in [0, 1], got {d}")
    rot = np.exp(1j * noise.phi0)
    rho[HV, VH] *= d * rot
    rho[VH, HV] *= d * np.conj(rot)
    return (1.0 - p) * rho + p * maximally_mixed()


def correlation(rho, a, b) -> float:
    """Expectation value of ``(a.sigma) (x) (b.sigma)``."""
    op = np.kron(_observable(a), _observable(b))
    value = np.trace(np.asarray(rho) @ op)
    if abs(value.imag) > 1e-10:
        raise ValueError("correlation has a non-negligible imaginary part; rho is not Hermitian")
    return float(value.real)


def correlation_tensor(rho) -> np.ndarray:
    """3x3 real matrix ``T[i, j] = Tr(rho sigma_i (x) sigma_j)``."""
    rho = np.asarray(rho)
    t = np.empty((3, 3))
    for i, si in enumerate(PAULIS):
        for j, sj in enumerate(PAULIS):
            t[i, j] = np.trace(rho @ np.kron(si, sj)).real
    return t


def _projector(v, sign: int) -> np.ndarray:
    return 0.5 * (IDENTITY2 + sign * _observable(v))


def outcome_probabilities(rho, a, b) -> np.ndarray:
    """Joint probabilities ``(p++, p+-, p-+, p--)`` of the two analyzers."""
    rho = np.asarray(rho)
    probs = np.empty(4)
    k = 0
    for sa in (1, -1):
        pa = _projector(a, sa)
        for sb in (1, -1):
            probs[k] = np.trace(rho @ np.kron(pa, _projector(b, sb))).real
            k += 1
    # clip rounding noise only; real negatives are a caller bug caught upstream
    probs = np.clip(probs, 0.0, 1.0)
    return probs / probs.sum()


def partial_trace(rho, keep: int) -> np.ndarray:
    """Reduced 2x2 state of qubit ``keep`` (0 = write-out, 1 = read-out)."""
    r = np.asarray(rho).reshape(2, 2, 2, 2)
    if keep == 0:
        return np.einsum("ijkj->ik", r)
    return np.einsum("jijk->ik", r)


def local_unitary(rho, u_a, u_b) -> np.ndarray:
    u = np.kron(u_a, u_b)
    return u @ np.asarray(rho) @ u.conj().T


def random_density_matrix(rng: np.random.Generator, rank: int = 4) -> np.ndarray:
    """Ginibre-distributed random state of the given rank."""
    g = rng.normal(size=(4, rank)) + 1j * rng.normal(size=(4, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_unitary2(rng: np.random.Generator) -> np.ndarray:
    z = (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))
