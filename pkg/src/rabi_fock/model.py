"""Truncated spin-boson state space and the generalized Rabi Hamiltonian.

Basis ordering is interleaved: the state |n, s> sits at index ``2*n + s``
with ``s = 0`` for the ground spin |g> and ``s = 1`` for the excited spin
|e>.  With this ordering the Hamiltonian has half-bandwidth 3.

Spin convention: sigma_z|e> = +|e>, sigma_z|g> = -|g>, sigma_+ = |e><g|.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError

G, E = 0, 1
HAMILTONIAN_BANDWIDTH = 3

ELEMENTARY_TAGS = (
    "a",
    "a_dagger",
    "number",
    "sigma_x",
    "sigma_y",
    "sigma_z",
    "sigma_plus",
    "sigma_minus",
    "x_quadrature",
    "p_quadrature",
)


def canonical_phase(phase: float) -> float:
    """Wrap an angle onto [-pi, pi)."""
    wrapped = math.fmod(phase + math.pi, 2.0 * math.pi)
    if wrapped < 0.0:
        wrapped += 2.0 * math.pi
    out = wrapped - math.pi
    # fmod rounding can land exactly on +pi
    return -math.pi if out >= math.pi else out


@dataclass(frozen=True)
class ModelParams:
    """Drive parameters of the Hamiltonian.

    ``w`` is the carrier coupling, ``vr_*``/``vcr_*`` the magnitude and phase
    of the rotating and counter-rotating couplings.  Phases are stored on
    [-pi, pi); the phase of a vanishing coupling is set to 0.
    """

    w: float
    vr_mag: float
    vr_phase: float = 0.0
    vcr_mag: float = 0.0
    vcr_phase: float = 0.0

    def __post_init__(self):
        for name in ("w", "vr_mag", "vr_phase", "vcr_mag", "vcr_phase"):
            value = getattr(self, name)
            if not isinstance(value, (int, float, np.floating, np.integer)):
                raise InvalidInputError(f"{name} must be a real number, got {value!r}")
            if not math.isfinite(value):
                raise InvalidInputError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, float(value))
        for name in ("w", "vr_mag", "vcr_mag"):
            if getattr(self, name) < 0.0:
                raise InvalidInputError(f"{name} must be non-negative, got {getattr(self, name)!r}")
        vr_phase = canonical_phase(self.vr_phase) if self.vr_mag > 0 else 0.0
        vcr_phase = canonical_phase(self.vcr_phase) if self.vcr_mag > 0 else 0.0
        object.__setattr__(self, "vr_phase", vr_phase)
        object.__setattr__(self, "vcr_phase", vcr_phase)

    @classmethod
    def from_complex(cls, w, vr, vcr):
        vr, vcr = complex(vr), complex(vcr)
        return cls(w, abs(vr), math.atan2(vr.imag, vr.real), abs(vcr), math.atan2(vcr.imag, vcr.real))

    @property
    def vr(self) -> complex:
        return self.vr_mag * complex(math.cos(self.vr_phase), math.sin(self.vr_phase))

    @property
    def vcr(self) -> complex:
        return self.vcr_mag * complex(math.cos(self.vcr_phase), math.sin(self.vcr_phase))

    @property
    def mean_phase(self) -> float:
        """(phi_r + phi_cr) / 2, the loop phase of the drive."""
        return 0.5 * (self.vr_phase + self.vcr_phase)

    @property
    def delta_v(self) -> float:
        """|v_r| - |v_cr|."""
        return self.vr_mag - self.vcr_mag

    @property
    def is_critical(self) -> bool:
        return self.vr_mag == self.vcr_mag

    def replace(self, **changes) -> "ModelParams":
        values = dict(w=self.w, vr_mag=self.vr_mag, vr_phase=self.vr_phase,
                      vcr_mag=self.vcr_mag, vcr_phase=self.vcr_phase)
        values.update(changes)
        return ModelParams(**values)

    def as_dict(self) -> dict:
        return dict(w=self.w, vr_mag=self.vr_mag, vr_phase=self.vr_phase,
                    vcr_mag=self.vcr_mag, vcr_phase=self.vcr_phase)


@dataclass(frozen=True)
class FockCutoff:
    """Highest retained Fock index; the space has ``2 * (n_max + 1)`` states."""

    n_max: int

    def __post_init__(self):
        if isinstance(self.n_max, bool) or not isinstance(self.n_max, (int, np.integer)):
            raise InvalidInputError(f"n_max must be an integer, got {self.n_max!r}")
        if self.n_max < 1:
            raise InvalidInputError(f"n_max must be >= 1, got {self.n_max}")
        object.__setattr__(self, "n_max", int(self.n_max))

    @property
    def n_levels(self) -> int:
        return self.n_max + 1

    @property
    def dim(self) -> int:
        return 2 * (self.n_max + 1)

    @staticmethod
    def index(n: int, spin: int) -> int:
        return 2 * n + spin


def _as_cutoff(cutoff) -> FockCutoff:
    return cutoff if isinstance(cutoff, FockCutoff) else FockCutoff(cutoff)


@dataclass(frozen=True, eq=False)
class SpinFockVector:
    """Amplitudes over the interleaved spin-Fock basis."""

    amplitudes: np.ndarray
    cutoff: FockCutoff

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex)
        if amps.ndim != 1 or amps.shape[0] != self.cutoff.dim:
            raise InvalidInputError(
                f"expected {self.cutoff.dim} amplitudes for n_max={self.cutoff.n_max}, got shape {amps.shape}"
            )
        if not np.all(np.isfinite(amps)):
            raise InvalidInputError("amplitudes must be finite")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_components(cls, f_g, f_e, cutoff=None) -> "SpinFockVector":
        f_g = np.asarray(f_g, dtype=complex)
        f_e = np.asarray(f_e, dtype=complex)
        if f_g.shape != f_e.shape:
            raise InvalidInputError("spin components must have equal length")
        cutoff = _as_cutoff(cutoff if cutoff is not None else f_g.shape[0] - 1)
        amps = np.empty(cutoff.dim, dtype=complex)
        amps[G::2] = f_g
        amps[E::2] = f_e
        return cls(amps, cutoff)

    @classmethod
    def basis(cls, n: int, spin: int, cutoff) -> "SpinFockVector":
        cutoff = _as_cutoff(cutoff)
        amps = np.zeros(cutoff.dim, dtype=complex)
        amps[FockCutoff.index(n, spin)] = 1.0
        return cls(amps, cutoff)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "SpinFockVector":
        return SpinFockVector(self.amplitudes / self.norm(), self.cutoff)

    def inner(self, other: "SpinFockVector") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def expectation(self, op: "ComplexOperator") -> complex:
        return complex(np.vdot(self.amplitudes, op.matvec(self.amplitudes)))


def spin_components(state: SpinFockVector):
    """Split a state into its |g> and |e> Fock-space components ``(f_g, f_e)``."""
    amps = state.amplitudes
    return amps[G::2].copy(), amps[E::2].copy()


@dataclass(frozen=True, eq=False)
class ComplexOperator:
    """A square complex matrix, dense or in Hermitian lower-band storage.

    For ``storage == "banded"`` the array ``data`` has shape
    ``(bandwidth + 1, dim)`` with ``data[k, j] = A[j + k, j]``; the upper
    triangle is implied by Hermiticity, so only Hermitian operators can be
    banded.
    """

    data: np.ndarray
    storage: str = "dense"
    bandwidth: int | None = None
    hermitian: bool = False
    label: str = field(default="", compare=False)

    def __post_init__(self):
        data = np.array(self.data, dtype=complex)
        if self.storage == "dense":
            if data.ndim != 2 or data.shape[0] != data.shape[1]:
                raise InvalidInputError(f"dense operator must be square, got {data.shape}")
        elif self.storage == "banded":
            if not self.hermitian:
                raise InvalidInputError("banded storage is only defined for Hermitian operators")
            if data.ndim != 2 or self.bandwidth is None or data.shape[0] != self.bandwidth + 1:
                raise InvalidInputError("banded data must have shape (bandwidth + 1, dim)")
            if np.any(data[0].imag != 0.0):
                raise InvalidInputError("Hermitian operator has a complex diagonal")
        else:
            raise InvalidInputError(f"unknown storage {self.storage!r}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def to_dense(self) -> np.ndarray:
        if self.storage == "dense":
            return self.data.copy()
        n = self.dim
        out = np.zeros((n, n), dtype=complex)
        for k in range(self.bandwidth + 1):
            idx = np.arange(n - k)
            out[idx + k, idx] = self.data[k, : n - k]
            if k:
                out[idx, idx + k] = np.conj(self.data[k, : n - k])
        return out

    def to_banded(self, bandwidth: int | None = None) -> "ComplexOperator":
        """Convert a Hermitian dense operator to band storage (lossless check)."""
        if self.storage == "banded":
            return self
        if not self.hermitian:
            raise InvalidInputError("only Hermitian operators can be stored banded")
        dense = self.data
        n = dense.shape[0]
        if bandwidth is None:
            rows, cols = np.nonzero(dense)
            bandwidth = int(np.max(np.abs(rows - cols))) if rows.size else 0
        band = np.zeros((bandwidth + 1, n), dtype=complex)
        for k in range(bandwidth + 1):
            band[k, : n - k] = np.diagonal(dense, -k)
        mask = np.abs(np.subtract.outer(np.arange(n), np.arange(n))) > bandwidth
        if np.any(dense[mask] != 0):
            raise InvalidInputError(f"matrix has entries outside bandwidth {bandwidth}")
        band[0] = band[0].real
        return ComplexOperator(band, "banded", bandwidth, True, self.label)

    def matvec(self, vec) -> np.ndarray:
        vec = np.asarray(vec, dtype=complex)
        if self.storage == "dense":
            return self.data @ vec
        n = self.dim
        out = self.data[0] * vec
        for k in range(1, self.bandwidth + 1):
            lower = self.data[k, : n - k]
            out[k:] += lower * vec[: n - k]
            out[: n - k] += np.conj(lower) * vec[k:]
        return out

    def norm(self) -> float:
        """Frobenius norm."""
        if self.storage == "dense":
            return float(np.linalg.norm(self.data))
        sq = np.sum(np.abs(self.data[0]) ** 2) + 2.0 * np.sum(np.abs(self.data[1:]) ** 2)
        return float(math.sqrt(sq))

    def is_hermitian(self, tol: float = 1e-14) -> bool:
        if self.storage == "banded":
            return True
        return bool(np.max(np.abs(self.data - self.data.conj().T), initial=0.0) <= tol)


def build_hamiltonian(params: ModelParams, cutoff, storage: str = "banded") -> ComplexOperator:
    """Truncated Hamiltonian of the generalized Rabi model.

    Couplings to Fock states above ``n_max`` are dropped.  Nonzero entries:
    ``<n,g|H|n,e> = w``, ``<n+1,g|H|n,e> = v_r sqrt(n+1)`` and
    ``<n-1,g|H|n,e> = v_cr sqrt(n)``.
    """
    if not isinstance(params, ModelParams):
        raise InvalidInputError("params must be a ModelParams")
    cutoff = _as_cutoff(cutoff)
    n_levels = cutoff.n_levels
    dim = cutoff.dim
    band = np.zeros((HAMILTONIAN_BANDWIDTH + 1, dim), dtype=complex)
    n = np.arange(n_levels)
    # row (n,e)=2n+1, col (n,g)=2n; lower entry <n,e|H|n,g> = w
    band[1, 2 * n] = params.w
    # lower entry <n+1,g|H|n,e> at row 2n+2, col 2n+1 (offset 1)
    band[1, 2 * n[:-1] + 1] = params.vr * np.sqrt(n[:-1] + 1.0)
    # lower entry <n+1,e|H|n,g> = conj(<n,g|H|n+1,e>) = conj(v_cr sqrt(n+1)), offset 3
    band[3, 2 * n[:-1]] = np.conj(params.vcr) * np.sqrt(n[:-1] + 1.0)
    op = ComplexOperator(band, "banded", HAMILTONIAN_BANDWIDTH, True, "H")
    if storage == "banded":
        return op
    if storage == "dense":
        return ComplexOperator(op.to_dense(), "dense", None, True, "H")
    raise InvalidInputError(f"unknown storage {storage!r}")


def _boson(n_levels: int, which: str) -> np.ndarray:
    a = np.diag(np.sqrt(np.arange(1, n_levels, dtype=float)), 1).astype(complex)
    if which == "a":
        return a
    if which == "a_dagger":
        return a.conj().T
    if which == "number":
        return np.diag(np.arange(n_levels, dtype=float)).astype(complex)
    if which == "x_quadrature":
        return (a + a.conj().T) / math.sqrt(2.0)
    if which == "p_quadrature":
        return (a - a.conj().T) / (1j * math.sqrt(2.0))
    raise InvalidInputError(f"unknown operator tag {which!r}")


_PAULI = {
    # basis order (g, e)
    "sigma_x": np.array([[0, 1], [1, 0]], dtype=complex),
    "sigma_y": np.array([[0, 1j], [-1j, 0]], dtype=complex),
    "sigma_z": np.array([[-1, 0], [0, 1]], dtype=complex),
    "sigma_plus": np.array([[0, 0], [1, 0]], dtype=complex),
    "sigma_minus": np.array([[0, 1], [0, 0]], dtype=complex),
}

_HERMITIAN_TAGS = {"number", "sigma_x", "sigma_y", "sigma_z", "x_quadrature", "p_quadrature"}


def boson_matrix(n_levels: int, which: str) -> np.ndarray:
    """Fock-space-only matrix of a bosonic operator (no spin factor)."""
    return _boson(n_levels, which)


def embed_boson(matrix: np.ndarray) -> np.ndarray:
    """Lift a Fock-space matrix to the interleaved spin-Fock space (identity on spin)."""
    return np.kron(matrix, np.eye(2))


def embed_spin(matrix: np.ndarray, n_levels: int) -> np.ndarray:
    return np.kron(np.eye(n_levels), matrix)


def build_elementary(cutoff, which: str) -> ComplexOperator:
    """Ladder, number, quadrature or Pauli operator on the full spin-Fock space."""
    cutoff = _as_cutoff(cutoff)
    if which in _PAULI:
        mat = embed_spin(_PAULI[which], cutoff.n_levels)
    elif which in ELEMENTARY_TAGS:
        mat = embed_boson(_boson(cutoff.n_levels, which))
    else:
        raise InvalidInputError(f"unknown operator tag {which!r}; expected one of {ELEMENTARY_TAGS}")
    return ComplexOperator(mat, "dense", None, which in _HERMITIAN_TAGS, which)


def sigma_z_diagonal(cutoff) -> np.ndarray:
    """Diagonal of sigma_z in the interleaved basis (-1 on g, +1 on e)."""
    cutoff = _as_cutoff(cutoff)
    return np.tile([-1.0, 1.0], cutoff.n_levels)


def chiral_defect(H: ComplexOperator) -> float:
    """Largest entry of Sigma_z H Sigma_z + H (zero for a chiral operator)."""
    dense = H.to_dense()
    sz = np.tile([-1.0, 1.0], dense.shape[0] // 2)
    return float(np.max(np.abs(sz[:, None] * dense * sz[None, :] + dense), initial=0.0))
