"""Real-space marker built from spectral projectors, and its sweeps.

The local value at Fock site ``n`` is the spin-traced diagonal of
``sigma_z (Q n P + P n Q)``, with ``P``/``Q`` projecting onto positive /
negative energies.  Near-zero levels belong to neither unless requested.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .eigensolver import eigendecompose
from .errors import InvalidInputError
from .model import FockCutoff, ModelParams, build_hamiltonian, sigma_z_diagonal

ZERO_LEVEL_TOL = 1e-9
DEFAULT_WINDOW = (0.2, 0.7)
MIN_ABS_DELTA_V = 0.01


@dataclass(frozen=True, eq=False)
class MarkerProfile:
    local_values: np.ndarray
    global_value: float
    bulk_window: range
    params_echo: ModelParams
    cutoff: FockCutoff
    zero_levels: int = 0
    zero_assignment: str = "exclude"

    @property
    def bulk_fluctuation(self) -> float:
        """Site-to-site standard deviation of the local values inside the bulk window."""
        return float(np.std(self.local_values[self.bulk_window.start:self.bulk_window.stop]))


def bulk_window(cutoff: FockCutoff, fractions=DEFAULT_WINDOW) -> range:
    lo, hi = fractions
    if not 0.0 <= lo < hi <= 1.0:
        raise InvalidInputError(f"bulk window fractions {fractions} must satisfy 0 <= lo < hi <= 1")
    return range(math.ceil(lo * cutoff.n_max), math.floor(hi * cutoff.n_max) + 1)


def projectors(H, cutoff: FockCutoff, *, zero_tol: float = ZERO_LEVEL_TOL, zero_assignment: str = "exclude",
               method: str = "auto"):
    """``(P, Q, Z)`` spectral projectors onto E > 0, E < 0 and |E| <= zero_tol."""
    if zero_assignment not in ("exclude", "P", "Q"):
        raise InvalidInputError("zero_assignment must be 'exclude', 'P' or 'Q'")
    spec = eigendecompose(H, cutoff, vectors="all", method=method)
    lam, V = spec.eigenvalues, spec.vectors
    zero = np.abs(lam) <= zero_tol
    pos = (lam > 0) & ~zero
    neg = (lam < 0) & ~zero
    if zero_assignment == "P":
        pos |= zero
    elif zero_assignment == "Q":
        neg |= zero

    def proj(mask):
        Vm = V[:, mask]
        return Vm @ Vm.conj().T

    return proj(pos), proj(neg), proj(zero), int(zero.sum())


def _site_values(P, Q, cutoff: FockCutoff) -> np.ndarray:
    n = np.repeat(np.arange(cutoff.n_levels, dtype=float), 2)
    # diag(Q N P + P N Q) = 2 Re diag(Q N P) since the sum is Hermitian
    diag = 2.0 * np.real(np.einsum("ij,j,ji->i", Q, n, P))
    return (sigma_z_diagonal(cutoff) * diag).reshape(cutoff.n_levels, 2).sum(axis=1)


def local_marker(params: ModelParams, cutoff, *, window=DEFAULT_WINDOW, zero_assignment: str = "exclude",
                 method: str = "auto") -> MarkerProfile:
    cutoff = cutoff if isinstance(cutoff, FockCutoff) else FockCutoff(cutoff)
    H = build_hamiltonian(params, cutoff)
    P, Q, _, n_zero = projectors(H, cutoff, zero_assignment=zero_assignment, method=method)
    values = _site_values(P, Q, cutoff)
    if not np.all(np.isfinite(values)):
        raise InvalidInputError("non-finite marker values")
    win = bulk_window(cutoff, window)
    return MarkerProfile(values, float(np.mean(values[win.start:win.stop])), win, params, cutoff,
                         n_zero, zero_assignment)


def local_marker_reference(params: ModelParams, cutoff) -> np.ndarray:
    """Brute-force site values from dense matrices and the Jacobi eigensolver (small cutoffs)."""
    cutoff = cutoff if isinstance(cutoff, FockCutoff) else FockCutoff(cutoff)
    H = build_hamiltonian(params, cutoff)
    P, Q, _, _ = projectors(H, cutoff, method="jacobi")
    N = np.diag(np.repeat(np.arange(cutoff.n_levels, dtype=float), 2))
    M = np.diag(sigma_z_diagonal(cutoff)) @ (Q @ N @ P + P @ N @ Q)
    return np.real(np.diag(M)).reshape(cutoff.n_levels, 2).sum(axis=1)


def sweep_params(w: float, delta_v: float, phi: float, vcr_mag: float = 1.0) -> ModelParams:
    """Sweep convention: ``|v_cr|`` fixed, ``|v_r| = |v_cr| + delta_v``, both phases equal to ``phi``."""
    return ModelParams(w, vcr_mag + delta_v, phi, vcr_mag, phi)


def global_marker_sweep(w_list, delta_v, phi: float, cutoff, *, window=DEFAULT_WINDOW,
                        zero_assignment: str = "exclude", vcr_mag: float = 1.0):
    """One profile per ``(w, delta_v)``, ordered by ``w`` then ``delta_v`` as given."""
    dv = [float(x) for x in delta_v]
    if any(abs(x) <= MIN_ABS_DELTA_V for x in dv):
        raise InvalidInputError(f"sweep must exclude |delta_v| <= {MIN_ABS_DELTA_V}")
    return [
        local_marker(sweep_params(w, x, phi, vcr_mag), cutoff, window=window, zero_assignment=zero_assignment)
        for w in w_list
        for x in dv
    ]
