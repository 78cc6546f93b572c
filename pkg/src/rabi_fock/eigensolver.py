"""Hermitian eigendecomposition, cutoff convergence and defect extraction.

Two reduction paths feed a common implicit-shift QL stage:

* dense: Householder reflections (numpy rank-2 updates);
* banded: Givens bulge chasing in band storage (compiled kernel), used for
  the bandwidth-3 Hamiltonian.

A cyclic Jacobi solver is kept as a slow reference for small matrices.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DegeneracyError, InvalidInputError, NonConvergenceError
from .model import (
    ComplexOperator,
    FockCutoff,
    ModelParams,
    SpinFockVector,
    build_hamiltonian,
    sigma_z_diagonal,
)

log = logging.getLogger(__name__)

MAX_QL_ITER = 60
ZERO_TOL = 1e-9
JACOBI_MAX_DIM = 64


@dataclass(frozen=True, eq=False)
class SpectrumResult:
    """Sorted eigenvalues plus (possibly a subset of) eigenvectors.

    ``vector_index[k]`` is the position in ``eigenvalues`` of the k-th
    column of ``vectors``.  For a full decomposition it is ``arange(dim)``.
    """

    eigenvalues: np.ndarray
    vectors: np.ndarray | None
    vector_index: np.ndarray
    cutoff: FockCutoff | None = None
    converged_count: int | None = None
    flags: tuple = field(default=())

    @property
    def eigenvectors(self) -> list[SpinFockVector]:
        if self.vectors is None or self.cutoff is None:
            raise InvalidInputError("no spin-Fock eigenvectors stored")
        return [SpinFockVector(self.vectors[:, k], self.cutoff) for k in range(self.vectors.shape[1])]

    def vector_for(self, index: int) -> np.ndarray:
        pos = np.flatnonzero(self.vector_index == index)
        if pos.size == 0:
            raise InvalidInputError(f"eigenvector {index} was not computed")
        return self.vectors[:, pos[0]]

    def positive_levels(self, tol: float = ZERO_TOL) -> np.ndarray:
        return self.eigenvalues[self.eigenvalues > tol]


# -- reductions --------------------------------------------------------------

def householder_tridiagonalize(A: np.ndarray):
    """Dense Householder reduction ``A = Q diag(ph) T diag(ph)^H Q^H``.

    Returns ``(d, e, Q, ph)`` with ``T`` real symmetric tridiagonal (diagonal
    ``d``, subdiagonal ``e``).
    """
    A = np.array(A, dtype=complex)
    n = A.shape[0]
    Q = np.eye(n, dtype=complex)
    for k in range(n - 2):
        x = A[k + 1:, k]
        xnorm = np.linalg.norm(x)
        if xnorm == 0.0 or np.linalg.norm(x[1:]) == 0.0:
            continue
        phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
        v = x.copy()
        v[0] += phase * xnorm
        v /= np.linalg.norm(v)
        sub = A[k + 1:, k + 1:]
        p = sub @ v
        kappa = np.vdot(v, p).real
        w = p - kappa * v
        sub -= 2.0 * (np.outer(v, w.conj()) + np.outer(w, v.conj()))
        A[k + 1:, k] = 0.0
        A[k + 1, k] = -phase * xnorm
        A[k, k + 1:] = 0.0
        A[k, k + 1] = np.conj(A[k + 1, k])
        Q[:, k + 1:] -= 2.0 * np.outer(Q[:, k + 1:] @ v, v.conj())
    d = np.real(np.diag(A)).copy()
    off = np.diag(A, -1)
    e = np.zeros(n)
    ph = np.ones(n, dtype=complex)
    for j in range(n - 1):
        a = abs(off[j])
        e[j] = a
        ph[j + 1] = ph[j] * off[j] / a if a > 0 else ph[j]
    return d, e, Q, ph


def _ql(d, e, want_vectors):
    w, Zt, status = _kernels.tridiagonal_ql(d, e, want_vectors, MAX_QL_ITER)
    if status >= 0:
        raise NonConvergenceError(f"QL iteration did not converge for eigenvalue {status}", index=int(status))
    order = np.argsort(w, kind="stable")
    w = w[order]
    Z = Zt[order].T if want_vectors else None
    return w, Z


def _check_operator(H) -> ComplexOperator:
    if isinstance(H, np.ndarray):
        H = ComplexOperator(H, "dense", None, True)
    if not isinstance(H, ComplexOperator):
        raise InvalidInputError("expected a ComplexOperator or ndarray")
    if not H.hermitian:
        raise InvalidInputError("eigendecompose requires a Hermitian-flagged operator")
    if H.storage == "dense" and not H.is_hermitian(1e-12 * max(1.0, H.norm())):
        raise InvalidInputError("operator flagged Hermitian is not conjugate symmetric")
    return H


def eigendecompose(H, cutoff: FockCutoff | None = None, *, vectors="all", method: str = "auto") -> SpectrumResult:
    """Full Hermitian eigendecomposition.

    Parameters
    ----------
    H : ComplexOperator or ndarray
        Hermitian operator.  Banded storage takes the bulge-chasing path.
    cutoff : FockCutoff, optional
        Attached to the result so eigenvectors can be read as spin-Fock
        states.
    vectors : {"all", "none"} or array of int
        Which eigenvectors to compute.  An index array (positions in the
        ascending spectrum) uses inverse iteration plus back-transformation,
        which avoids the cubic cost of accumulating the full basis.
    method : {"auto", "dense", "banded", "jacobi"}
    """
    H = _check_operator(H)
    n = H.dim
    if method == "auto":
        method = "banded" if H.storage == "banded" else "dense"
    if method == "jacobi":
        w, V = jacobi_eigh(H.to_dense())
        return SpectrumResult(w, V, np.arange(n), cutoff)

    subset = None
    if isinstance(vectors, str):
        if vectors not in ("all", "none"):
            raise InvalidInputError(f"vectors must be 'all', 'none' or indices, got {vectors!r}")
        want_full = vectors == "all"
    else:
        subset = np.unique(np.asarray(vectors, dtype=int))
        if subset.size and (subset[0] < 0 or subset[-1] >= n):
            raise InvalidInputError("eigenvector index out of range")
        want_full = False

    if method == "banded":
        band = H.to_banded().data if H.storage == "dense" else H.data
        d, e, Q, ph, rp, rc, rs, count, status = _kernels.band_to_tridiagonal(
            np.ascontiguousarray(band), want_full, subset is not None
        )
        if status:
            raise NonConvergenceError(f"band reduction left fill-in outside the band (status {status})")
    elif method == "dense":
        d, e, Q, ph = householder_tridiagonalize(H.to_dense())
    else:
        raise InvalidInputError(f"unknown method {method!r}")

    w, Z = _ql(d, e, want_full)
    if want_full:
        V = (Q * ph[None, :]) @ Z
        return SpectrumResult(w, V, np.arange(n), cutoff)
    if subset is None or subset.size == 0:
        return SpectrumResult(w, None, np.zeros(0, dtype=int), cutoff)

    scale = max(np.max(np.abs(w)), 1.0)
    Zs = _kernels.tridiagonal_inverse_iteration(d, e, w[subset], 1e-7 * scale, 3)
    if method == "banded":
        V = _kernels.back_transform(Zs.astype(complex), ph, rp, rc, rs, count).T
    else:
        V = (Q * ph[None, :]) @ Zs.T
    return SpectrumResult(w, V, subset, cutoff)


def eigvalsh(H) -> np.ndarray:
    return eigendecompose(H, vectors="none").eigenvalues


# -- reference solver ----------------------------------------------------------

def jacobi_eigh(A: np.ndarray, tol: float = 1e-15, max_sweeps: int = 100):
    """Cyclic complex Jacobi eigensolver (reference path, small matrices only)."""
    A = np.array(A, dtype=complex)
    n = A.shape[0]
    if n > JACOBI_MAX_DIM:
        raise InvalidInputError(f"Jacobi reference limited to dimension {JACOBI_MAX_DIM}")
    V = np.eye(n, dtype=complex)
    scale = max(np.linalg.norm(A), 1e-300)
    for _ in range(max_sweeps):
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                mag = abs(apq)
                if mag <= 1e-300:
                    continue
                phase = apq / mag
                theta = (A[q, q].real - A[p, p].real) / (2.0 * mag)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                J = np.array([[c, s], [-s * np.conj(phase), c * np.conj(phase)]])
                cols = A[:, [p, q]] @ J
                A[:, p], A[:, q] = cols[:, 0], cols[:, 1]
                rows = J.conj().T @ A[[p, q], :]
                A[p, :], A[q, :] = rows[0], rows[1]
                A[p, q] = A[q, p] = 0.0
                A[p, p] = A[p, p].real
                A[q, q] = A[q, q].real
                vcols = V[:, [p, q]] @ J
                V[:, p], V[:, q] = vcols[:, 0], vcols[:, 1]
    else:
        raise NonConvergenceError("Jacobi sweeps did not converge")
    w = np.real(np.diag(A))
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


# -- physics-facing helpers ----------------------------------------------------

def reconstruction_error(H, spec: SpectrumResult) -> float:
    """``||V diag(w) V^H - H||_F / ||H||_F`` for a full decomposition."""
    dense = H.to_dense() if isinstance(H, ComplexOperator) else np.asarray(H)
    V = spec.vectors
    rec = (V * spec.eigenvalues[None, :]) @ V.conj().T
    return float(np.linalg.norm(rec - dense) / max(np.linalg.norm(dense), 1e-300))


def chiral_pairing_defect(eigenvalues: np.ndarray) -> float:
    """Largest mismatch between the spectrum and its negative."""
    w = np.sort(eigenvalues)
    return float(np.max(np.abs(w + w[::-1]), initial=0.0))


def hamiltonian_spectrum(params: ModelParams, cutoff, vectors="none") -> SpectrumResult:
    cutoff = cutoff if isinstance(cutoff, FockCutoff) else FockCutoff(cutoff)
    return eigendecompose(build_hamiltonian(params, cutoff), cutoff, vectors=vectors)


def converged_levels(params: ModelParams, cutoffs, tol: float = 1e-6, near_critical: float = 0.01) -> SpectrumResult:
    """Spectrum at the smaller cutoff, annotated with its converged low levels.

    A level counts as converged when it moves by at most ``tol`` when the
    cutoff is doubled.  Levels are compared in increasing order among the
    strictly positive levels (the negative half mirrors them; near-zero
    defect and edge levels are skipped);
    ``converged_count`` is the length of the leading run of converged
    positive levels.
    """
    small, large = (c if isinstance(c, FockCutoff) else FockCutoff(c) for c in cutoffs)
    if large.n_max < 2 * small.n_max:
        raise InvalidInputError("second cutoff must be at least twice the first")
    a = hamiltonian_spectrum(params, small)
    b = hamiltonian_spectrum(params, large)
    # near-zero defect / edge-mode pairs may sit on either side of 0; skip them
    scale = max(float(np.max(np.abs(b.eigenvalues))), 1.0)
    pa = np.sort(a.positive_levels(ZERO_TOL * scale))
    pb = np.sort(b.positive_levels(ZERO_TOL * scale))
    m = min(pa.size, pb.size)
    ok = np.abs(pa[:m] - pb[:m]) <= tol
    count = int(np.argmin(ok)) if not np.all(ok) else m
    flags = []
    if abs(params.delta_v) <= near_critical:
        flags.append("near-critical")
        log.warning("near-critical couplings |dv|=%.3g: %d levels converged", abs(params.delta_v), count)
    return SpectrumResult(a.eigenvalues, None, np.zeros(0, dtype=int), small, count, tuple(flags))


@dataclass(frozen=True, eq=False)
class DefectState:
    state: SpinFockVector
    energy: float
    sigma_z_expectation: float
    edge_modes: tuple = ()


def _mean_n(vec: np.ndarray) -> float:
    pop = np.abs(vec) ** 2
    n = np.arange(pop.size) // 2
    return float(np.sum(pop * n) / np.sum(pop))


def extract_defect(spec: SpectrumResult, zero_tol: float | None = None, edge_fraction: float = 0.75) -> DefectState:
    """Zero-energy defect eigenstate with its sigma_z expectation.

    In a truncated lattice the defect usually has a chiral partner bound to
    the cutoff edge, and the two are degenerate to machine precision.  The
    near-zero cluster is therefore rotated onto sigma_z eigenstates, states
    living mostly in the top ``1 - edge_fraction`` of the Fock range are set
    aside as truncation artifacts, and the remaining candidate is the
    defect.  Two surviving candidates raise :class:`DegeneracyError`.
    """
    if spec.eigenvalues.size == 0:
        raise InvalidInputError("empty spectrum")
    if spec.vectors is None or spec.vectors.shape[1] == 0:
        raise InvalidInputError("spectrum carries no eigenvectors")
    if spec.cutoff is None:
        raise InvalidInputError("spectrum has no cutoff attached")
    w_avail = spec.eigenvalues[spec.vector_index]
    scale = max(np.max(np.abs(spec.eigenvalues)), 1.0)
    if zero_tol is None:
        zero_tol = ZERO_TOL * scale
    order = np.argsort(np.abs(w_avail), kind="stable")
    kmin = order[0]
    cluster = [k for k in order if abs(w_avail[k]) <= max(zero_tol, abs(w_avail[kmin]) + zero_tol)]
    sz = sigma_z_diagonal(spec.cutoff)
    V = spec.vectors[:, cluster]
    if len(cluster) > 1:
        M = V.conj().T @ (sz[:, None] * V)
        mw, mv = np.linalg.eigh((M + M.conj().T) / 2)
        V = V @ mv
        energies = (np.abs(mv) ** 2).T @ w_avail[cluster]
    else:
        energies = np.array([w_avail[kmin]])
    edge_start = edge_fraction * spec.cutoff.n_max
    candidates, edges = [], []
    for j in range(V.shape[1]):
        vec = V[:, j] / np.linalg.norm(V[:, j])
        pop = np.abs(vec) ** 2
        n = np.arange(pop.size) // 2
        edge_weight = float(np.sum(pop[n >= edge_start]))
        entry = (vec, float(energies[j]), float(np.clip(np.sum(sz * pop), -1.0, 1.0)))
        (edges if edge_weight > 0.5 else candidates).append(entry)
    if not candidates:
        raise DegeneracyError("all near-zero states are bound to the cutoff edge; increase n_max")
    if len(candidates) > 1:
        candidates.sort(key=lambda c: -abs(c[2]))
        a, b = candidates[0], candidates[1]
        if abs(abs(a[2]) - abs(b[2])) < 1e-6:
            raise DegeneracyError(
                f"ambiguous defect: two states with E={a[1]:.3g}, <n>={_mean_n(a[0]):.3g} and "
                f"E={b[1]:.3g}, <n>={_mean_n(b[0]):.3g}"
            )
    vec, energy, pol = candidates[0]
    return DefectState(SpinFockVector(vec, spec.cutoff), energy, pol, tuple(e[0] for e in edges))


def defect_state(params: ModelParams, cutoff, cluster_width: int = 2) -> DefectState:
    """Numerical defect of the truncated Hamiltonian (only near-zero vectors computed)."""
    cutoff = cutoff if isinstance(cutoff, FockCutoff) else FockCutoff(cutoff)
    H = build_hamiltonian(params, cutoff)
    w = eigvalsh(H)
    mid = np.argsort(np.abs(w), kind="stable")[: 2 * cluster_width]
    spec = eigendecompose(H, cutoff, vectors=np.sort(mid))
    return extract_defect(spec)
