"""Gaussian unitaries and the closed-form eigenstates they generate.

Conventions (rightmost operator acts first)::

    D(alpha) = exp(alpha a^+ - alpha^* a)          D^+ a D = a + alpha
    S(xi)    = exp((xi^* a^2 - xi a^+2) / 2)       S^+ a S = a cosh|xi| - a^+ e^{i arg xi} sinh|xi|
    R(theta) = exp(-i theta n)                     R^+ a R = a e^{-i theta}

For |v_r| != |v_cr| every eigenstate is ``U (|n>|A> +- e^{i chi}|n-1>|B>)/sqrt2``
(or ``U|0>|A>`` for the zero mode) with one unitary ``U`` shared by all
levels.  The composition order of ``U`` is not taken on faith: the
candidate orders are scored against the Hamiltonian and the winner is
cached (:func:`select_ordering`).
"""
from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.linalg import expm
from scipy.sparse.linalg import expm_multiply

from .errors import CriticalityError, CutoffInsufficientError, InvalidInputError, WrongRegimeError
from .model import (
    E,
    G,
    ComplexOperator,
    FockCutoff,
    ModelParams,
    SpinFockVector,
    boson_matrix,
    build_hamiltonian,
)

LEAK_TOL = 1e-12
ORDERING_TOL = 1e-8


class Ordering(enum.Enum):
    """Operator product order of the eigenstate unitary, rightmost acting first."""

    S_D_R = "S_D_R"
    S_R_D = "S_R_D"
    R_D_S = "R_D_S"


@dataclass(frozen=True)
class GaussianFrame:
    alpha: complex
    theta: float
    xi_zero: float
    xi_bulk: float
    phi: float
    ordering: Ordering


@dataclass(frozen=True)
class AnalyticLevel:
    """Closed-form level ``E_n = +-sqrt(| |v_r|^2 - |v_cr|^2 | n)``.

    ``gauge_phase`` is the free phase added on top of the sublattice phase
    that the Hamiltonian itself fixes; it is 0 unless requested otherwise.
    """

    n: int
    energy_plus: float
    energy_minus: float
    sublattice_A: str
    sublattice_B: str
    gauge_phase: float = 0.0


@dataclass(frozen=True, eq=False)
class GaussianUnitary:
    operator: ComplexOperator
    pad: int
    interior: int
    eps_pad: float
    unitarity: float


def _require_noncritical(params: ModelParams):
    if params.vr_mag == params.vcr_mag:
        raise CriticalityError(
            "|v_r| == |v_cr|: the displacement diverges and no normalizable zero-energy state exists"
        )


def derive_frame(params: ModelParams, ordering: Ordering | None = None) -> GaussianFrame:
    """Displacement, rotation and squeeze parameters of the eigenstate unitary."""
    _require_noncritical(params)
    vr, vcr, w = params.vr_mag, params.vcr_mag, params.w
    phi = params.mean_phase
    theta = 0.5 * (params.vcr_phase - params.vr_phase)
    alpha = w * (vcr * np.exp(-1j * phi) - vr * np.exp(1j * phi)) / (vr ** 2 - vcr ** 2)
    xi_zero = math.atanh(min(vr, vcr) / max(vr, vcr))
    xi_bulk = 0.5 * math.atanh(2.0 * vr * vcr / (vr ** 2 + vcr ** 2))
    if ordering is None:
        ordering = select_ordering()[0]
    return GaussianFrame(complex(alpha), theta, xi_zero, xi_bulk, phi, ordering)


def sublattices(params: ModelParams):
    """``(A, B)`` spin labels: A carries the zero mode."""
    _require_noncritical(params)
    return (G, E) if params.vr_mag > params.vcr_mag else (E, G)


def chiral_phase(params: ModelParams) -> float:
    """Relative phase of the B sublattice fixed by the Hamiltonian (``-phi`` or ``+phi``)."""
    return -params.mean_phase if params.vr_mag > params.vcr_mag else params.mean_phase


# -- generators and their action ----------------------------------------------

def _ladder(n_levels: int):
    a = sp.diags(np.sqrt(np.arange(1, n_levels, dtype=float)), 1, format="csr", dtype=complex)
    return a, a.conj().T.tocsr()


def generator(kind: str, value, n_levels: int):
    """Sparse anti-Hermitian generator ``K`` with ``U = exp(K)``."""
    a, ad = _ladder(n_levels)
    if kind == "displacement":
        return (value * ad - np.conj(value) * a).tocsr()
    if kind == "squeeze":
        return (0.5 * (np.conj(value) * (a @ a) - value * (ad @ ad))).tocsr()
    if kind == "rotation":
        return sp.diags(-1j * value * np.arange(n_levels), 0, format="csr")
    raise InvalidInputError(f"unknown Gaussian kind {kind!r}")


def apply_unitary(kind: str, value, vec: np.ndarray) -> np.ndarray:
    """Apply one Gaussian unitary to a Fock-space vector (truncated generator)."""
    vec = np.asarray(vec, dtype=complex)
    if kind == "rotation":
        return np.exp(-1j * value * np.arange(vec.size)) * vec
    if value == 0:
        return vec.copy()
    return expm_multiply(generator(kind, value, vec.size), vec)


def support_pad(alpha=0.0, xi=0.0) -> int:
    """Padding of Fock indices kept between reported amplitudes and the edge."""
    return max(16, math.ceil(4.0 * (abs(alpha) ** 2 + math.exp(2.0 * abs(xi)))))


def build_gaussian_unitary(kind: str, value, cutoff) -> GaussianUnitary:
    """Dense matrix of a displacement, squeeze or rotation on the Fock space.

    The matrix is the exponential of the truncated generator.  Column ``k``
    is trusted when its weight on the top ``pad`` levels is at most
    :data:`LEAK_TOL`; ``interior`` is the last index of the leading run of
    trusted columns, ``eps_pad`` the largest edge weight among them and
    ``unitarity`` is ``max |U^+ U - 1|`` on that block.
    """
    cutoff = cutoff if isinstance(cutoff, FockCutoff) else FockCutoff(cutoff)
    if not np.isfinite(value):
        raise InvalidInputError(f"{kind} parameter must be finite")
    n_levels = cutoff.n_levels
    if kind == "displacement":
        pad = support_pad(alpha=value)
    elif kind == "squeeze":
        value = float(np.real(value))
        pad = support_pad(xi=value)
    elif kind == "rotation":
        value = float(np.real(value))
        pad = 0
    else:
        raise InvalidInputError(f"unknown Gaussian kind {kind!r}")
    if kind == "rotation":
        U = np.diag(np.exp(-1j * value * np.arange(n_levels)))
        leak = np.zeros(n_levels)
    else:
        if pad >= n_levels:
            raise CutoffInsufficientError(
                f"{kind}({value}) needs pad {pad} > n_max={cutoff.n_max}", suggested_n_max=4 * pad)
        U = expm(generator(kind, value, n_levels).toarray())
        leak = np.sum(np.abs(U[n_levels - pad:, :]) ** 2, axis=0)
    bad = np.flatnonzero(leak > LEAK_TOL)
    interior = int(bad[0]) - 1 if bad.size else cutoff.n_max
    if interior < 0:
        raise CutoffInsufficientError(
            f"{kind}({value}) leaks {leak[0]:.2e} onto the top {pad} levels even from the vacuum",
            suggested_n_max=2 * cutoff.n_max + pad,
        )
    block = U[:, : interior + 1]
    eps_pad = float(np.max(leak[: interior + 1]))
    unitarity = float(np.max(np.abs(block.conj().T @ block - np.eye(interior + 1))))
    op = ComplexOperator(U, "dense", None, False, kind)
    return GaussianUnitary(op, pad, interior, eps_pad, unitarity)


_APPLY_ORDER = {
    # letters left to right; rightmost acts first
    Ordering.S_D_R: "SDR",
    Ordering.S_R_D: "SRD",
    Ordering.R_D_S: "RDS",
}


def apply_frame(frame: GaussianFrame, vec: np.ndarray, xi: float) -> np.ndarray:
    out = np.asarray(vec, dtype=complex)
    for letter in reversed(_APPLY_ORDER[frame.ordering]):
        if letter == "S":
            out = apply_unitary("squeeze", xi, out)
        elif letter == "D":
            out = apply_unitary("displacement", frame.alpha, out)
        else:
            out = apply_unitary("rotation", frame.theta, out)
    return out


def estimate_support(frame: GaussianFrame, n: int = 0) -> int:
    """Rough Fock index below which the eigenstate of level ``n`` lives."""
    growth = math.exp(frame.xi_zero)
    spread = (abs(frame.alpha) * growth + math.sqrt(n + 1.0) * growth) ** 2
    tail = 40.0 / max(-math.log(max(math.tanh(frame.xi_zero), 1e-300)), 1e-3) if frame.xi_zero > 0 else 0.0
    return int(math.ceil(spread + 8.0 * math.sqrt(spread + 1.0) + tail + 2 * n + 16))


def _components(params: ModelParams, frame: GaussianFrame, n: int, sign: int, cutoff: FockCutoff,
                gauge_phase: float):
    """Fock components ``(f_g, f_e)`` on a padded work space, not yet truncated."""
    pad = support_pad(frame.alpha, frame.xi_zero)
    n_work = cutoff.n_levels + pad
    A, B = sublattices(params)
    top = np.zeros(n_work, dtype=complex)
    top[n] = 1.0
    upper = apply_frame(frame, top, frame.xi_zero)
    comps = {A: upper, B: np.zeros(n_work, dtype=complex)}
    if n > 0:
        low = np.zeros(n_work, dtype=complex)
        low[n - 1] = 1.0
        phase = sign * np.exp(1j * (chiral_phase(params) + gauge_phase))
        comps[B] = phase * apply_frame(frame, low, frame.xi_zero)
        comps[A] = comps[A] / math.sqrt(2.0)
        comps[B] = comps[B] / math.sqrt(2.0)
    return comps[G], comps[E]


def _truncate(f_g, f_e, cutoff: FockCutoff):
    keep = cutoff.n_levels
    leak = float(np.sum(np.abs(f_g[keep:]) ** 2) + np.sum(np.abs(f_e[keep:]) ** 2))
    total = float(np.sum(np.abs(f_g) ** 2) + np.sum(np.abs(f_e) ** 2))
    if leak > LEAK_TOL * total:
        pop = np.abs(f_g) ** 2 + np.abs(f_e) ** 2
        tail = np.cumsum(pop[::-1])[::-1] / total
        inside = np.flatnonzero(tail <= 1e-14)
        suggested = int(inside[0]) + 16 if inside.size and inside[0] > keep else 2 * keep
        raise CutoffInsufficientError(
            f"state leaks {leak / total:.2e} of its norm beyond n_max={cutoff.n_max}",
            suggested_n_max=suggested,
        )
    return f_g[:keep], f_e[:keep]


def analytic_energy(params: ModelParams, n: int) -> AnalyticLevel:
    _require_noncritical(params)
    if n < 0:
        raise InvalidInputError("level index must be >= 0")
    e = math.sqrt(abs(params.vr_mag ** 2 - params.vcr_mag ** 2) * n)
    A, B = sublattices(params)
    label = {G: "g", E: "e"}
    return AnalyticLevel(n, e, -e, label[A], label[B], 0.0)


def analytic_eigenstate(params: ModelParams, n: int, sign: int = 1, cutoff=None, *,
                        gauge_phase: float = 0.0, frame: GaussianFrame | None = None,
                        normalize: bool = True) -> SpinFockVector:
    """Closed-form eigenstate of level ``n`` with energy ``sign * E_n``.

    ``n = 0`` is the zero mode ``U|0>|A>``; ``n >= 1`` gives
    ``U(|n>|A> + sign e^{i(chi + gauge_phase)} |n-1>|B>)/sqrt2``.
    """
    if cutoff is None:
        raise InvalidInputError("a cutoff is required")
    cutoff = cutoff if isinstance(cutoff, FockCutoff) else FockCutoff(cutoff)
    if sign not in (1, -1):
        raise InvalidInputError("sign must be +1 or -1")
    if n < 0:
        raise InvalidInputError("level index must be >= 0")
    frame = frame or derive_frame(params)
    f_g, f_e = _components(params, frame, n, sign, cutoff, gauge_phase)
    f_g, f_e = _truncate(f_g, f_e, cutoff)
    state = SpinFockVector.from_components(f_g, f_e, cutoff)
    return state.normalized() if normalize else state


def eigen_residual(params: ModelParams, state: SpinFockVector, energy: float) -> float:
    H = build_hamiltonian(params, state.cutoff)
    return float(np.linalg.norm(H.matvec(state.amplitudes) - energy * state.amplitudes))


REFERENCE_PARAMS = ModelParams(1.3, 1.0, 0.7, 0.35, -1.1)


@functools.lru_cache(maxsize=1)
def select_ordering():
    """Score every candidate composition order against the Hamiltonian.

    Uses the zero mode and the first bulk level at fixed reference
    parameters with generic phases.  Returns ``(winner, residuals)``;
    exactly one order must reach :data:`ORDERING_TOL`.
    """
    params = REFERENCE_PARAMS
    cutoff = FockCutoff(120)
    residuals = {}
    for order in Ordering:
        frame = derive_frame(params, ordering=order)
        worst = 0.0
        for n, sign in ((0, 1), (1, 1), (2, -1)):
            f_g, f_e = _components(params, frame, n, sign, cutoff, 0.0)
            f_g, f_e = f_g[: cutoff.n_levels], f_e[: cutoff.n_levels]
            state = SpinFockVector.from_components(f_g, f_e, cutoff).normalized()
            energy = sign * analytic_energy(params, n).energy_plus
            worst = max(worst, eigen_residual(params, state, energy))
        residuals[order] = worst
    passing = [o for o, r in residuals.items() if r <= ORDERING_TOL]
    if len(passing) != 1:
        raise RuntimeError(f"could not fix the operator ordering: residuals {residuals}")
    return passing[0], residuals


# -- critical point ------------------------------------------------------------

class QuadratureConvention(enum.Enum):
    """How the transformed quadrature is conjugated out of x.

    ``HEISENBERG``: ``q = U^+ x U`` with ``U = D(beta) R(theta)`` (the form
    ``R(-theta) D(-beta) x D(beta) R(theta)``).
    ``SCHRODINGER``: ``q = U x U^+``.
    """

    HEISENBERG = "heisenberg"
    SCHRODINGER = "schrodinger"


BETA_CANDIDATES = {
    # name -> beta(w, |v|, phi_r, phi); only Re(beta e^{i theta}) enters q
    "sqrt2_phi_r": lambda w, v, phi_r, phi: -w * np.exp(1j * phi_r) / (math.sqrt(2.0) * v),
    "two_phi_r": lambda w, v, phi_r, phi: -w * np.exp(1j * phi_r) / (2.0 * v),
    "sqrt2_mean": lambda w, v, phi_r, phi: w * np.exp(1j * phi) / (math.sqrt(2.0) * v),
    "two_mean": lambda w, v, phi_r, phi: w * np.exp(1j * phi) / (2.0 * v),
}


@dataclass(frozen=True, eq=False)
class CriticalQuadrature:
    q_op: ComplexOperator
    q_conjugate_op: ComplexOperator
    beta_displacement: complex
    beta_rule: str
    convention: QuadratureConvention
    commutator_defect: float


def _require_critical(params: ModelParams):
    if params.vr_mag != params.vcr_mag:
        raise WrongRegimeError("critical quantities need |v_r| == |v_cr|")
    if params.vr_mag == 0.0:
        raise WrongRegimeError("critical quantities need |v| > 0")


def _interior(cutoff: FockCutoff) -> int:
    return cutoff.n_max - 1


def build_quadrature(params: ModelParams, cutoff, beta_rule: str, convention: QuadratureConvention,
                     pad: int | None = None) -> CriticalQuadrature:
    """Quadrature pair ``(q, q_p)`` of the critical point under one convention.

    Built on a padded Fock space and cut back to ``n_max + 1`` levels.
    """
    _require_critical(params)
    cutoff = cutoff if isinstance(cutoff, FockCutoff) else FockCutoff(cutoff)
    v = params.vr_mag
    theta = 0.5 * (params.vcr_phase - params.vr_phase)
    beta = complex(BETA_CANDIDATES[beta_rule](params.w, v, params.vr_phase, params.mean_phase))
    if pad is None:
        # D(beta) spreads |n> over roughly 2|beta| sqrt(n) neighbours
        pad = support_pad(alpha=beta) + math.ceil(8.0 * abs(beta) * math.sqrt(cutoff.n_levels))
    n_work = cutoff.n_levels + pad
    D = expm(generator("displacement", beta, n_work).toarray())
    R = np.diag(np.exp(-1j * theta * np.arange(n_work)))
    U = D @ R
    x = boson_matrix(n_work, "x_quadrature")
    p = boson_matrix(n_work, "p_quadrature")
    if convention is QuadratureConvention.HEISENBERG:
        q, qp = U.conj().T @ x @ U, U.conj().T @ p @ U
    else:
        q, qp = U @ x @ U.conj().T, U @ p @ U.conj().T
    keep = cutoff.n_levels
    q, qp = q[:keep, :keep], qp[:keep, :keep]
    m = _interior(cutoff) - 1
    comm = q[:m, :keep] @ qp[:keep, :m] - qp[:m, :keep] @ q[:keep, :m]
    defect = float(np.max(np.abs(comm - 1j * np.eye(m))))
    return CriticalQuadrature(
        ComplexOperator(q, "dense", None, True, "q"),
        ComplexOperator(qp, "dense", None, True, "q_p"),
        beta, beta_rule, convention, defect,
    )


def _identity_residual(params: ModelParams, quad: CriticalQuadrature) -> float:
    n_levels = quad.q_op.dim
    w, v = params.w, params.vr_mag
    a = boson_matrix(n_levels + 1, "a")
    ad = a.conj().T
    K = w * np.eye(n_levels + 1) + params.vr * ad + params.vcr * a
    KdK = (K.conj().T @ K)[:n_levels, :n_levels]
    phi = params.mean_phase
    q = quad.q_op.data
    rhs = 0.5 * w ** 2 * (1.0 - math.cos(2.0 * phi)) * np.eye(n_levels) + 2.0 * v ** 2 * (q @ q)
    m = n_levels - 2
    return float(np.linalg.norm((KdK - rhs)[:m, :m]))


@functools.lru_cache(maxsize=1)
def select_quadrature_convention():
    """Pick the (beta rule, convention) pair that satisfies the operator identity.

    Scored at generic reference couplings; exactly one pair must pass.
    """
    params = ModelParams(1.7, 0.8, 0.9, 0.8, -0.4)
    cutoff = FockCutoff(60)
    scores = {}
    for rule in BETA_CANDIDATES:
        for conv in QuadratureConvention:
            quad = build_quadrature(params, cutoff, rule, conv)
            scores[(rule, conv)] = _identity_residual(params, quad)
    passing = [k for k, r in scores.items() if r <= 1e-10]
    if len(passing) != 1:
        raise RuntimeError(f"no unique quadrature convention: {scores}")
    return passing[0], scores


def critical_quadrature(params: ModelParams, cutoff) -> CriticalQuadrature:
    (rule, conv), _ = select_quadrature_convention()
    return build_quadrature(params, cutoff, rule, conv)


def critical_identity_residual(params: ModelParams, cutoff) -> float:
    """Frobenius residual of ``K^+K = w^2 (1 - cos 2phi)/2 + 2|v|^2 q^2`` on the interior block.

    ``K = w + v_r a^+ + v_cr a``; the left side is the operator acting on the
    excited-spin component in the squared eigenvalue problem.
    """
    _require_critical(params)
    return _identity_residual(params, critical_quadrature(params, cutoff))


def critical_spectrum(params: ModelParams, q_grid) -> np.ndarray:
    """``E(q) = sqrt(w^2 (1 - cos 2phi)/2 + 2|v|^2 q^2)``; returns an (len, 2) array of (E+, E-)."""
    _require_critical(params)
    q = np.asarray(q_grid, dtype=float)
    phi = params.mean_phase
    e = np.sqrt(0.5 * params.w ** 2 * (1.0 - math.cos(2.0 * phi)) + 2.0 * params.vr_mag ** 2 * q ** 2)
    return np.stack([e, -e], axis=1)


def sufficient_cutoff(params: ModelParams, n: int = 0, *, attempts: int = 6) -> FockCutoff:
    """Smallest tried cutoff on which the analytic level-``n`` states fit without leakage."""
    frame = derive_frame(params)
    n_max = max(estimate_support(frame, n), n + 8)
    for _ in range(attempts):
        cutoff = FockCutoff(n_max)
        try:
            for sign in (1, -1):
                f_g, f_e = _components(params, frame, n, sign, cutoff, 0.0)
                _truncate(f_g, f_e, cutoff)
            return cutoff
        except CutoffInsufficientError as exc:
            n_max = max(exc.suggested_n_max or 0, int(1.5 * n_max))
    raise CutoffInsufficientError(f"no adequate cutoff found up to n_max={n_max}", suggested_n_max=n_max)


def _spectral_displacement(n_levels: int):
    """``(gamma, v) -> D(gamma) v`` via the eigenbasis of the truncated ``p`` quadrature.

    Uses ``D(gamma) = Rot(arg gamma)^+ exp(-i sqrt2 |gamma| p) Rot(arg gamma)``.
    """
    from .eigensolver import eigendecompose

    spec = eigendecompose(ComplexOperator(boson_matrix(n_levels, "p_quadrature"), "dense", None, True))
    mu, V = spec.eigenvalues, spec.vectors
    Vh = V.conj().T
    levels = np.arange(n_levels)

    def apply(gamma, v):
        r, ang = abs(gamma), np.angle(gamma)
        rot = np.exp(-1j * ang * levels)
        return np.conj(rot) * (V @ (np.exp(-1j * math.sqrt(2.0) * r * mu) * (Vh @ (rot * v))))

    return apply


def loop_eigenstates(params: ModelParams, n: int, sign: int, loop_u, cutoff, *, gauge_phase: float = 0.0):
    """Analytic level-``n`` eigenstates at ``phi_r = u - phi_cr`` for every ``u`` in ``loop_u``.

    Equal to calling :func:`analytic_eigenstate` point by point, but the
    squeezed Fock states are built once and ``D(beta(u))`` is factored as a
    phase times ``D(C) Rot(u)^+ D(R) Rot(u)`` with ``beta(u) = C + R e^{iu}``,
    so each point costs two dense matrix-vector products.
    """
    from .model import canonical_phase

    _require_noncritical(params)
    cutoff = cutoff if isinstance(cutoff, FockCutoff) else FockCutoff(cutoff)
    if sign not in (1, -1) or n < 0:
        raise InvalidInputError("need n >= 0 and sign = +-1")
    d = params.vr_mag ** 2 - params.vcr_mag ** 2
    rot_cr = np.exp(-1j * params.vcr_phase)
    C = params.w * params.vcr_mag * rot_cr / d
    R = -params.w * params.vr_mag * rot_cr / d
    xi = derive_frame(params).xi_zero
    reach = abs(C) + abs(R)
    root = math.sqrt(cutoff.n_levels) + reach
    n_work = cutoff.n_levels + support_pad(reach, xi) + math.ceil(root * root + 10.0 * root)
    disp = _spectral_displacement(n_work)
    DC = lambda v: disp(C, v)  # noqa: E731
    DR = lambda v: disp(R, v)  # noqa: E731
    levels = np.arange(n_work)
    squeezed = {}
    for k in {n, max(n - 1, 0)}:
        e_k = np.zeros(n_work, dtype=complex)
        e_k[k] = 1.0
        squeezed[k] = apply_unitary("squeeze", xi, e_k)
    A, B = sublattices(params)
    out = []
    for u in np.asarray(loop_u, dtype=float):
        q = params.replace(vr_phase=canonical_phase(u - params.vcr_phase))
        theta = 0.5 * (q.vcr_phase - q.vr_phase)
        shift = R * np.exp(1j * u)
        pref = np.exp(-0.5 * (C * np.conj(shift) - np.conj(C) * shift))
        rot_u = np.exp(-1j * u * levels)
        rot_t = np.exp(-1j * theta * levels)

        def U(vec):
            return pref * DC(np.conj(rot_u) * DR(rot_u * (rot_t * vec)))

        comps = {A: U(squeezed[n]), B: np.zeros(n_work, dtype=complex)}
        if n > 0:
            phase = sign * np.exp(1j * (chiral_phase(q) + gauge_phase))
            comps[B] = phase * U(squeezed[n - 1]) / math.sqrt(2.0)
            comps[A] = comps[A] / math.sqrt(2.0)
        f_g, f_e = _truncate(comps[G], comps[E], cutoff)
        out.append(SpinFockVector.from_components(f_g, f_e, cutoff).normalized())
    return out
