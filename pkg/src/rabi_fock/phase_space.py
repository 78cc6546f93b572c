"""Wigner functions, phase-space moments and Fock populations of spin-boson states.

Quadratures are ``x = (a + a^+)/sqrt2`` and ``p = (a - a^+)/(i sqrt2)``; the
Wigner function is normalized so that it integrates to 1 over (x, p) and is
bounded by ``1/pi``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import eval_genlaguerre, gammaln

from .eigensolver import eigendecompose
from .errors import GridTooSmallError, InvalidInputError, UntrustedMomentsError
from .model import ComplexOperator, SpinFockVector, boson_matrix, spin_components

EDGE_POPULATION_TOL = 1e-8
DEFAULT_POINTS = 201
GRID_SIGMAS = 5.0
LAGUERRE_MAX_N = 60


class SpinTreatment(enum.Enum):
    TRACED = "traced"
    CONDITIONED_G = "conditioned_g"
    CONDITIONED_E = "conditioned_e"


@dataclass(frozen=True, eq=False)
class WignerGrid:
    x_axis: np.ndarray
    p_axis: np.ndarray
    values: np.ndarray  # values[j, k] = W(x_j, p_k)
    spin_treatment: SpinTreatment

    def integral(self) -> float:
        return float(np.trapezoid(np.trapezoid(self.values, self.p_axis, axis=1), self.x_axis))

    def peak(self):
        j, k = np.unravel_index(np.argmax(self.values), self.values.shape)
        return float(self.x_axis[j]), float(self.p_axis[k])


@dataclass(frozen=True)
class GridSpec:
    x_min: float
    x_max: float
    p_min: float
    p_max: float
    points: int = DEFAULT_POINTS

    def axes(self):
        return (np.linspace(self.x_min, self.x_max, self.points),
                np.linspace(self.p_min, self.p_max, self.points))


@dataclass(frozen=True, eq=False)
class MomentSummary:
    mean: complex
    covariance: np.ndarray
    principal_angle: float
    squeeze_ratio: float

    @property
    def major_angle(self) -> float:
        a = self.principal_angle
        return a + math.pi / 2 if a <= 0 else a - math.pi / 2

    @property
    def mean_xp(self):
        return math.sqrt(2.0) * self.mean.real, math.sqrt(2.0) * self.mean.imag


def _boson_parts(state: SpinFockVector, treatment: SpinTreatment):
    """Fock-space vectors whose outer products sum to the reduced density operator."""
    f_g, f_e = spin_components(state)
    if treatment is SpinTreatment.TRACED:
        return [f_g, f_e]
    f = f_g if treatment is SpinTreatment.CONDITIONED_G else f_e
    nrm = np.linalg.norm(f)
    if nrm < 1e-12:
        raise InvalidInputError(f"state has no weight on the {treatment.value} sublattice")
    return [f / nrm]


def _expect_ladders(parts):
    """``<a>, <a^2>, <a^+ a>`` summed over the density-operator parts."""
    a1 = a2 = 0.0j
    nn = 0.0
    for f in parts:
        n = np.arange(f.size)
        a1 += np.sum(np.conj(f[:-1]) * np.sqrt(n[1:]) * f[1:])
        a2 += np.sum(np.conj(f[:-2]) * np.sqrt(n[2:] * (n[2:] - 1)) * f[2:])
        nn += float(np.sum(n * np.abs(f) ** 2))
    return complex(a1), complex(a2), nn


def first_moment(state: SpinFockVector) -> complex:
    """``<a>`` of the spin-traced state (no edge check)."""
    return _expect_ladders(_boson_parts(state, SpinTreatment.TRACED))[0]


def moments(state: SpinFockVector, spin_treatment: SpinTreatment = SpinTreatment.TRACED) -> MomentSummary:
    """Mean, quadrature covariance and principal squeezing axis.

    ``principal_angle`` is the direction of the squeezed (smallest
    variance) quadrature, folded onto (-pi/2, pi/2].

    Raises :class:`UntrustedMomentsError` when the population of the top
    Fock level exceeds :data:`EDGE_POPULATION_TOL`.
    """
    nrm2 = state.norm() ** 2
    if abs(nrm2 - 1.0) > 1e-8:
        raise InvalidInputError(f"state norm^2 = {nrm2:.12g}; normalize first")
    parts = _boson_parts(state, spin_treatment)
    edge = sum(abs(f[-1]) ** 2 for f in parts)
    if edge > EDGE_POPULATION_TOL:
        raise UntrustedMomentsError(f"population {edge:.2e} at n_max; enlarge the cutoff")
    a1, a2, nn = _expect_ladders(parts)
    xm, pm = math.sqrt(2.0) * a1.real, math.sqrt(2.0) * a1.imag
    vxx = a2.real + nn + 0.5 - xm ** 2
    vpp = -a2.real + nn + 0.5 - pm ** 2
    vxp = a2.imag - xm * pm
    cov = np.array([[vxx, vxp], [vxp, vpp]])
    evals, evecs = np.linalg.eigh(cov)
    minor = evecs[:, 0]
    angle = math.atan2(minor[1], minor[0])
    # axes are undirected: fold onto (-pi/2, pi/2]
    if angle <= -math.pi / 2:
        angle += math.pi
    elif angle > math.pi / 2:
        angle -= math.pi
    ratio = math.sqrt(evals[1] / evals[0]) if evals[0] > 0 else math.inf
    return MomentSummary(a1, cov, angle, ratio)


def axis_difference(a: float, b: float) -> float:
    """Smallest angle between two undirected axes, in [0, pi/2]."""
    d = math.fmod(abs(a - b), math.pi)
    return min(d, math.pi - d)


def fock_profile(state: SpinFockVector):
    """Populations ``|<n, s|psi>|^2`` as ``(g_profile, e_profile)``."""
    f_g, f_e = spin_components(state)
    return np.abs(f_g) ** 2, np.abs(f_e) ** 2


def auto_grid(summary: MomentSummary, points: int = DEFAULT_POINTS, sigmas: float = GRID_SIGMAS) -> GridSpec:
    """Square grid centred on the mean, half-width ``sigmas`` times the largest standard deviation."""
    xm, pm = summary.mean_xp
    half = sigmas * math.sqrt(float(np.max(np.linalg.eigvalsh(summary.covariance))))
    return GridSpec(xm - half, xm + half, pm - half, pm + half, points)


def _check_grid(grid: GridSpec, summary: MomentSummary, sigmas: float = GRID_SIGMAS):
    xm, pm = summary.mean_xp
    sx = sigmas * math.sqrt(summary.covariance[0, 0])
    sp_ = sigmas * math.sqrt(summary.covariance[1, 1])
    need = (xm - sx, xm + sx, pm - sp_, pm + sp_)
    have = (grid.x_min, grid.x_max, grid.p_min, grid.p_max)
    slack = 1e-9
    if have[0] > need[0] + slack or have[1] < need[1] - slack or have[2] > need[2] + slack or have[3] < need[3] - slack:
        bounds = (min(have[0], need[0]), max(have[1], need[1]), min(have[2], need[2]), max(have[3], need[3]))
        raise GridTooSmallError(
            f"grid {have} does not cover mean +- {sigmas:g} sigma {tuple(round(b, 4) for b in need)}",
            suggested_bounds=bounds,
        )


def _spectral(matrix: np.ndarray):
    spec = eigendecompose(ComplexOperator(matrix, "dense", None, True), vectors="all")
    return spec.eigenvalues, spec.vectors


def wigner(state: SpinFockVector, grid: GridSpec | None = None,
           spin_treatment: SpinTreatment = SpinTreatment.TRACED, *, check_grid: bool = True) -> WignerGrid:
    """Wigner function by displaced parity, ``W = Tr[rho D(g) Pi D(g)^+] / pi``.

    Each grid point needs the parity of ``exp(-i p x) exp(i x p) f``.  Both
    exponentials are applied in the eigenbases of the truncated quadrature
    matrices on a padded Fock space, and parity maps the ``x`` eigenbasis
    onto itself up to signs, so a grid point costs O(N).
    """
    summary = moments(state, spin_treatment)
    if grid is None:
        grid = auto_grid(summary)
    elif check_grid:
        _check_grid(grid, summary)
    x_axis, p_axis = grid.axes()
    parts = _boson_parts(state, spin_treatment)
    n0 = parts[0].size
    n_work = _work_levels(summary, grid, n0)
    lam_x, Vx = _spectral(boson_matrix(n_work, "x_quadrature"))
    lam_p, Vp = _spectral(boson_matrix(n_work, "p_quadrature"))
    parity = (-1.0) ** np.arange(n_work)
    M = Vx.conj().T @ (parity[:, None] * Vx)
    perm = np.argmax(np.abs(M), axis=1)
    signs = M[np.arange(n_work), perm]
    if np.max(np.abs(M - _scatter(perm, signs, n_work))) > 1e-8:
        raise RuntimeError("parity does not permute the quadrature eigenbasis")
    # x-eigenbasis coordinates of exp(i x_j p) f for every j
    values = np.zeros((x_axis.size, p_axis.size))
    phase_p = np.exp(1j * np.outer(x_axis, lam_p))  # (nx, N)
    phase_x = np.exp(-1j * np.outer(p_axis, lam_x))  # (np, N)
    T = Vx.conj().T @ Vp
    for f in parts:
        fw = np.zeros(n_work, dtype=complex)
        fw[:n0] = f
        cp = Vp.conj().T @ fw
        C = (phase_p * cp[None, :]) @ T.T  # rows: exp(i x_j p) f in x-eigenbasis
        for j in range(x_axis.size):
            h = phase_x * C[j][None, :]  # (np, N)
            values[j] += np.real(np.sum(np.conj(h) * (signs[None, :] * h[:, perm]), axis=1))
    return WignerGrid(x_axis, p_axis, values / math.pi, spin_treatment)


def _work_levels(summary: MomentSummary, grid: GridSpec, n0: int) -> int:
    """Fock levels needed to hold every displaced copy of the state."""
    xm, pm = summary.mean_xp
    dx = max(abs(xm - grid.x_min), abs(xm - grid.x_max))
    dp = max(abs(pm - grid.p_min), abs(pm - grid.p_max))
    reach = max(math.hypot(dx, pm), math.hypot(dx, dp))
    sigma = math.sqrt(float(np.max(np.linalg.eigvalsh(summary.covariance))))
    r = reach + 8.0 * sigma
    return max(n0 + 16, int(math.ceil(r * r / 2 + 4.0 * r + 32)))


def _scatter(perm, signs, n):
    out = np.zeros((n, n), dtype=complex)
    out[np.arange(n), perm] = signs
    return out


def displacement_element(m: int, n: int, beta: np.ndarray) -> np.ndarray:
    """``<m|D(beta)|n>`` from the associated Laguerre closed form."""
    r2 = np.abs(beta) ** 2
    if m >= n:
        log_pref = 0.5 * (gammaln(n + 1) - gammaln(m + 1))
        return np.exp(log_pref - r2 / 2) * beta ** (m - n) * eval_genlaguerre(n, m - n, r2)
    log_pref = 0.5 * (gammaln(m + 1) - gammaln(n + 1))
    return np.exp(log_pref - r2 / 2) * (-np.conj(beta)) ** (n - m) * eval_genlaguerre(m, n - m, r2)


def wigner_laguerre(state: SpinFockVector, grid: GridSpec,
                    spin_treatment: SpinTreatment = SpinTreatment.TRACED) -> WignerGrid:
    """Reference Wigner function from Laguerre matrix elements (small cutoffs only)."""
    parts = _boson_parts(state, spin_treatment)
    n_levels = parts[0].size
    if n_levels - 1 > LAGUERRE_MAX_N:
        raise InvalidInputError(f"Laguerre evaluation limited to n_max <= {LAGUERRE_MAX_N}")
    rho = sum(np.outer(f, np.conj(f)) for f in parts)
    x_axis, p_axis = grid.axes()
    X, P = np.meshgrid(x_axis, p_axis, indexing="ij")
    beta = math.sqrt(2.0) * (X + 1j * P)  # 2 gamma
    acc = np.zeros(X.shape, dtype=complex)
    for m in range(n_levels):
        for n in range(n_levels):
            if rho[n, m] != 0:
                acc += rho[n, m] * (-1) ** n * displacement_element(m, n, beta)
    return WignerGrid(x_axis, p_axis, acc.real / math.pi, spin_treatment)
