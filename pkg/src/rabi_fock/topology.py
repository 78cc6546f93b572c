"""Phase-space winding number, sublattice Zak phase and spin-polarization classifier.

All loops sweep ``phi_r`` at fixed ``phi_cr``.  The loop parameter is
``u = phi_r + phi_cr``; one turn of ``u`` brings every eigenstate back to
itself up to a global sign.  Along the loop the defect's displacement is

    beta(u) = C + R e^{iu},   C = w|v_cr| e^{-i phi_cr} / D,   R = -w|v_r| e^{-i phi_cr} / D

with ``D = |v_r|^2 - |v_cr|^2``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .eigensolver import defect_state
from .errors import (
    CriticalityError,
    IllDefinedError,
    InvalidInputError,
    MethodDisagreementError,
    TrajectoryThroughOriginError,
)
from .gaussian import derive_frame, loop_eigenstates, sufficient_cutoff
from .model import FockCutoff, ModelParams, canonical_phase, spin_components
from .phase_space import first_moment

ORIGIN_TOL = 1e-9
QUANTIZATION_TOL = 1e-6
MAX_STEP = math.pi / 4
MAX_DEPTH = 12
COMPONENT_TOL = 1e-12


class LoopParameterization(enum.Enum):
    PHI_R_AT_FIXED_PHI_CR = "phi_r swept at fixed phi_cr"


@dataclass(frozen=True, eq=False)
class TrajectorySample:
    center_C: complex
    radius_term_R: complex
    points: np.ndarray
    loop_parameter: np.ndarray
    parameterization: LoopParameterization = LoopParameterization.PHI_R_AT_FIXED_PHI_CR


@dataclass(frozen=True)
class WindingResult:
    winding: int
    contour_integral_value: float
    method_agreement: tuple
    circle_winding: int
    contour_winding: int
    oracle_winding: int | None
    literal_alpha_winding: int | None = None


@dataclass(frozen=True)
class ZakResult:
    delta_gamma: float
    grid_size: int
    branch_note: str
    gamma_g: float = 0.0
    gamma_e: float = 0.0
    extrapolated: float | None = None


def _require_noncritical(params: ModelParams):
    if params.is_critical:
        raise CriticalityError("|v_r| == |v_cr|: no isolated defect and no closed trajectory")


def spin_polarization(params: ModelParams) -> int:
    """``sgn(|v_cr| - |v_r|)``: the defect's sigma_z."""
    _require_noncritical(params)
    return 1 if params.vcr_mag > params.vr_mag else -1


def trajectory_terms(params: ModelParams):
    _require_noncritical(params)
    d = params.vr_mag ** 2 - params.vcr_mag ** 2
    rot = np.exp(-1j * params.vcr_phase)
    return complex(params.w * params.vcr_mag * rot / d), complex(-params.w * params.vr_mag * rot / d)


def loop_params(params: ModelParams, u: float) -> ModelParams:
    """Parameters at loop position ``u`` (``phi_r = u - phi_cr``)."""
    return params.replace(vr_phase=canonical_phase(u - params.vcr_phase))


def _loop_grid(samples: int) -> np.ndarray:
    return 2.0 * math.pi * np.arange(samples) / samples


def trajectory(params: ModelParams, samples: int = 256) -> TrajectorySample:
    if samples < 16:
        raise InvalidInputError("trajectory needs at least 16 samples")
    C, R = trajectory_terms(params)
    u = _loop_grid(samples)
    return TrajectorySample(C, R, C + R * np.exp(1j * u), u)


def literal_alpha_points(params: ModelParams, samples: int = 256) -> np.ndarray:
    """Diagnostic: the rotating-frame displacement alpha over phi in [0, 2pi) at fixed phi_cr."""
    _require_noncritical(params)
    phi = _loop_grid(samples)
    d = params.vr_mag ** 2 - params.vcr_mag ** 2
    return params.w * (params.vcr_mag * np.exp(-1j * phi) - params.vr_mag * np.exp(1j * phi)) / d


# -- winding -------------------------------------------------------------------

def _checked(z: complex) -> complex:
    if abs(z) <= ORIGIN_TOL:
        raise TrajectoryThroughOriginError(f"trajectory passes within {abs(z):.2e} of the origin")
    return z


def accumulated_argument(fn, samples: int) -> float:
    """Total change of ``arg fn(u)`` over ``u`` in [0, 2pi], refining steps above pi/4.

    ``fn`` must be 2pi-periodic.  Steps are bisected until each principal
    argument increment is below :data:`MAX_STEP`, so the sum cannot alias.
    """
    us = _loop_grid(samples)
    zs = [_checked(fn(u)) for u in us]
    total = 0.0
    for i in range(samples):
        a = us[i]
        b = us[i + 1] if i + 1 < samples else 2.0 * math.pi
        total += _segment(fn, a, b, zs[i], zs[(i + 1) % samples], 0)
    return total


def _segment(fn, a, b, za, zb, depth):
    step = float(np.angle(zb / za))
    if abs(step) <= MAX_STEP or depth >= MAX_DEPTH:
        return step
    m = 0.5 * (a + b)
    zm = _checked(fn(m))
    return _segment(fn, a, m, za, zm, depth + 1) + _segment(fn, m, b, zm, zb, depth + 1)


def points_winding(points) -> float:
    """Accumulated argument of a closed sampled curve divided by 2pi (no refinement)."""
    z = np.asarray(points, dtype=complex)
    if np.min(np.abs(z)) <= ORIGIN_TOL:
        raise TrajectoryThroughOriginError("sampled curve touches the origin")
    return float(np.sum(np.angle(np.roll(z, -1) / z))) / (2.0 * math.pi)


def _quantize(value: float, what: str) -> int:
    k = round(value / (2.0 * math.pi))
    if abs(value / (2.0 * math.pi) - k) > QUANTIZATION_TOL:
        raise IllDefinedError(f"{what} winding {value / (2 * math.pi):.9f} is not within {QUANTIZATION_TOL} of an integer")
    return int(k)


def defect_cutoff(params: ModelParams) -> FockCutoff:
    """Cutoff for numerically extracting the defect: analytic support plus a margin for the edge mode."""
    base = sufficient_cutoff(params, 0).n_max
    return FockCutoff(int(math.ceil(1.5 * base)) + 24)


def numerical_first_moment(params: ModelParams, cutoff) -> complex:
    return first_moment(defect_state(params, cutoff).state)


def winding_number(params: ModelParams, samples: int = 64, *, oracle: bool = True,
                   oracle_cutoff=None, diagnostic: bool = False) -> WindingResult:
    """Winding of the defect trajectory by three independent routes.

    (a) circle test ``|R| > |C|``; (b) accumulated argument of the closed
    form; (c) accumulated argument of ``<a>`` of the numerically
    diagonalized defect state.  Disagreement raises
    :class:`MethodDisagreementError`.
    """
    if samples < 16:
        raise InvalidInputError("winding needs at least 16 samples")
    C, R = trajectory_terms(params)
    circle = 1 if abs(R) > abs(C) else 0
    contour_value = accumulated_argument(lambda u: C + R * np.exp(1j * u), samples)
    contour = _quantize(contour_value, "contour")
    oracle_w = None
    if oracle:
        cutoff = oracle_cutoff or defect_cutoff(params)
        value = accumulated_argument(lambda u: numerical_first_moment(loop_params(params, u), cutoff), samples)
        oracle_w = _quantize(value, "oracle")
    literal = None
    if diagnostic:
        literal = int(round(points_winding(literal_alpha_points(params, max(samples, 256)))))
    agree = (circle == contour, True if oracle_w is None else oracle_w == contour,
             True if oracle_w is None else oracle_w == circle)
    result = WindingResult(contour, contour_value, agree, circle, contour, oracle_w, literal)
    if not all(agree):
        err = MethodDisagreementError(
            f"winding methods disagree: circle={circle}, contour={contour}, oracle={oracle_w}")
        err.result = result
        raise err
    return result


# -- Zak phase -----------------------------------------------------------------

def loop_phase(states) -> float:
    """Closed-loop phase ``-arg prod_k <f_k|f_{k+1}>`` of normalized vectors, on (-pi, pi].

    Exactly invariant under any per-point phase change of the vectors.
    """
    total = 0.0
    k_max = len(states)
    for k in range(k_max):
        ov = np.vdot(states[k], states[(k + 1) % k_max])
        if abs(ov) < 1e-14:
            raise IllDefinedError(f"consecutive loop states are orthogonal at step {k}; refine the grid")
        total -= float(np.angle(ov))
    return wrap_principal(total)


def wrap_principal(angle: float) -> float:
    """Map onto (-pi, pi]."""
    out = math.fmod(angle, 2.0 * math.pi)
    if out <= -math.pi:
        out += 2.0 * math.pi
    elif out > math.pi:
        out -= 2.0 * math.pi
    return out


def zak_from_components(f_g_loop, f_e_loop) -> tuple:
    """``(delta_gamma, gamma_g, gamma_e)`` from per-sublattice loop vectors."""
    normed = []
    for loop in (f_g_loop, f_e_loop):
        out = []
        for f in loop:
            nrm = np.linalg.norm(f)
            if nrm < COMPONENT_TOL:
                raise IllDefinedError("a sublattice component vanishes on the loop")
            out.append(f / nrm)
        normed.append(out)
    gamma_g, gamma_e = loop_phase(normed[0]), loop_phase(normed[1])
    # halve the principal difference: the branch that is continuous from the xi = 0 limit
    return 0.5 * wrap_principal(gamma_e - gamma_g), gamma_g, gamma_e


def zak_loop_components(params: ModelParams, n: int, sign: int, grid: int, cutoff=None,
                        gauge_phase: float = 0.0):
    """Sublattice components of the analytic level-``n`` eigenstate around the loop."""
    _require_noncritical(params)
    if grid < 64:
        raise InvalidInputError("Zak grid must be >= 64")
    if n < 1:
        raise InvalidInputError("Zak phase needs a bulk level n >= 1")
    cutoff = cutoff or sufficient_cutoff(params, n)
    loop_u = _loop_grid(grid) + params.vr_phase + params.vcr_phase
    f_g, f_e = [], []
    for state in loop_eigenstates(params, n, sign, loop_u, cutoff, gauge_phase=gauge_phase):
        g, e = spin_components(state)
        f_g.append(g)
        f_e.append(e)
    return f_g, f_e


def zak_phase(params: ModelParams, n: int = 1, sign: int = 1, grid: int = 512, *, cutoff=None,
              gauge_phase: float = 0.0) -> ZakResult:
    """Half the difference of the sublattice loop phases of a bulk eigenstate.

    Each loop phase is a discrete closed-loop phase of rays, so it does not
    depend on the phase convention of the states on the grid.  Halving is
    ambiguous modulo pi; the difference is wrapped onto (-pi, pi] first,
    which is the branch continuous from ``v_cr = 0`` where it vanishes.

    For exact eigenstates the result is
    ``-spin_polarization * (pi/2)(cosh 2xi - 1)`` modulo pi (see
    :func:`zak_phase_closed_form`).
    """
    f_g, f_e = zak_loop_components(params, n, sign, grid, cutoff, gauge_phase)
    delta, gg, ge = zak_from_components(f_g, f_e)
    # every other grid point is the half-size loop; the discretization error is O(grid^-2)
    half = zak_from_components(f_g[::2], f_e[::2])[0]
    extrapolated = delta + (delta - half) / 3.0
    note = ("gamma_e - gamma_g wrapped onto (-pi, pi] before halving; "
            "branch continuous from the single-coupling limit")
    return ZakResult(delta, grid, note, gg, ge, extrapolated)


def zak_phase_closed_form(params: ModelParams) -> float:
    """Gauge-invariant sublattice phase difference predicted for exact eigenstates.

    Over one turn of ``u`` the squeezed Fock state ``S|k>`` is rotated by
    half a turn; its loop phase is ``-pi(k(cosh 2xi - 1) + sinh^2 xi)``
    modulo 2pi, so neighbouring Fock indices differ by ``pi(cosh 2xi - 1)``.
    The value is independent of ``n``, of the branch sign and of ``w``.
    """
    frame = derive_frame(params)
    diff = -spin_polarization(params) * math.pi * (math.cosh(2.0 * frame.xi_zero) - 1.0)
    return 0.5 * wrap_principal(diff)
