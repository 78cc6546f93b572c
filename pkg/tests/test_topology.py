import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rabi_fock.errors import CriticalityError, IllDefinedError, InvalidInputError
from rabi_fock.gaussian import analytic_eigenstate, derive_frame
from rabi_fock.model import ModelParams
from rabi_fock.phase_space import first_moment
from rabi_fock.topology import (
    accumulated_argument,
    literal_alpha_points,
    loop_params,
    loop_phase,
    points_winding,
    spin_polarization,
    trajectory,
    trajectory_terms,
    winding_number,
    zak_from_components,
    zak_loop_components,
    zak_phase,
    zak_phase_closed_form,
)

noncritical = st.tuples(st.floats(0.1, 3.0), st.floats(0.05, 2.0), st.floats(-math.pi, math.pi),
                        st.floats(0.05, 2.0), st.floats(-math.pi, math.pi)).filter(lambda t: abs(t[1] - t[3]) > 0.02)


def test_trajectory_closed_form():
    p = ModelParams(1.7, 0.8, 0.3, 1.3, -2.0)
    t = trajectory(p, 64)
    d = 0.8 ** 2 - 1.3 ** 2
    C = 1.7 * 1.3 * np.exp(2.0j) / d
    R = -1.7 * 0.8 * np.exp(2.0j) / d
    assert t.center_C == pytest.approx(C, abs=1e-14)
    assert t.radius_term_R == pytest.approx(R, abs=1e-14)
    assert np.max(np.abs(t.points - (C + R * np.exp(1j * t.loop_parameter)))) <= 1e-12


def test_trajectory_is_lab_frame_displacement():
    # beta(u) = alpha e^{-i theta} at phi_r = u - phi_cr
    p = ModelParams(1.2, 0.6, 0.0, 1.1, 0.7)
    t = trajectory(p, 32)
    for u, z in zip(t.loop_parameter, t.points):
        f = derive_frame(loop_params(p, u))
        assert z == pytest.approx(f.alpha * np.exp(-1j * f.theta), abs=1e-12)


def test_u_zero_point_shared_by_both_regimes():
    for vr, vcr in ((1.0, 0.25), (0.25, 1.0)):
        p = ModelParams(2.5, vr, 0.0, vcr, 0.0)
        assert trajectory(p, 16).points[0] == pytest.approx(-2.5 / (vr + vcr), abs=1e-14)


def test_trajectory_magnitudes_in_both_regimes():
    C, R = trajectory_terms(ModelParams(2.5, 1.0, 0.0, 0.25, 0.0))
    assert abs(R) == pytest.approx(2.5 / 0.9375)
    assert abs(C) == pytest.approx(2.5 * 0.25 / 0.9375)


def test_single_coupling_circle_about_origin():
    C, R = trajectory_terms(ModelParams(1.0, 0.7, 0.4, 0.0, 0.0))
    assert C == 0
    res = winding_number(ModelParams(1.0, 0.7, 0.4, 0.0, 0.0), 32)
    assert res.winding == 1


def test_trajectory_critical_and_samples():
    with pytest.raises(CriticalityError):
        trajectory(ModelParams(1.0, 1.0, 0.0, 1.0, 0.0))
    with pytest.raises(InvalidInputError):
        trajectory(ModelParams(1.0, 1.0, 0.0, 0.5, 0.0), 8)


@pytest.mark.parametrize("vr,vcr,expected", [(1.0, 0.25, 1), (0.25, 1.0, 0), (1.0, 0.7, 1), (0.5, 1.0, 0)])
def test_winding_three_routes(vr, vcr, expected):
    res = winding_number(ModelParams(1.5, vr, 0.6, vcr, -0.3), 32)
    assert res.winding == expected
    assert res.circle_winding == res.contour_winding == res.oracle_winding == expected
    assert all(res.method_agreement)
    assert abs(res.contour_integral_value / (2 * math.pi) - res.winding) <= 1e-6


def test_literal_alpha_diagnostic_is_ellipse():
    # the rotating-frame alpha encircles the origin in both regimes
    a = winding_number(ModelParams(1.0, 1.0, 0.0, 0.25, 0.0), 32, oracle=False, diagnostic=True)
    b = winding_number(ModelParams(1.0, 0.25, 0.0, 1.0, 0.0), 32, oracle=False, diagnostic=True)
    assert abs(a.literal_alpha_winding) == 1 and abs(b.literal_alpha_winding) == 1
    assert (a.winding, b.winding) == (1, 0)
    pts = literal_alpha_points(ModelParams(1.0, 1.0, 0.0, 0.25, 0.0), 64)
    assert np.ptp(np.abs(pts)) > 0.1


@settings(max_examples=200, deadline=None)
@given(noncritical)
def test_winding_quantized_and_consistent(t):
    p = ModelParams(*t)
    res = winding_number(p, 32, oracle=False)
    assert res.winding in (0, 1)
    assert abs(res.contour_integral_value / (2 * math.pi) - res.winding) <= 1e-6
    # classifier consistency
    assert (res.winding == 1) == (spin_polarization(p) == -1) == (p.vr_mag > p.vcr_mag)


@settings(max_examples=100, deadline=None)
@given(noncritical, st.floats(-3.0, 3.0))
def test_squeeze_deformation_invariance(t, r):
    p = ModelParams(*t)
    C, R = trajectory_terms(p)
    base = accumulated_argument(lambda u: C + R * np.exp(1j * u), 64)
    ch, sh = math.cosh(r), math.sinh(r)

    def squeezed(u):
        z = C + R * np.exp(1j * u)
        return z * ch - np.conj(z) * sh

    assert round(accumulated_argument(squeezed, 64) / (2 * math.pi)) == round(base / (2 * math.pi))


def test_zero_mode_moment_is_trajectory():
    p = ModelParams(1.3, 1.0, 0.2, 0.45, -0.7)
    t = trajectory(p, 16)
    for u, z in zip(t.loop_parameter, t.points):
        psi = analytic_eigenstate(loop_params(p, u), 0, 1, 150)
        assert first_moment(psi) == pytest.approx(z, abs=1e-10)


def test_moment_curve_winding_matches():
    for p in (ModelParams(1.3, 1.0, 0.2, 0.45, -0.7), ModelParams(1.3, 0.45, 0.2, 1.0, -0.7)):
        t = trajectory(p, 32)
        moments = [first_moment(analytic_eigenstate(loop_params(p, u), 0, 1, 150)) for u in t.loop_parameter]
        assert round(points_winding(moments)) == winding_number(p, 32, oracle=False).winding


@pytest.mark.parametrize("vr,vcr,expected", [(0.5, 1.0, 1), (1.0, 0.25, -1)])
def test_spin_polarization_values(vr, vcr, expected):
    assert spin_polarization(ModelParams(2.0, vr, 0.0, vcr, 0.0)) == expected
    assert spin_polarization(ModelParams(2.0, vcr, 0.0, vr, 0.0)) == -expected


def test_loop_phase_gauge_invariant():
    rng = np.random.default_rng(4)
    vecs = [v / np.linalg.norm(v) for v in rng.normal(size=(40, 6)) + 1j * rng.normal(size=(40, 6))]
    # smooth loop so overlaps never vanish
    loop = [vecs[0] * np.exp(1j * k * 0.1) + 0.2 * vecs[1] * np.sin(2 * math.pi * k / 40) for k in range(40)]
    loop = [v / np.linalg.norm(v) for v in loop]
    twisted = [v * np.exp(2j * math.pi * rng.random()) for v in loop]
    assert abs(loop_phase(loop) - loop_phase(twisted)) <= 1e-12


def test_zak_gauge_invariant_under_pointwise_phases():
    p = ModelParams(1.5, 1.0, 0.2, 0.4, -0.6)
    f_g, f_e = zak_loop_components(p, 1, 1, 128)
    rng = np.random.default_rng(8)
    a = zak_from_components(f_g, f_e)[0]
    b = zak_from_components([f * np.exp(2j * math.pi * rng.random()) for f in f_g],
                            [f * np.exp(2j * math.pi * rng.random()) for f in f_e])[0]
    assert abs(a - b) <= 1e-12


@pytest.mark.parametrize("gauge", [0.9, -2.2])
def test_zak_gauge_phase_independent(gauge):
    p = ModelParams(1.0, 1.0, 0.0, 0.25, 0.0)
    a = zak_phase(p, 1, 1, 128)
    b = zak_phase(p, 1, 1, 128, gauge_phase=gauge)
    assert abs(a.delta_gamma - b.delta_gamma) <= 1e-12


def test_zak_range_and_branch_note():
    r = zak_phase(ModelParams(1.0, 0.25, 0.0, 1.0, 0.0), 1, -1, 128)
    assert -math.pi < r.delta_gamma <= math.pi
    assert "wrapped" in r.branch_note


def test_zak_single_coupling_vanishes():
    r = zak_phase(ModelParams(1.0, 1.0, 0.3, 0.0, 0.0), 1, 1, 64)
    assert abs(r.delta_gamma) <= 1e-12


@pytest.mark.parametrize("vr,vcr,grid", [(1.0, 0.25, 512), (0.25, 1.0, 512), (1.0, 0.7, 1024)])
def test_zak_extrapolation_matches_closed_form(vr, vcr, grid):
    # independent route: the closed form follows from squeezed-state loop phases;
    # the extrapolated error falls as grid^-4, so strong squeezing needs the finer loop
    p = ModelParams(1.0, vr, 0.0, vcr, 0.0)
    exact = zak_phase_closed_form(p)
    coarse = abs(zak_phase(p, 1, 1, grid // 2).extrapolated - exact)
    fine = abs(zak_phase(p, 1, 1, grid).extrapolated - exact)
    assert fine <= 1e-5
    assert fine < coarse or fine < 1e-9


@pytest.mark.parametrize("vr,vcr", [(1.0, 0.25), (1.0, 0.7)])
def test_zak_grid_doubling(vr, vcr):
    """Grid invariant as specified: doubling from 256 moves the value by at most 1e-6."""
    p = ModelParams(1.0, vr, 0.0, vcr, 0.0)
    a = zak_phase(p, 1, 1, 256).delta_gamma
    b = zak_phase(p, 1, 1, 512).delta_gamma
    assert abs(a - b) <= 1e-6


def test_zak_needs_bulk_level():
    with pytest.raises(InvalidInputError):
        zak_phase(ModelParams(1.0, 1.0, 0.0, 0.25, 0.0), 0, 1, 64)


def test_zak_vanishing_component_ill_defined():
    zeros = [np.zeros(4, dtype=complex)] * 3
    ones = [np.ones(4, dtype=complex)] * 3
    with pytest.raises(IllDefinedError):
        zak_from_components(ones, zeros)
