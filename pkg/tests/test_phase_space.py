import math

import numpy as np
import pytest

from rabi_fock.eigensolver import defect_state
from rabi_fock.errors import GridTooSmallError, UntrustedMomentsError
from rabi_fock.gaussian import analytic_eigenstate, apply_unitary, sufficient_cutoff
from rabi_fock.model import ModelParams, SpinFockVector
from rabi_fock.phase_space import (
    GridSpec,
    SpinTreatment,
    auto_grid,
    axis_difference,
    fock_profile,
    moments,
    wigner,
    wigner_laguerre,
)
from rabi_fock.topology import loop_params


def fock_state(vec, spin=0):
    zeros = np.zeros_like(vec)
    return SpinFockVector.from_components(*((vec, zeros) if spin == 0 else (zeros, vec)))


def coherent(alpha, n_levels=80):
    vac = np.zeros(n_levels, dtype=complex)
    vac[0] = 1.0
    return apply_unitary("displacement", alpha, vac)


def test_vacuum_peak():
    s = SpinFockVector.basis(0, 0, 20)
    W = wigner(s, GridSpec(-5, 5, -5, 5, 11))
    assert W.values[5, 5] == pytest.approx(1 / math.pi, abs=1e-6)
    assert W.integral() == pytest.approx(1.0, abs=0.02)


def test_single_photon_negative_origin():
    s = SpinFockVector.basis(1, 1, 20)
    W = wigner(s, GridSpec(-7, 7, -7, 7, 15))
    assert W.values[7, 7] == pytest.approx(-1 / math.pi, abs=1e-6)


def test_coherent_peak_location():
    alpha = 1.3 - 0.8j
    s = fock_state(coherent(alpha))
    summary = moments(s)
    W = wigner(s, auto_grid(summary, 101))
    x, p = W.peak()
    cell = (W.x_axis[1] - W.x_axis[0])
    assert abs(x - math.sqrt(2) * alpha.real) <= cell
    assert abs(p - math.sqrt(2) * alpha.imag) <= cell
    assert summary.mean_xp == pytest.approx((math.sqrt(2) * 1.3, -math.sqrt(2) * 0.8), abs=1e-12)


def test_matches_laguerre_reference():
    rng = np.random.default_rng(2)
    f = np.zeros(41, dtype=complex)
    f[:8] = rng.normal(size=8) + 1j * rng.normal(size=8)
    e = np.zeros(41, dtype=complex)
    e[:6] = rng.normal(size=6)
    s = SpinFockVector.from_components(f, e).normalized()
    grid = GridSpec(-4, 4, -3.5, 4.5, 17)
    for treatment in SpinTreatment:
        a = wigner(s, grid, treatment, check_grid=False)
        b = wigner_laguerre(s, grid, treatment)
        assert np.max(np.abs(a.values - b.values)) <= 1e-10


def test_pointwise_bound_and_gaussian_positivity():
    s = analytic_eigenstate(ModelParams(2.5, 1.0, math.pi / 4, 0.25, math.pi / 4), 0, 1, 150)
    W = wigner(s, auto_grid(moments(s), 81))
    assert np.max(np.abs(W.values)) <= 1 / math.pi + 1e-9
    assert np.min(W.values) >= -1e-9
    assert W.integral() == pytest.approx(1.0, abs=0.02)


def test_vacuum_moments():
    m = moments(SpinFockVector.basis(0, 0, 10))
    assert np.allclose(m.covariance, 0.5 * np.eye(2), atol=1e-15)
    assert m.squeeze_ratio == pytest.approx(1.0)


@pytest.mark.parametrize("xi", [0.2, 0.5, 0.9])
def test_squeezed_vacuum_ratio(xi):
    vac = np.zeros(200, dtype=complex)
    vac[0] = 1.0
    f = apply_unitary("squeeze", xi, vac)
    # quadratic forms <x^2>, <p^2> evaluated directly in the Fock basis
    n = np.arange(200)
    a = np.diag(np.sqrt(n[1:]), 1)
    x = (a + a.T) / math.sqrt(2)
    p = (a - a.T) / (1j * math.sqrt(2))
    vx = np.vdot(f, x @ x @ f).real
    vp = np.vdot(f, p @ p @ f).real
    m = moments(fock_state(f))
    assert m.squeeze_ratio == pytest.approx(math.exp(2 * xi), abs=1e-6)
    assert math.sqrt(max(vx, vp) / min(vx, vp)) == pytest.approx(math.exp(2 * xi), abs=1e-6)
    # S(xi>0) squeezes x
    assert axis_difference(m.principal_angle, 0.0) < 1e-9


def test_uncertainty_bound():
    s = analytic_eigenstate(ModelParams(1.0, 0.4, 0.7, 1.0, -0.2), 0, 1, 150)
    cov = moments(s).covariance
    assert np.all(np.linalg.eigvalsh(cov) > 0)
    assert np.linalg.det(cov) >= 0.25 - 1e-9


def test_edge_population_untrusted():
    s = fock_state(coherent(2.5, 12) / np.linalg.norm(coherent(2.5, 12)))
    with pytest.raises(UntrustedMomentsError):
        moments(s)


def test_grid_too_small_suggests_bounds():
    s = fock_state(coherent(2.0))
    with pytest.raises(GridTooSmallError) as exc:
        wigner(s, GridSpec(-1, 1, -1, 1, 11))
    lo, hi, _, _ = exc.value.suggested_bounds
    assert hi > 2 * math.sqrt(2)


def test_traced_equals_conditioned_for_product_state():
    s = analytic_eigenstate(ModelParams(2.5, 0.25, 0.3, 1.0, 0.3), 0, 1, 200)
    grid = auto_grid(moments(s), 41)
    a = wigner(s, grid, SpinTreatment.TRACED)
    b = wigner(s, grid, SpinTreatment.CONDITIONED_E)
    assert np.max(np.abs(a.values - b.values)) <= 1e-12


def test_fock_profile_delta():
    g, e = fock_profile(SpinFockVector.basis(3, 1, 10))
    assert e[3] == 1.0 and e.sum() == 1.0 and g.sum() == 0.0


def _spread(state):
    g, e = fock_profile(state)
    pop = g + e
    n = np.arange(pop.size)
    return float(np.sum(n * n * pop))


def test_profile_wider_at_half_turn():
    # w = 2, dv = 0.2; half a turn around the loop u = phi_r + phi_cr
    base = ModelParams(2.0, 1.2, 0.0, 1.0, 0.0)
    at = {}
    for u in (0.0, math.pi):
        p = loop_params(base, u)
        at[u] = _spread(analytic_eigenstate(p, 0, 1, sufficient_cutoff(p, 0)))
    assert at[math.pi] > at[0.0]


def test_numeric_defect_moments_match_analytic():
    p = ModelParams(2.5, 1.0, math.pi / 4, 0.25, math.pi / 4)
    num = moments(defect_state(p, 200).state)
    ana = moments(analytic_eigenstate(p, 0, 1, 200))
    assert num.mean == pytest.approx(ana.mean, abs=1e-8)
    assert np.allclose(num.covariance, ana.covariance, atol=1e-8)
