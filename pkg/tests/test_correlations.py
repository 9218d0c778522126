import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cavitybec import correlations as corr
from cavitybec import fluctuations as fl
from cavitybec import meanfield as mf
from cavitybec.exceptions import InvalidCovarianceError, NoSteadyStateError
from cavitybec.params import GridConfig, PhysicalParams


def tmsv(r):
    """Two-mode squeezed vacuum built from its symplectic matrix S: C = S S^T / 2."""
    z = np.diag([1.0, -1.0])
    s = np.block([[math.cosh(r) * np.eye(2), math.sinh(r) * z],
                  [math.sinh(r) * z, math.cosh(r) * np.eye(2)]])
    return corr.QuadCovariance(0.5 * s @ s.T)


def pt_eigenvalue_direct(c):
    """Smaller symplectic eigenvalue of the partial transpose, by diagonalisation."""
    flip = np.diag([1.0, 1.0, 1.0, -1.0])
    ev = np.linalg.eigvals(1j * corr.OMEGA @ flip @ c.matrix @ flip)
    return np.sort(np.abs(ev.real))[0]


def cooling_modes(delta_c, eta=80.06):
    state = mf.solve_two_mode(PhysicalParams(delta_c=delta_c, eta=eta))
    fm = fl.build_matrix(state)
    return state, fm, fl.eigendecompose(fm)


def test_vacuum():
    c = corr.QuadCovariance(0.5 * np.eye(4))
    assert corr.nonclassical_photon_number(c) == 0.0
    assert corr.depletion(c) == 0.0
    assert corr.log_negativity(c) == 0.0
    np.testing.assert_allclose(corr.symplectic_eigenvalues(c), [0.5, 0.5])
    assert c.is_physical()


@pytest.mark.parametrize("r", [0.1, 0.5, 1.0])
def test_two_mode_squeezed_log_negativity(r):
    assert corr.log_negativity(tmsv(r)) == pytest.approx(2 * r, abs=1e-10)
    np.testing.assert_allclose(corr.two_mode_squeezed_covariance(r).matrix, tmsv(r).matrix,
                               atol=1e-14)
    assert corr.nonclassical_photon_number(tmsv(r)) == pytest.approx(math.sinh(r) ** 2)


@settings(max_examples=50, deadline=None)
@given(r=st.floats(0.0, 2.0), theta=st.floats(0.0, math.pi), nth=st.floats(0.0, 5.0))
def test_pt_eigenvalue_matches_diagonalisation(r, theta, nth):
    rot = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    local = np.block([[rot, np.zeros((2, 2))], [np.zeros((2, 2)), np.eye(2)]])
    c = corr.QuadCovariance(local @ ((1 + 2 * nth) * tmsv(r).matrix) @ local.T)
    assert corr.smaller_pt_symplectic_eigenvalue(c) == pytest.approx(pt_eigenvalue_direct(c),
                                                                     rel=1e-8, abs=1e-12)


def test_unphysical_covariance_rejected():
    with pytest.raises(InvalidCovarianceError):
        corr.QuadCovariance(np.arange(16.0).reshape(4, 4))
    with pytest.raises(InvalidCovarianceError):
        corr.quadrature_covariance(corr.OperatorCorrelations(np.zeros((4, 4))))


@pytest.mark.parametrize("delta_c", [15000.0, 24000.0, 28000.0, 28500.0])
def test_mode_sum_equals_lyapunov(delta_c):
    _, fm, ms = cooling_modes(delta_c)
    a = corr.quadrature_covariance(corr.steady_correlations(ms)).matrix
    b = corr.lyapunov_covariance(fm).matrix
    np.testing.assert_allclose(a, b, atol=1e-8)


def test_double_precision_routes_agree_with_extended():
    _, fm, ms = cooling_modes(27000.0)
    ref = corr.quadrature_covariance(corr.steady_correlations(ms)).matrix
    dbl = corr.quadrature_covariance(corr.steady_correlations(ms, dps=None)).matrix
    lyap = corr.lyapunov_covariance(fm, dps=None).matrix
    np.testing.assert_allclose(dbl, ref, atol=1e-6)
    np.testing.assert_allclose(lyap, ref, atol=1e-6)


def test_steady_state_is_physical():
    _, _, ms = cooling_modes(28300.0)
    oc = corr.steady_correlations(ms)
    assert oc.commutator_residual() < 1e-10
    c = corr.quadrature_covariance(oc)
    assert c.is_physical()
    assert 0 < corr.log_negativity(c) < 0.1


def test_photon_block_has_vacuum_eigenvalue_and_tilted_axis():
    for d in (20000.0, 26000.0, 28300.0):
        state, _, ms = cooling_modes(d)
        c = corr.quadrature_covariance(corr.steady_correlations(ms))
        assert np.linalg.eigvalsh(c.P)[0] == pytest.approx(0.5, abs=1e-6)
        # the noise ellipse is aligned with twice the phase of the mean field
        expected = 2 * np.angle(state.alpha_ss) - math.pi / 2
        diff = (corr.photon_axis_angle(c) - expected + math.pi / 2) % math.pi - math.pi / 2
        assert abs(diff) < 1e-8


def test_heating_point_has_no_steady_state():
    _, fm, ms = cooling_modes(29000.0)
    with pytest.raises(NoSteadyStateError, match="no steady state"):
        corr.steady_correlations(ms)


def test_grid_matrix_rejected():
    g = mf.solve_gpe_grid(PhysicalParams(delta_c=20000.0), GridConfig(16))
    ms = fl.eigendecompose(fl.build_matrix_grid(g))
    with pytest.raises(ValueError, match="two-mode"):
        corr.steady_correlations(ms)
