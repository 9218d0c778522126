import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cavitybec import meanfield as mf
from cavitybec.exceptions import ConvergenceError
from cavitybec.params import GridConfig, PhysicalParams

# Response-curve extrema computed independently by numerically diagonalising
# the 2x2 two-mode Hamiltonian (numpy.linalg.eigh) along delta = Delta_C - N<U>
# and locating the extrema of Delta_C(delta) with scipy's bounded minimiser.
FOLDS = {
    283.8: (26692.97387857713, 27652.90087658605),
    549.5: (21445.52761303414, 26936.729991928853),
}
PEAK_80 = 28632.72688550468  # Delta_C at delta = 0 for eta = 80.06


def self_consistency(state):
    p = state.params
    expected = 1j * p.eta / (p.delta_c - p.n_atoms * state.mean_u + 1j * p.kappa)
    return abs(state.alpha_ss - expected)


def test_cavity_steady_field_formula():
    p = PhysicalParams(delta_c=100.0, eta=3.0, kappa=5.0, n_atoms=10.0)
    assert mf.cavity_steady_field(p, 0.5) == pytest.approx(3j / (95 + 5j))


def test_light_shift_matrix_structure():
    m = mf.light_shift_matrix(2)
    assert m.shape == (5, 5)
    np.testing.assert_allclose(np.diag(m), 0.5)
    np.testing.assert_allclose(np.diag(m, 1), 0.25)
    np.testing.assert_allclose(np.diag(m, 2), 0.0)


def test_light_shift_expectation_examples():
    p = PhysicalParams(eta=283.8, delta_c=26000.0)
    grid = GridConfig(n_points=64)
    g = mf.solve_gpe_grid(p, grid)
    # cos^2(x) averages to 1/2 against any cos(4x)-shaped density
    probe = dataclasses.replace(g, psi=np.sqrt(2 / np.pi) * np.cos(4 * grid.x))
    assert mf.light_shift_expectation(probe, 0.96) == pytest.approx(0.48, abs=1e-12)
    t = mf.solve_two_mode(p)
    probe = dataclasses.replace(t, psi=np.array([1.0, 1.0]) / np.sqrt(2))
    assert mf.light_shift_expectation(probe, 0.96) == pytest.approx(0.48 * (1 + np.sqrt(2) / 2))


def test_fourier_matches_grid_mean_u_and_is_even():
    p = PhysicalParams(delta_c=28000.0)
    f = mf.solve_gpe_fourier(p, n_max=8)
    g = mf.solve_gpe_grid(p, GridConfig(200))
    assert f.mean_u == pytest.approx(g.mean_u, abs=1e-6)
    np.testing.assert_allclose(f.psi, f.psi[::-1], atol=1e-10)


def test_uniform_state_without_drive():
    p = PhysicalParams(eta=0.0)
    for rep in ("two_mode", "fourier"):
        s = mf.solve(p, rep)
        assert s.photon_number == 0.0
        assert s.mean_u == pytest.approx(p.u0 / 2, abs=1e-12)


@pytest.mark.parametrize("eta, delta_c", [(80.06, 28000.0), (283.8, 27000.0), (549.5, 25000.0)])
def test_two_mode_equals_truncated_fourier(eta, delta_c):
    p = PhysicalParams(eta=eta, delta_c=delta_c)
    a = mf.solve_two_mode(p, init=mf._two_mode_state(p, 0.0))
    b = mf.solve_gpe_fourier(p, n_max=1, init=None)
    assert a.photon_number == pytest.approx(b.photon_number, rel=1e-7)
    assert a.mu == pytest.approx(b.mu, rel=1e-7)


def test_grid_matches_fourier():
    p = PhysicalParams(eta=283.8, delta_c=27000.0)
    g = mf.solve_gpe_grid(p, GridConfig(n_points=64))
    f = mf.solve_gpe_fourier(p, n_max=8)
    assert g.photon_number == pytest.approx(f.photon_number, rel=1e-8)
    assert g.mu == pytest.approx(f.mu, rel=1e-8)
    np.testing.assert_allclose(g.plane_wave_amplitudes(2), f.plane_wave_amplitudes(2), atol=1e-8)


def test_grid_with_collisions_converges_and_normalised():
    p = PhysicalParams(eta=283.8, delta_c=27000.0, g_coll=0.5)
    g = mf.solve_gpe_grid(p, GridConfig(n_points=64))
    f = mf.solve_gpe_fourier(p, n_max=8)
    assert g.converged
    assert np.sum(g.psi**2) * GridConfig(64).dx == pytest.approx(1.0, abs=1e-12)
    assert g.mu == pytest.approx(f.mu, rel=1e-7)


def test_energy_non_increasing():
    p = PhysicalParams(eta=549.5, delta_c=24000.0)
    s = mf.solve_gpe_grid(p, GridConfig(n_points=64), record_energy=True)
    e = np.asarray(s.energy_history)
    assert len(e) > 10
    assert np.all(np.diff(e) <= 1e-9 * np.abs(e[1:]))


def test_converged_state_is_self_consistent():
    p = PhysicalParams(eta=283.8, delta_c=26000.0)
    for s in (mf.solve_two_mode(p), mf.solve_gpe_fourier(p), mf.solve_gpe_grid(p, GridConfig(64))):
        assert s.converged
        assert self_consistency(s) <= 1e-12 * abs(s.alpha_ss)
        assert s.residual < 1e-10


def test_iteration_cap_raises_convergence_error():
    p = PhysicalParams(eta=283.8, delta_c=26000.0)
    with pytest.raises(ConvergenceError) as err:
        mf.solve_gpe_grid(p, GridConfig(64), max_iter=3)
    assert err.value.delta_c == 26000.0
    assert "delta_c" in str(err.value)


@settings(max_examples=60, deadline=None)
@given(eta=st.floats(0.0, 600.0), delta_c=st.floats(10000.0, 40000.0),
       kappa=st.floats(50.0, 1000.0))
def test_two_mode_properties(eta, delta_c, kappa):
    p = PhysicalParams(eta=eta, delta_c=delta_c, kappa=kappa)
    s = mf.solve_two_mode(p)
    assert s.converged
    assert np.linalg.norm(s.psi) == pytest.approx(1.0, abs=1e-12)
    assert self_consistency(s) <= 1e-12 * max(abs(s.alpha_ss), 1e-300)
    # the cavity potential only deepens: <U> is below the uniform value
    assert s.mean_u <= p.u0 / 2 + 1e-15
    assert s.photon_number <= eta**2 / kappa**2 * (1 + 1e-12)


@pytest.mark.parametrize("eta", sorted(FOLDS))
def test_fold_points(eta):
    lo, hi = mf.two_mode_folds(PhysicalParams(eta=eta))
    assert lo == pytest.approx(FOLDS[eta][0], rel=1e-9)
    assert hi == pytest.approx(FOLDS[eta][1], rel=1e-9)


def test_no_folds_below_critical_drive():
    assert mf.two_mode_folds(PhysicalParams(eta=80.06)) is None


def test_peak_location_weak_drive():
    p = PhysicalParams(eta=80.06)
    up = mf.continue_branch(p, (PEAK_80 - 50, PEAK_80 + 50), "up", n_steps=1001)
    n = up.photon_number
    assert up.endpoint is None
    assert up.delta_c[np.argmax(n)] == pytest.approx(PEAK_80, abs=0.1)


def test_hysteresis_branches_end_at_folds():
    p = PhysicalParams(eta=283.8)
    lo, hi = FOLDS[283.8]
    up = mf.continue_branch(p, (25000.0, 29000.0), "up", n_steps=200)
    down = mf.continue_branch(p, (25000.0, 29000.0), "down", n_steps=200)
    assert up.endpoint == pytest.approx(hi, abs=2e-3 * hi)
    assert down.endpoint == pytest.approx(lo, abs=2e-3 * lo)
    assert np.all(np.diff(up.delta_c) > 0) and np.all(np.diff(down.delta_c) < 0)
    # inside the window the downward sweep follows the photon-rich branch
    d = 27200.0
    n_up = up.photon_number[np.argmin(abs(up.delta_c - d))]
    n_down = down.photon_number[np.argmin(abs(down.delta_c - d))]
    assert n_down > 2 * n_up


def test_warm_start_stays_on_branch():
    p = PhysicalParams(eta=283.8, delta_c=27200.0)
    low = mf.solve_two_mode(p, init=mf._two_mode_state(p, 0.0))
    high = mf.solve_two_mode(p, init=mf._two_mode_state(p, 1e3))
    assert high.photon_number > low.photon_number
    again = mf.solve_two_mode(p, init=high)
    assert again.photon_number == pytest.approx(high.photon_number, rel=1e-12)


def test_branch_csv(tmp_path):
    p = PhysicalParams()
    up = mf.continue_branch(p, (20000.0, 30000.0), "up", n_steps=11)
    text = mf.write_branch_csv(up, tmp_path / "b.csv", params=p)
    assert "# columns:" in text
    assert len([ln for ln in text.splitlines() if not ln.startswith("#")]) == 12
