import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cavitybec import fluctuations as fl
from cavitybec import meanfield as mf
from cavitybec.exceptions import DefectiveSpectrumError
from cavitybec.params import GridConfig, PhysicalParams


def two_mode_modes(**kw):
    state = mf.solve_two_mode(PhysicalParams(**kw))
    fm = fl.build_matrix(state)
    return fm, fl.eigendecompose(fm)


@pytest.fixture(scope="module")
def grid_state():
    return mf.solve_gpe_grid(PhysicalParams(delta_c=27000.0, eta=283.8), GridConfig(32))


def test_two_mode_matrix_shape_and_symmetry():
    fm, ms = two_mode_modes(delta_c=27000.0, eta=283.8)
    assert fm.m.shape == (4, 4)
    assert fl.symmetry_residual(fm) < 1e-12
    assert not ms.zero_mode.any()
    assert ms.photon_coupled.all()


def test_pairing_and_reconstruction():
    fm, ms = two_mode_modes(delta_c=27000.0, eta=283.8)
    w = ms.eigenvalues
    np.testing.assert_allclose(np.sort_complex(w), np.sort_complex(-w.conj()), atol=1e-8)
    np.testing.assert_allclose(ms.reconstruct(), fm.m, atol=1e-9 * np.abs(fm.m).max())
    np.testing.assert_allclose(ms.left.conj().T @ ms.right, np.eye(4), atol=1e-8)


def test_far_detuned_limits():
    fm, ms = two_mode_modes(delta_c=15000.0, eta=80.06)
    ph, at = fl.optomechanical_modes(ms)
    assert ms.eigenvalues[ph].imag == pytest.approx(-363.9, rel=1e-3)
    # bare recoil excitation of the cos(2x) mode
    assert ms.eigenvalues[at].real == pytest.approx(4.0, rel=1e-3)
    assert fl.stability(ms) is fl.Stability.COOLING


def test_heating_above_resonance():
    _, ms = two_mode_modes(delta_c=29000.0, eta=80.06)
    assert fl.stability(ms) is fl.Stability.HEATING
    _, at = fl.optomechanical_modes(ms)
    assert ms.unstable[at] and ms.eigenvalues[at].imag > 0
    flags = {row[3] for row in fl.spectrum_rows(29000.0, ms)}
    assert any("unstable" in f for f in flags)


def test_small_growth_far_above_resonance_is_heating():
    # growth rates fall off quickly with detuning but stay resolved
    _, ms = two_mode_modes(delta_c=35000.0, eta=80.06)
    assert fl.stability(ms) is fl.Stability.HEATING


def test_grid_zero_mode_projected(grid_state):
    fm = fl.build_matrix_grid(grid_state)
    ms = fl.eigendecompose(fm, include_odd=True)
    assert fm.projected
    assert ms.zero_mode.sum() == 2
    assert not (ms.zero_mode & ms.photon_coupled).any()
    assert ms.photon_weight[ms.zero_mode].max() < 1e-8
    np.testing.assert_allclose(ms.reconstruct(), fm.m, atol=1e-9 * np.abs(fm.m).max())


def test_grid_unprojected_is_defective(grid_state):
    fm = fl.build_matrix_grid(grid_state, project_zero_mode=False)
    with pytest.raises(DefectiveSpectrumError) as err:
        fl.eigendecompose(fm)
    assert len(err.value.cluster) >= 2


def test_odd_parity_modes_decouple(grid_state):
    ms = fl.eigendecompose(fl.build_matrix_grid(grid_state), include_odd=True)
    odd = ms.parity_decoupled
    assert odd.sum() == 30
    assert not (odd & ms.photon_coupled).any()
    even = fl.eigendecompose(fl.build_matrix_grid(grid_state))
    assert len(even) + odd.sum() == len(ms)


def test_grid_and_two_mode_optomechanical_modes_agree():
    p = PhysicalParams(delta_c=20000.0, eta=80.06)
    _, ms2 = two_mode_modes(delta_c=20000.0, eta=80.06)
    g = mf.solve_gpe_grid(p, GridConfig(64))
    msg = fl.eigendecompose(fl.build_matrix_grid(g))
    a = ms2.eigenvalues[list(fl.optomechanical_modes(ms2))]
    b = msg.eigenvalues[list(fl.optomechanical_modes(msg))]
    np.testing.assert_allclose(a, b, rtol=1e-5)


def test_spectrum_csv(tmp_path):
    _, ms = two_mode_modes()
    text = fl.write_spectrum_csv(fl.spectrum_rows(28000.0, ms), tmp_path / "s.csv")
    body = [ln for ln in text.splitlines() if not ln.startswith("#")]
    assert body[0] == ",".join(fl.SPECTRUM_COLUMNS)
    assert len(body) == 3


@settings(max_examples=40, deadline=None)
@given(eta=st.floats(1.0, 600.0), delta_c=st.floats(10000.0, 40000.0),
       u0=st.floats(0.1, 2.0), n_atoms=st.floats(1e3, 1e5))
def test_two_mode_structure_property(eta, delta_c, u0, n_atoms):
    p = PhysicalParams(eta=eta, delta_c=delta_c, u0=u0, n_atoms=n_atoms)
    fm = fl.build_matrix(mf.solve_two_mode(p))
    ms = fl.eigendecompose(fm)
    assert fl.symmetry_residual(fm) < 1e-10
    assert ms.pairing_residual.max() < 1e-8
    assert ms.biorthogonality_residual < 1e-8
