import numpy as np
import pytest

from cavitybec import sweep as sw
from cavitybec.params import PhysicalParams

RANGE = (15000.0, 35000.0)


@pytest.fixture(scope="module")
def rows_283():
    return sw.detuning_sweep(PhysicalParams(eta=283.8), RANGE, 100)


def test_rows_sorted_and_labelled(rows_283):
    d = [r.delta_c for r in rows_283]
    assert d == sorted(d)
    assert {r.label for r in rows_283} <= {"cooling", "heating"}
    assert {r.branch for r in rows_283} == {"unique", "low", "high"}


def test_heating_rows_have_no_correlations(rows_283):
    for r in rows_283:
        if r.label == "heating":
            assert r.n_ph_nonclassical is None and r.log_negativity is None
        else:
            assert r.n_ph_nonclassical is not None and r.error is None


def test_bistable_pairs_share_detuning(rows_283):
    low = {r.delta_c for r in rows_283 if r.branch == "low"}
    high = {r.delta_c for r in rows_283 if r.branch == "high"}
    assert low and low == high


def test_turning_points_match_folds():
    up, down = sw.sweep_branches(PhysicalParams(eta=283.8), RANGE, 200)
    tps = sw.find_turning_points(up, down)
    np.testing.assert_allclose(sorted(tps), [26692.97, 27652.90], rtol=1e-3)


def test_bistable_width_grows_with_drive():
    w = [sw.bistable_width(PhysicalParams(eta=e))[0] for e in (80.06, 283.8, 549.5)]
    assert w[0] == 0.0 and 0 < w[1] < w[2]


def test_phase_diagram_parallel_equals_serial():
    p = PhysicalParams()
    a = sw.phase_diagram(p, RANGE, (100.0, 500.0), (12, 3), workers=1)
    b = sw.phase_diagram(p, RANGE, (100.0, 500.0), (12, 3), workers=2)
    assert a == b
    assert len(a) == 36
    assert {pt.phase for pt in a} <= set(sw.PhaseClass)


def test_phase_diagram_empty_eta_range():
    with pytest.raises(ValueError):
        sw.phase_diagram(PhysicalParams(), RANGE, (500.0, 100.0), (4, 4))


def test_critical_point_near_cusp():
    # cusp of the two-mode response curve, where the two folds merge
    cusp_eta, cusp_delta = 146.56, 28169.5
    d, eta = sw.find_critical_point(PhysicalParams(), (80.06, 283.8))
    assert 80.06 < eta < 283.8
    assert eta == pytest.approx(cusp_eta, rel=0.02)
    assert d == pytest.approx(cusp_delta, rel=1e-3)
    with pytest.raises(ValueError):
        sw.find_critical_point(PhysicalParams(), (283.8, 549.5))


def test_writers(tmp_path, rows_283):
    p = PhysicalParams(eta=283.8)
    sw.write_fig2(rows_283, tmp_path / "fig2.csv", params=p)
    sw.write_fig4(rows_283, tmp_path / "fig4.csv", params=p)
    sw.write_fig6_8(rows_283, tmp_path / "fig6-8.json", params=p, fmt="json")
    fig4 = (tmp_path / "fig4.csv").read_text()
    assert "photon_like" in fig4 and "atom_like" in fig4 and "unstable" in fig4
    n_cool = sum(r.label == "cooling" for r in rows_283)
    import json
    assert len(json.loads((tmp_path / "fig6-8.json").read_text())["rows"]) == n_cool
