import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fdpowerctl.channel import (
    path_gain,
    sample_snapshot,
    snapshot_csv_rows,
    snapshot_from_distances,
    snapshot_from_scenario,
)
from fdpowerctl.config import ConfigError, HbsParams, ScenarioConfig, UeTemplate


def _cfg(**kw):
    defaults = dict(num_ues=5, epsilon=0.2, delta=1e-12, sigma2=10 ** -14.3,
                    attenuation_k=0.09, cell_side=50.0, seed=7)
    defaults.update(kw)
    return ScenarioConfig(**defaults)


HBS = HbsParams(p_bar_h=10.0, n_antennas=2, p_dyn=10 ** 0.8, p_sta=10 ** -0.3)
TEMPLATE = UeTemplate(mu=None, gamma_target=0.05, p_dyn=1e-6, p_sta=1e-6, p_bar_u=1.0)


def test_path_gain_values():
    assert path_gain(1.0, 0.09) == pytest.approx(0.09, rel=1e-15)
    # direct evaluation: 0.09 / 25^3 and 0.09 / 8^3
    assert path_gain(25.0, 0.09) == pytest.approx(0.09 / 15625, rel=1e-15)
    assert path_gain(25.0, 0.09) == pytest.approx(5.76e-6, rel=1e-12)
    assert path_gain(8.0, 0.09) == pytest.approx(0.09 / 512, rel=1e-15)
    assert path_gain(8.0, 0.09) == pytest.approx(1.7578e-4, rel=1e-4)


def test_path_gain_domain_error():
    with pytest.raises(ValueError):
        path_gain(0.0, 0.09)
    with pytest.raises(ValueError):
        path_gain(-3.0, 0.09)


@given(st.floats(min_value=0.1, max_value=1e3), st.floats(min_value=1e-4, max_value=10.0))
def test_path_gain_strictly_decreasing(d, k):
    assert path_gain(d, k) > path_gain(d * 1.01, k)


def test_sample_snapshot_reproducible():
    cfg = _cfg()
    a = sample_snapshot(cfg, HBS, TEMPLATE, snapshot_id=4)
    b = sample_snapshot(cfg, HBS, TEMPLATE, snapshot_id=4)
    assert a.seed_used == cfg.seed + 4
    np.testing.assert_array_equal(a.g, b.g)
    np.testing.assert_array_equal(a.mu, b.mu)
    assert [u.position for u in a.ues] == [u.position for u in b.ues]


def test_sample_snapshot_reciprocity_and_bounds():
    cfg = _cfg(num_ues=40)
    snap = sample_snapshot(cfg, HBS, TEMPLATE, snapshot_id=0)
    np.testing.assert_array_equal(snap.g, snap.h)
    for u in snap.ues:
        assert 0.0 <= u.position[0] <= cfg.cell_side
        assert 0.0 <= u.position[1] <= cfg.cell_side
        assert 0.0 < u.mu < 1.0


def test_ue_count_prefix_property():
    # drawing K UEs consumes a prefix of the (K+n)-UE stream
    small = sample_snapshot(_cfg(num_ues=3), HBS, TEMPLATE, snapshot_id=11)
    big = sample_snapshot(_cfg(num_ues=8), HBS, TEMPLATE, snapshot_id=11)
    np.testing.assert_array_equal(small.g, big.g[:3])
    np.testing.assert_array_equal(small.mu, big.mu[:3])


def test_cell_side_scaling_shares_draws():
    # positions scale with the side for a fixed seed, so sweeps stay paired
    a = sample_snapshot(_cfg(cell_side=40.0), HBS, TEMPLATE, snapshot_id=2)
    b = sample_snapshot(_cfg(cell_side=60.0), HBS, TEMPLATE, snapshot_id=2)
    pa = np.array([u.position for u in a.ues]) / 40.0
    pb = np.array([u.position for u in b.ues]) / 60.0
    np.testing.assert_allclose(pa, pb, rtol=1e-12)


def test_mean_distance_matches_quadrature_oracle():
    from scipy import integrate

    cfg = _cfg(num_ues=100, hbs_placement="center")
    dists = []
    for sid in range(1000):
        snap = sample_snapshot(cfg, HBS, TEMPLATE, snapshot_id=sid)
        dists.append(snap.distances)
    empirical = float(np.concatenate(dists).mean())

    side = cfg.cell_side
    val, _ = integrate.dblquad(
        lambda y, x: math.hypot(x - side / 2, y - side / 2),
        0.0, side, 0.0, side,
    )
    analytic = val / side ** 2
    assert abs(empirical - analytic) / analytic < 0.02


def test_corner_placement_bound():
    cfg = _cfg(num_ues=200, hbs_placement="corner")
    snap = sample_snapshot(cfg, HBS, TEMPLATE, snapshot_id=0)
    assert snap.distances.max() <= cfg.cell_side * math.sqrt(2.0)


def test_snapshot_from_distances_reference_vector():
    cfg = _cfg(num_ues=5)
    gts = [0.04, 0.05, 0.07, 0.08, 0.1]
    snap = snapshot_from_distances([41, 25, 37, 16, 8], cfg, HBS, TEMPLATE,
                                   gamma_targets=gts, mus=[0.5] * 5)
    np.testing.assert_allclose(snap.gamma_target, gts)
    np.testing.assert_allclose(snap.g, 0.09 / np.array([41, 25, 37, 16, 8.0]) ** 3)


def test_snapshot_from_distances_single():
    cfg = _cfg(num_ues=1)
    snap = snapshot_from_distances([1.0], cfg, HBS, TEMPLATE, mus=[0.5])
    assert snap.g[0] == pytest.approx(0.09)
    assert snap.h[0] == pytest.approx(0.09)


def test_snapshot_from_distances_errors():
    cfg = _cfg(num_ues=2)
    with pytest.raises(ConfigError):
        snapshot_from_distances([1.0], cfg, HBS, TEMPLATE)
    with pytest.raises(ConfigError):
        snapshot_from_distances([1.0, 0.0], cfg, HBS, TEMPLATE)


def test_scenario_dispatch(paper_scenario):
    snap = snapshot_from_scenario(paper_scenario)
    assert snap.num_ues == 5
    assert snap.distances.tolist() == [41, 25, 37, 16, 8]


def test_csv_rows(paper_scenario):
    snap = snapshot_from_scenario(paper_scenario)
    rows = snapshot_csv_rows(snap)
    assert len(rows) == 5
    assert rows[0][2] == 41.0
    assert rows[0][3] == pytest.approx(0.09 / 41 ** 3)


def test_snapshot_json_export(tmp_path, paper_scenario):
    import json
    from fdpowerctl.channel import snapshot_to_json

    snap = snapshot_from_scenario(paper_scenario)
    out = tmp_path / "snap.json"
    snapshot_to_json(snap, out)
    doc = json.loads(out.read_text())
    assert len(doc["ues"]) == 5
    assert doc["ues"][4]["distance"] == 8.0
    assert doc["ues"][4]["g"] == pytest.approx(0.09 / 512)
