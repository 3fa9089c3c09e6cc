import dataclasses

import numpy as np
import pytest

from fdpowerctl.channel import snapshot_from_scenario
from fdpowerctl.core import Algorithm, PowerVector
from fdpowerctl.engine import (
    apply_axis,
    check_energy_feasibility,
    run_fixed_point,
    run_mobility,
    run_monte_carlo,
)

from conftest import make_desk_snapshot, make_single_ue_snapshot


def closed_form_single_ue_tracking(snap):
    """Independent 2x2 solve: both constraints tight at the fixed point."""
    cfg = snap.cfg
    h, g, mu = snap.h[0], snap.g[0], snap.mu[0]
    gt = snap.gamma_target[0]
    c = gt * cfg.delta / (h * cfg.epsilon * mu * g)
    assert c < 1
    p_u = gt * (cfg.delta * snap.p_min[0] + cfg.sigma2) / (h * (1 - c))
    p_h = p_u / (cfg.epsilon * mu * g) + snap.p_min[0]
    return p_u, p_h


def test_single_ue_fixed_point_matches_closed_form():
    snap = make_single_ue_snapshot(h=1e-3, mu=0.5, epsilon=0.2, p_cir=1e-6,
                                   sigma2=1e-14, gamma_target=0.05, delta=0.0)
    trace = run_fixed_point(Algorithm.TPCEH, snap, tol=1e-12)
    assert trace.converged
    assert trace.fixed_point.p_u[0] == pytest.approx(5e-13, rel=1e-9)
    assert trace.fixed_point.p_h == pytest.approx(2.000005e-3, rel=1e-9)
    p_u, p_h = closed_form_single_ue_tracking(snap)
    assert trace.fixed_point.p_u[0] == pytest.approx(p_u, rel=1e-9)
    assert trace.fixed_point.p_h == pytest.approx(p_h, rel=1e-9)


def test_single_ue_fixed_point_with_self_interference():
    snap = make_single_ue_snapshot(h=0.09 / 41 ** 3, mu=0.5, p_cir=3e-6,
                                   delta=1e-12, gamma_target=0.04)
    trace = run_fixed_point(Algorithm.TPCEH, snap, tol=1e-13)
    p_u, p_h = closed_form_single_ue_tracking(snap)
    assert trace.fixed_point.p_u[0] == pytest.approx(p_u, rel=1e-9)
    assert trace.fixed_point.p_h == pytest.approx(p_h, rel=1e-9)


@pytest.mark.parametrize("alg", list(Algorithm))
def test_restart_from_fixed_point_converges_immediately(alg):
    snap = make_desk_snapshot([41, 25, 37, 16, 8],
                              gamma_targets=[0.04, 0.05, 0.07, 0.08, 0.1])
    first = run_fixed_point(alg, snap, tol=1e-11)
    assert first.converged
    again = run_fixed_point(alg, snap, p_init=first.fixed_point, tol=1e-9)
    assert again.converged
    assert again.iterations_used <= 1


def test_reference_snapshot_hits_targets(paper_scenario):
    snap = snapshot_from_scenario(paper_scenario)
    trace = run_fixed_point(Algorithm.TPCEH, snap, tol=1e-12)
    assert trace.converged
    final = trace.steps[-1][2]
    np.testing.assert_allclose(
        final.sinr, [0.04, 0.05, 0.07, 0.08, 0.1], rtol=1e-6
    )
    assert not np.any(final.outage)


def test_non_convergence_reported_not_raised():
    snap = make_desk_snapshot([41, 25, 37, 16, 8])
    trace = run_fixed_point(Algorithm.TPCEH, snap, max_iter=1, tol=1e-15)
    assert not trace.converged
    assert trace.iterations_used == 1
    zero = run_fixed_point(Algorithm.TPCEH, snap, max_iter=0)
    assert not zero.converged
    assert zero.iterations_used == 0


def test_trace_shape_invariants():
    snap = make_desk_snapshot([20.0, 30.0])
    trace = run_fixed_point(Algorithm.TPCEH, snap, max_iter=50, tol=1e-9)
    assert len(trace.steps) <= 51
    ts = [t for t, _, _ in trace.steps]
    assert ts == list(range(len(ts)))
    if trace.converged:
        assert trace.final_change <= 1e-9


def test_init_clipped_into_caps():
    snap = make_desk_snapshot([20.0], p_bar_u=0.5, p_bar_h=5.0)
    bad_init = PowerVector(np.array([7.0]), 99.0)
    trace = run_fixed_point(Algorithm.TPCEH, snap, p_init=bad_init, max_iter=0)
    assert trace.fixed_point.p_u[0] <= 0.5
    assert trace.fixed_point.p_h <= 5.0


def test_feasibility_check_desk_vs_reference(paper_scenario, desk_scenario):
    paper_snap = snapshot_from_scenario(paper_scenario)
    trace = run_fixed_point(Algorithm.TPCEH, paper_snap)
    report = check_energy_feasibility(trace, paper_snap)
    assert not report.all_feasible
    assert report.hbs_cap_binding

    desk_snap = snapshot_from_scenario(desk_scenario)
    trace = run_fixed_point(Algorithm.TPCEH, desk_snap)
    report = check_energy_feasibility(trace, desk_snap)
    assert report.all_feasible
    assert not report.hbs_cap_binding


def test_feasibility_equality_at_unclipped_update():
    snap = make_desk_snapshot([25.0, 14.0])
    trace = run_fixed_point(Algorithm.TPCEH, snap, tol=1e-12)
    report = check_energy_feasibility(trace, snap)
    assert report.all_feasible
    # the max requirement is met with equality at the fixed point
    tight = np.isclose(report.required, report.p_h, rtol=1e-9)
    assert tight.any()


def test_monte_carlo_single_snapshot_degenerates_to_fixed_point(desk_scenario):
    scenario = dataclasses.replace(desk_scenario, fixed_ues=None)
    result = run_monte_carlo(Algorithm.TPCEH, scenario, "delta_db", [-120.0], 1)
    snap = snapshot_from_scenario(scenario, snapshot_id=0)
    trace = run_fixed_point(Algorithm.TPCEH, snap)
    mean, half = result.stats["p_h"][0]
    assert mean == pytest.approx(trace.fixed_point.p_h, rel=1e-12)
    assert half == 0.0
    assert result.n_converged == [1]


def test_monte_carlo_deterministic(desk_scenario):
    scenario = dataclasses.replace(desk_scenario, fixed_ues=None)
    a = run_monte_carlo(Algorithm.OPCEH, scenario, "cell_side", [40.0, 60.0], 5)
    b = run_monte_carlo(Algorithm.OPCEH, scenario, "cell_side", [40.0, 60.0], 5)
    assert a.stats == b.stats


def test_monte_carlo_invalid_axis(desk_scenario):
    with pytest.raises(ValueError):
        run_monte_carlo(Algorithm.TPCEH, desk_scenario, "bogus", [1.0], 1)


def test_apply_axis_fields(desk_scenario):
    assert apply_axis(desk_scenario, "delta_db", -70.0).cfg.delta == pytest.approx(1e-7)
    assert apply_axis(desk_scenario, "cell_side", 60.0).cfg.cell_side == 60.0
    assert apply_axis(desk_scenario, "num_ues", 3).cfg.num_ues == 3
    assert apply_axis(desk_scenario, "gamma_target", 0.08).ue_template.gamma_target == 0.08


def _mobility_scenario(desk_scenario, n=3):
    return dataclasses.replace(
        desk_scenario,
        cfg=dataclasses.replace(desk_scenario.cfg, num_ues=n),
        fixed_ues=None,
    )


def test_mobility_tpc_depletes_and_never_recovers(desk_scenario):
    scenario = _mobility_scenario(desk_scenario)
    result = run_mobility(Algorithm.TPC, scenario, duration=2.0)
    assert result.first_depletion_step is not None
    dead_from = None
    for i, (_, p, mx, _) in enumerate(result.records):
        if np.all(p.p_u == 0.0):
            dead_from = i
            break
    assert dead_from is not None
    for _, p, mx, _ in result.records[dead_from:]:
        assert np.all(p.p_u == 0.0)
        assert np.all(mx.sinr == 0.0)
        assert p.p_h == 0.0


def test_mobility_tpceh_activates_and_recovers(desk_scenario):
    scenario = _mobility_scenario(desk_scenario)
    result = run_mobility(Algorithm.TPCEH, scenario, duration=2.0)
    act = result.activation_step
    assert act is not None
    # harvest signal off before activation, on from the activation step
    for t, p, _, state in result.records[: act - 1]:
        assert p.p_h == 0.0
        assert not state.harvesting_active
    t, p, _, state = result.records[act - 1]
    assert p.p_h > 0.0
    assert state.harvesting_active
    # within 100 steps after activation every UE is back on target
    idx = act - 1 + 100
    _, _, mx, _ = result.records[idx]
    gt = 0.05
    np.testing.assert_allclose(mx.sinr, gt, rtol=1e-3)


def test_mobility_battery_accounting(desk_scenario):
    scenario = _mobility_scenario(desk_scenario, n=2)
    result = run_mobility(Algorithm.TPCEH, scenario, duration=1.0)
    cap = result.battery_capacity
    prev = np.full(2, cap)
    eps = scenario.cfg.epsilon
    for _, p, mx, state in result.records:
        assert np.all(state.battery >= 0.0)
        assert np.all(state.battery <= cap)
        # transmitting UEs: delta = harvest - consumption unless clamped at cap
        harvest = mx.harvested_power * 1e-3
        spend = np.where(p.p_u > 0.0, (p.p_u / eps + np.array([u.p_cir for u in snapshot_from_scenario(scenario).ues])) * 1e-3, 0.0)
        expected = np.clip(prev + harvest - spend, 0.0, cap)
        np.testing.assert_allclose(state.battery, expected, atol=1e-18)
        prev = state.battery
    assert result.records


def test_mobility_static_infinite_battery_constant(desk_scenario):
    scenario = _mobility_scenario(desk_scenario, n=2)
    result = run_mobility(
        Algorithm.TPC, scenario, duration=0.3, speed_kmh=0.0, battery_init=np.inf
    )
    tail = [p.p_u.copy() for _, p, _, _ in result.records[-50:]]
    for arr in tail[1:]:
        np.testing.assert_allclose(arr, tail[0], rtol=1e-12)


def test_mobility_positions_stay_in_cell(desk_scenario):
    scenario = _mobility_scenario(desk_scenario)
    result = run_mobility(Algorithm.TPCEH, scenario, duration=1.0, speed_kmh=5000.0)
    side = scenario.cfg.cell_side
    for _, _, _, state in result.records:
        assert np.all(state.positions[:, 0] >= -1e-9)
        assert np.all(state.positions[:, 0] <= side + 1e-9)


def test_mobility_zero_duration(desk_scenario):
    result = run_mobility(Algorithm.TPC, _mobility_scenario(desk_scenario), duration=0.0)
    assert result.records == []
