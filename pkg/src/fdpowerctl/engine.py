"""Synchronous fixed-point iteration, Monte-Carlo sweeps and mobility runs.

The iteration is Jacobi-style: every UE and (for the harvesting algorithms)
the base station compute their next power from the full state of the current
step. Snapshot-level work is reproducible from (seed, snapshot_id) alone, so
sweeps over an axis reuse identical snapshot draws for every axis value and
every algorithm (common random numbers).
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import Snapshot, hbs_position, snapshot_from_scenario
from .config import Scenario, ScenarioConfig
from .core import (
    Algorithm,
    Metrics,
    PowerVector,
    hbs_update,
    joint_update,
    metrics,
    optimal_hbs_power,
    required_hbs_power,
)
from .units import db_to_linear

__all__ = [
    "IterationTrace",
    "FeasibilityReport",
    "SweepResult",
    "MobilityState",
    "MobilityResult",
    "run_fixed_point",
    "relative_change",
    "check_energy_feasibility",
    "apply_axis",
    "run_monte_carlo",
    "run_mobility",
    "SWEEP_AXES",
    "SWEEP_METRICS",
]

# Denominator floor for relative power changes near zero.
CHANGE_FLOOR = 1e-18

SWEEP_AXES = ("delta_db", "cell_side", "gamma_target", "num_ues")

SWEEP_METRICS = (
    "avg_sinr",
    "aggregate_throughput",
    "p_h",
    "avg_p_u",
    "sum_p_u",
    "total_ue_power",
    "hbs_total_power",
    "aggregate_power",
    "outage_fraction",
    "feasible_fraction",
)


@dataclass
class IterationTrace:
    """Record of one fixed-point run."""

    algorithm: Algorithm
    steps: list[tuple[int, PowerVector, Metrics]]
    converged: bool
    iterations_used: int
    fixed_point: PowerVector
    final_change: float


def relative_change(p_new: PowerVector, p_old: PowerVector) -> float:
    """Infinity-norm relative step size with a floor for near-zero powers."""
    a = p_new.as_array()
    b = p_old.as_array()
    return float(np.max(np.abs(a - b) / np.maximum(b, CHANGE_FLOOR)))


def run_fixed_point(
    algorithm: Algorithm | str,
    snap: Snapshot,
    p_init: PowerVector | None = None,
    tol: float | None = None,
    max_iter: int | None = None,
    record: str = "all",
) -> IterationTrace:
    """Iterate the joint power update until the relative change drops below tol.

    Non-convergence within max_iter yields converged=False, not an exception.
    `record="ends"` keeps metrics only for the first and last step, which the
    Monte-Carlo path uses to stay light.
    """
    alg = Algorithm(algorithm)
    tol = snap.cfg.tol if tol is None else tol
    max_iter = snap.cfg.max_iter if max_iter is None else max_iter
    if p_init is None:
        p_init = PowerVector(
            np.full(snap.num_ues, 1e-6), 1e-6 if alg.harvesting else 0.0
        )
    p = p_init.clipped(snap)

    steps: list[tuple[int, PowerVector, Metrics]] = []
    if record == "all":
        steps.append((0, p.copy(), metrics(p, snap)))
    converged = False
    change = math.inf
    t = 0
    for t in range(1, max_iter + 1):
        p_next = joint_update(alg, p, snap)
        change = relative_change(p_next, p)
        p = p_next
        if record == "all":
            steps.append((t, p.copy(), metrics(p, snap)))
        if change <= tol:
            converged = True
            break
    iterations_used = t if max_iter > 0 else 0
    if record != "all":
        steps = [(iterations_used, p.copy(), metrics(p, snap))]
    return IterationTrace(
        algorithm=alg,
        steps=steps,
        converged=converged,
        iterations_used=iterations_used,
        fixed_point=p,
        final_change=change,
    )


@dataclass
class FeasibilityReport:
    """Energy-harvesting constraint status at a fixed point."""

    feasible: np.ndarray          # bool per UE
    all_feasible: bool
    hbs_cap_binding: bool         # peak power reached while some UE unmet
    p_h: float
    required: np.ndarray          # per-UE downlink power requirement


def check_energy_feasibility(trace: IterationTrace, snap: Snapshot) -> FeasibilityReport:
    """Evaluate the harvest constraint per UE at the trace's fixed point."""
    p = trace.fixed_point
    required = required_hbs_power(p.p_u, snap)
    feasible = p.p_h >= required * (1.0 - 1e-12)
    all_ok = bool(np.all(feasible))
    cap_binding = bool(
        p.p_h >= snap.hbs.p_bar_h * (1.0 - 1e-12) and not all_ok
    )
    return FeasibilityReport(
        feasible=feasible,
        all_feasible=all_ok,
        hbs_cap_binding=cap_binding,
        p_h=p.p_h,
        required=required,
    )


def apply_axis(scenario: Scenario, axis: str, value: float) -> Scenario:
    """Scenario copy with one sweep axis applied."""
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")
    cfg = scenario.cfg
    template = scenario.ue_template
    if axis == "delta_db":
        cfg = dataclasses.replace(cfg, delta=db_to_linear(float(value)))
    elif axis == "cell_side":
        cfg = dataclasses.replace(cfg, cell_side=float(value))
    elif axis == "num_ues":
        cfg = dataclasses.replace(cfg, num_ues=int(value))
    elif axis == "gamma_target":
        template = dataclasses.replace(template, gamma_target=float(value))
    return dataclasses.replace(scenario, cfg=cfg, ue_template=template)


@dataclass
class SweepResult:
    """Averaged metrics over snapshots for each value of one sweep axis."""

    axis: str
    values: list[float]
    algorithm: Algorithm
    n_snapshots: int
    stats: dict[str, list[tuple[float, float]]]   # metric -> [(mean, half_width)]
    n_converged: list[int]
    n_nonconverged: list[int]
    metadata: dict = field(default_factory=dict)


def _snapshot_scalars(mx: Metrics, p: PowerVector) -> dict[str, float]:
    return {
        "avg_sinr": float(mx.sinr.mean()),
        "aggregate_throughput": mx.aggregate_throughput,
        "p_h": p.p_h,
        "avg_p_u": float(p.p_u.mean()),
        "sum_p_u": float(p.p_u.sum()),
        "total_ue_power": float(mx.ue_total_power.sum()),
        "hbs_total_power": mx.hbs_total_power,
        "aggregate_power": mx.aggregate_power,
        "outage_fraction": float(mx.outage.mean()),
        "feasible_fraction": float(mx.energy_feasible.mean()),
    }


def run_monte_carlo(
    algorithm: Algorithm | str,
    scenario: Scenario,
    sweep_axis: str,
    values: list[float],
    n_snapshots: int,
    tol: float | None = None,
    max_iter: int | None = None,
) -> SweepResult:
    """Average fixed-point metrics over seeded snapshots per axis value.

    Snapshot i always comes from the stream seeded with cfg.seed + i, so the
    same random placements back every axis value (and any other algorithm run
    with the same scenario), which keeps trend comparisons paired. Snapshots
    that fail to converge are counted and left out of the averages.
    """
    alg = Algorithm(algorithm)
    # sweeps are Monte-Carlo by definition: pinned UE layouts do not apply
    scenario = dataclasses.replace(scenario, fixed_ues=None)
    stats: dict[str, list[tuple[float, float]]] = {m: [] for m in SWEEP_METRICS}
    n_conv, n_nonconv = [], []
    for value in values:
        sc = apply_axis(scenario, sweep_axis, value)
        samples: dict[str, list[float]] = {m: [] for m in SWEEP_METRICS}
        bad = 0
        for sid in range(n_snapshots):
            snap = snapshot_from_scenario(sc, snapshot_id=sid)
            trace = run_fixed_point(
                alg, snap, tol=tol, max_iter=max_iter, record="ends"
            )
            if not trace.converged:
                bad += 1
                continue
            mx = trace.steps[-1][2]
            for key, val in _snapshot_scalars(mx, trace.fixed_point).items():
                samples[key].append(val)
        n_conv.append(n_snapshots - bad)
        n_nonconv.append(bad)
        for key in SWEEP_METRICS:
            arr = np.asarray(samples[key])
            if arr.size == 0:
                stats[key].append((math.nan, math.nan))
            else:
                half = 1.96 * arr.std(ddof=1) / math.sqrt(arr.size) if arr.size > 1 else 0.0
                stats[key].append((float(arr.mean()), float(half)))
    return SweepResult(
        axis=sweep_axis,
        values=list(values),
        algorithm=alg,
        n_snapshots=n_snapshots,
        stats=stats,
        n_converged=n_conv,
        n_nonconverged=n_nonconv,
        metadata={
            "seed": scenario.cfg.seed,
            "hbs_placement": scenario.cfg.hbs_placement,
        },
    )


@dataclass
class MobilityState:
    """Kinematic and energy state of the moving UEs at one time step."""

    time: float
    positions: np.ndarray        # (K, 2) meters
    battery: np.ndarray          # (K,) joules
    harvesting_active: bool
    direction: np.ndarray        # (K, 2) unit vectors


@dataclass
class MobilityResult:
    """Time series of a mobility run plus the depletion/activation events."""

    algorithm: Algorithm
    records: list[tuple[float, PowerVector, Metrics, MobilityState]]
    first_depletion_step: int | None     # 1-based step index, None if never
    activation_step: int | None          # harvesting switch-on step (EH only)
    battery_capacity: float


def run_mobility(
    algorithm: Algorithm | str,
    scenario: Scenario,
    duration: float,
    step: float = 1e-3,
    speed_kmh: float = 5.0,
    battery_init: float = 1e-6,
) -> MobilityResult:
    """Straight-line back-and-forth mobility with a finite per-UE battery.

    UEs start on the x = 0 edge at distinct heights and traverse the cell
    parallel to the x axis at constant speed, reflecting at the walls. Each
    1 ms step the gains are recomputed and one synchronous power update runs.
    Batteries pay p_u / eps + p_cir per transmitting step and gain the
    harvested power; a UE that cannot afford a step (battery plus harvest)
    stays silent and consumes nothing. The base station's energy signal stays
    off until the first step some battery cannot cover its consumption, which
    also defines the measured depletion time.
    """
    alg = Algorithm(algorithm)
    if duration < 0:
        raise ValueError("duration must be non-negative")
    cfg = scenario.cfg
    base = snapshot_from_scenario(scenario, snapshot_id=0)
    K = base.num_ues

    # start on the x=0 edge; keep sampled heights if random, else spread evenly
    if scenario.fixed_ues is None:
        ys = np.array([u.position[1] for u in base.ues])
    else:
        ys = cfg.cell_side * (np.arange(K) + 1.0) / (K + 1.0)
    positions = np.stack([np.zeros(K), ys], axis=1)
    direction = np.tile([1.0, 0.0], (K, 1))
    battery = np.full(K, battery_init)
    capacity = battery_init
    speed = speed_kmh / 3.6

    snap = base.with_gains(positions)
    p = PowerVector(np.zeros(K), 0.0)
    harvesting_active = False
    first_depletion: int | None = None
    activation: int | None = None

    records: list[tuple[float, PowerVector, Metrics, MobilityState]] = []
    n_steps = int(round(duration / step))
    for n in range(1, n_steps + 1):
        t = n * step
        # advance and reflect
        positions[:, 0] += direction[:, 0] * speed * step
        over = positions[:, 0] > cfg.cell_side
        positions[over, 0] = 2 * cfg.cell_side - positions[over, 0]
        direction[over, 0] *= -1.0
        under = positions[:, 0] < 0.0
        positions[under, 0] = -positions[under, 0]
        direction[under, 0] *= -1.0
        snap = snap.with_gains(positions)

        # synchronous candidate powers from the previous state
        interf = snap.h * p.p_u
        interf = interf.sum() - interf + cfg.delta * p.p_h + cfg.sigma2
        if alg.opportunistic:
            cand = np.minimum(snap.p_bar_u, snap.eta * snap.h / interf)
        else:
            cand = np.minimum(snap.p_bar_u, snap.gamma_target * interf / snap.h)
        need = (cand / cfg.epsilon + snap.p_cir) * step

        if first_depletion is None and bool(np.any(battery < need)):
            first_depletion = n
            if alg.harvesting:
                harvesting_active = True
                activation = n

        if alg.harvesting and harvesting_active:
            p_h = hbs_update(p, snap)
        else:
            p_h = 0.0
        harvest = snap.mu * snap.g * p_h * step

        affordable = battery + harvest >= need
        p_u = np.where(affordable, cand, 0.0)
        spend = np.where(affordable, need, 0.0)
        battery = np.clip(battery + harvest - spend, 0.0, capacity)

        p = PowerVector(p_u, p_h)
        state = MobilityState(
            time=t,
            positions=positions.copy(),
            battery=battery.copy(),
            harvesting_active=harvesting_active,
            direction=direction.copy(),
        )
        records.append((t, p.copy(), metrics(p, snap), state))

    return MobilityResult(
        algorithm=alg,
        records=records,
        first_depletion_step=first_depletion,
        activation_step=activation,
        battery_capacity=capacity,
    )
