"""Independent verification of the power-control scheme's claims.

Every check here avoids the iteration path it validates: the minimum-power
optimality check uses an exhaustive grid (or, for one UE, a closed form), the
sandwich-scalability check samples random states, and the constraint-stack
gradient is built analytically so tests can difference it numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import Snapshot
from .core import (
    Algorithm,
    PowerVector,
    joint_update,
    metrics,
    optimal_hbs_power,
    required_hbs_power,
    sinr,
)
from .engine import IterationTrace, run_fixed_point

__all__ = [
    "BruteForceResult",
    "FLReport",
    "ScalabilityReport",
    "OptimalityReport",
    "EquivalenceReport",
    "TightnessReport",
    "UniquenessReport",
    "aggregate_power",
    "closed_form_single_ue",
    "brute_force_min_power",
    "verify_min_power_optimality",
    "check_two_sided_scalable",
    "alpha_coefficients",
    "fl_constraint_stack",
    "fast_lipschitz_report",
    "transformed_joint_update",
    "check_update_form_equivalence",
    "check_harvest_power_tightness",
    "check_fixed_point_uniqueness",
]

# constraint slacks for grid feasibility: the continuous optimum sits exactly
# on the constraint boundary, which a finite grid can only approach
QOS_GRID_SLACK = 1e-9
HARVEST_GRID_SLACK = 1e-12


def aggregate_power(p: PowerVector, snap: Snapshot) -> float:
    """Total consumed power: UE transmit/eps + circuits, plus the HBS side."""
    eps = snap.cfg.epsilon
    return float(
        np.sum(p.p_u / eps + snap.p_cir) + p.p_h / eps + snap.hbs.p_cir
    )


# ---------------------------------------------------------------------------
# minimum-power optimum: closed form (K=1) and grid search (K<=3)


def closed_form_single_ue(snap: Snapshot) -> tuple[PowerVector, float] | None:
    """Exact minimum-power solution for one UE, or None when infeasible.

    Both constraints are tight at the optimum, giving a 2x2 linear system:
    p_u = gamma_hat (delta p_h + sigma2) / h and p_h = p_u/(eps mu g) + p_min.
    The self-interference feedback coefficient must stay below one.
    """
    assert snap.num_ues == 1
    cfg = snap.cfg
    h, g, mu = snap.h[0], snap.g[0], snap.mu[0]
    gt = snap.gamma_target[0]
    p_min = snap.p_min[0]
    c = gt * cfg.delta / (h * cfg.epsilon * mu * g)
    if c >= 1.0:
        return None
    p_u = gt * (cfg.delta * p_min + cfg.sigma2) / (h * (1.0 - c))
    p_h = p_u / (cfg.epsilon * mu * g) + p_min
    if p_u > snap.p_bar_u[0] or p_h > snap.hbs.p_bar_h:
        return None
    p = PowerVector(np.array([p_u]), p_h)
    return p, aggregate_power(p, snap)


@dataclass
class BruteForceResult:
    """Outcome of the exhaustive grid search over the joint power box."""

    best_power_vector: PowerVector | None
    best_objective: float
    grid_points_per_dim: int
    refine_rounds: int
    final_rel_resolution: float
    feasible_count: int
    infeasible: bool
    round_objectives: list[float] = field(default_factory=list)


def _feasible_mask(pu: np.ndarray, ph: float, snap: Snapshot) -> np.ndarray:
    """Constraint check for a batch of uplink vectors at one harvest power."""
    received = pu * snap.h                       # (N, K)
    tot = received.sum(axis=1, keepdims=True)
    interf = tot - received + snap.cfg.delta * ph + snap.cfg.sigma2
    s = received / interf
    ok = np.all(s >= snap.gamma_target * (1.0 - QOS_GRID_SLACK), axis=1)
    req = pu / (snap.cfg.epsilon * snap.mu * snap.g) + snap.p_min
    ok &= np.all(ph >= req * (1.0 - HARVEST_GRID_SLACK), axis=1)
    return ok


def brute_force_min_power(
    snap: Snapshot,
    grid_points_per_dim: int = 64,
    refine_rounds: int = 3,
) -> BruteForceResult:
    """Grid-search the minimum aggregate power over [0, caps]^(K+1).

    The initial pass uses per-dimension geometric grids (plus the exact zero)
    spanning sixteen decades below each cap, because the operating powers of
    different scenarios differ by many orders of magnitude. Each refinement
    round re-grids a shrinking multiplicative window around the incumbent.
    Only K <= 3 is accepted; the search is exhaustive within each round.
    """
    K = snap.num_ues
    if K > 3:
        raise ValueError(f"brute force limited to K <= 3 (got K={K})")
    n = grid_points_per_dim
    eps = snap.cfg.epsilon
    caps = [float(c) for c in snap.p_bar_u] + [snap.hbs.p_bar_h]

    grids = [
        np.concatenate([[0.0], np.geomspace(c * 1e-16, c, n - 1)]) for c in caps
    ]
    ratios = [(1e16) ** (1.0 / (n - 2))] * (K + 1)

    incumbent: np.ndarray | None = None
    inc_obj = math.inf
    feasible_count = 0
    round_objectives: list[float] = []

    for _ in range(refine_rounds + 1):
        pu_mesh = np.meshgrid(*grids[:K], indexing="ij")
        pu = np.stack([m.ravel() for m in pu_mesh], axis=1)    # (N, K)
        base_obj = pu.sum(axis=1) / eps + snap.p_cir.sum() + snap.hbs.p_cir
        for ph in grids[K]:
            ok = _feasible_mask(pu, float(ph), snap)
            if not ok.any():
                continue
            feasible_count += int(ok.sum())
            obj = base_obj[ok] + ph / eps
            j = int(np.argmin(obj))
            if obj[j] < inc_obj:
                inc_obj = float(obj[j])
                incumbent = np.append(pu[ok][j], ph)
        round_objectives.append(inc_obj)
        if incumbent is None:
            break
        new_grids = []
        for d in range(K + 1):
            x = incumbent[d]
            if x <= 0.0:
                new_grids.append(
                    np.concatenate([[0.0], np.geomspace(caps[d] * 1e-18, caps[d] * 1e-15, n - 1)])
                )
                continue
            w = ratios[d] ** 2
            lo = x / w
            hi = min(x * w, caps[d])
            new_grids.append(np.geomspace(lo, hi, n))
            ratios[d] = (hi / lo) ** (1.0 / (n - 1))
        grids = new_grids

    if incumbent is None:
        return BruteForceResult(
            best_power_vector=None,
            best_objective=math.inf,
            grid_points_per_dim=n,
            refine_rounds=refine_rounds,
            final_rel_resolution=math.inf,
            feasible_count=0,
            infeasible=True,
            round_objectives=round_objectives,
        )
    return BruteForceResult(
        best_power_vector=PowerVector(incumbent[:K].copy(), float(incumbent[K])),
        best_objective=inc_obj,
        grid_points_per_dim=n,
        refine_rounds=refine_rounds,
        final_rel_resolution=max(ratios) - 1.0,
        feasible_count=feasible_count,
        infeasible=False,
        round_objectives=round_objectives,
    )


@dataclass
class OptimalityReport:
    """Fixed-point aggregate power versus an independent optimum."""

    passed: bool
    gap: float
    algorithm_objective: float
    oracle_objective: float
    oracle: str                   # "closed-form" or "grid"
    infeasible: bool              # both sides agree the scenario is infeasible
    constraints_ok: bool


def verify_min_power_optimality(
    snap: Snapshot,
    rel_tol: float,
    grid_points_per_dim: int = 64,
    refine_rounds: int = 3,
) -> OptimalityReport:
    """Compare the tracking algorithm's fixed point with the brute optimum."""
    trace = run_fixed_point(Algorithm.TPCEH, snap, tol=1e-12, max_iter=20000)
    p = trace.fixed_point
    alg_obj = aggregate_power(p, snap)
    mx = metrics(p, snap)
    alg_feasible = bool(np.all(mx.energy_feasible)) and not bool(np.any(mx.outage))

    if snap.num_ues == 1:
        closed = closed_form_single_ue(snap)
        if closed is None:
            return OptimalityReport(
                passed=not alg_feasible, gap=math.nan,
                algorithm_objective=alg_obj, oracle_objective=math.nan,
                oracle="closed-form", infeasible=True, constraints_ok=alg_feasible,
            )
        _, oracle_obj = closed
        oracle_name = "closed-form"
    else:
        bf = brute_force_min_power(snap, grid_points_per_dim, refine_rounds)
        if bf.infeasible:
            return OptimalityReport(
                passed=not alg_feasible, gap=math.nan,
                algorithm_objective=alg_obj, oracle_objective=math.nan,
                oracle="grid", infeasible=True, constraints_ok=alg_feasible,
            )
        oracle_obj = bf.best_objective
        oracle_name = "grid"

    gap = abs(alg_obj - oracle_obj) / oracle_obj
    return OptimalityReport(
        passed=bool(gap <= rel_tol and alg_feasible),
        gap=float(gap),
        algorithm_objective=alg_obj,
        oracle_objective=oracle_obj,
        oracle=oracle_name,
        infeasible=False,
        constraints_ok=alg_feasible,
    )


# ---------------------------------------------------------------------------
# two-sided scalability


@dataclass
class ScalabilityReport:
    passed: bool
    trials: int
    violations: int
    counterexample: dict | None


def check_two_sided_scalable(
    snap: Snapshot,
    algorithm: Algorithm | str,
    trials: int,
    rng: np.random.Generator,
    rel_slack: float = 1e-12,
) -> ScalabilityReport:
    """Randomized sandwich test of the joint update map, clipping included.

    Draw p > 0 log-uniform across fourteen decades under the caps, a scale
    a in (1, 10], and p' componentwise inside [(1/a) p, a p]; the map must
    satisfy (1/a) f(p) <= f(p') <= a f(p) up to the relative slack.
    """
    alg = Algorithm(algorithm)
    K = snap.num_ues
    caps = np.append(snap.p_bar_u, snap.hbs.p_bar_h)
    violations = 0
    example = None
    for _ in range(trials):
        exponents = rng.uniform(-14.0, 0.0, size=K + 1)
        base = caps * 10.0 ** exponents
        a = 10.0 ** rng.uniform(1e-3, 1.0)
        wiggle = a ** rng.uniform(-1.0, 1.0, size=K + 1)
        other = base * wiggle
        p = PowerVector(base[:K], float(base[K]))
        q = PowerVector(other[:K], float(other[K]))
        fp = joint_update(alg, p, snap).as_array()
        fq = joint_update(alg, q, snap).as_array()
        lower_ok = np.all(fq >= fp / a * (1.0 - rel_slack))
        upper_ok = np.all(fq <= fp * a * (1.0 + rel_slack))
        if not (lower_ok and upper_ok):
            violations += 1
            if example is None:
                example = {
                    "p": p.as_array().tolist(),
                    "p_prime": q.as_array().tolist(),
                    "a": a,
                    "f_p": fp.tolist(),
                    "f_p_prime": fq.tolist(),
                }
    return ScalabilityReport(
        passed=violations == 0,
        trials=trials,
        violations=violations,
        counterexample=example,
    )


# ---------------------------------------------------------------------------
# constraint-stack gradient (fast-Lipschitz qualification)


def alpha_coefficients(snap: Snapshot) -> np.ndarray:
    """Per-UE constants gamma_hat / ((1 + gamma_hat) eps h g mu)."""
    gt = snap.gamma_target
    return gt / ((1.0 + gt) * snap.cfg.epsilon * snap.h * snap.g * snap.mu)


def fl_constraint_stack(y: np.ndarray, snap: Snapshot) -> np.ndarray:
    """Constraint functions of the negated-variable optimization form.

    y is the stacked vector (uplink components, harvest component) of the
    sign-flipped variables. The first K entries bound each uplink power via
    the SINR constraint rearranged to isolate the own power; the last entry
    is the pointwise max of the per-UE harvest requirements.
    """
    cfg = snap.cfg
    gt = snap.gamma_target
    total = float(snap.h @ y[: snap.num_ues] + cfg.delta * y[-1] + cfg.sigma2)
    rows = gt / ((1.0 + gt) * snap.h) * total
    alpha = alpha_coefficients(snap)
    z = float(np.max(alpha * total + snap.p_min))
    return np.append(rows, z)


def _fl_active_index(y: np.ndarray, snap: Snapshot) -> int:
    cfg = snap.cfg
    total = float(snap.h @ y[: snap.num_ues] + cfg.delta * y[-1] + cfg.sigma2)
    terms = alpha_coefficients(snap) * total + snap.p_min
    # ties break to the lowest UE index (np.argmax already does)
    return int(np.argmax(terms))


@dataclass
class FLReport:
    """Gradient-condition record for the constraint-iteration form."""

    alpha: np.ndarray
    grad_norm_inf: float          # column-sum norm of the gradient matrix
    grad_norm_rowsum: float       # row-sum norm, reported for transparency
    grad_nonneg: bool
    grad_f0_positive: bool
    qualifies: bool
    active_index: int
    eval_point: np.ndarray


def fast_lipschitz_report(snap: Snapshot, at: PowerVector | None = None) -> FLReport:
    """Build the constraint-stack gradient analytically and test the
    qualification conditions (positive objective gradient, non-negative
    constraint gradient, norm below one). The qualification outcome is
    informational; it depends on the scenario's targets and gains.

    The gradient convention is the transpose of the Jacobian: entry (i, j)
    holds the derivative of constraint j with respect to variable i. The
    reported norm is the maximum absolute column sum, as the qualification
    condition states it; the row-sum norm is included alongside.
    """
    if at is None:
        at = run_fixed_point(Algorithm.TPCEH, snap, tol=1e-10, max_iter=20000).fixed_point
    y = -at.as_array()
    K = snap.num_ues
    cfg = snap.cfg
    gt = snap.gamma_target
    c = gt / ((1.0 + gt) * snap.h)
    alpha = alpha_coefficients(snap)
    istar = _fl_active_index(y, snap)

    grad = np.zeros((K + 1, K + 1))
    # columns j = 0..K-1: uplink constraint rows c_j * (sum h_l y_l + delta y_H)
    grad[:K, :K] = np.outer(snap.h, c)          # d g_j / d y_i = c_j h_i
    grad[K, :K] = cfg.delta * c                 # d g_j / d y_H
    grad[:K, K] = alpha[istar] * snap.h         # d z / d y_i
    grad[K, K] = alpha[istar] * cfg.delta       # d z / d y_H

    col_norm = float(np.max(np.abs(grad).sum(axis=0)))
    row_norm = float(np.max(np.abs(grad).sum(axis=1)))
    nonneg = bool(np.all(grad >= 0.0))
    f0_positive = cfg.epsilon > 0.0             # objective gradient is 1/eps
    return FLReport(
        alpha=alpha,
        grad_norm_inf=col_norm,
        grad_norm_rowsum=row_norm,
        grad_nonneg=nonneg,
        grad_f0_positive=f0_positive,
        qualifies=bool(f0_positive and nonneg and col_norm < 1.0),
        active_index=istar,
        eval_point=y,
    )


# ---------------------------------------------------------------------------
# equivalence of the two update parameterizations


def transformed_joint_update(p: PowerVector, snap: Snapshot) -> PowerVector:
    """Ratio-form restatement of the tracking update.

    The UE update folds the own-signal term into the denominator, summing the
    received power over all UEs with a (1 + gamma_hat) divisor; the harvest
    update substitutes the same expression via the alpha coefficients. Both
    share their fixed points with the plain tracking form when no cap binds.
    """
    cfg = snap.cfg
    total = float(snap.h @ p.p_u) + cfg.delta * p.p_h + cfg.sigma2
    gt = snap.gamma_target
    p_u_next = np.minimum(snap.p_bar_u, gt * total / ((1.0 + gt) * snap.h))
    alpha = alpha_coefficients(snap)
    p_h_next = min(snap.hbs.p_bar_h, float(np.max(alpha * total + snap.p_min)))
    return PowerVector(p_u_next, p_h_next)


def _iterate(update, p: PowerVector, tol: float, max_iter: int) -> tuple[PowerVector, bool]:
    for _ in range(max_iter):
        p_next = update(p)
        a, b = p_next.as_array(), p.as_array()
        change = float(np.max(np.abs(a - b) / np.maximum(b, 1e-18)))
        p = p_next
        if change <= tol:
            return p, True
    return p, False


@dataclass
class EquivalenceReport:
    passed: bool
    max_fixed_point_gap: float
    max_cross_eval_gap: float
    counterexample: dict | None


def check_update_form_equivalence(
    snap: Snapshot,
    trials: int,
    rng: np.random.Generator,
    fp_rel_tol: float = 1e-9,
    eval_rel_tol: float = 1e-12,
) -> EquivalenceReport:
    """Iterate the plain and ratio-form updates from random initial states.

    Asserts that both iterations reach the same fixed point and that the
    ratio-form map reproduces the plain fixed point when evaluated there.
    Valid on scenarios whose fixed point leaves every cap slack.
    """
    caps = np.append(snap.p_bar_u, snap.hbs.p_bar_h)
    worst_fp = 0.0
    worst_eval = 0.0
    example = None
    passed = True
    for _ in range(trials):
        start = caps * 10.0 ** rng.uniform(-12.0, 0.0, size=snap.num_ues + 1)
        p0 = PowerVector(start[:-1], float(start[-1]))
        fp_a, ok_a = _iterate(
            lambda q: joint_update(Algorithm.TPCEH, q, snap), p0, 1e-13, 50000
        )
        fp_b, ok_b = _iterate(
            lambda q: transformed_joint_update(q, snap), p0, 1e-13, 50000
        )
        a, b = fp_a.as_array(), fp_b.as_array()
        fp_gap = float(np.max(np.abs(a - b) / np.maximum(np.abs(a), 1e-30)))
        cross = transformed_joint_update(fp_a, snap).as_array()
        eval_gap = float(np.max(np.abs(cross - a) / np.maximum(np.abs(a), 1e-30)))
        worst_fp = max(worst_fp, fp_gap)
        worst_eval = max(worst_eval, eval_gap)
        if not (ok_a and ok_b and fp_gap <= fp_rel_tol and eval_gap <= eval_rel_tol):
            passed = False
            if example is None:
                example = {
                    "init": p0.as_array().tolist(),
                    "fp_plain": a.tolist(),
                    "fp_ratio": b.tolist(),
                    "fp_gap": fp_gap,
                    "eval_gap": eval_gap,
                }
    return EquivalenceReport(
        passed=passed,
        max_fixed_point_gap=worst_fp,
        max_cross_eval_gap=worst_eval,
        counterexample=example,
    )


# ---------------------------------------------------------------------------
# harvest-power tightness and fixed-point uniqueness


@dataclass
class TightnessReport:
    status: str                  # "ok", "cap_binding" or "violated"
    passed: bool
    rel_gap: float
    offending_ue: int | None
    argmax_ue: int


def check_harvest_power_tightness(
    trace: IterationTrace, snap: Snapshot, rel_tol: float = 1e-9
) -> TightnessReport:
    """At a converged, non-cap-binding fixed point the harvest power must
    equal the largest per-UE requirement: every UE satisfied, the argmax UE
    exactly tight. Cap-binding runs are skipped with a distinct status."""
    p = trace.fixed_point
    required = required_hbs_power(p.p_u, snap)
    argmax = int(np.argmax(required))
    if p.p_h >= snap.hbs.p_bar_h * (1.0 - 1e-12):
        return TightnessReport("cap_binding", True, math.nan, None, argmax)
    target = float(required[argmax])
    rel_gap = abs(p.p_h - target) / target
    unmet = np.where(p.p_h < required * (1.0 - 1e-9))[0]
    if rel_gap > rel_tol or unmet.size:
        return TightnessReport(
            "violated", False, rel_gap,
            int(unmet[0]) if unmet.size else None, argmax,
        )
    return TightnessReport("ok", True, rel_gap, None, argmax)


@dataclass
class UniquenessReport:
    passed: bool
    n_inits: int
    all_converged: bool
    max_spread: float            # relative infinity-norm across fixed points


def check_fixed_point_uniqueness(
    snap: Snapshot,
    algorithm: Algorithm | str,
    n_inits: int,
    rng: np.random.Generator,
    tol: float = 1e-9,
    rel_match: float = 1e-6,
    max_iter: int = 20000,
) -> UniquenessReport:
    """Run the iteration from random initial vectors and compare fixed points."""
    alg = Algorithm(algorithm)
    caps = np.append(snap.p_bar_u, snap.hbs.p_bar_h)
    fps = []
    all_ok = True
    for _ in range(n_inits):
        start = caps * 10.0 ** rng.uniform(-12.0, 0.0, size=snap.num_ues + 1)
        p0 = PowerVector(start[:-1], float(start[-1]) if alg.harvesting else 0.0)
        trace = run_fixed_point(alg, snap, p_init=p0, tol=tol, max_iter=max_iter, record="ends")
        all_ok &= trace.converged
        fps.append(trace.fixed_point.as_array())
    stack = np.stack(fps)
    ref = stack[0]
    spread = float(
        np.max(np.abs(stack - ref) / np.maximum(np.abs(ref), 1e-30))
    ) if n_inits > 1 else 0.0
    return UniquenessReport(
        passed=bool(all_ok and spread <= rel_match),
        n_inits=n_inits,
        all_converged=bool(all_ok),
        max_spread=spread,
    )
