"""Power-control update rules and derived link metrics.

All functions here are pure maps from a joint power state (K uplink powers
plus the base station's harvest transmit power) to the next state or to
metrics. The synchronous iteration that composes them lives in the engine.

Four algorithms are supported:

* TPC    - target-SINR tracking, no harvesting (p_h stays 0).
* OPC    - opportunistic control, no harvesting.
* TPCEH  - target-SINR tracking with the harvest-power update; the base
           station raises its downlink energy signal to the largest per-UE
           requirement p_u / (eps * mu * g) + p_min.
* OPCEH  - opportunistic control with the same harvest-power update.

The uplink SINR of UE i is h_i p_i / (sum_{j != i} h_j p_j + delta p_h +
sigma2): other UEs interfere directly, and a fraction delta of the downlink
energy signal leaks into the receiver as residual self-interference.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .channel import Snapshot

__all__ = [
    "Algorithm",
    "PowerVector",
    "Metrics",
    "sinr",
    "rate",
    "hbs_update",
    "optimal_hbs_power",
    "tpceh_ue_update",
    "opceh_ue_update",
    "tpc_ue_update",
    "opc_ue_update",
    "joint_update",
    "metrics",
    "required_hbs_power",
]

# Numeric guards, not model semantics: slack applied when classifying
# energy feasibility and outage at a fixed point.
FEASIBILITY_REL_SLACK = 1e-12
OUTAGE_REL_SLACK = 1e-6


class Algorithm(str, enum.Enum):
    TPC = "TPC"
    OPC = "OPC"
    TPCEH = "TPCEH"
    OPCEH = "OPCEH"

    @property
    def harvesting(self) -> bool:
        return self in (Algorithm.TPCEH, Algorithm.OPCEH)

    @property
    def opportunistic(self) -> bool:
        return self in (Algorithm.OPC, Algorithm.OPCEH)


@dataclass
class PowerVector:
    """Joint transmit state: uplink powers (watts) and harvest power (watts)."""

    p_u: np.ndarray
    p_h: float = 0.0

    def copy(self) -> "PowerVector":
        return PowerVector(self.p_u.copy(), self.p_h)

    def clipped(self, snap: Snapshot) -> "PowerVector":
        return PowerVector(
            np.clip(self.p_u, 0.0, snap.p_bar_u),
            float(min(max(self.p_h, 0.0), snap.hbs.p_bar_h)),
        )

    def as_array(self) -> np.ndarray:
        return np.append(self.p_u, self.p_h)


def _interference(p: PowerVector, snap: Snapshot) -> np.ndarray:
    """Per-UE interference-plus-noise seen at the base station receiver."""
    received = snap.h * p.p_u
    return received.sum() - received + snap.cfg.delta * p.p_h + snap.cfg.sigma2


def sinr(p: PowerVector, snap: Snapshot) -> np.ndarray:
    """Uplink SINR per UE; the denominator is bounded below by sigma2 > 0."""
    return snap.h * p.p_u / _interference(p, snap)


def rate(p: PowerVector, snap: Snapshot) -> np.ndarray:
    """Achievable uplink rate log2(1 + SINR), bits/s/Hz."""
    return np.log2(1.0 + sinr(p, snap))


def required_hbs_power(p_u: np.ndarray, snap: Snapshot) -> np.ndarray:
    """Per-UE downlink power the harvest constraint demands: p_u/(eps mu g) + p_min."""
    return p_u / (snap.cfg.epsilon * snap.mu * snap.g) + snap.p_min


def optimal_hbs_power(p_u: np.ndarray, snap: Snapshot) -> float:
    """Smallest downlink power satisfying every UE's harvest constraint.

    Unclipped max of the per-UE requirements; exceeding the peak power cap
    means the state is energy-infeasible at that cap.
    """
    return float(np.max(required_hbs_power(p_u, snap)))


def hbs_update(p: PowerVector, snap: Snapshot) -> float:
    """Harvest-power update: the per-UE requirement max, clipped to the peak."""
    return min(snap.hbs.p_bar_h, optimal_hbs_power(p.p_u, snap))


def tpceh_ue_update(p: PowerVector, snap: Snapshot, i: int) -> float:
    """Target-SINR tracking update for UE i with self-interference included."""
    interf = float(_interference(p, snap)[i])
    return min(snap.p_bar_u[i], snap.gamma_target[i] * interf / snap.h[i])


def opceh_ue_update(p: PowerVector, snap: Snapshot, i: int) -> float:
    """Opportunistic update for UE i: eta * h / (interference + noise)."""
    interf = float(_interference(p, snap)[i])
    return min(snap.p_bar_u[i], snap.eta[i] * snap.h[i] / interf)


def tpc_ue_update(p_u: np.ndarray, snap: Snapshot, i: int) -> float:
    """Half-duplex target-tracking baseline: no harvest signal, no delta term."""
    return tpceh_ue_update(PowerVector(p_u, 0.0), snap, i)


def opc_ue_update(p_u: np.ndarray, snap: Snapshot, i: int) -> float:
    """Half-duplex opportunistic baseline: no harvest signal, no delta term."""
    return opceh_ue_update(PowerVector(p_u, 0.0), snap, i)


def joint_update(alg: Algorithm, p: PowerVector, snap: Snapshot) -> PowerVector:
    """One synchronous step: every UE and (for *EH) the base station update
    from the same state. Vectorized equivalent of the per-UE operations."""
    interf = _interference(p, snap)
    if alg.opportunistic:
        p_u_next = np.minimum(snap.p_bar_u, snap.eta * snap.h / interf)
    else:
        p_u_next = np.minimum(snap.p_bar_u, snap.gamma_target * interf / snap.h)
    p_h_next = hbs_update(p, snap) if alg.harvesting else 0.0
    return PowerVector(p_u_next, p_h_next)


@dataclass
class Metrics:
    """Link and power metrics derived from one joint power state."""

    sinr: np.ndarray
    rate: np.ndarray
    ue_total_power: np.ndarray       # p_u / eps + p_cir
    hbs_total_power: float           # p_h / eps + hbs circuit
    harvested_power: np.ndarray      # mu * g * p_h
    aggregate_power: float
    aggregate_throughput: float
    energy_feasible: np.ndarray      # bool per UE
    outage: np.ndarray               # bool per UE


def metrics(p: PowerVector, snap: Snapshot) -> Metrics:
    """Evaluate all metrics of a power state on a snapshot."""
    eps = snap.cfg.epsilon
    s = sinr(p, snap)
    r = np.log2(1.0 + s)
    ue_total = p.p_u / eps + snap.p_cir
    hbs_total = p.p_h / eps + snap.hbs.p_cir
    harvested = snap.mu * snap.g * p.p_h
    required = required_hbs_power(p.p_u, snap)
    feasible = p.p_h >= required * (1.0 - FEASIBILITY_REL_SLACK)
    outage = s < snap.gamma_target * (1.0 - OUTAGE_REL_SLACK)
    return Metrics(
        sinr=s,
        rate=r,
        ue_total_power=ue_total,
        hbs_total_power=float(hbs_total),
        harvested_power=harvested,
        aggregate_power=float(ue_total.sum() + hbs_total),
        aggregate_throughput=float(r.sum()),
        energy_feasible=feasible,
        outage=outage,
    )
