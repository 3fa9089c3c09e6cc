"""Deterministic path-loss channel and seeded snapshot generation.

A snapshot is one realization of UE placement and harvesting efficiencies
inside a square cell. Channels are reciprocal (g = h) and follow the cubic
path-loss law g = k * d^-3; there is no fading or shadowing.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import (
    ConfigError,
    HbsParams,
    Scenario,
    ScenarioConfig,
    UeParams,
    UeTemplate,
    MU_FLOOR,
    make_ue,
    validate_scenario,
)

__all__ = [
    "Snapshot",
    "path_gain",
    "hbs_position",
    "sample_snapshot",
    "snapshot_from_distances",
    "snapshot_from_scenario",
    "snapshot_to_json",
    "snapshot_csv_rows",
]


def path_gain(d: float, k: float) -> float:
    """Cubic path-loss channel power gain k * d^-3 at distance d meters."""
    if d <= 0.0:
        raise ValueError(f"distance must be strictly positive, got {d}")
    return k / (d * d * d)


def hbs_position(cfg: ScenarioConfig) -> tuple[float, float]:
    """Base-station coordinates for the configured placement."""
    if cfg.hbs_placement == "corner":
        return (0.0, 0.0)
    return (cfg.cell_side / 2.0, cfg.cell_side / 2.0)


@dataclass
class Snapshot:
    """One realization of UE positions and efficiencies, arrays precomputed.

    The per-UE arrays (g, h, mu, ...) are derived from `ues` at construction
    and must be treated as read-only; the power-control code indexes them
    directly in its inner loops.
    """

    cfg: ScenarioConfig
    hbs: HbsParams
    ues: tuple[UeParams, ...]
    snapshot_id: int = 0
    seed_used: int = 0

    def __post_init__(self):
        self.num_ues = len(self.ues)
        self.g = np.array([u.g for u in self.ues])
        self.h = np.array([u.h for u in self.ues])
        self.mu = np.array([u.mu for u in self.ues])
        self.gamma_target = np.array([u.gamma_target for u in self.ues])
        self.eta = np.array([u.eta for u in self.ues])
        self.p_bar_u = np.array([u.p_bar_u for u in self.ues])
        self.p_cir = np.array([u.p_cir for u in self.ues])
        self.p_min = np.array([u.p_min for u in self.ues])
        self.distances = np.array([u.distance for u in self.ues])

    def with_gains(self, positions: np.ndarray) -> "Snapshot":
        """Copy with UEs moved to new positions, gains recomputed."""
        origin = hbs_position(self.cfg)
        ues = []
        for ue, (x, y) in zip(self.ues, positions):
            d = math.hypot(x - origin[0], y - origin[1])
            d = max(d, 1e-9)
            g = path_gain(d, self.cfg.attenuation_k)
            ues.append(
                UeParams(
                    position=(x, y), distance=d, g=g, h=g, mu=ue.mu,
                    gamma_target=ue.gamma_target, eta=ue.eta, p_bar_u=ue.p_bar_u,
                    n_antennas=ue.n_antennas, p_dyn=ue.p_dyn, p_sta=ue.p_sta,
                    e_bar=ue.e_bar,
                )
            )
        return Snapshot(self.cfg, self.hbs, tuple(ues), self.snapshot_id, self.seed_used)


def _draw_mu(rng: np.random.Generator) -> float:
    mu = rng.uniform(0.0, 1.0)
    while mu < MU_FLOOR:
        mu = rng.uniform(0.0, 1.0)
    return mu


def sample_snapshot(
    cfg: ScenarioConfig,
    hbs: HbsParams,
    ue_template: UeTemplate,
    rng: np.random.Generator | None = None,
    snapshot_id: int = 0,
) -> Snapshot:
    """Draw one random snapshot: positions uniform in the cell, mu per template.

    Each UE consumes a fixed number of draws (x, y, then mu when random), in
    UE order, so a K-UE snapshot is a prefix of the (K+1)-UE snapshot from the
    same stream. Per-snapshot streams derive from cfg.seed + snapshot_id.
    """
    seed_used = cfg.seed + snapshot_id
    if rng is None:
        rng = np.random.default_rng(seed_used)
    origin = hbs_position(cfg)
    ues = []
    for _ in range(cfg.num_ues):
        # unit-square draw scaled by the side keeps positions comparable
        # across cell-side sweeps that share a seed
        ux, uy = rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0)
        x, y = ux * cfg.cell_side, uy * cfg.cell_side
        mu = ue_template.mu if ue_template.mu is not None else _draw_mu(rng)
        d = math.hypot(x - origin[0], y - origin[1])
        d = max(d, 1e-9)
        g = path_gain(d, cfg.attenuation_k)
        ues.append(
            make_ue(
                distance=d, g=g, mu=mu, template=ue_template,
                epsilon=cfg.epsilon, delta_t=cfg.delta_t, position=(x, y),
            )
        )
    snap = Snapshot(cfg, hbs, tuple(ues), snapshot_id=snapshot_id, seed_used=seed_used)
    errors = validate_scenario(cfg, hbs, list(snap.ues))
    if errors:
        raise ConfigError(errors)
    return snap


def snapshot_from_distances(
    distances: list[float],
    cfg: ScenarioConfig,
    hbs: HbsParams,
    ue_template: UeTemplate,
    gamma_targets: list[float] | None = None,
    mus: list[float] | None = None,
    etas: list[float] | None = None,
) -> Snapshot:
    """Fixed-distance snapshot with per-UE overrides; bypasses cell geometry.

    UEs are placed on a ray from the base station, so positions may fall
    outside the cell; only the distances matter in this mode.
    """
    if len(distances) != cfg.num_ues:
        raise ConfigError(
            [f"distances: expected {cfg.num_ues} entries, got {len(distances)}"]
        )
    for name, values in (("gamma_targets", gamma_targets), ("mus", mus), ("etas", etas)):
        if values is not None and len(values) != cfg.num_ues:
            raise ConfigError(
                [f"{name}: expected {cfg.num_ues} entries, got {len(values)}"]
            )
    origin = hbs_position(cfg)
    ues = []
    for i, d in enumerate(distances):
        if d <= 0:
            raise ConfigError([f"distances[{i}]: must be strictly positive"])
        g = path_gain(d, cfg.attenuation_k)
        mu = mus[i] if mus is not None else (
            ue_template.mu if ue_template.mu is not None else 0.5
        )
        ues.append(
            make_ue(
                distance=d, g=g, mu=mu, template=ue_template,
                epsilon=cfg.epsilon, delta_t=cfg.delta_t,
                position=(origin[0] + d, origin[1]),
                gamma_target=None if gamma_targets is None else gamma_targets[i],
                eta=None if etas is None else etas[i],
            )
        )
    snap = Snapshot(cfg, hbs, tuple(ues))
    errors = validate_scenario(cfg, hbs, list(snap.ues))
    if errors:
        raise ConfigError(errors)
    return snap


def snapshot_from_scenario(
    scenario: Scenario,
    rng: np.random.Generator | None = None,
    snapshot_id: int = 0,
) -> Snapshot:
    """Fixed snapshot when the scenario pins distances, random one otherwise."""
    if scenario.fixed_ues is not None:
        fus = scenario.fixed_ues
        return snapshot_from_distances(
            [fu.distance for fu in fus],
            scenario.cfg,
            scenario.hbs,
            scenario.ue_template,
            gamma_targets=_override([fu.gamma_target for fu in fus]),
            mus=_override([fu.mu for fu in fus]),
            etas=_override([fu.eta for fu in fus]),
        )
    return sample_snapshot(
        scenario.cfg, scenario.hbs, scenario.ue_template, rng=rng, snapshot_id=snapshot_id
    )


def _override(values: list):
    return None if all(v is None for v in values) else [
        v if v is not None else None for v in values
    ]


def snapshot_to_json(snap: Snapshot, path: str | Path) -> None:
    """Dump a snapshot (linear units) for replay or inspection."""
    doc = {
        "snapshot_id": snap.snapshot_id,
        "seed_used": snap.seed_used,
        "hbs_placement": snap.cfg.hbs_placement,
        "ues": [
            {
                "position": list(u.position),
                "distance": u.distance,
                "g": u.g,
                "h": u.h,
                "mu": u.mu,
                "gamma_target": u.gamma_target,
                "eta": u.eta,
                "p_bar_u": u.p_bar_u,
                "p_cir": u.p_cir,
                "p_min": u.p_min,
            }
            for u in snap.ues
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)


def snapshot_csv_rows(snap: Snapshot) -> list[tuple]:
    """Rows (snapshot_id, ue_index, distance, gain, mu) for CSV export."""
    return [
        (snap.snapshot_id, i, u.distance, u.g, u.mu)
        for i, u in enumerate(snap.ues)
    ]
