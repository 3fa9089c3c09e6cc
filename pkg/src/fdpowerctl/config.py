"""Scenario configuration: dataclasses, validation and strict JSON loading.

Scenario files keep powers in dBm and the self-interference coefficient in
dB; loading converts everything to linear watts once, so the simulation code
never touches decibels. Unknown keys in a scenario file are an error.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .units import dbm_to_watt, db_to_linear

__all__ = [
    "ConfigError",
    "ScenarioConfig",
    "HbsParams",
    "UeParams",
    "UeTemplate",
    "FixedUe",
    "Scenario",
    "make_ue",
    "validate_scenario",
    "load_scenario",
    "scenario_from_dict",
    "scenario_to_dict",
    "config_hash",
]

# Harvesting efficiencies below this make the circuit-power requirement
# p_cir / (mu * g) blow up; sampled values are resampled above it.
MU_FLOOR = 1e-6


class ConfigError(ValueError):
    """Raised with the full list of violated invariants or bad keys."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class ScenarioConfig:
    """Global physical and simulation parameters (all linear units)."""

    num_ues: int
    epsilon: float          # power-amplifier efficiency, in (0, 1]
    delta: float            # effective self-interference coefficient, linear
    sigma2: float           # AWGN power at the base station, watts
    delta_t: float = 1.0    # harvesting interval, seconds
    attenuation_k: float = 0.09
    cell_side: float = 50.0
    hbs_placement: str = "center"   # "center" or "corner"
    seed: int = 0
    tol: float = 1e-9
    max_iter: int = 2000


@dataclass(frozen=True)
class HbsParams:
    """Base-station power model: peak harvest transmit power and circuit."""

    p_bar_h: float
    n_antennas: int = 2
    p_dyn: float = 0.0
    p_sta: float = 0.0
    p_cir: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "p_cir", self.n_antennas * self.p_dyn + self.p_sta)


@dataclass(frozen=True)
class UeParams:
    """Fully-resolved per-UE physical state, derived fields included."""

    position: tuple[float, float]
    distance: float
    g: float                 # downlink channel power gain
    h: float                 # uplink channel power gain
    mu: float                # energy-harvesting efficiency
    gamma_target: float      # target SINR, linear
    eta: float               # target signal-interference product
    p_bar_u: float           # uplink transmit power cap, watts
    n_antennas: int = 2
    p_dyn: float = 0.0
    p_sta: float = 0.0
    e_bar: float | None = None
    p_cir: float = field(init=False)
    p_min: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "p_cir", self.n_antennas * self.p_dyn + self.p_sta)
        denom = self.mu * self.g
        object.__setattr__(self, "p_min", self.p_cir / denom if denom > 0 else math.inf)


@dataclass(frozen=True)
class UeTemplate:
    """Per-UE parameters shared by sampled UEs; mu=None means U(0,1) draws."""

    mu: float | None
    gamma_target: float
    eta: float = 1.0
    n_antennas: int = 2
    p_dyn: float = 0.0
    p_sta: float = 0.0
    p_bar_u: float | None = None
    e_bar: float | None = None

    def resolve_p_bar_u(self, epsilon: float, delta_t: float) -> float:
        """Uplink cap, either direct or derived from the harvest-energy limit."""
        if self.p_bar_u is not None:
            return self.p_bar_u
        p_cir = self.n_antennas * self.p_dyn + self.p_sta
        return epsilon * (self.e_bar / delta_t - p_cir)


@dataclass(frozen=True)
class FixedUe:
    """Overrides for one UE in a fixed-distance (single snapshot) scenario."""

    distance: float
    gamma_target: float | None = None
    mu: float | None = None
    eta: float | None = None


@dataclass(frozen=True)
class Scenario:
    """Validated bundle: global config, base station, UE template, fixed UEs."""

    cfg: ScenarioConfig
    hbs: HbsParams
    ue_template: UeTemplate
    fixed_ues: tuple[FixedUe, ...] | None = None


def make_ue(
    *,
    distance: float,
    g: float,
    mu: float,
    template: UeTemplate,
    epsilon: float,
    delta_t: float,
    position: tuple[float, float] = (0.0, 0.0),
    gamma_target: float | None = None,
    eta: float | None = None,
) -> UeParams:
    """Build a UE from the template with reciprocal gains and derived fields."""
    return UeParams(
        position=position,
        distance=distance,
        g=g,
        h=g,
        mu=mu,
        gamma_target=template.gamma_target if gamma_target is None else gamma_target,
        eta=template.eta if eta is None else eta,
        p_bar_u=template.resolve_p_bar_u(epsilon, delta_t),
        n_antennas=template.n_antennas,
        p_dyn=template.p_dyn,
        p_sta=template.p_sta,
        e_bar=template.e_bar,
    )


def validate_scenario(
    cfg: ScenarioConfig, hbs: HbsParams, ues: list[UeParams]
) -> list[str]:
    """Check every invariant; returns all violations with field paths."""
    errors: list[str] = []

    def bad(path: str, msg: str):
        errors.append(f"{path}: {msg}")

    if cfg.num_ues < 1:
        bad("scenario.num_ues", "must be at least 1")
    if not (0.0 < cfg.epsilon <= 1.0):
        bad("scenario.epsilon", "epsilon out of range (0, 1]")
    if cfg.delta < 0.0:
        bad("scenario.delta", "must be non-negative")
    if cfg.sigma2 <= 0.0:
        bad("scenario.sigma2", "must be strictly positive")
    if cfg.delta_t <= 0.0:
        bad("scenario.delta_t", "must be strictly positive")
    if cfg.attenuation_k <= 0.0:
        bad("scenario.attenuation_k", "must be strictly positive")
    if cfg.cell_side <= 0.0:
        bad("scenario.cell_side", "must be strictly positive")
    if cfg.hbs_placement not in ("center", "corner"):
        bad("scenario.hbs_placement", "must be 'center' or 'corner'")
    if cfg.tol <= 0.0:
        bad("scenario.tol", "must be strictly positive")
    if cfg.max_iter < 1:
        bad("scenario.max_iter", "must be at least 1")

    if hbs.p_bar_h <= 0.0:
        bad("hbs.p_bar_h", "must be strictly positive")
    if hbs.n_antennas < 1:
        bad("hbs.n_antennas", "must be at least 1")
    if hbs.p_dyn < 0.0 or hbs.p_sta < 0.0:
        bad("hbs.circuit", "circuit powers must be non-negative")

    for i, ue in enumerate(ues):
        path = f"ues[{i}]"
        if ue.mu <= 0.0:
            bad(f"{path}.mu", "mu must be strictly positive")
        elif ue.mu >= 1.0:
            bad(f"{path}.mu", "mu must be below 1")
        if ue.g <= 0.0:
            bad(f"{path}.g", "channel gain must be strictly positive")
        if ue.h <= 0.0:
            bad(f"{path}.h", "channel gain must be strictly positive")
        if ue.distance <= 0.0:
            bad(f"{path}.distance", "must be strictly positive")
        if ue.gamma_target < 0.0:
            bad(f"{path}.gamma_target", "must be non-negative")
        if ue.eta < 0.0:
            bad(f"{path}.eta", "must be non-negative")
        if ue.p_bar_u <= 0.0:
            bad(f"{path}.p_bar_u", "uplink power cap must be strictly positive")
        if ue.p_dyn < 0.0 or ue.p_sta < 0.0:
            bad(f"{path}.circuit", "circuit powers must be non-negative")
        if ue.e_bar is not None and ue.mu > 0 and ue.g > 0:
            # cap must match the harvest-energy limit it was derived from
            expect = ue.e_bar  # joules per interval
            if expect <= 0:
                bad(f"{path}.e_bar", "must be strictly positive")

    return errors


# ---------------------------------------------------------------------------
# strict JSON scenario files


_SCENARIO_KEYS = {
    "num_ues", "epsilon", "delta_db", "sigma2_dbm", "delta_t",
    "attenuation_k", "cell_side", "hbs_placement", "seed", "tol", "max_iter",
}
_HBS_KEYS = {"p_bar_h_dbm", "n_antennas", "p_dyn_dbm", "p_sta_dbm"}
_UE_KEYS = {
    "mu", "gamma_target", "eta", "n_antennas",
    "p_dyn_dbm", "p_sta_dbm", "p_bar_u_dbm", "e_bar_joules",
}
_FIXED_UE_KEYS = {"distance", "gamma_target", "mu", "eta"}
_TOP_KEYS = {"scenario", "hbs", "ue_template", "fixed_ues"}


def _check_keys(doc: dict, allowed: set[str], path: str, errors: list[str]):
    for key in doc:
        if key not in allowed:
            errors.append(f"{path}.{key}: unknown key")


def scenario_from_dict(doc: dict[str, Any]) -> Scenario:
    """Build and validate a Scenario from a parsed JSON document."""
    errors: list[str] = []
    _check_keys(doc, _TOP_KEYS, "$", errors)
    for section in ("scenario", "hbs", "ue_template"):
        if section not in doc:
            errors.append(f"$.{section}: missing section")
    if errors:
        raise ConfigError(errors)

    sc = doc["scenario"]
    _check_keys(sc, _SCENARIO_KEYS, "scenario", errors)
    hb = doc["hbs"]
    _check_keys(hb, _HBS_KEYS, "hbs", errors)
    ut = doc["ue_template"]
    _check_keys(ut, _UE_KEYS, "ue_template", errors)
    fixed = doc.get("fixed_ues")
    if fixed is not None:
        for i, fu in enumerate(fixed):
            _check_keys(fu, _FIXED_UE_KEYS, f"fixed_ues[{i}]", errors)
    if errors:
        raise ConfigError(errors)

    if ("p_bar_u_dbm" in ut) == ("e_bar_joules" in ut):
        raise ConfigError(
            ["ue_template: exactly one of p_bar_u_dbm / e_bar_joules required"]
        )

    cfg = ScenarioConfig(
        num_ues=int(sc["num_ues"]),
        epsilon=float(sc["epsilon"]),
        delta=db_to_linear(float(sc["delta_db"])),
        sigma2=dbm_to_watt(float(sc["sigma2_dbm"])),
        delta_t=float(sc.get("delta_t", 1.0)),
        attenuation_k=float(sc.get("attenuation_k", 0.09)),
        cell_side=float(sc.get("cell_side", 50.0)),
        hbs_placement=str(sc.get("hbs_placement", "center")),
        seed=int(sc.get("seed", 0)),
        tol=float(sc.get("tol", 1e-9)),
        max_iter=int(sc.get("max_iter", 2000)),
    )
    hbs = HbsParams(
        p_bar_h=dbm_to_watt(float(hb["p_bar_h_dbm"])),
        n_antennas=int(hb.get("n_antennas", 2)),
        p_dyn=dbm_to_watt(float(hb["p_dyn_dbm"])),
        p_sta=dbm_to_watt(float(hb["p_sta_dbm"])),
    )
    template = UeTemplate(
        mu=None if ut.get("mu") is None else float(ut["mu"]),
        gamma_target=float(ut["gamma_target"]),
        eta=float(ut.get("eta", 1.0)),
        n_antennas=int(ut.get("n_antennas", 2)),
        p_dyn=dbm_to_watt(float(ut["p_dyn_dbm"])),
        p_sta=dbm_to_watt(float(ut["p_sta_dbm"])),
        p_bar_u=dbm_to_watt(float(ut["p_bar_u_dbm"])) if "p_bar_u_dbm" in ut else None,
        e_bar=float(ut["e_bar_joules"]) if "e_bar_joules" in ut else None,
    )
    fixed_ues = None
    if fixed is not None:
        fixed_ues = tuple(
            FixedUe(
                distance=float(fu["distance"]),
                gamma_target=None if fu.get("gamma_target") is None else float(fu["gamma_target"]),
                mu=None if fu.get("mu") is None else float(fu["mu"]),
                eta=None if fu.get("eta") is None else float(fu["eta"]),
            )
            for fu in fixed
        )
        if len(fixed_ues) != cfg.num_ues:
            raise ConfigError(
                [f"fixed_ues: expected {cfg.num_ues} entries, got {len(fixed_ues)}"]
            )

    # template-level sanity before any UE exists
    probe_cap = template.resolve_p_bar_u(cfg.epsilon, cfg.delta_t) if cfg.epsilon > 0 else -1.0
    probe_errors = validate_scenario(cfg, hbs, [])
    if template.e_bar is not None and probe_cap <= 0.0:
        probe_errors.append(
            "ue_template.e_bar_joules: derived uplink cap is non-positive"
        )
    if template.mu is not None and not (0.0 < template.mu < 1.0):
        probe_errors.append("ue_template.mu: must lie in (0, 1)")
    if probe_errors:
        raise ConfigError(probe_errors)

    return Scenario(cfg=cfg, hbs=hbs, ue_template=template, fixed_ues=fixed_ues)


def load_scenario(path: str | Path) -> Scenario:
    """Load and validate a JSON scenario file."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return scenario_from_dict(doc)


def scenario_to_dict(scenario: Scenario) -> dict[str, Any]:
    """Round-trippable plain-dict form of a scenario (linear units kept)."""
    out: dict[str, Any] = {
        "scenario": dataclasses.asdict(scenario.cfg),
        "hbs": {k: v for k, v in dataclasses.asdict(scenario.hbs).items()},
        "ue_template": dataclasses.asdict(scenario.ue_template),
    }
    if scenario.fixed_ues is not None:
        out["fixed_ues"] = [dataclasses.asdict(fu) for fu in scenario.fixed_ues]
    return out


def config_hash(doc: dict[str, Any]) -> str:
    """Stable hash of a resolved configuration document."""
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()
