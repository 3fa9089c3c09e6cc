import pathlib

import numpy as np
import pytest

from fdpowerctl.channel import Snapshot, snapshot_from_distances
from fdpowerctl.config import (
    HbsParams,
    ScenarioConfig,
    UeTemplate,
    load_scenario,
)

REPO_ROOT = pathlib.Path(__file__).resolve().parents[1]
CONFIG_DIR = REPO_ROOT / "configs"


@pytest.fixture(scope="session")
def paper_scenario():
    return load_scenario(CONFIG_DIR / "paper_4a.json")


@pytest.fixture(scope="session")
def desk_scenario():
    return load_scenario(CONFIG_DIR / "desk_consistent.json")


def make_single_ue_snapshot(
    *,
    h=1e-3,
    mu=0.5,
    epsilon=0.2,
    p_cir=1e-6,
    sigma2=1e-14,
    gamma_target=0.05,
    delta=0.0,
    eta=1.0,
    p_bar_u=1e3,
    p_bar_h=1e6,
) -> Snapshot:
    """Hand-parameterized one-UE snapshot with explicit gain (not distance-derived)."""
    cfg = ScenarioConfig(
        num_ues=1, epsilon=epsilon, delta=delta, sigma2=sigma2,
        attenuation_k=0.09, cell_side=50.0, seed=0,
    )
    hbs = HbsParams(p_bar_h=p_bar_h, n_antennas=2, p_dyn=0.0, p_sta=0.0)
    template = UeTemplate(
        mu=mu, gamma_target=gamma_target, eta=eta,
        n_antennas=1, p_dyn=0.0, p_sta=p_cir, p_bar_u=p_bar_u,
    )
    # distance chosen so that k d^-3 reproduces the requested gain
    d = (cfg.attenuation_k / h) ** (1.0 / 3.0)
    return snapshot_from_distances([d], cfg, hbs, template)


def make_desk_snapshot(distances, gamma_targets=None, *, delta=1e-12, mu=0.5,
                       seed=0, p_bar_u=1.0, p_bar_h=10.0, ue_p_dyn=1e-6,
                       ue_p_sta=1e-6, gamma_default=0.05, eta=1.0):
    """Fixed-distance snapshot in the feasibility-friendly parameter family
    (matches configs/desk_consistent.json unless overridden)."""
    k = len(distances)
    cfg = ScenarioConfig(
        num_ues=k, epsilon=0.2, delta=delta, sigma2=10 ** (-14.3),
        attenuation_k=0.09, cell_side=50.0, seed=seed,
    )
    hbs = HbsParams(p_bar_h=p_bar_h, n_antennas=2,
                    p_dyn=10 ** 0.8, p_sta=10 ** -0.3)
    template = UeTemplate(
        mu=mu, gamma_target=gamma_default, eta=eta, n_antennas=2,
        p_dyn=ue_p_dyn, p_sta=ue_p_sta, p_bar_u=p_bar_u,
    )
    return snapshot_from_distances(
        list(distances), cfg, hbs, template, gamma_targets=gamma_targets
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
