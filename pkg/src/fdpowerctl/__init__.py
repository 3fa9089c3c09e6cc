"""Distributed power control for full-duplex energy-harvesting uplinks."""

__version__ = "0.1.0"

from .config import (  # noqa: F401
    ConfigError,
    HbsParams,
    Scenario,
    ScenarioConfig,
    UeParams,
    UeTemplate,
    load_scenario,
    validate_scenario,
)
from .channel import (  # noqa: F401
    Snapshot,
    path_gain,
    sample_snapshot,
    snapshot_from_distances,
    snapshot_from_scenario,
)
from .core import (  # noqa: F401
    Algorithm,
    Metrics,
    PowerVector,
    hbs_update,
    joint_update,
    metrics,
    opc_ue_update,
    opceh_ue_update,
    optimal_hbs_power,
    rate,
    sinr,
    tpc_ue_update,
    tpceh_ue_update,
)
from .engine import (  # noqa: F401
    IterationTrace,
    check_energy_feasibility,
    run_fixed_point,
    run_mobility,
    run_monte_carlo,
)
from .units import dbm_to_watt, db_to_linear, linear_to_db, watt_to_dbm  # noqa: F401
