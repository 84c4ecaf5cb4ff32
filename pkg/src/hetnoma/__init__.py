"""Clustered NOMA power-bandwidth allocation for downlink HetNets."""

from .config import ConfigError, SimConfig, dbm_to_watts, watts_to_dbm
from .channel import (
    BaseStation,
    ChannelParams,
    NetworkScenario,
    UserEquipment,
    associate_ues,
    capacity,
    composite_gain,
    derive_slave_params,
    generate_scenario,
    scenario_from_json,
    scenario_to_json,
    sinr,
    sinr_from_rho,
)
from .clustering import (
    Cluster,
    Partition,
    form_clusters,
    index_clustering,
    partition_ues,
    sequential_wmm,
)
from .slave import ActiveSet, SlaveInput, SlaveSolution, solve, solve_batch
from .master import primary_update, project_simplex, secondary_update, theta_min_qos
from .orchestrator import (
    SimulationReport,
    metrics,
    run_algorithm1,
    run_equal_pba,
    run_oma,
)

__version__ = "0.1.0"

__all__ = [
    "ActiveSet", "BaseStation", "ChannelParams", "Cluster", "ConfigError",
    "NetworkScenario", "Partition", "SimConfig", "SimulationReport",
    "SlaveInput", "SlaveSolution", "UserEquipment", "associate_ues",
    "capacity", "composite_gain", "dbm_to_watts", "derive_slave_params",
    "form_clusters", "generate_scenario", "index_clustering", "metrics",
    "partition_ues", "primary_update", "project_simplex", "run_algorithm1",
    "run_equal_pba", "run_oma", "scenario_from_json", "scenario_to_json",
    "secondary_update", "sequential_wmm", "sinr", "sinr_from_rho", "solve",
    "solve_batch", "theta_min_qos", "watts_to_dbm",
]
