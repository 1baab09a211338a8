"""Distributed event-triggered online primal-dual optimization with two-point
bandit feedback and time-varying constraints."""

from bandit_dopd.algorithm import (
    AgentState,
    NetworkState,
    RoundOutput,
    consensus_step,
    event_trigger,
    init_agents,
    primal_dual_step,
    run_horizon,
    run_round,
)
from bandit_dopd.exceptions import (
    ConfigError,
    ConnectivityError,
    ContractViolation,
    InvariantViolation,
    ParameterError,
)
from bandit_dopd.geometry import Ball, Box, inner_radius, outer_radius, project, sample_unit_sphere
from bandit_dopd.metrics import MetricsLog, network_ccv, network_regret, path_length
from bandit_dopd.schedules import ParamsAt, params_at

__version__ = "0.1.0"

__all__ = [
    "AgentState",
    "Ball",
    "Box",
    "ConfigError",
    "ConnectivityError",
    "ContractViolation",
    "InvariantViolation",
    "MetricsLog",
    "NetworkState",
    "ParameterError",
    "ParamsAt",
    "RoundOutput",
    "consensus_step",
    "event_trigger",
    "init_agents",
    "inner_radius",
    "network_ccv",
    "network_regret",
    "outer_radius",
    "params_at",
    "path_length",
    "primal_dual_step",
    "project",
    "run_horizon",
    "run_round",
    "sample_unit_sphere",
]
