"""Discrete-event network simulator: scenarios, event loop, reports."""

from .report import SimulationReport
from .scenario import (
    ChainSpec,
    FaultSpec,
    LinkSpec,
    NodeSpec,
    Scenario,
    ScenarioError,
    Workload,
    compare_paths,
    link_cost,
    load_scenario,
    load_scenario_text,
    parse_scenario,
    path_latency,
    transfer_time,
)
from .simulator import SimEvent, Simulator, run

__all__ = [
    "ChainSpec",
    "FaultSpec",
    "LinkSpec",
    "NodeSpec",
    "Scenario",
    "ScenarioError",
    "SimEvent",
    "SimulationReport",
    "Simulator",
    "Workload",
    "compare_paths",
    "link_cost",
    "load_scenario",
    "load_scenario_text",
    "parse_scenario",
    "path_latency",
    "run",
    "transfer_time",
]
