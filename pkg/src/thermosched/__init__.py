"""Throughput-optimal transmit power under energy arrivals and a temperature ceiling."""

from .model import (ArrivalProfile, ConstantSegment, PowerPolicy, RecipExpSegment,
                    ThermalParams, temperature_trajectory)
from .multi import restricted_interval_solve, solve_multi
from .oracle import build_discrete, dykstra_project, oracle_solve
from .properties import structural_checks
from .scenario import Scenario, ScenarioError, parse_scenario
from .single import (e_critical, solve_energy_limited, solve_single, solve_unconstrained_energy,
                     t0_infinite_energy, tc_limit)

__all__ = [
    "ArrivalProfile", "ConstantSegment", "PowerPolicy", "RecipExpSegment", "ThermalParams",
    "temperature_trajectory", "restricted_interval_solve", "solve_multi", "build_discrete",
    "dykstra_project", "oracle_solve", "structural_checks", "Scenario", "ScenarioError",
    "parse_scenario", "e_critical", "solve_energy_limited", "solve_single",
    "solve_unconstrained_energy", "t0_infinite_energy", "tc_limit",
]
