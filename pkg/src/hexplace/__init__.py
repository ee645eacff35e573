"""Seeded agent-based epidemic simulator over city/town/village honeycombs."""

from .engine import init_state, run, step
from .scenario import ScenarioConfig, ScenarioError, generate_hex_scenario, parse_scenario, write_scenario

__all__ = [
    "ScenarioConfig",
    "ScenarioError",
    "generate_hex_scenario",
    "init_state",
    "parse_scenario",
    "run",
    "step",
    "write_scenario",
]
