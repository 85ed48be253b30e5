"""Macroscopic crowd simulation by push-forward of piecewise-constant densities."""
from .engine import SimulationState, advance, initialize, run
from .scenario import Scenario, dumps, loads, parse_scenario

__all__ = ["Scenario", "SimulationState", "advance", "dumps", "initialize", "loads", "parse_scenario", "run"]
__version__ = "0.1.0"
