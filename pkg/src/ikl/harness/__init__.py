"""Scenario files, runs, the acceptance suite and the command line."""

from .runner import RunReport, output_root, run
from .scenario import Scenario, parse_scenario, scenario_from_dict

__all__ = ["RunReport", "Scenario", "output_root", "parse_scenario", "run", "scenario_from_dict"]
