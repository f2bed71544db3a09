"""Neural variable-structure consensus control of a vehicle platoon under denial-of-service attacks."""

from .engine import ScenarioConfig, SimTrace, config_from_dict, default_document, load_config, prepare, run_scenario
from .errors import (ConfigError, InfeasibleSchedule, NoStabilizingSolution, NumericalBlowup, UncertifiedSolution,
                     Violation)

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "InfeasibleSchedule", "NoStabilizingSolution", "NumericalBlowup", "ScenarioConfig", "SimTrace",
    "UncertifiedSolution", "Violation", "config_from_dict", "default_document", "load_config", "prepare",
    "run_scenario",
]
