"""Stabilizer simulation of hybrid circuits with measurements and size-dependent reset noise."""

__version__ = "0.1.0"

from .circuit import CircuitConfig, ConfigError, run_paired_trajectory, run_trajectory
from .observables import entropy, info_retention, log_negativity, mutual_information
from .tableau import StabilizerState

__all__ = [
    "CircuitConfig",
    "ConfigError",
    "StabilizerState",
    "entropy",
    "info_retention",
    "log_negativity",
    "mutual_information",
    "run_paired_trajectory",
    "run_trajectory",
]
