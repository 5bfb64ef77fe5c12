"""Experiment harness: configuration, distribution generation, runners and result files."""

from .config import ConfigError, ExperimentConfig
from .generate import gen_distributions
from .records import ResultRecord, emit
from .runners import (four_corner_prior, run, run_bin_size_sweep, run_check_pe, run_check_pi, run_convergence,
                      run_perturbation, run_pi_demo)

__all__ = [
    "ConfigError", "ExperimentConfig", "ResultRecord", "emit", "four_corner_prior", "gen_distributions", "run",
    "run_bin_size_sweep", "run_check_pe", "run_check_pi", "run_convergence", "run_perturbation", "run_pi_demo",
]
