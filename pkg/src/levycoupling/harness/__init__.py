"""Configuration, experiment orchestration and reporting."""
from .config import EXPERIMENTS, ConfigError, ExperimentConfig, load_config
from .experiments import run_experiment
from .ratefit import RateFit, fit_rate
from .report import Report, Verdict

__all__ = [
    "EXPERIMENTS",
    "ConfigError",
    "ExperimentConfig",
    "RateFit",
    "Report",
    "Verdict",
    "fit_rate",
    "load_config",
    "run_experiment",
]
