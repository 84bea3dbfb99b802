"""Config-driven verification suites, reports and the command line."""

from .config import ConfigError, ExperimentSpec, load_config, parse_config
from .runner import run_experiment, sweep_points
from .suites import CATALOG

__all__ = ['CATALOG', 'ConfigError', 'ExperimentSpec', 'load_config',
           'parse_config', 'run_experiment', 'sweep_points']
