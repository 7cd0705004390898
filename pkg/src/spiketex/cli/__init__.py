"""Command-line surface: `spiketex <command>`"""

from .main import build_parser, run_command
from .records import ExperimentConfig, RunRecord, load_config

__all__ = ["ExperimentConfig", "RunRecord", "build_parser", "load_config", "run_command"]
