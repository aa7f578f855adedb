"""Configuration, file formats, plots and the command-line entry point."""

from .config import ExperimentConfig, load_config, paper_profile, parse_config
from .formats import ReportBundle

__all__ = ["ExperimentConfig", "ReportBundle", "load_config", "paper_profile", "parse_config"]
