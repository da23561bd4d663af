"""Scenario configuration, runners, manifests and the command-line interface."""

from squeezetrack.harness.config import ScenarioConfig, load_config, validate_config
from squeezetrack.harness.manifest import run_to_directory, verify

__all__ = ["ScenarioConfig", "load_config", "run_to_directory", "validate_config", "verify"]
