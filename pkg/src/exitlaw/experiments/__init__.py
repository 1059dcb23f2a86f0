"""Scenario configs, pipelines, output writers and the acceptance suite."""

from .config import ConfigError, ScenarioConfig, load_config
from .output import emit_outputs
from .presets import PRESETS, preset
from .scenarios import Report, run_exact, run_qsd_scenario, run_ray_scenario, run_scenario

__all__ = [
    "ConfigError", "ScenarioConfig", "load_config", "emit_outputs", "PRESETS", "preset",
    "Report", "run_exact", "run_qsd_scenario", "run_ray_scenario", "run_scenario",
]
