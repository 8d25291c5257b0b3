"""Configuration, scenarios, file formats, diagram sweeps, invariant checks and the CLI."""

from .checks import check_invariants
from .config import ConfigError, ScenarioConfig, config_docs_table, default_config, load_config, parse_config
from .diagram import fundamental_diagram
from .io import read_f_snapshot, read_macro_csv, write_f_snapshot, write_macro_csv
from .scenarios import build_scenario, initial_field, tollgate_action

__all__ = [
    "ConfigError", "ScenarioConfig", "build_scenario", "check_invariants", "config_docs_table", "default_config",
    "fundamental_diagram", "initial_field", "load_config", "parse_config", "read_f_snapshot", "read_macro_csv",
    "tollgate_action", "write_f_snapshot", "write_macro_csv",
]
