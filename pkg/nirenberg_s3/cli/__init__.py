"""
Command-line layer: run configuration and the cmd_* commands.
"""

from .run_config import RunConfig, load_run_config, parse_run_config
from .commands import COMMANDS, run_command, exit_code_for

__all__ = [
    "RunConfig",
    "load_run_config",
    "parse_run_config",
    "COMMANDS",
    "run_command",
    "exit_code_for",
]
