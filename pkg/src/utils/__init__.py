"""
Utilities module for the TPIA solver.

Provides logging, environment configuration and file helpers.
"""

from .logger import logger, set_log_level, setup_logger, truncate_text
from .config import get_service_config, get_settings_file_path
from .files import atomic_write_text

__all__ = [
    "logger",
    "set_log_level",
    "setup_logger",
    "truncate_text",
    "get_service_config",
    "get_settings_file_path",
    "atomic_write_text",
]
