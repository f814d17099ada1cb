"""
Environment-driven configuration for the TPIA solver.

Values come from the process environment (populated from .env on package
import). Nothing here reads files except the settings-file lookup.
"""

import os
from pathlib import Path
from typing import Optional

SETTINGS_FILE_ENV = "TPIA_SETTINGS_FILE"


def get_settings_file_path() -> Optional[Path]:
    """
    Get the default solver settings file from the environment.

    Returns:
        Optional[Path]: Path named by TPIA_SETTINGS_FILE, or None if unset
    """
    value = os.getenv(SETTINGS_FILE_ENV)
    if not value:
        return None
    return Path(value).expanduser()


def get_service_config() -> dict:
    """
    Get host/port/reload settings for the HTTP service.

    Returns:
        dict: Service configuration with 'host', 'port' and 'reload' keys
    """
    return {
        "host": os.getenv("HOST", "0.0.0.0"),
        "port": int(os.getenv("PORT", 8000)),
        "reload": os.getenv("RELOAD", "false").lower() == "true",
    }
