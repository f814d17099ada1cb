"""
TPIA: three-phase infeasibility analysis for distribution feeders.

The project-root .env is loaded here, before any submodule reads the
environment, so TPIA_LOG_LEVEL and TPIA_SETTINGS_FILE set there take effect
for the logger, the CLI and the HTTP service alike.
"""

from pathlib import Path

try:
    from dotenv import load_dotenv

    _env_file = Path(__file__).resolve().parent.parent / ".env"
    if _env_file.exists():
        load_dotenv(dotenv_path=_env_file, override=True)
    else:
        load_dotenv(override=False)
except ImportError:
    # Without python-dotenv only the process environment is used
    pass

__version__ = "0.1.0"
