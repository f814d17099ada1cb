"""
Logging for the TPIA solver.

Messages carry a stage tag ([NEWTON], [TPIA], [INGEST], [CLI], [API], ...)
and go to stderr so CLI reports on stdout stay machine-readable.
"""

import logging
import os
import sys

LOG_LEVEL_ENV = "TPIA_LOG_LEVEL"


def setup_logger(name: str = "tpia") -> logging.Logger:
    """
    Create the package logger once.

    The level comes from TPIA_LOG_LEVEL (default INFO); DEBUG adds one line
    per Newton iteration.

    Args:
        name: Logger name (default: "tpia")

    Returns:
        logging.Logger: Configured logger instance
    """
    logger = logging.getLogger(name)

    if not logger.handlers:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(
            '%(asctime)s [%(levelname)s] %(message)s',
            datefmt='%H:%M:%S'
        ))
        logger.addHandler(handler)
        logger.propagate = False
        set_log_level(os.getenv(LOG_LEVEL_ENV, "INFO"), logger)

    return logger


def set_log_level(level_name: str, target: logging.Logger = None) -> int:
    """
    Change the level of the package logger; unknown names fall back to INFO.

    Returns:
        int: The numeric level applied
    """
    target = target or logging.getLogger("tpia")
    level = getattr(logging, str(level_name).upper(), None)
    if not isinstance(level, int):
        level = logging.INFO
    target.setLevel(level)
    for handler in target.handlers:
        handler.setLevel(level)
    return level


def truncate_text(text: str, max_length: int = 30) -> str:
    """
    Single-line preview of an input fragment for parser diagnostics.

    Args:
        text: Text to preview
        max_length: Maximum length (default: 30)

    Returns:
        str: Whitespace-collapsed text, with an ellipsis when cut
    """
    if not text:
        return ""
    clean_text = " ".join(text.split())
    if len(clean_text) <= max_length:
        return clean_text
    return clean_text[:max_length] + "..."


logger = setup_logger()
