"""
Network file loading by format.
"""

from pathlib import Path
from typing import Optional, Union

from src.model import NetworkModel
from src.utils import logger

from .canonical import parse_canonical
from .errors import IngestError, UnsupportedFormatError
from .glm import parse_glm_subset

INPUT_FORMATS = ("canonical", "glm")


def detect_format(path: Union[str, Path]) -> str:
    """canonical for .json files, glm for .glm files."""
    suffix = Path(path).suffix.lower()
    if suffix == ".json":
        return "canonical"
    if suffix == ".glm":
        return "glm"
    raise UnsupportedFormatError(suffix or "(none)", INPUT_FORMATS)


def read_network(
    path: Union[str, Path],
    fmt: Optional[str] = None,
    strict: bool = True,
    base_power: float = 1e6,
) -> NetworkModel:
    """
    Read and parse a network file.

    Args:
        path: Input file
        fmt: "canonical" or "glm" (detected from the suffix when omitted)
        strict: Canonical strict mode (reject unknown keys)
        base_power: Per-phase VA base for GLM input

    Returns:
        NetworkModel: Parsed, validated network

    Raises:
        OSError: If the file cannot be read
        IngestError: On parse failures
    """
    fmt = fmt or detect_format(path)
    if fmt not in INPUT_FORMATS:
        raise UnsupportedFormatError(fmt, INPUT_FORMATS)
    text = Path(path).read_text(encoding="utf-8", errors="replace")
    logger.info(f"[INGEST] Reading {fmt} network from {path}")
    if fmt == "canonical":
        return parse_canonical(text, strict=strict)
    return parse_glm_subset(text, name=Path(path).stem, base_power=base_power)


__all__ = ["INPUT_FORMATS", "IngestError", "detect_format", "read_network"]
