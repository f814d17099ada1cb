"""
Ingest module for the TPIA solver.

Parses network files (canonical format, GLM subset) into NetworkModel and
serializes solver outputs.
"""

from .errors import (
    CanonicalSemanticError,
    CanonicalSyntaxError,
    GlmParseError,
    IngestError,
    SingularImpedanceError,
    UnsupportedFormatError,
)
from .canonical import CANONICAL_VERSION, network_fingerprint, parse_canonical, write_canonical
from .glm import parse_glm_subset, parse_value
from .reader import INPUT_FORMATS, detect_format, read_network
from .solution_io import (
    CSV_COLUMNS,
    SOLUTION_FORMATS,
    format_from_path,
    read_solution,
    write_solution,
    write_solution_file,
)

__all__ = [
    "CanonicalSemanticError",
    "CanonicalSyntaxError",
    "GlmParseError",
    "IngestError",
    "SingularImpedanceError",
    "UnsupportedFormatError",
    "CANONICAL_VERSION",
    "network_fingerprint",
    "parse_canonical",
    "write_canonical",
    "parse_glm_subset",
    "parse_value",
    "INPUT_FORMATS",
    "detect_format",
    "read_network",
    "CSV_COLUMNS",
    "SOLUTION_FORMATS",
    "format_from_path",
    "read_solution",
    "write_solution",
    "write_solution_file",
]
