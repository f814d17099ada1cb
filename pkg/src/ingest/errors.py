"""
Ingest exceptions.

Every error carries a human message and a machine-readable code; parser
errors also carry the position or element they refer to.
"""

from typing import List, Optional


class IngestError(Exception):
    """Base class for parse and serialization failures."""

    def __init__(self, message: str, code: str = "ingest_error"):
        """
        Initialize ingest error.

        Args:
            message: Human-readable error message
            code: Machine-readable error code
        """
        super().__init__(message)
        self.message = message
        self.code = code


class CanonicalSyntaxError(IngestError):
    """Malformed canonical document (position is 1-based)."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        super().__init__(f"{message} (line {line}, column {column})", "syntax")
        self.line = line
        self.column = column


class CanonicalSemanticError(IngestError):
    """Well-formed canonical document describing an invalid network."""

    def __init__(self, message: str, element: str = "", code: str = "semantic"):
        super().__init__(message, code)
        self.element = element


class SingularImpedanceError(CanonicalSemanticError):
    """Branch impedance phase block cannot be inverted."""

    def __init__(self, branch_id: str):
        super().__init__(
            f"Branch '{branch_id}' has a singular impedance matrix",
            element=branch_id,
            code="singular_impedance",
        )


class GlmParseError(IngestError):
    """
    GLM subset parse failure.

    code is one of: unsupported_construct, nested_object, dangling_reference,
    duplicate_name, syntax, semantic.
    """

    def __init__(self, message: str, code: str, constructs: Optional[List[str]] = None, line: int = 0):
        super().__init__(message, code)
        self.constructs = list(constructs or [])
        self.line = line


class UnsupportedFormatError(IngestError):
    """Unknown input or output format tag."""

    def __init__(self, fmt: str, supported):
        super().__init__(
            f"Unsupported format '{fmt}' (expected one of: {', '.join(supported)})",
            "unsupported_format",
        )
        self.format = fmt
