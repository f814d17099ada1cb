"""
Stamping module for the TPIA solver.

Provides the linear admittance stamp and the nonlinear constant-PQ load
currents with their exact derivatives.
"""

from .linear import AdmittanceMatrices, PHASE_ANGLES_DEG, flat_start, node_label, stamp_linear
from .loads import (
    COLLAPSE_FLOOR,
    LoadCurrent,
    VoltageCollapseError,
    check_collapse,
    load_current,
    load_hessian,
    load_jacobian_check,
)

__all__ = [
    "AdmittanceMatrices",
    "PHASE_ANGLES_DEG",
    "flat_start",
    "node_label",
    "stamp_linear",
    "COLLAPSE_FLOOR",
    "LoadCurrent",
    "VoltageCollapseError",
    "check_collapse",
    "load_current",
    "load_hessian",
    "load_jacobian_check",
]
