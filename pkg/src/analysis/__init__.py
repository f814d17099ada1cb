"""
Analysis module for the TPIA solver.

High-level drivers: power flow, infeasibility analysis with node subsets and
warm starting, threshold reporting, missing power and remediation.
"""

from .subset import NodeSubset, SubsetError, resolve_subset
from .report import VOLTAGE_BAND, MissingPower, NodePhaseResult, SolutionReport
from .warm_start import WarmStart, WarmStartMismatchError, warm_start_chain
from .drivers import (
    OBJECTIVES,
    InvalidNetworkError,
    build_report,
    missing_power,
    missing_power_by_node,
    require_valid,
    solve_power_flow,
    solve_tpia,
)
from .remediation import RemediationResult, battery_loads, remediate_and_validate

__all__ = [
    "NodeSubset",
    "SubsetError",
    "resolve_subset",
    "VOLTAGE_BAND",
    "MissingPower",
    "NodePhaseResult",
    "SolutionReport",
    "WarmStart",
    "WarmStartMismatchError",
    "warm_start_chain",
    "OBJECTIVES",
    "InvalidNetworkError",
    "build_report",
    "missing_power",
    "missing_power_by_node",
    "require_valid",
    "solve_power_flow",
    "solve_tpia",
    "RemediationResult",
    "battery_loads",
    "remediate_and_validate",
]
