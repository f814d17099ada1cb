"""
Network model module for the TPIA solver.

Provides the immutable three-phase feeder description, its validation,
per-unit conversion and synthetic desk-scale feeders.
"""

from .network import (
    ALL_PHASES,
    SWITCH_ADMITTANCE,
    Branch,
    BranchKind,
    BranchStatus,
    Bus,
    BusKind,
    Load,
    NetworkModel,
    Phase,
    ShuntCap,
    impedance_to_admittance,
)
from .validation import Violation, connectivity_check, is_valid, validate
from .per_unit import BusBase, PerUnitNetwork, bus_bases, from_per_unit, to_per_unit
from .feeders import FEEDER_NAMES, feeder_by_name, four_bus_feeder, overloaded_two_bus, radial_feeder, two_bus_analog

__all__ = [
    "ALL_PHASES",
    "SWITCH_ADMITTANCE",
    "Branch",
    "BranchKind",
    "BranchStatus",
    "Bus",
    "BusKind",
    "Load",
    "NetworkModel",
    "Phase",
    "ShuntCap",
    "impedance_to_admittance",
    "Violation",
    "connectivity_check",
    "is_valid",
    "validate",
    "BusBase",
    "PerUnitNetwork",
    "bus_bases",
    "from_per_unit",
    "to_per_unit",
    "FEEDER_NAMES",
    "feeder_by_name",
    "four_bus_feeder",
    "overloaded_two_bus",
    "radial_feeder",
    "two_bus_analog",
]
