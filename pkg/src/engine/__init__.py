"""
Engine module for the TPIA solver.

Assembles and solves the sparse Newton / KKT systems of the three
formulations (TPF, TPIA-L2, TPIA-L1) with diode limiting and the
complementary-slackness perturbation schedule.
"""

from .errors import (
    EngineError,
    MaxIterationsError,
    NonInteriorIterateError,
    SettingsError,
    SingularSystemError,
)
from .settings import SolverSettings
from .variables import DualVars, InfeasibilityVars, SolveMode, StateVector, Step, VariableIndex, build_index
from .kkt import KktAssembler, KktAudit, KktSystem, assemble_kkt_l1, assemble_kkt_l2, assemble_tpf
from .linear_solver import LinearSolveResult, inertia, newton_step, nonzero_support, reduced_size, solve_sparse
from .limiting import diode_limit, fraction_to_boundary, voltage_step_limit
from .newton import NewtonResult, correct_l2_inertia, iterate_to_convergence

__all__ = [
    "EngineError",
    "MaxIterationsError",
    "NonInteriorIterateError",
    "SettingsError",
    "SingularSystemError",
    "SolverSettings",
    "DualVars",
    "InfeasibilityVars",
    "SolveMode",
    "StateVector",
    "Step",
    "VariableIndex",
    "build_index",
    "KktAssembler",
    "KktAudit",
    "KktSystem",
    "assemble_kkt_l1",
    "assemble_kkt_l2",
    "assemble_tpf",
    "LinearSolveResult",
    "inertia",
    "newton_step",
    "nonzero_support",
    "reduced_size",
    "solve_sparse",
    "diode_limit",
    "fraction_to_boundary",
    "voltage_step_limit",
    "NewtonResult",
    "correct_l2_inertia",
    "iterate_to_convergence",
]
