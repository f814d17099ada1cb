"""
Command-line interface for the TPIA solver.
"""

from .main import (
    EXIT_FAILURE,
    EXIT_FEASIBLE,
    EXIT_INFEASIBLE,
    RunConfig,
    batch,
    build_parser,
    generate,
    main,
    remediate,
    run,
    solve_case,
    summary_table,
)

__all__ = [
    "EXIT_FAILURE",
    "EXIT_FEASIBLE",
    "EXIT_INFEASIBLE",
    "RunConfig",
    "batch",
    "build_parser",
    "generate",
    "main",
    "remediate",
    "run",
    "solve_case",
    "summary_table",
]
