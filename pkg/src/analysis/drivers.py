"""
High-level solve drivers: power flow and infeasibility analysis.
"""

import time
from typing import Dict, List, Optional

import numpy as np

from src.engine import (
    EngineError,
    MaxIterationsError,
    NewtonResult,
    SingularSystemError,
    SolveMode,
    SolverSettings,
    StateVector,
    iterate_to_convergence,
)
from src.engine.newton import ProgressCallback
from src.ingest.canonical import network_fingerprint
from src.model import NetworkModel, validate
from src.stamp import AdmittanceMatrices, VoltageCollapseError, stamp_linear
from src.utils import logger

from .report import MissingPower, NodePhaseResult, SolutionReport
from .subset import SubsetLike, resolve_subset
from .warm_start import WarmStart

OBJECTIVES = {
    "least_squares": SolveMode.L2,
    "l2": SolveMode.L2,
    "l1": SolveMode.L1,
}


class InvalidNetworkError(Exception):
    """Exception raised when a network fails validation before a solve."""

    def __init__(self, message: str, violations: List):
        super().__init__(message)
        self.message = message
        self.violations = violations
        self.code = "invalid_network"


def require_valid(network: NetworkModel) -> None:
    """
    Raises:
        InvalidNetworkError: If validate() reports any violation
    """
    violations = validate(network)
    if violations:
        preview = "; ".join(str(v) for v in violations[:3])
        more = f" (+{len(violations) - 3} more)" if len(violations) > 3 else ""
        logger.info(f"[VALIDATE] {network.name or 'network'}: {len(violations)} violation(s)")
        raise InvalidNetworkError(f"Network is invalid: {preview}{more}", violations)


def _edges(network: NetworkModel) -> List[Dict]:
    return [
        {"id": b.id, "from": b.from_bus, "to": b.to_bus, "kind": b.kind.value, "status": b.status.value}
        for b in network.branches
    ]


def build_report(
    network: NetworkModel,
    admittance: AdmittanceMatrices,
    result: Optional[NewtonResult],
    mode: SolveMode,
    settings: SolverSettings,
    wall_time: float,
    error: Optional[str] = None,
) -> SolutionReport:
    """Convert a Newton result (or its absence) into a physical-unit report."""
    node_phases: List[NodePhaseResult] = []
    if result is not None:
        n = admittance.n
        if_r = np.zeros(n)
        if_i = np.zeros(n)
        lam_r = np.zeros(n)
        lam_i = np.zeros(n)
        in_subset = np.zeros(n, dtype=bool)
        if mode != SolveMode.TPF:
            rows = result.subset_rows
            if_r[rows] = result.infeas.if_r
            if_i[rows] = result.infeas.if_i
            lam_r = result.duals.lam_r
            lam_i = result.duals.lam_i
            in_subset[rows] = True

        for (bus_id, phase), k in sorted(admittance.index_map.items(), key=lambda item: item[1]):
            v_base = admittance.voltage_base[k]
            i_base = admittance.current_base[k]
            node_phases.append(NodePhaseResult(
                bus=bus_id,
                phase=phase,
                v_real=float(result.state.v_r[k] * v_base),
                v_imag=float(result.state.v_i[k] * v_base),
                if_real=float(if_r[k] * i_base),
                if_imag=float(if_i[k] * i_base),
                voltage_base=float(v_base),
                current_base=float(i_base),
                lambda_real=float(lam_r[k]),
                lambda_imag=float(lam_i[k]),
                in_subset=bool(in_subset[k]),
            ))

    return SolutionReport(
        mode=mode.value,
        converged=bool(result.converged) if result is not None else False,
        iterations=result.iterations if result is not None else 0,
        wall_time=wall_time,
        matrix_size=result.matrix_size if result is not None else 0,
        residual=float(result.residual) if result is not None else float("inf"),
        threshold=settings.if_threshold,
        node_phases=node_phases,
        edges=_edges(network),
        audit=result.audit if result is not None else None,
        network_name=network.name,
        fingerprint=network_fingerprint(network),
        base_power=network.base_power,
        error=error,
    )


def _iterate(
    admittance: AdmittanceMatrices,
    mode: SolveMode,
    settings: SolverSettings,
    subset_rows: Optional[List[int]],
    initial_state: Optional[StateVector],
    progress_callback: Optional[ProgressCallback],
) -> NewtonResult:
    """
    Newton solve of one formulation.

    An L2 solve that stalls, hits a singular matrix or collapses a voltage is
    restarted once from the converged L1 point of the same problem; the
    reported iteration count covers all three runs.
    """
    try:
        return iterate_to_convergence(admittance, mode, settings, subset_rows, initial_state, progress_callback)
    except (MaxIterationsError, SingularSystemError, VoltageCollapseError) as e:
        if mode != SolveMode.L2:
            raise
        failed = e

    spent = failed.result.iterations if isinstance(failed, MaxIterationsError) and failed.result else 0
    logger.info(f"[TPIA] l2 failed from the initial point ({failed}); restarting from the l1 optimum")
    try:
        seed = iterate_to_convergence(admittance, SolveMode.L1, settings, subset_rows, initial_state)
    except (EngineError, VoltageCollapseError) as e:
        logger.info(f"[TPIA] l1 seed failed: {e}")
        raise failed

    result = iterate_to_convergence(admittance, SolveMode.L2, settings, subset_rows, seed.state, progress_callback)
    result.iterations += spent + seed.iterations
    return result


def _run(
    network: NetworkModel,
    admittance: AdmittanceMatrices,
    mode: SolveMode,
    settings: SolverSettings,
    subset_rows: Optional[List[int]],
    warm_start: Optional[WarmStart],
    progress_callback: Optional[ProgressCallback],
    raise_on_failure: bool,
) -> SolutionReport:
    started = time.perf_counter()
    initial_state = warm_start.state if warm_start is not None else None

    try:
        result = _iterate(admittance, mode, settings, subset_rows, initial_state, progress_callback)
    except MaxIterationsError as e:
        if raise_on_failure:
            raise
        return build_report(network, admittance, e.result, mode, settings, time.perf_counter() - started, e.message)
    except (EngineError, VoltageCollapseError) as e:
        if raise_on_failure:
            raise
        logger.info(f"[TPIA] {mode.value} failed: {e}")
        return build_report(network, admittance, None, mode, settings, time.perf_counter() - started, str(e))

    return build_report(network, admittance, result, mode, settings, time.perf_counter() - started)


def solve_power_flow(
    network: NetworkModel,
    settings: Optional[SolverSettings] = None,
    warm_start: Optional[WarmStart] = None,
    progress_callback: Optional[ProgressCallback] = None,
) -> SolutionReport:
    """
    Three-phase power flow.

    Divergence is a report state: converged=False with the error message
    and, when the iteration budget ran out, the last iterate and its audit.

    Args:
        network: Network to solve
        settings: Solver settings
        warm_start: Optional seed state (fingerprint-checked)
        progress_callback: Optional per-iteration callback

    Returns:
        SolutionReport: mode "tpf"

    Raises:
        InvalidNetworkError: If the network fails validation
        WarmStartMismatchError: If warm_start belongs to another network
    """
    settings = settings or SolverSettings()
    require_valid(network)
    if warm_start is not None:
        warm_start.check(network)
    report = _run(
        network, stamp_linear(network), SolveMode.TPF, settings, None, warm_start, progress_callback,
        raise_on_failure=False,
    )
    logger.info(
        f"[TPIA] tpf {'converged' if report.converged else 'failed'} "
        f"after {report.iterations} iterations ({report.wall_time:.3f}s)"
    )
    return report


def solve_tpia(
    network: NetworkModel,
    objective: str = "least_squares",
    subset: SubsetLike = None,
    settings: Optional[SolverSettings] = None,
    warm_start: Optional[WarmStart] = None,
    progress_callback: Optional[ProgressCallback] = None,
) -> SolutionReport:
    """
    Three-phase infeasibility analysis.

    A least-squares solve that fails from the initial point is restarted
    from the L1 optimum before giving up.

    Args:
        network: Network to analyse
        objective: "least_squares" (or "l2") or "l1"
        subset: Node-phases carrying infeasibility sources (default: all
            outside the slack bus)
        settings: Solver settings
        warm_start: Optional seed state (fingerprint-checked)
        progress_callback: Optional per-iteration callback

    Returns:
        SolutionReport: Converged report, mode "l2" or "l1"

    Raises:
        InvalidNetworkError: If the network fails validation
        SubsetError: If the subset is invalid
        WarmStartMismatchError: If warm_start belongs to another network
        MaxIterationsError: If the iteration budget is exhausted
    """
    if objective not in OBJECTIVES:
        raise ValueError(f"Unknown objective '{objective}' (expected one of {sorted(OBJECTIVES)})")
    mode = OBJECTIVES[objective]
    settings = settings or SolverSettings()
    require_valid(network)
    node_subset = resolve_subset(network, subset)
    if warm_start is not None:
        warm_start.check(network)

    admittance = stamp_linear(network)
    rows = node_subset.rows(admittance)
    report = _run(network, admittance, mode, settings, rows, warm_start, progress_callback, raise_on_failure=True)
    logger.info(
        f"[TPIA] {mode.value} converged after {report.iterations} iterations "
        f"({report.wall_time:.3f}s): {report.nonzero_count} nonzero i_f at {report.nonzero_node_count} nodes"
    )
    return report


def missing_power(report: SolutionReport) -> List[MissingPower]:
    """Missing power S = V conj(i_f) per flagged node-phase (W, var)."""
    return report.missing_power()


def missing_power_by_node(report: SolutionReport) -> Dict[str, complex]:
    """Missing power summed over each flagged node's phases (VA)."""
    totals: Dict[str, complex] = {}
    for entry in report.missing_power():
        totals[entry.bus] = totals.get(entry.bus, 0j) + complex(entry.p, entry.q)
    return totals
