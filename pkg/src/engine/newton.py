"""
Newton / primal-dual interior-point iteration for TPF, TPIA-L2 and TPIA-L1.
"""

import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse

from src.stamp import check_collapse, flat_start
from src.utils import logger

from .errors import EngineError, MaxIterationsError, NonInteriorIterateError
from .kkt import KktAssembler, KktAudit, KktSystem, NetworkLike
from .limiting import diode_limit, voltage_step_limit
from .linear_solver import inertia, newton_step, nonzero_support, reduced_size
from .settings import SolverSettings
from .variables import DualVars, InfeasibilityVars, SolveMode, StateVector, Step

ProgressCallback = Callable[[str, str, Dict], None]


@dataclass
class NewtonResult:
    """Outcome of iterate_to_convergence."""
    mode: SolveMode
    converged: bool
    iterations: int
    residual: float
    best_residual: float
    state: StateVector
    infeas: InfeasibilityVars
    duals: DualVars
    eps: float
    matrix_size: int
    audit: KktAudit
    wall_time: float
    subset_rows: np.ndarray
    history: List[Dict] = field(default_factory=list)


def _advance(
    state: StateVector,
    infeas: InfeasibilityVars,
    duals: DualVars,
    step: Step,
    alpha: float,
):
    n = state.n
    x = state.to_array() + alpha * step.state
    new_state = StateVector.from_array(x, n)
    new_infeas = infeas.copy()
    new_duals = duals.copy()
    if step.infeas.size:
        new_infeas.components = infeas.components + alpha * step.infeas
    if step.lam.size:
        new_duals.lam = duals.lam + alpha * step.lam
    if step.mu.size:
        new_duals.mu = duals.mu + alpha * step.mu
    return new_state, new_infeas, new_duals


def correct_l2_inertia(
    assembler: KktAssembler,
    system: KktSystem,
    settings: SolverSettings,
    last_shift: float,
) -> Tuple[KktSystem, float]:
    """
    Shift the voltage Hessian block until the L2 KKT matrix has one positive
    eigenvalue per primal variable (state and infeasibility currents).

    The first try is always unshifted. Otherwise the shift starts at a third of
    the previous one (or regularization_initial) and grows by 8x (100x when
    there was no previous shift) until the inertia is right or
    regularization_max is reached. The residual is left untouched, so a
    converged iterate is a KKT point of the unshifted problem.

    Returns:
        Tuple[KktSystem, float]: System to solve and the shift used (0 if none)
    """
    keep = nonzero_support(system.matrix)
    primal = int(np.count_nonzero(keep < system.index.slice("infeas").stop))

    def positive_count(matrix) -> Optional[int]:
        counts = inertia(sparse.csr_matrix(matrix)[keep][:, keep])
        return None if counts is None else counts[0]

    count = positive_count(system.matrix)
    if count is None or count >= primal:
        return system, 0.0

    shift_matrix = assembler.voltage_shift(SolveMode.L2)
    if last_shift > 0:
        shift, growth = max(settings.regularization_initial, last_shift / 3.0), 8.0
    else:
        shift, growth = settings.regularization_initial, 100.0
    while True:
        matrix = system.matrix + shift * shift_matrix
        if positive_count(matrix) >= primal:
            break
        if shift >= settings.regularization_max:
            logger.debug(f"[NEWTON] l2 inertia still wrong at shift {shift:.1e}")
            break
        shift = min(shift * growth, settings.regularization_max)
    return KktSystem(matrix, system.residual, system.index, system.mode), shift


def iterate_to_convergence(
    network: NetworkLike,
    mode: SolveMode,
    settings: Optional[SolverSettings] = None,
    subset_rows: Optional[Sequence[int]] = None,
    initial_state: Optional[StateVector] = None,
    progress_callback: Optional[ProgressCallback] = None,
) -> NewtonResult:
    """
    Run Newton's method on the selected formulation.

    Each iteration assembles the KKT system, solves for the direction and
    takes a single step length for every variable: the diode limit (L1), the
    voltage-step cap, then halving until loaded voltages clear the collapse
    floor. In L1 mode the complementarity target eps shrinks by
    eps_reduction (at most once per iteration) whenever the residual drops
    below 10 * eps, until eps_floor.

    L2 shifts the voltage Hessian block whenever the KKT matrix has the
    wrong inertia and stops early once the residual has not improved by 1%
    for stall_iterations iterations.

    Convergence requires the last step's infinity norm below tolerance, the
    residual below 10 * tolerance and, for L1, eps at its floor with every
    mu * z within 10 * eps_floor of it.

    Args:
        network: Network model or stamped matrices
        mode: "tpf", "l2" or "l1"
        settings: Solver settings (defaults if omitted)
        subset_rows: Node-phase rows carrying infeasibility sources
        initial_state: Warm-start voltages (flat start if omitted)
        progress_callback: Optional callback(stage, message, details) per iteration

    Returns:
        NewtonResult: Converged iterate with audit

    Raises:
        MaxIterationsError: Iteration budget exhausted or L2 stalled (result attached)
        VoltageCollapseError: Damping could not keep loaded voltages above the floor
        SingularSystemError: Newton matrix singular or ill-conditioned
    """
    started = time.perf_counter()
    mode = SolveMode(mode)
    settings = settings or SolverSettings()
    if mode != SolveMode.TPF and subset_rows is not None and len(subset_rows) == 0:
        raise EngineError("Infeasibility analysis needs a nonempty node subset", "empty_subset")
    assembler = KktAssembler(network, subset_rows, settings.collapse_floor)
    adm = assembler.admittance
    n = adm.n

    if mode != SolveMode.TPF and assembler.subset_size == 0:
        raise EngineError("Infeasibility analysis needs a nonempty node subset", "empty_subset")

    if initial_state is None:
        v_r, v_i = flat_start(adm)
        state = StateVector(v_r, v_i)
    else:
        if initial_state.n != n:
            raise EngineError(
                f"Initial state has {initial_state.n} node-phases, network has {n}", "state_mismatch"
            )
        state = initial_state.copy()
    state = assembler.balance_slack(state)
    infeas, duals = assembler.initial_point(
        mode, state, settings.l1_initial_current, settings.l1_initial_dual
    )

    eps = settings.eps_initial if mode == SolveMode.L1 else 0.0
    eps_floor = settings.eps_floor
    tolerance = settings.tolerance
    history: List[Dict] = []
    best_residual = float("inf")
    last_step = float("inf")
    shift = 0.0
    mark_residual = float("inf")
    mark_iteration = 0
    stalled = False
    matrix_size = 0
    converged = False
    iteration = 0

    logger.debug(f"[NEWTON] mode={mode.value} n={n} subset={assembler.subset_size}")

    while True:
        system = assembler.assemble(mode, state, infeas, duals, eps)
        residual = system.residual_norm

        if mode == SolveMode.L1 and eps > eps_floor and residual < 10.0 * eps:
            eps = max(eps * settings.eps_reduction, eps_floor)
            system = assembler.assemble(mode, state, infeas, duals, eps)
            residual = system.residual_norm
            logger.debug(f"[L1] eps -> {eps:.1e}")

        best_residual = min(best_residual, residual)
        matrix_size = reduced_size(system.matrix)

        done = last_step < tolerance and residual < 10.0 * tolerance
        if mode == SolveMode.L1:
            complementarity = float(np.max(np.abs(duals.mu * infeas.components - eps)))
            done = done and eps <= eps_floor and complementarity <= 10.0 * eps_floor
        if done:
            converged = True
            break
        if iteration >= settings.max_iterations:
            break
        if mode == SolveMode.L2:
            if residual < 0.99 * mark_residual:
                mark_residual, mark_iteration = residual, iteration
            elif iteration - mark_iteration >= settings.stall_iterations:
                stalled = True
                break
            system, shift = correct_l2_inertia(assembler, system, settings, shift)

        solve = newton_step(system, settings.condition_limit)
        step = Step.split(solve.direction, system.index)

        alpha = 1.0
        if mode == SolveMode.L1:
            alpha = diode_limit(duals, infeas, step, settings.sigma)
        alpha = min(alpha, voltage_step_limit(step, n, settings.voltage_step_cap))

        loaded = adm.loaded
        for halving in range(settings.max_damping_halvings + 1):
            trial_state, trial_infeas, trial_duals = _advance(state, infeas, duals, step, alpha)
            magnitude_sq = trial_state.v_r ** 2 + trial_state.v_i ** 2
            if np.all(magnitude_sq[loaded] >= settings.collapse_floor):
                break
            if halving == settings.max_damping_halvings:
                check_collapse(trial_state.v_r, trial_state.v_i, loaded, adm.labels, settings.collapse_floor)
            alpha *= 0.5

        if not trial_state.is_finite():
            raise EngineError(f"Non-finite iterate at iteration {iteration + 1}", "non_finite")
        if mode == SolveMode.L1 and not (trial_infeas.is_interior() and trial_duals.is_interior()):
            raise NonInteriorIterateError(f"Step left the interior at iteration {iteration + 1}")

        state, infeas, duals = trial_state, trial_infeas, trial_duals
        last_step = alpha * step.inf_norm()
        iteration += 1

        record = {
            "iteration": iteration,
            "residual": residual,
            "step": last_step,
            "alpha": alpha,
            "eps": eps,
        }
        if mode == SolveMode.L2:
            record["shift"] = shift
        history.append(record)
        logger.debug(
            f"[NEWTON] {mode.value} it={iteration} residual={residual:.3e} "
            f"step={last_step:.3e} alpha={alpha:.3f}"
            + (f" eps={eps:.1e}" if mode == SolveMode.L1 else "")
            + (f" shift={shift:.1e}" if shift else "")
        )
        if progress_callback:
            progress_callback("newton", f"{mode.value} iteration {iteration}", record)

    audit = assembler.audit(mode, state, infeas, duals, tolerance)
    result = NewtonResult(
        mode=mode,
        converged=converged,
        iterations=iteration,
        residual=residual,
        best_residual=best_residual,
        state=state,
        infeas=infeas,
        duals=duals,
        eps=eps,
        matrix_size=matrix_size,
        audit=audit,
        wall_time=time.perf_counter() - started,
        subset_rows=assembler.subset_rows.copy(),
        history=history,
    )

    if not converged:
        logger.info(
            f"[NEWTON] {mode.value} did not converge in {iteration} iterations "
            f"(best residual {best_residual:.3e})"
        )
        budget = (
            f"stalled for {settings.stall_iterations} iterations" if stalled
            else f"did not converge within {settings.max_iterations} iterations"
        )
        raise MaxIterationsError(
            f"{mode.value} {budget} (best residual {best_residual:.3e})",
            best_residual,
            result,
        )

    logger.debug(f"[NEWTON] {mode.value} converged in {iteration} iterations, residual {residual:.3e}")
    return result
