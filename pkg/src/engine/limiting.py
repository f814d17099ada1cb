"""
Step-length limiting: diode limiting for the interior-point variables and a
cap on voltage change per iteration.
"""

import numpy as np

from .variables import DualVars, InfeasibilityVars, Step


def fraction_to_boundary(values: np.ndarray, steps: np.ndarray, sigma: float) -> float:
    """
    Largest alpha in (0, 1] keeping values + alpha * steps >= (1 - sigma) * values.

    Args:
        values: Strictly positive current values
        steps: Proposed steps
        sigma: Fraction-to-boundary factor in (0, 1)

    Returns:
        float: min(1, sigma * min over negative steps of -value / step)

    Example:
        >>> fraction_to_boundary(np.array([1.0]), np.array([-2.0]), 0.95)
        0.475
    """
    values = np.asarray(values, dtype=float)
    steps = np.asarray(steps, dtype=float)
    shrinking = steps < 0
    if not np.any(shrinking):
        return 1.0
    return float(min(1.0, sigma * np.min(-values[shrinking] / steps[shrinking])))


def diode_limit(duals: DualVars, infeas: InfeasibilityVars, step: Step, sigma: float) -> float:
    """Uniform step length keeping every split source and inequality dual positive."""
    values = np.concatenate([infeas.components, duals.mu])
    steps = np.concatenate([step.infeas, step.mu])
    return fraction_to_boundary(values, steps, sigma)


def voltage_step_limit(step: Step, n: int, cap: float) -> float:
    """Step length capping the largest per node-phase |dV| at cap (per-unit)."""
    largest = float(np.max(step.voltage_change(n), initial=0.0))
    if largest <= cap:
        return 1.0
    return cap / largest
