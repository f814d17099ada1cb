"""
Warm starting from less-stressed operating points.

A WarmStart records the voltages of a converged TPF solve together with the
fingerprint of the network it belongs to, so a state saved for one case is
never applied to another.
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Union

from src.engine import EngineError, SolveMode, SolverSettings, StateVector, iterate_to_convergence
from src.ingest.canonical import network_fingerprint
from src.model import NetworkModel
from src.stamp import VoltageCollapseError, flat_start, stamp_linear
from src.utils import atomic_write_text, logger


class WarmStartMismatchError(Exception):
    """Exception raised when a warm-start state belongs to a different network."""

    def __init__(self, message: str, expected: str, actual: str):
        super().__init__(message)
        self.message = message
        self.expected = expected
        self.actual = actual
        self.code = "warm_start_mismatch"


@dataclass
class WarmStart:
    """Per-unit state for seeding a solve, tied to a network fingerprint."""
    state: StateVector
    fingerprint: str
    load_scale: float = 1.0
    converged: bool = True

    def check(self, network: NetworkModel) -> None:
        """
        Raises:
            WarmStartMismatchError: If the network fingerprint differs
        """
        actual = network_fingerprint(network)
        if actual != self.fingerprint:
            raise WarmStartMismatchError(
                f"Warm-start state was computed for network {self.fingerprint[:12]}, "
                f"not {actual[:12]}",
                expected=self.fingerprint,
                actual=actual,
            )

    def to_dict(self) -> dict:
        return {
            "fingerprint": self.fingerprint,
            "load_scale": self.load_scale,
            "converged": self.converged,
            "v_r": self.state.v_r.tolist(),
            "v_i": self.state.v_i.tolist(),
            "is_r": self.state.is_r.tolist(),
            "is_i": self.state.is_i.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "WarmStart":
        state = StateVector(data["v_r"], data["v_i"], data["is_r"], data["is_i"])
        return cls(state, data["fingerprint"], float(data["load_scale"]), bool(data["converged"]))

    def save(self, path: Union[str, Path]) -> None:
        atomic_write_text(path, json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "WarmStart":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def warm_start_chain(
    network: NetworkModel,
    load_scale_steps: Iterable[float],
    settings: Optional[SolverSettings] = None,
) -> WarmStart:
    """
    Solve TPF at increasing load scales, each seeded by the previous solution.

    Steps are sorted ascending. The state of the last converged step is
    returned; when no step converges the flat start is returned with a
    warning and converged=False.

    Args:
        network: Validated network
        load_scale_steps: Load multipliers in (0, 1]
        settings: Solver settings

    Returns:
        WarmStart: Seed state for the full-load solve

    Raises:
        ValueError: If a step lies outside (0, 1]
    """
    steps: List[float] = sorted(float(s) for s in load_scale_steps)
    for s in steps:
        if not 0 < s <= 1:
            raise ValueError(f"Load scale step {s} is outside (0, 1]")

    settings = settings or SolverSettings()
    fingerprint = network_fingerprint(network)
    admittance = stamp_linear(network)
    v_r, v_i = flat_start(admittance)
    best = WarmStart(StateVector(v_r, v_i), fingerprint, 0.0, converged=False)

    for scale in steps:
        try:
            result = iterate_to_convergence(
                network.scaled(scale), SolveMode.TPF, settings, initial_state=best.state
            )
        except (EngineError, VoltageCollapseError) as e:
            logger.info(f"[WARM] load scale {scale:g} did not converge ({e})")
            continue
        best = WarmStart(result.state, fingerprint, scale, converged=True)
        logger.info(f"[WARM] load scale {scale:g} converged in {result.iterations} iterations")

    if not best.converged:
        logger.warning("[WARM] No load scale step converged; falling back to flat start")
    return best
