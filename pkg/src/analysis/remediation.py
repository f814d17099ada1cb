"""
Battery remediation and feasibility validation.

Missing power computed by an infeasibility solve is injected back at each
flagged node-phase as a negative constant-PQ load; the modified network is
then re-solved with TPF and both TPIA objectives.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional

from src.engine import EngineError, SolverSettings
from src.model import Load, NetworkModel, Phase
from src.stamp import VoltageCollapseError
from src.utils import logger

from .drivers import solve_power_flow, solve_tpia
from .report import MissingPower, SolutionReport
from .subset import SubsetLike


@dataclass
class RemediationResult:
    """
    Outcome of remediate_and_validate.

    success is True iff the remediated TPF converges and both TPIA solves
    report zero nonzero infeasibility currents.
    """
    success: bool
    injections: List[MissingPower]
    network: NetworkModel
    power_flow: SolutionReport
    least_squares: Optional[SolutionReport] = None
    l1: Optional[SolutionReport] = None
    failures: List[str] = field(default_factory=list)

    @property
    def report(self) -> SolutionReport:
        """The remediated power-flow report."""
        return self.power_flow

    def to_dict(self) -> Dict:
        return {
            "success": self.success,
            "injections": [m.to_dict() for m in self.injections],
            "failures": list(self.failures),
            "power_flow": self.power_flow.summary_row(),
            "least_squares": self.least_squares.summary_row() if self.least_squares else None,
            "l1": self.l1.summary_row() if self.l1 else None,
        }


def battery_loads(injections: List[MissingPower], scale: float = 1.0) -> List[Load]:
    """One negative load per flagged bus carrying -scale * missing power on each flagged phase."""
    per_bus: Dict[str, Dict[Phase, complex]] = {}
    for entry in injections:
        phases = per_bus.setdefault(entry.bus, {})
        phases[entry.phase] = phases.get(entry.phase, 0j) - scale * complex(entry.p, entry.q)
    return [
        Load.from_phase_power(bus, power, id=f"battery_{bus}")
        for bus, power in sorted(per_bus.items())
    ]


def remediate_and_validate(
    network: NetworkModel,
    report: SolutionReport,
    settings: Optional[SolverSettings] = None,
    injection_scale: float = 1.0,
    subset: SubsetLike = None,
) -> RemediationResult:
    """
    Inject missing power at flagged node-phases and re-validate.

    The three validation solves run sequentially. A network with no flagged
    node-phase is validated unchanged.

    Args:
        network: Network the report was computed for
        report: Converged TPIA report
        settings: Solver settings
        injection_scale: Multiplier on the injected power (1 = computed amount)
        subset: Node subset for the validation TPIA solves

    Returns:
        RemediationResult: Validation reports and success flag (never raises
            on a failed validation)
    """
    settings = settings or SolverSettings()
    injections = report.missing_power()
    batteries = battery_loads(injections, injection_scale)
    remediated = network.with_loads(batteries) if batteries else network
    logger.info(
        f"[REMEDIATE] Injecting at {len(batteries)} node(s), "
        f"{sum(m.p for m in injections) * injection_scale / 1e3:.1f} kW total"
    )

    failures: List[str] = []
    power_flow = solve_power_flow(remediated, settings)
    if not power_flow.converged:
        failures.append(f"tpf: {power_flow.error or 'did not converge'}")

    reports: Dict[str, Optional[SolutionReport]] = {"least_squares": None, "l1": None}
    for objective in reports:
        try:
            reports[objective] = solve_tpia(remediated, objective, subset, settings)
        except (EngineError, VoltageCollapseError) as e:
            failures.append(f"{objective}: {e}")
            continue
        if reports[objective].nonzero_count:
            failures.append(f"{objective}: {reports[objective].nonzero_count} nonzero i_f remain")

    success = not failures
    detail = f": {'; '.join(failures)}" if failures else ""
    logger.info(f"[REMEDIATE] Validation {'passed' if success else 'failed'}{detail}")
    return RemediationResult(
        success=success,
        injections=injections,
        network=remediated,
        power_flow=power_flow,
        least_squares=reports["least_squares"],
        l1=reports["l1"],
        failures=failures,
    )
