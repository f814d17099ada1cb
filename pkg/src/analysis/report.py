"""
Solution reports.

Voltages and infeasibility currents are stored in physical units alongside
their per-unit bases; every classification against the infeasibility
threshold is done in per-unit and is pure post-processing.
"""

import math
from collections import OrderedDict
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Optional

from src.engine import KktAudit
from src.model import Phase

# Per-unit voltage band used for the violation summary
VOLTAGE_BAND = (0.95, 1.05)


@dataclass(frozen=True)
class NodePhaseResult:
    """Converged quantities at one node-phase (volts, amps)."""
    bus: str
    phase: Phase
    v_real: float
    v_imag: float
    if_real: float
    if_imag: float
    voltage_base: float
    current_base: float
    lambda_real: float = 0.0
    lambda_imag: float = 0.0
    in_subset: bool = False

    @property
    def label(self) -> str:
        return f"{self.bus}.{self.phase.name}"

    @property
    def voltage(self) -> complex:
        return complex(self.v_real, self.v_imag)

    @property
    def infeasibility_current(self) -> complex:
        return complex(self.if_real, self.if_imag)

    @property
    def if_mag(self) -> float:
        return math.hypot(self.if_real, self.if_imag)

    @property
    def if_mag_pu(self) -> float:
        return self.if_mag / self.current_base

    @property
    def v_mag_pu(self) -> float:
        return math.hypot(self.v_real, self.v_imag) / self.voltage_base

    def to_dict(self) -> Dict:
        data = asdict(self)
        data["phase"] = self.phase.name
        return data

    @classmethod
    def from_dict(cls, data: Dict) -> "NodePhaseResult":
        values = dict(data)
        values["phase"] = Phase[values["phase"]]
        return cls(**values)


@dataclass(frozen=True)
class MissingPower:
    """Complex power a flagged node-phase lacks: S = V conj(i_f) (W, var)."""
    bus: str
    phase: Phase
    p: float
    q: float

    def to_dict(self) -> Dict:
        return {"bus": self.bus, "phase": self.phase.name, "p": self.p, "q": self.q}


@dataclass(frozen=True)
class SolutionReport:
    """
    Result of one solve.

    nonzero counts compare per-unit |i_f| with `threshold` (strictly greater).
    A failed solve keeps converged=False and the reason in `error`; its
    node_phases hold the last iterate when one exists.
    """
    mode: str
    converged: bool
    iterations: int
    wall_time: float
    matrix_size: int
    residual: float
    threshold: float
    node_phases: List[NodePhaseResult] = field(default_factory=list)
    edges: List[Dict] = field(default_factory=list)
    audit: Optional[KktAudit] = None
    network_name: str = ""
    fingerprint: str = ""
    base_power: float = 0.0
    error: Optional[str] = None

    # Threshold classification

    def flagged(self) -> List[NodePhaseResult]:
        return [r for r in self.node_phases if r.if_mag_pu > self.threshold]

    @property
    def nonzero_count(self) -> int:
        return len(self.flagged())

    @property
    def nonzero_nodes(self) -> List[str]:
        return sorted({r.bus for r in self.flagged()})

    @property
    def nonzero_node_count(self) -> int:
        return len(self.nonzero_nodes)

    @property
    def is_feasible(self) -> bool:
        return self.converged and self.nonzero_count == 0

    def reclassify(self, threshold: float) -> "SolutionReport":
        """Copy with a new threshold; solved vectors are untouched."""
        return replace(self, threshold=threshold)

    # Per-node views

    def node_max_if(self) -> Dict[str, float]:
        """Greatest |i_f| (A) among each bus's phases, buses in canonical order."""
        result: Dict[str, float] = OrderedDict()
        for r in self.node_phases:
            result[r.bus] = max(result.get(r.bus, 0.0), r.if_mag)
        return result

    def node_max_if_pu(self) -> Dict[str, float]:
        result: Dict[str, float] = OrderedDict()
        for r in self.node_phases:
            result[r.bus] = max(result.get(r.bus, 0.0), r.if_mag_pu)
        return result

    def normalized_if(self) -> Dict[str, float]:
        """Per-node max |i_f| (per-unit) divided by the network maximum."""
        per_node = self.node_max_if_pu()
        peak = max(per_node.values(), default=0.0)
        if peak <= 0:
            return {bus: 0.0 for bus in per_node}
        return {bus: value / peak for bus, value in per_node.items()}

    def missing_power(self) -> List[MissingPower]:
        """S = V conj(i_f) at every flagged node-phase."""
        result = []
        for r in self.flagged():
            s = r.voltage * r.infeasibility_current.conjugate()
            result.append(MissingPower(r.bus, r.phase, s.real, s.imag))
        return result

    def voltage_summary(self, band=VOLTAGE_BAND) -> Dict:
        """Per-bus min/max voltage magnitude (pu) and buses outside the band."""
        low, high = band
        buses: Dict[str, Dict[str, float]] = OrderedDict()
        for r in self.node_phases:
            entry = buses.setdefault(r.bus, {"min_pu": math.inf, "max_pu": -math.inf})
            entry["min_pu"] = min(entry["min_pu"], r.v_mag_pu)
            entry["max_pu"] = max(entry["max_pu"], r.v_mag_pu)
        outside = [bus for bus, e in buses.items() if e["min_pu"] < low or e["max_pu"] > high]
        return {"band": [low, high], "buses": buses, "violations": outside, "violation_count": len(outside)}

    # Summaries and serialization

    def summary_row(self, case: str = "") -> Dict:
        """Columns in fixed order: case, mode, converged, iterations, matrix size, time, nonzero i_f."""
        return OrderedDict([
            ("case", case or self.network_name),
            ("mode", self.mode),
            ("converged", self.converged),
            ("iterations", self.iterations),
            ("matrix_size", self.matrix_size),
            ("time_s", round(self.wall_time, 4)),
            ("nonzero_if", self.nonzero_count),
            ("nonzero_nodes", self.nonzero_node_count),
        ])

    def to_dict(self) -> Dict:
        """
        Machine-readable report. Wall time lives under "timing" so it can be
        excluded when comparing outputs.
        """
        return OrderedDict([
            ("network", self.network_name),
            ("fingerprint", self.fingerprint),
            ("mode", self.mode),
            ("converged", self.converged),
            ("error", self.error),
            ("iterations", self.iterations),
            ("matrix_size", self.matrix_size),
            ("residual", self.residual),
            ("threshold", self.threshold),
            ("base_power", self.base_power),
            ("nonzero_count", self.nonzero_count),
            ("nonzero_nodes", self.nonzero_nodes),
            ("node_phases", [r.to_dict() for r in self.node_phases]),
            ("node_max_if", self.node_max_if()),
            ("missing_power", [m.to_dict() for m in self.missing_power()]),
            ("voltage_summary", self.voltage_summary()),
            ("audit", self.audit.to_dict() if self.audit else None),
            ("edges", list(self.edges)),
            ("timing", {"wall_time": self.wall_time}),
        ])

    @classmethod
    def from_dict(cls, data: Dict) -> "SolutionReport":
        audit = data.get("audit")
        return cls(
            mode=data["mode"],
            converged=bool(data["converged"]),
            iterations=int(data["iterations"]),
            wall_time=float(data.get("timing", {}).get("wall_time", 0.0)),
            matrix_size=int(data["matrix_size"]),
            residual=float(data["residual"]),
            threshold=float(data["threshold"]),
            node_phases=[NodePhaseResult.from_dict(r) for r in data.get("node_phases", [])],
            edges=[dict(e) for e in data.get("edges", [])],
            audit=KktAudit.from_dict(audit) if audit else None,
            network_name=data.get("network", ""),
            fingerprint=data.get("fingerprint", ""),
            base_power=float(data.get("base_power", 0.0)),
            error=data.get("error"),
        )
