"""
Immutable three-phase network data model.

Buses, branches (3x3 complex admittance blocks), wye-connected constant-PQ
loads, shunt capacitors and the single slack source. All values are in
physical units (volts line-to-neutral, siemens, watts, vars); per-unit
conversion lives in per_unit.py.
"""

from dataclasses import dataclass, field, replace
from enum import Enum, IntEnum
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Tuple

import numpy as np

# Ideal closed switch/fuse: large admittance on the phase-block diagonal (siemens)
SWITCH_ADMITTANCE = 1e6


class Phase(IntEnum):
    """Phase tag. Ordering is fixed: A < B < C."""
    A = 0
    B = 1
    C = 2

    @classmethod
    def parse_set(cls, text: str) -> FrozenSet["Phase"]:
        """
        Parse a phase string such as "ABCN" or "AN" into a set of phases.

        The neutral marker N (and ground G, split-phase S) is ignored.

        Args:
            text: Phase string (case-insensitive)

        Returns:
            FrozenSet[Phase]: Phases named in the string

        Raises:
            ValueError: If the string contains an unknown phase letter
        """
        phases = set()
        for char in text.strip().upper():
            if char in "ABC":
                phases.add(cls[char])
            elif char in "NGS":
                continue
            else:
                raise ValueError(f"Unknown phase letter '{char}' in '{text}'")
        return frozenset(phases)

    @staticmethod
    def format_set(phases: Iterable["Phase"]) -> str:
        """Format phases as a compact string ("ABC")."""
        return "".join(p.name for p in sorted(phases))


ALL_PHASES: Tuple[Phase, ...] = (Phase.A, Phase.B, Phase.C)


class BusKind(str, Enum):
    SLACK = "slack"
    LOAD = "load"


class BranchKind(str, Enum):
    LINE = "line"
    TRANSFORMER = "transformer"
    SWITCH = "switch"
    FUSE = "fuse"


class BranchStatus(str, Enum):
    CLOSED = "closed"
    OPEN = "open"


def _frozen_matrix(values) -> np.ndarray:
    matrix = np.array(values, dtype=complex).reshape(3, 3) if values is not None else np.zeros((3, 3), dtype=complex)
    matrix.setflags(write=False)
    return matrix


def _phase_tuple(values) -> Tuple[float, float, float]:
    if isinstance(values, Mapping):
        return tuple(float(values.get(p, 0.0)) for p in ALL_PHASES)
    values = tuple(float(v) for v in values)
    if len(values) != 3:
        raise ValueError("per-phase values need exactly three entries (A, B, C)")
    return values


def impedance_to_admittance(impedance: np.ndarray, phases: Iterable[Phase]) -> np.ndarray:
    """
    Invert the phase sub-block of a 3x3 series impedance matrix.

    Rows/columns of absent phases stay zero in the result.

    Args:
        impedance: 3x3 complex impedance matrix in ohms
        phases: Phases carried by the branch

    Returns:
        np.ndarray: 3x3 complex admittance matrix in siemens

    Raises:
        np.linalg.LinAlgError: If the phase sub-block is singular
    """
    idx = [int(p) for p in sorted(phases)]
    z = np.asarray(impedance, dtype=complex).reshape(3, 3)
    y = np.zeros((3, 3), dtype=complex)
    if not idx:
        return y
    block = z[np.ix_(idx, idx)]
    # LinAlgError is raised for exactly singular blocks; catch near-singular too
    if np.linalg.cond(block) > 1e12:
        raise np.linalg.LinAlgError("impedance matrix is singular")
    y[np.ix_(idx, idx)] = np.linalg.inv(block)
    return y


@dataclass(frozen=True)
class Bus:
    """A bus with its phases, line-to-neutral nominal voltage and kind."""
    id: str
    phases: FrozenSet[Phase]
    nominal_voltage: float
    kind: BusKind = BusKind.LOAD

    def __post_init__(self):
        object.__setattr__(self, "phases", frozenset(Phase(p) for p in self.phases))
        object.__setattr__(self, "kind", BusKind(self.kind))
        object.__setattr__(self, "nominal_voltage", float(self.nominal_voltage))

    @property
    def is_slack(self) -> bool:
        return self.kind == BusKind.SLACK


@dataclass(frozen=True, eq=False)
class Branch:
    """
    A two-terminal three-phase element.

    series_admittance is in siemens, referred to the to-bus side for
    transformers. shunt_admittance is the total line charging, stamped half
    at each end.
    """
    id: str
    from_bus: str
    to_bus: str
    kind: BranchKind
    series_admittance: np.ndarray
    shunt_admittance: Optional[np.ndarray] = None
    tap_ratio: float = 1.0
    status: BranchStatus = BranchStatus.CLOSED

    def __post_init__(self):
        object.__setattr__(self, "kind", BranchKind(self.kind))
        object.__setattr__(self, "status", BranchStatus(self.status))
        object.__setattr__(self, "series_admittance", _frozen_matrix(self.series_admittance))
        object.__setattr__(self, "shunt_admittance", _frozen_matrix(self.shunt_admittance))
        object.__setattr__(self, "tap_ratio", float(self.tap_ratio))

    def __eq__(self, other):
        if not isinstance(other, Branch):
            return NotImplemented
        return (
            self.id == other.id
            and self.from_bus == other.from_bus
            and self.to_bus == other.to_bus
            and self.kind == other.kind
            and self.tap_ratio == other.tap_ratio
            and self.status == other.status
            and np.array_equal(self.series_admittance, other.series_admittance)
            and np.array_equal(self.shunt_admittance, other.shunt_admittance)
        )

    def __hash__(self):
        return hash((self.id, self.from_bus, self.to_bus, self.kind))

    @property
    def phases(self) -> Tuple[Phase, ...]:
        """Phases with a nonzero series-admittance diagonal entry."""
        diag = np.diag(self.series_admittance)
        return tuple(p for p in ALL_PHASES if diag[int(p)] != 0)

    @property
    def is_closed(self) -> bool:
        return self.status == BranchStatus.CLOSED

    @classmethod
    def from_impedance(
        cls,
        id: str,
        from_bus: str,
        to_bus: str,
        impedance,
        phases: Iterable[Phase],
        shunt_susceptance=None,
        kind: BranchKind = BranchKind.LINE,
        tap_ratio: float = 1.0,
        status: BranchStatus = BranchStatus.CLOSED,
    ) -> "Branch":
        """
        Build a branch from a 3x3 series impedance (ohms) and shunt susceptance (siemens).

        Raises:
            np.linalg.LinAlgError: If the impedance phase block is singular
        """
        series = impedance_to_admittance(np.asarray(impedance, dtype=complex), phases)
        shunt = None
        if shunt_susceptance is not None:
            shunt = 1j * np.asarray(shunt_susceptance, dtype=float).reshape(3, 3)
        return cls(id, from_bus, to_bus, kind, series, shunt, tap_ratio, status)

    @classmethod
    def switch(
        cls,
        id: str,
        from_bus: str,
        to_bus: str,
        phases: Iterable[Phase],
        closed: bool = True,
        kind: BranchKind = BranchKind.SWITCH,
        admittance: float = SWITCH_ADMITTANCE,
    ) -> "Branch":
        """Build an ideal switch or fuse: large admittance on its phase diagonal."""
        series = np.zeros((3, 3), dtype=complex)
        for p in phases:
            series[int(p), int(p)] = admittance
        status = BranchStatus.CLOSED if closed else BranchStatus.OPEN
        return cls(id, from_bus, to_bus, kind, series, None, 1.0, status)


@dataclass(frozen=True)
class Load:
    """Wye-connected constant-PQ load; per-phase P (W) and Q (var) ordered A, B, C."""
    bus: str
    p: Tuple[float, float, float]
    q: Tuple[float, float, float]
    id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "p", _phase_tuple(self.p))
        object.__setattr__(self, "q", _phase_tuple(self.q))

    @classmethod
    def from_phase_power(cls, bus: str, power: Mapping[Phase, complex], id: str = "") -> "Load":
        """Build a load from a {phase: P + jQ} mapping."""
        p = tuple(complex(power.get(ph, 0.0)).real for ph in ALL_PHASES)
        q = tuple(complex(power.get(ph, 0.0)).imag for ph in ALL_PHASES)
        return cls(bus, p, q, id)

    def phase_power(self, phase: Phase) -> complex:
        return complex(self.p[int(phase)], self.q[int(phase)])

    def scaled(self, factor: float) -> "Load":
        return replace(self, p=tuple(v * factor for v in self.p), q=tuple(v * factor for v in self.q))


@dataclass(frozen=True)
class ShuntCap:
    """Wye shunt capacitor; per-phase susceptance in siemens ordered A, B, C."""
    bus: str
    susceptance: Tuple[float, float, float]
    id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "susceptance", _phase_tuple(self.susceptance))


@dataclass(frozen=True)
class NetworkModel:
    """
    Immutable feeder description.

    Construction does not validate; call validate() before solving.
    """
    buses: Tuple[Bus, ...]
    branches: Tuple[Branch, ...] = ()
    loads: Tuple[Load, ...] = ()
    shunts: Tuple[ShuntCap, ...] = ()
    base_power: float = 1e6
    name: str = ""
    _bus_lookup: Dict[str, Bus] = field(default=None, init=False, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "buses", tuple(self.buses))
        object.__setattr__(self, "branches", tuple(self.branches))
        object.__setattr__(self, "loads", tuple(self.loads))
        object.__setattr__(self, "shunts", tuple(self.shunts))
        object.__setattr__(self, "base_power", float(self.base_power))
        object.__setattr__(self, "_bus_lookup", {bus.id: bus for bus in self.buses})

    def bus(self, bus_id: str) -> Bus:
        """Look up a bus by id (KeyError if absent)."""
        return self._bus_lookup[bus_id]

    def has_bus(self, bus_id: str) -> bool:
        return bus_id in self._bus_lookup

    @property
    def slack_bus(self) -> Bus:
        """The (first) slack bus; ValueError if there is none."""
        for bus in self.buses:
            if bus.is_slack:
                return bus
        raise ValueError("network has no slack bus")

    def sorted_buses(self) -> List[Bus]:
        """Buses in canonical order (by id), independent of input order."""
        return sorted(self.buses, key=lambda b: b.id)

    def node_phases(self) -> List[Tuple[str, Phase]]:
        """All (bus id, phase) pairs in canonical order."""
        return [(bus.id, phase) for bus in self.sorted_buses() for phase in sorted(bus.phases)]

    def scaled(self, load_factor: float) -> "NetworkModel":
        """Copy with every load multiplied by load_factor."""
        return replace(self, loads=tuple(load.scaled(load_factor) for load in self.loads))

    def with_loads(self, extra_loads: Iterable[Load]) -> "NetworkModel":
        """Copy with additional loads appended (negative P/Q models injections)."""
        return replace(self, loads=self.loads + tuple(extra_loads))

    def with_branch_status(self, branch_id: str, status: BranchStatus) -> "NetworkModel":
        """Copy with one branch opened or closed."""
        branches = tuple(
            replace(b, status=status) if b.id == branch_id else b for b in self.branches
        )
        return replace(self, branches=branches)

    def reordered(self, bus_order: Iterable[str]) -> "NetworkModel":
        """Copy with buses listed in the given id order."""
        order = list(bus_order)
        return replace(self, buses=tuple(self.bus(bus_id) for bus_id in order))

    def edges(self) -> List[Tuple[str, str]]:
        """(from, to) bus pairs of every branch, in input order."""
        return [(b.from_bus, b.to_bus) for b in self.branches]
