"""
Network validation and per-phase connectivity.

Violations are returned as data; validate() never raises and never mutates
the network.
"""

from collections import Counter
from dataclasses import asdict, dataclass
from typing import Dict, List, Tuple

import networkx as nx
import numpy as np

from .network import ALL_PHASES, BranchKind, NetworkModel, Phase

# Relative tolerance used for the admittance symmetry check
SYMMETRY_TOLERANCE = 1e-9


@dataclass(frozen=True)
class Violation:
    """One invariant violation: offending element id, reason and a machine code."""
    element: str
    reason: str
    code: str

    def to_dict(self) -> Dict[str, str]:
        return asdict(self)

    def __str__(self) -> str:
        return f"{self.element}: {self.reason}"


def _structural_violations(network: NetworkModel) -> List[Violation]:
    violations: List[Violation] = []

    if network.base_power <= 0:
        violations.append(Violation("network", "base_power must be positive", "base_power"))

    if not network.buses:
        violations.append(Violation("network", "network has no buses", "no_buses"))
        return violations

    # Buses
    for bus_id, count in Counter(b.id for b in network.buses).items():
        if count > 1:
            violations.append(Violation(bus_id, f"duplicate bus id ({count} occurrences)", "duplicate_bus"))

    for bus in network.buses:
        if not bus.phases:
            violations.append(Violation(bus.id, "bus has no phases", "empty_phases"))
        if not bus.nominal_voltage > 0:
            violations.append(Violation(bus.id, "nominal voltage must be positive", "nominal_voltage"))

    slack_buses = [b for b in network.buses if b.is_slack]
    if not slack_buses:
        violations.append(Violation("network", "no slack bus", "no_slack"))
    elif len(slack_buses) > 1:
        ids = ", ".join(b.id for b in slack_buses)
        violations.append(Violation(ids, "multiple slack buses", "multiple_slack"))
    else:
        slack = slack_buses[0]
        if set(slack.phases) != set(ALL_PHASES):
            violations.append(Violation(slack.id, "slack bus must carry phases A, B and C", "slack_phases"))

    # Branches
    for branch_id, count in Counter(b.id for b in network.branches).items():
        if count > 1:
            violations.append(Violation(branch_id, f"duplicate branch id ({count} occurrences)", "duplicate_branch"))

    for branch in network.branches:
        missing = [end for end in (branch.from_bus, branch.to_bus) if not network.has_bus(end)]
        if missing:
            violations.append(Violation(branch.id, f"unknown terminal bus {', '.join(missing)}", "unknown_bus"))
            continue
        if branch.from_bus == branch.to_bus:
            violations.append(Violation(branch.id, "branch connects a bus to itself", "self_loop"))
        if not branch.tap_ratio > 0:
            violations.append(Violation(branch.id, "tap ratio must be positive", "tap_ratio"))
        if branch.kind != BranchKind.TRANSFORMER and branch.tap_ratio != 1.0:
            violations.append(Violation(branch.id, "only transformers may have an off-nominal tap", "tap_ratio"))

        for name, matrix in (("series", branch.series_admittance), ("shunt", branch.shunt_admittance)):
            if not np.all(np.isfinite(matrix)):
                violations.append(Violation(branch.id, f"{name} admittance has non-finite entries", "non_finite"))
                continue
            scale = max(1.0, float(np.max(np.abs(matrix))))
            if np.max(np.abs(matrix - matrix.T)) > SYMMETRY_TOLERANCE * scale:
                violations.append(Violation(branch.id, f"{name} admittance is not symmetric", "asymmetric"))

        from_phases = network.bus(branch.from_bus).phases
        to_phases = network.bus(branch.to_bus).phases
        for phase in ALL_PHASES:
            if phase in from_phases and phase in to_phases:
                continue
            i = int(phase)
            series_row = branch.series_admittance[i, :], branch.series_admittance[:, i]
            shunt_row = branch.shunt_admittance[i, :], branch.shunt_admittance[:, i]
            if any(np.any(v != 0) for v in series_row + shunt_row):
                violations.append(Violation(
                    branch.id,
                    f"admittance entries for phase {phase.name} absent at a terminal",
                    "absent_phase",
                ))

        if branch.kind != BranchKind.TRANSFORMER:
            v_from = network.bus(branch.from_bus).nominal_voltage
            v_to = network.bus(branch.to_bus).nominal_voltage
            if abs(v_from - v_to) > 1e-9 * max(abs(v_from), abs(v_to), 1.0):
                violations.append(Violation(
                    branch.id,
                    f"nominal voltage mismatch across {branch.kind.value} ({v_from} V vs {v_to} V)",
                    "voltage_mismatch",
                ))

    # Loads and shunts
    for load in network.loads:
        label = load.id or load.bus
        if not network.has_bus(load.bus):
            violations.append(Violation(label, f"load on unknown bus {load.bus}", "unknown_bus"))
            continue
        host = network.bus(load.bus)
        for phase in ALL_PHASES:
            if phase not in host.phases and (load.p[int(phase)] != 0 or load.q[int(phase)] != 0):
                violations.append(Violation(
                    load.bus,
                    f"load carries phase {phase.name} which bus {load.bus} does not have",
                    "absent_phase",
                ))
        if not all(np.isfinite(load.p + load.q)):
            violations.append(Violation(label, "load power has non-finite entries", "non_finite"))

    for shunt in network.shunts:
        label = shunt.id or shunt.bus
        if not network.has_bus(shunt.bus):
            violations.append(Violation(label, f"capacitor on unknown bus {shunt.bus}", "unknown_bus"))
            continue
        host = network.bus(shunt.bus)
        for phase in ALL_PHASES:
            b = shunt.susceptance[int(phase)]
            if b < 0:
                violations.append(Violation(label, f"negative susceptance on phase {phase.name}", "negative_susceptance"))
            if phase not in host.phases and b != 0:
                violations.append(Violation(
                    shunt.bus,
                    f"capacitor carries phase {phase.name} which bus {shunt.bus} does not have",
                    "absent_phase",
                ))

    return violations


def connectivity_check(network: NetworkModel) -> Dict[Tuple[str, Phase], bool]:
    """
    Per-phase reachability from the slack bus over closed branches.

    A branch carries a phase when its series-admittance diagonal entry for
    that phase is nonzero and both terminals have the phase.

    Args:
        network: A network whose structure passed validation

    Returns:
        Dict mapping (bus id, phase) to True iff reachable; only phases that
        exist at a bus appear as keys.
    """
    slack = network.slack_bus
    reachable: Dict[Tuple[str, Phase], bool] = {}

    for phase in ALL_PHASES:
        graph = nx.Graph()
        graph.add_nodes_from(bus.id for bus in network.buses if phase in bus.phases)
        for branch in network.branches:
            if not branch.is_closed or phase not in branch.phases:
                continue
            if branch.from_bus in graph and branch.to_bus in graph:
                graph.add_edge(branch.from_bus, branch.to_bus)

        connected = nx.node_connected_component(graph, slack.id) if slack.id in graph else set()
        for bus in network.buses:
            if phase in bus.phases:
                reachable[(bus.id, phase)] = bus.id in connected

    return reachable


def validate(network: NetworkModel) -> List[Violation]:
    """
    Check every network invariant.

    Connectivity is only checked once the structural checks pass, so a
    single defect is reported once rather than cascading.

    Args:
        network: Network to check

    Returns:
        List[Violation]: Every violation found (empty list = valid)
    """
    violations = _structural_violations(network)
    if violations:
        return violations

    for (bus_id, phase), ok in connectivity_check(network).items():
        if not ok:
            violations.append(Violation(
                bus_id,
                f"phase {phase.name} not reachable from slack over closed branches",
                "unreachable",
            ))
    return violations


def is_valid(network: NetworkModel) -> bool:
    """Shortcut: True iff validate() reports nothing."""
    return not validate(network)
