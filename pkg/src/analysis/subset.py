"""
Node-phase subsets eligible for infeasibility sources.
"""

from dataclasses import dataclass
from typing import FrozenSet, Iterable, List, Tuple, Union

from src.model import NetworkModel, Phase
from src.stamp import AdmittanceMatrices

NodePhase = Tuple[str, Phase]


class SubsetError(Exception):
    """Exception raised when a node subset is invalid for a network."""

    def __init__(self, message: str, code: str):
        super().__init__(message)
        self.message = message
        self.code = code


@dataclass(frozen=True)
class NodeSubset:
    """
    Set of (bus, phase) pairs carrying infeasibility sources.

    Never contains slack-bus phases; use NodeSubset.default() for every
    node-phase outside the slack bus.
    """
    pairs: FrozenSet[NodePhase]

    def __len__(self) -> int:
        return len(self.pairs)

    def __contains__(self, item: NodePhase) -> bool:
        return item in self.pairs

    @classmethod
    def default(cls, network: NetworkModel) -> "NodeSubset":
        slack = network.slack_bus.id
        return cls(frozenset(pair for pair in network.node_phases() if pair[0] != slack))

    @classmethod
    def from_pairs(cls, network: NetworkModel, pairs: Iterable[NodePhase]) -> "NodeSubset":
        """
        Build a subset and check it against the network.

        Raises:
            SubsetError: On slack-bus phases, unknown node-phases or an empty set
        """
        subset = cls(frozenset((bus, Phase(phase)) for bus, phase in pairs))
        subset.check(network)
        return subset

    @classmethod
    def from_buses(cls, network: NetworkModel, bus_ids: Iterable[str]) -> "NodeSubset":
        """Every phase of the named buses."""
        pairs = []
        for bus_id in bus_ids:
            if not network.has_bus(bus_id):
                raise SubsetError(f"Unknown bus '{bus_id}' in node subset", "unknown_node")
            pairs.extend((bus_id, phase) for phase in network.bus(bus_id).phases)
        return cls.from_pairs(network, pairs)

    @classmethod
    def parse(cls, text: str, network: NetworkModel) -> "NodeSubset":
        """
        Parse a subset file: one entry per line, either "bus" (all phases) or
        "bus.A". Blank lines and lines starting with # are skipped.
        """
        pairs: List[NodePhase] = []
        for raw in text.splitlines():
            entry = raw.split("#", 1)[0].strip()
            if not entry:
                continue
            if network.has_bus(entry):
                pairs.extend((entry, phase) for phase in network.bus(entry).phases)
                continue
            bus_id, _, phase_name = entry.rpartition(".")
            if not bus_id or phase_name.upper() not in ("A", "B", "C"):
                raise SubsetError(f"Cannot read subset entry '{entry}'", "syntax")
            pairs.append((bus_id, Phase[phase_name.upper()]))
        return cls.from_pairs(network, pairs)

    def check(self, network: NetworkModel) -> None:
        if not self.pairs:
            raise SubsetError("Node subset is empty", "empty_subset")
        slack = network.slack_bus.id
        existing = set(network.node_phases())
        for bus_id, phase in sorted(self.pairs):
            if bus_id == slack:
                raise SubsetError(f"Node subset may not include slack bus '{slack}'", "slack_in_subset")
            if (bus_id, phase) not in existing:
                raise SubsetError(f"Node-phase {bus_id}.{phase.name} does not exist", "unknown_node")

    def rows(self, admittance: AdmittanceMatrices) -> List[int]:
        """Sorted matrix rows of the subset."""
        return sorted(admittance.index_map[pair] for pair in self.pairs)

    def to_lines(self) -> List[str]:
        return [f"{bus}.{phase.name}" for bus, phase in sorted(self.pairs)]


SubsetLike = Union[NodeSubset, Iterable[NodePhase], None]


def resolve_subset(network: NetworkModel, subset: SubsetLike) -> NodeSubset:
    """NodeSubset for a solve: default when None, checked otherwise."""
    if subset is None:
        return NodeSubset.default(network)
    if isinstance(subset, NodeSubset):
        subset.check(network)
        return subset
    return NodeSubset.from_pairs(network, subset)
