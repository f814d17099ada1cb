"""
Solver variable containers and the variable index map.

Layout of the unknown vector (in this order):

    state    V_R (n), V_I (n), slack source currents I_s,R (3), I_s,I (3)
    infeas   L2: i_f,R (s), i_f,I (s)
             L1: i_f,R+ (s), i_f,R- (s), i_f,I+ (s), i_f,I- (s)
    lambda   one equality dual per constraint row (2n + 6)
    mu       L1 only: one inequality dual per i_f component (4s)

n = node-phases, s = node-phases in the subset.
"""

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

SLACK_SOURCES = 3


class SolveMode(str, Enum):
    TPF = "tpf"
    L2 = "l2"
    L1 = "l1"


class VariableIndex:
    """
    Ordered named blocks of the unknown vector with per-variable labels.

    Example:
        >>> index = VariableIndex()
        >>> index.add("v_r", ["V_R[a.A]", "V_R[b.A]"])
        >>> index.slice("v_r")
        slice(0, 2, None)
    """

    def __init__(self):
        self._blocks: Dict[str, slice] = {}
        self._labels: List[str] = []

    def add(self, name: str, labels: Sequence[str]) -> slice:
        start = len(self._labels)
        self._labels.extend(labels)
        block = slice(start, len(self._labels))
        self._blocks[name] = block
        return block

    def slice(self, name: str) -> slice:
        return self._blocks[name]

    def has(self, name: str) -> bool:
        return name in self._blocks

    def label(self, k: int) -> str:
        return self._labels[k]

    @property
    def labels(self) -> Tuple[str, ...]:
        return tuple(self._labels)

    @property
    def blocks(self) -> Dict[str, slice]:
        return dict(self._blocks)

    @property
    def size(self) -> int:
        return len(self._labels)

    def __len__(self) -> int:
        return self.size


@dataclass
class StateVector:
    """Rectangular node-phase voltages and slack source currents (per-unit)."""
    v_r: np.ndarray
    v_i: np.ndarray
    is_r: np.ndarray = field(default_factory=lambda: np.zeros(SLACK_SOURCES))
    is_i: np.ndarray = field(default_factory=lambda: np.zeros(SLACK_SOURCES))

    def __post_init__(self):
        self.v_r = np.asarray(self.v_r, dtype=float).copy()
        self.v_i = np.asarray(self.v_i, dtype=float).copy()
        self.is_r = np.asarray(self.is_r, dtype=float).copy()
        self.is_i = np.asarray(self.is_i, dtype=float).copy()
        if self.v_r.shape != self.v_i.shape:
            raise ValueError("V_R and V_I must have the same length")

    @property
    def n(self) -> int:
        return self.v_r.size

    @property
    def voltage(self) -> np.ndarray:
        return self.v_r + 1j * self.v_i

    def to_array(self) -> np.ndarray:
        return np.concatenate([self.v_r, self.v_i, self.is_r, self.is_i])

    @classmethod
    def from_array(cls, values: np.ndarray, n: int) -> "StateVector":
        return cls(values[:n], values[n:2 * n], values[2 * n:2 * n + 3], values[2 * n + 3:2 * n + 6])

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.to_array())))

    def copy(self) -> "StateVector":
        return StateVector(self.v_r, self.v_i, self.is_r, self.is_i)


@dataclass
class InfeasibilityVars:
    """
    Infeasibility currents on the subset node-phases.

    L2 stores the signed pair in `components` as [i_f,R; i_f,I]. L1 stores the
    four nonnegative split sources [R+; R-; I+; I-].
    """
    mode: SolveMode
    components: np.ndarray

    def __post_init__(self):
        self.components = np.asarray(self.components, dtype=float).copy()

    @property
    def size(self) -> int:
        """Number of subset node-phases."""
        parts = 2 if self.mode == SolveMode.L2 else 4
        return self.components.size // parts

    @property
    def if_r(self) -> np.ndarray:
        s = self.size
        if self.mode == SolveMode.L2:
            return self.components[:s]
        return self.components[:s] - self.components[s:2 * s]

    @property
    def if_i(self) -> np.ndarray:
        s = self.size
        if self.mode == SolveMode.L2:
            return self.components[s:]
        return self.components[2 * s:3 * s] - self.components[3 * s:]

    @property
    def magnitude(self) -> np.ndarray:
        return np.hypot(self.if_r, self.if_i)

    def is_interior(self) -> bool:
        return self.mode != SolveMode.L1 or bool(np.all(self.components > 0))

    @classmethod
    def zeros(cls, mode: SolveMode, subset_size: int) -> "InfeasibilityVars":
        parts = 2 if mode == SolveMode.L2 else 4
        return cls(mode, np.zeros(parts * subset_size))

    def copy(self) -> "InfeasibilityVars":
        return replace(self, components=self.components.copy())


@dataclass
class DualVars:
    """
    Equality duals (one per constraint row) and L1 inequality duals.

    lam is ordered like the constraint rows: [KCL real (n); KCL imag (n);
    slack set-point real (3); slack set-point imag (3)]. mu follows the L1
    component order [R+; R-; I+; I-].
    """
    lam: np.ndarray
    mu: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        self.lam = np.asarray(self.lam, dtype=float).copy()
        self.mu = np.asarray(self.mu, dtype=float).copy()

    @property
    def n(self) -> int:
        return (self.lam.size - 2 * SLACK_SOURCES) // 2

    @property
    def lam_r(self) -> np.ndarray:
        return self.lam[:self.n]

    @property
    def lam_i(self) -> np.ndarray:
        return self.lam[self.n:2 * self.n]

    def is_interior(self) -> bool:
        return bool(np.all(self.mu > 0))

    def copy(self) -> "DualVars":
        return DualVars(self.lam, self.mu)


@dataclass
class Step:
    """Newton direction split into the same blocks as the iterate."""
    state: np.ndarray
    infeas: np.ndarray
    lam: np.ndarray
    mu: np.ndarray

    @classmethod
    def split(cls, direction: np.ndarray, index: VariableIndex) -> "Step":
        def block(name: str) -> np.ndarray:
            return direction[index.slice(name)] if index.has(name) else np.zeros(0)
        return cls(block("state"), block("infeas"), block("lam"), block("mu"))

    def voltage_change(self, n: int) -> np.ndarray:
        """|dV| per node-phase."""
        return np.hypot(self.state[:n], self.state[n:2 * n])

    def inf_norm(self) -> float:
        parts = [np.abs(p).max() for p in (self.state, self.infeas, self.lam, self.mu) if p.size]
        return float(max(parts)) if parts else 0.0


def build_index(
    mode: SolveMode,
    labels: Sequence[str],
    subset_rows: Optional[Sequence[int]] = None,
) -> VariableIndex:
    """
    Build the variable index map for a solve.

    Args:
        mode: Formulation
        labels: Node-phase labels (length n)
        subset_rows: Node-phase rows carrying infeasibility sources

    Returns:
        VariableIndex: Blocks "state", "infeas" (TPIA), "lam" (TPIA), "mu" (L1)
    """
    slack = [f"slack.{p}" for p in "ABC"]
    state_labels = (
        [f"V_R[{x}]" for x in labels] + [f"V_I[{x}]" for x in labels]
        + [f"I_s,R[{x}]" for x in slack] + [f"I_s,I[{x}]" for x in slack]
    )
    index = VariableIndex()
    index.add("state", state_labels)
    if mode == SolveMode.TPF:
        return index

    subset = [labels[int(k)] for k in (subset_rows if subset_rows is not None else [])]
    if mode == SolveMode.L2:
        infeas = [f"i_f,R[{x}]" for x in subset] + [f"i_f,I[{x}]" for x in subset]
    else:
        infeas = [f"i_f,{part}[{x}]" for part in ("R+", "R-", "I+", "I-") for x in subset]
    index.add("infeas", infeas)

    rows = (
        [f"KCL_R[{x}]" for x in labels] + [f"KCL_I[{x}]" for x in labels]
        + [f"Vset_R[{x}]" for x in slack] + [f"Vset_I[{x}]" for x in slack]
    )
    lam = [f"lambda[{r}]" for r in rows]
    index.add("lam", lam)

    if mode == SolveMode.L1:
        mu = [f"mu,{part}[{x}]" for part in ("R+", "R-", "I+", "I-") for x in subset]
        index.add("mu", mu)
    return index
