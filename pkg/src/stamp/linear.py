"""
Linear admittance stamping.

Builds the per-unit node-phase admittance matrix Y = G + jB from branch
series/shunt blocks and capacitors, aggregates constant-PQ loads per
node-phase, and records the slack voltage-source rows.
"""

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import sparse

from src.model import NetworkModel, Phase, to_per_unit
from src.model.per_unit import PerUnitNetwork
from src.utils import logger

# Flat-start angles (degrees) per phase
PHASE_ANGLES_DEG = {Phase.A: 0.0, Phase.B: -120.0, Phase.C: 120.0}


@dataclass(frozen=True)
class AdmittanceMatrices:
    """
    Stamped linear network in per-unit.

    G and B are n x n with n = number of node-phases; index_map is a
    bijection (bus id, phase) -> 0..n-1 in canonical order.
    """
    G: sparse.csr_matrix
    B: sparse.csr_matrix
    index_map: Dict[Tuple[str, Phase], int]
    labels: Tuple[str, ...]
    phases: np.ndarray              # phase index per row
    slack_rows: np.ndarray          # rows of slack phases A, B, C
    slack_voltage: np.ndarray       # complex per-unit set-points
    load_p: np.ndarray              # aggregated per-unit P per row
    load_q: np.ndarray
    voltage_base: np.ndarray        # V per row
    current_base: np.ndarray        # A per row

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def loaded(self) -> np.ndarray:
        return (self.load_p != 0) | (self.load_q != 0)

    def row(self, bus_id: str, phase: Phase) -> int:
        return self.index_map[(bus_id, phase)]

    def bus_of_row(self, row: int) -> str:
        return self.labels[row].rsplit(".", 1)[0]


def node_label(bus_id: str, phase: Phase) -> str:
    return f"{bus_id}.{phase.name}"


def stamp_linear(network: NetworkModel, pu: Optional[PerUnitNetwork] = None) -> AdmittanceMatrices:
    """
    Stamp every linear element of a validated network.

    Closed branches stamp [[y/t^2, -y/t], [-y/t, y]] per phase pair plus half
    the shunt admittance at each end; open branches contribute nothing.
    Capacitors add jB on their diagonal. G and B are symmetrized so that
    G == G.T and B == B.T hold exactly.

    Args:
        network: Validated network
        pu: Optional precomputed per-unit view

    Returns:
        AdmittanceMatrices: Stamped matrices and per-row metadata
    """
    pu = pu or to_per_unit(network)
    node_phases = network.node_phases()
    index_map = {key: k for k, key in enumerate(node_phases)}
    n = len(node_phases)

    rows: List[int] = []
    cols: List[int] = []
    vals: List[complex] = []

    def add(r: int, c: int, value: complex):
        if value != 0:
            rows.append(r)
            cols.append(c)
            vals.append(value)

    for branch, series, shunt_from, shunt_to in zip(network.branches, pu.series, pu.shunt_from, pu.shunt_to):
        if not branch.is_closed:
            continue
        t = branch.tap_ratio
        y = 0.5 * (series + series.T)
        for i, pi in enumerate(Phase):
            for j, pj in enumerate(Phase):
                f_i = index_map.get((branch.from_bus, pi))
                f_j = index_map.get((branch.from_bus, pj))
                t_i = index_map.get((branch.to_bus, pi))
                t_j = index_map.get((branch.to_bus, pj))
                if y[i, j] != 0:
                    add(f_i, f_j, y[i, j] / t ** 2)
                    add(f_i, t_j, -y[i, j] / t)
                    add(t_i, f_j, -y[i, j] / t)
                    add(t_i, t_j, y[i, j])
                if shunt_from[i, j] != 0:
                    add(f_i, f_j, shunt_from[i, j])
                if shunt_to[i, j] != 0:
                    add(t_i, t_j, shunt_to[i, j])

    for shunt, b in zip(network.shunts, pu.capacitor_b):
        for phase in Phase:
            if b[int(phase)] != 0:
                k = index_map[(shunt.bus, phase)]
                add(k, k, 1j * b[int(phase)])

    y_matrix = sparse.coo_matrix(
        (np.array(vals, dtype=complex), (np.array(rows, dtype=int), np.array(cols, dtype=int))),
        shape=(n, n),
    ).tocsr()
    y_matrix.sum_duplicates()
    g = y_matrix.real
    b = y_matrix.imag
    g = ((g + g.T) * 0.5).tocsr()
    b = ((b + b.T) * 0.5).tocsr()

    load_p = np.zeros(n)
    load_q = np.zeros(n)
    for load, power in zip(network.loads, pu.load_power):
        for phase in Phase:
            value = power[int(phase)]
            if value != 0:
                k = index_map[(load.bus, phase)]
                load_p[k] += value.real
                load_q[k] += value.imag

    slack = network.slack_bus
    slack_rows = np.array([index_map[(slack.id, phase)] for phase in Phase], dtype=int)
    slack_voltage = np.array([
        np.exp(1j * math.radians(PHASE_ANGLES_DEG[phase])) for phase in Phase
    ])

    voltage_base = np.array([pu.bases[bus_id].voltage for bus_id, _ in node_phases])
    current_base = np.array([pu.bases[bus_id].current for bus_id, _ in node_phases])

    logger.debug(f"[STAMP] {n} node-phases, {g.nnz} G nonzeros, {int(np.count_nonzero(load_p) + np.count_nonzero(load_q))} load entries")

    return AdmittanceMatrices(
        G=g,
        B=b,
        index_map=index_map,
        labels=tuple(node_label(bus_id, phase) for bus_id, phase in node_phases),
        phases=np.array([int(phase) for _, phase in node_phases], dtype=int),
        slack_rows=slack_rows,
        slack_voltage=slack_voltage,
        load_p=load_p,
        load_q=load_q,
        voltage_base=voltage_base,
        current_base=current_base,
    )


def flat_start(admittance: AdmittanceMatrices) -> Tuple[np.ndarray, np.ndarray]:
    """
    Flat-start voltages: 1 pu at 0 / -120 / +120 degrees for phases A / B / C.

    Args:
        admittance: Stamped network

    Returns:
        Tuple[np.ndarray, np.ndarray]: (V_R, V_I) per node-phase
    """
    angles = np.radians([PHASE_ANGLES_DEG[Phase(p)] for p in admittance.phases])
    return np.cos(angles), np.sin(angles)
