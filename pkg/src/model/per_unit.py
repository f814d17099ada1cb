"""
Per-unit conversion.

base_power is the per-phase VA base; each bus uses its line-to-neutral
nominal voltage as voltage base. Series admittances are referred to the
to-bus base; the two shunt halves use their own terminal bases.
"""

from dataclasses import dataclass, replace
from typing import Dict, Tuple

import numpy as np

from .network import NetworkModel


@dataclass(frozen=True)
class BusBase:
    voltage: float      # V (line-to-neutral)
    current: float      # A
    admittance: float   # S


def bus_bases(network: NetworkModel) -> Dict[str, BusBase]:
    """Voltage/current/admittance bases for every bus."""
    s_base = network.base_power
    return {
        bus.id: BusBase(
            voltage=bus.nominal_voltage,
            current=s_base / bus.nominal_voltage,
            admittance=s_base / bus.nominal_voltage ** 2,
        )
        for bus in network.buses
    }


@dataclass(frozen=True)
class PerUnitNetwork:
    """
    Per-unit view of a NetworkModel.

    Arrays are indexed like the corresponding tuples of the source network.
    """
    network: NetworkModel
    bases: Dict[str, BusBase]
    series: Tuple[np.ndarray, ...]
    shunt_from: Tuple[np.ndarray, ...]
    shunt_to: Tuple[np.ndarray, ...]
    load_power: Tuple[np.ndarray, ...]       # complex P + jQ per phase
    capacitor_b: Tuple[np.ndarray, ...]


def to_per_unit(network: NetworkModel) -> PerUnitNetwork:
    """
    Convert a physical network to per-unit.

    Args:
        network: Validated network

    Returns:
        PerUnitNetwork: Scaled arrays alongside the source network
    """
    bases = bus_bases(network)
    s_base = network.base_power

    series, shunt_from, shunt_to = [], [], []
    for branch in network.branches:
        y_to = bases[branch.to_bus].admittance
        y_from = bases[branch.from_bus].admittance
        series.append(branch.series_admittance / y_to)
        shunt_from.append(branch.shunt_admittance / 2.0 / y_from)
        shunt_to.append(branch.shunt_admittance / 2.0 / y_to)

    load_power = [
        (np.array(load.p) + 1j * np.array(load.q)) / s_base for load in network.loads
    ]
    capacitor_b = [
        np.array(shunt.susceptance) / bases[shunt.bus].admittance for shunt in network.shunts
    ]

    return PerUnitNetwork(
        network=network,
        bases=bases,
        series=tuple(series),
        shunt_from=tuple(shunt_from),
        shunt_to=tuple(shunt_to),
        load_power=tuple(load_power),
        capacitor_b=tuple(capacitor_b),
    )


def from_per_unit(pu: PerUnitNetwork) -> NetworkModel:
    """
    Rebuild the physical network from its per-unit arrays.

    Args:
        pu: Per-unit network

    Returns:
        NetworkModel: Physical network (matches the source within rounding)
    """
    network = pu.network
    s_base = network.base_power

    branches = []
    for branch, series, shunt_from in zip(network.branches, pu.series, pu.shunt_from):
        y_to = pu.bases[branch.to_bus].admittance
        y_from = pu.bases[branch.from_bus].admittance
        branches.append(replace(
            branch,
            series_admittance=series * y_to,
            shunt_admittance=shunt_from * 2.0 * y_from,
        ))

    loads = [
        replace(load, p=tuple((power * s_base).real), q=tuple((power * s_base).imag))
        for load, power in zip(network.loads, pu.load_power)
    ]
    shunts = [
        replace(shunt, susceptance=tuple(b * pu.bases[shunt.bus].admittance))
        for shunt, b in zip(network.shunts, pu.capacitor_b)
    ]

    return replace(network, branches=tuple(branches), loads=tuple(loads), shunts=tuple(shunts))
