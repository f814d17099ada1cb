"""
Synthetic desk-scale feeders.

Deterministic builders used by the tests, the CLI `generate` command and the
service examples: the 2-bus single-phase analog, an IEEE-style 4-bus feeder
and seeded random radial feeders with an optional overloaded lateral.
"""

import math
from typing import List, Optional

import numpy as np

from .network import (
    ALL_PHASES,
    Branch,
    BranchKind,
    Bus,
    BusKind,
    Load,
    NetworkModel,
    Phase,
)

FEET_PER_MILE = 5280.0

# IEEE 4-node test feeder conductor data (ohm/mile)
Z_SELF_PER_MILE = 0.4576 + 1.0780j
Z_MUTUAL_PER_MILE = 0.1560 + 0.5017j


def phase_impedance(z_self: complex, z_mutual: complex, phases) -> np.ndarray:
    """3x3 impedance with equal self and mutual terms on the given phases."""
    z = np.zeros((3, 3), dtype=complex)
    idx = [int(p) for p in phases]
    for i in idx:
        for j in idx:
            z[i, j] = z_self if i == j else z_mutual
    return z


def two_bus_analog(
    load_pu: float = 1.0,
    g_pu: float = 10.0,
    q_pu: float = 0.0,
    base_power: float = 1e6,
    nominal_voltage: float = 7200.0,
    three_phase: bool = False,
) -> NetworkModel:
    """
    Slack at 1 pu feeding one load bus through a purely conductive line.

    With the defaults the load bus voltage solves 10 V^2 - 10 V + P = 0, so
    the largest transferable real power is g/4 = 2.5 pu.

    Args:
        load_pu: Load real power per phase in per-unit
        g_pu: Line conductance in per-unit
        q_pu: Load reactive power per phase in per-unit
        base_power: Per-phase VA base
        nominal_voltage: Line-to-neutral voltage (V)
        three_phase: Load all three phases instead of phase A only

    Returns:
        NetworkModel: Two-bus network
    """
    phases = set(ALL_PHASES) if three_phase else {Phase.A}
    y_base = base_power / nominal_voltage ** 2
    series = np.zeros((3, 3), dtype=complex)
    for p in phases:
        series[int(p), int(p)] = g_pu * y_base

    power = {p: complex(load_pu, q_pu) * base_power for p in phases}
    return NetworkModel(
        buses=(
            Bus("source", set(ALL_PHASES), nominal_voltage, BusKind.SLACK),
            Bus("load", phases, nominal_voltage, BusKind.LOAD),
        ),
        branches=(Branch("line", "source", "load", BranchKind.LINE, series),),
        loads=(Load.from_phase_power("load", power, id="load"),),
        base_power=base_power,
        name="two_bus_analog",
    )


def four_bus_feeder(load_scale: float = 1.0, base_power: float = 1e6) -> NetworkModel:
    """
    IEEE-style 4-node feeder: 12.47 kV source, step-down grounded-wye
    transformer to 4.16 kV, balanced 1800 kW / 0.9 pf load per phase at the end.

    Args:
        load_scale: Multiplier on the end load
        base_power: Per-phase VA base

    Returns:
        NetworkModel: Four-bus network
    """
    v_high = 12470.0 / math.sqrt(3)
    v_low = 4160.0 / math.sqrt(3)
    phases = set(ALL_PHASES)

    line_1 = Branch.from_impedance(
        "line_1_2", "n1", "n2",
        phase_impedance(Z_SELF_PER_MILE, Z_MUTUAL_PER_MILE, phases) * 2000.0 / FEET_PER_MILE,
        phases,
    )
    # 6000 kVA, Z = 0.01 + j0.06 pu on the transformer base, referred to the 4.16 kV side
    z_base_low = 4160.0 ** 2 / 6.0e6
    z_xfmr = (0.01 + 0.06j) * z_base_low
    xfmr = Branch.from_impedance(
        "xfmr_2_3", "n2", "n3",
        phase_impedance(z_xfmr, 0.0, phases),
        phases,
        kind=BranchKind.TRANSFORMER,
    )
    line_2 = Branch.from_impedance(
        "line_3_4", "n3", "n4",
        phase_impedance(Z_SELF_PER_MILE, Z_MUTUAL_PER_MILE, phases) * 2500.0 / FEET_PER_MILE,
        phases,
    )

    p = 1.8e6 * load_scale
    q = p * math.tan(math.acos(0.9))
    load = Load("n4", (p, p, p), (q, q, q), id="load_4")

    return NetworkModel(
        buses=(
            Bus("n1", phases, v_high, BusKind.SLACK),
            Bus("n2", phases, v_high),
            Bus("n3", phases, v_low),
            Bus("n4", phases, v_low),
        ),
        branches=(line_1, xfmr, line_2),
        loads=(load,),
        base_power=base_power,
        name="four_bus",
    )


def radial_feeder(
    n_nodes: int = 24,
    seed: int = 0,
    overloaded_lateral: bool = False,
    overload_power: float = 8.0e6,
    balanced: bool = False,
    base_power: float = 1e6,
) -> NetworkModel:
    """
    Seeded random radial feeder: a long three-phase trunk with short laterals.

    The last trunk node feeds a dedicated three-phase lateral ("lat_end").
    With overloaded_lateral=True that node draws overload_power per phase,
    far beyond what the feeder can deliver, making the network infeasible
    with a single bottleneck. Otherwise every load is light (a few percent
    voltage drop).

    Args:
        n_nodes: Number of non-slack buses (at least 4)
        seed: Random seed
        overloaded_lateral: Put the bottleneck load on the end lateral
        overload_power: Per-phase real power of the bottleneck load (W)
        balanced: Three-phase laterals with identical per-phase loads
        base_power: Per-phase VA base

    Returns:
        NetworkModel: Radial feeder
    """
    if n_nodes < 4:
        raise ValueError("radial feeder needs at least 4 non-slack nodes")

    rng = np.random.default_rng(seed)
    v_ln = 12470.0 / math.sqrt(3)
    three = set(ALL_PHASES)

    buses: List[Bus] = [Bus("source", three, v_ln, BusKind.SLACK)]
    branches: List[Branch] = []
    loads: List[Load] = []

    def add_line(name: str, from_bus: str, to_bus: str, phases, miles: float):
        z = phase_impedance(0.30 + 0.60j, 0.10 + 0.25j, phases) * miles
        branches.append(Branch.from_impedance(name, from_bus, to_bus, z, phases))

    def add_load(bus_id: str, phases, kw_low: float = 20.0, kw_high: float = 60.0):
        if balanced:
            kw = rng.uniform(kw_low, kw_high)
            pf = 0.95
            p = {ph: kw * 1e3 for ph in phases}
            q = {ph: kw * 1e3 * math.tan(math.acos(pf)) for ph in phases}
        else:
            p, q = {}, {}
            for ph in phases:
                kw = rng.uniform(kw_low, kw_high)
                pf = rng.uniform(0.9, 0.98)
                p[ph] = kw * 1e3
                q[ph] = kw * 1e3 * math.tan(math.acos(pf))
        loads.append(Load(bus_id, p, q, id=f"load_{bus_id}"))

    n_trunk = max(3, int(round(0.6 * (n_nodes - 1))))
    n_lateral = n_nodes - 1 - n_trunk

    previous = "source"
    trunk_ids = []
    for k in range(n_trunk):
        bus_id = f"t{k + 1:02d}"
        buses.append(Bus(bus_id, three, v_ln))
        add_line(f"line_{previous}_{bus_id}", previous, bus_id, three, rng.uniform(0.2, 0.5))
        add_load(bus_id, three)
        trunk_ids.append(bus_id)
        previous = bus_id

    # Short laterals hanging off random trunk nodes (never the last one)
    lateral_count = 0
    while lateral_count < n_lateral:
        junction = trunk_ids[int(rng.integers(0, len(trunk_ids) - 1))]
        if balanced:
            phases = three
        else:
            choice = int(rng.integers(0, 3))
            phases = [three, {Phase.A, Phase.B}, {ALL_PHASES[int(rng.integers(0, 3))]}][choice]
        length = min(int(rng.integers(1, 3)), n_lateral - lateral_count)
        upstream = junction
        for _ in range(length):
            lateral_count += 1
            bus_id = f"l{lateral_count:02d}"
            buses.append(Bus(bus_id, set(phases), v_ln))
            add_line(f"line_{upstream}_{bus_id}", upstream, bus_id, phases, rng.uniform(0.1, 0.3))
            add_load(bus_id, phases, 10.0, 30.0)
            upstream = bus_id

    # Dedicated end lateral: the bottleneck when overloaded
    buses.append(Bus("lat_end", three, v_ln))
    add_line(f"line_{trunk_ids[-1]}_lat_end", trunk_ids[-1], "lat_end", three, 2.0)
    if overloaded_lateral:
        p = overload_power
        q = p * math.tan(math.acos(0.95))
        loads.append(Load("lat_end", (p, p, p), (q, q, q), id="load_lat_end"))
    else:
        add_load("lat_end", three)

    name = f"radial_{n_nodes}_{seed}" + ("_OV" if overloaded_lateral else "")
    return NetworkModel(
        buses=tuple(buses),
        branches=tuple(branches),
        loads=tuple(loads),
        base_power=base_power,
        name=name,
    )


def overloaded_two_bus(load_pu: float = 3.0) -> NetworkModel:
    """The 2-bus analog loaded past its 2.5 pu transfer limit."""
    return two_bus_analog(load_pu=load_pu)


FEEDER_NAMES = ("two_bus", "two_bus_ov", "four_bus", "radial", "radial_ov")


def feeder_by_name(name: str, seed: Optional[int] = None, n_nodes: int = 24) -> NetworkModel:
    """
    Build a named synthetic feeder (used by the CLI `generate` command).

    Args:
        name: One of "two_bus", "two_bus_ov", "four_bus", "radial", "radial_ov"
        seed: Seed for the radial builders
        n_nodes: Node count for the radial builders

    Returns:
        NetworkModel: The feeder

    Raises:
        ValueError: If the name is unknown
    """
    seed = 0 if seed is None else seed
    builders = {
        "two_bus": lambda: two_bus_analog(),
        "two_bus_ov": lambda: overloaded_two_bus(),
        "four_bus": lambda: four_bus_feeder(),
        "radial": lambda: radial_feeder(n_nodes=n_nodes, seed=seed),
        "radial_ov": lambda: radial_feeder(n_nodes=n_nodes, seed=seed, overloaded_lateral=True),
    }
    if name not in builders:
        raise ValueError(f"Unknown feeder '{name}'. Supported: {', '.join(sorted(builders))}")
    return builders[name]()
