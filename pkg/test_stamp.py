"""
Tests for stamping: the linear admittance matrices and the constant-PQ
load current model.

Run with `pytest test_stamp.py` or `python test_stamp.py`.
"""

from dataclasses import replace

import numpy as np
import pytest

from src.model import (
    Branch,
    BranchStatus,
    Bus,
    Phase,
    ShuntCap,
    four_bus_feeder,
    radial_feeder,
    two_bus_analog,
    validate,
)
from src.stamp import (
    VoltageCollapseError,
    flat_start,
    load_current,
    load_hessian,
    load_jacobian_check,
    stamp_linear,
)


def print_section(title: str):
    """Print a formatted section header."""
    print(f"\n{'='*60}")
    print(f"{title}")
    print('='*60)


def test_two_bus_matrices():
    """The 2-bus analog stamps g = 10 pu between source.A and load.A."""
    print_section("Two-Bus Stamp")
    adm = stamp_linear(two_bus_analog())
    assert adm.labels == ("load.A", "source.A", "source.B", "source.C")

    g = adm.G.toarray()
    load, source = adm.row("load", Phase.A), adm.row("source", Phase.A)
    assert np.isclose(g[load, load], 10.0)
    assert np.isclose(g[load, source], -10.0)
    assert np.allclose(adm.B.toarray(), 0.0)
    # Slack phases B and C have no branch
    assert not g[adm.row("source", Phase.B)].any()

    assert np.isclose(adm.load_p[load], 1.0)
    assert adm.loaded.tolist() == [True, False, False, False]
    assert list(adm.slack_rows) == [1, 2, 3]
    print(f"✓ G = {g[load, load]:.1f} on the load diagonal")
    return True


def test_symmetry_and_zero_row_sums():
    """Shunt-free networks with nominal taps have zero row sums."""
    print_section("Symmetry")
    for network in (four_bus_feeder(), radial_feeder(n_nodes=16, seed=2)):
        adm = stamp_linear(network)
        for matrix in (adm.G, adm.B):
            assert abs(matrix - matrix.T).max() == 0
            assert np.allclose(np.asarray(matrix.sum(axis=1)).ravel(), 0.0, atol=1e-9)
        print(f"✓ {network.name}: {adm.n} node-phases, symmetric")
    return True


def test_capacitor_and_open_branch():
    print_section("Capacitor and Open Switch")
    network = two_bus_analog()
    nominal = network.bus("load").nominal_voltage
    y_base = network.base_power / nominal ** 2
    with_cap = replace(network, shunts=(ShuntCap("load", (0.5 * y_base, 0.0, 0.0), id="cap"),))
    adm = stamp_linear(with_cap)
    k = adm.row("load", Phase.A)
    assert np.isclose(adm.B.toarray()[k, k], 0.5)

    far = Bus("far", {Phase.A}, nominal)
    opened = replace(
        network,
        buses=network.buses + (far,),
        branches=network.branches + (Branch.switch("sw", "load", "far", [Phase.A], closed=False),),
    )
    adm = stamp_linear(opened)
    row = adm.row("far", Phase.A)
    assert adm.G[row].nnz == 0 and adm.B[row].nnz == 0
    assert np.isclose(adm.G.toarray()[k, k], 10.0)
    print("✓ capacitor adds jB; open switch stamps nothing")
    return True


def test_flat_start_angles():
    adm = stamp_linear(four_bus_feeder())
    v_r, v_i = flat_start(adm)
    angles = np.degrees(np.arctan2(v_i, v_r))
    expected = {0: 0.0, 1: -120.0, 2: 120.0}
    for phase, angle in zip(adm.phases, angles):
        assert np.isclose(angle, expected[int(phase)])
    assert np.allclose(np.hypot(v_r, v_i), 1.0)
    return True


def test_load_current_partials():
    """Analytic load partials agree with central differences."""
    print_section("Load Current Partials")
    for v_r, v_i, p, q in [(0.95, -0.05, 1.0, 0.5), (-0.5, -0.85, 0.3, -0.2), (0.4, 0.7, 2.0, 0.0)]:
        error = load_jacobian_check(v_r, v_i, p, q)
        print(f"  V=({v_r}, {v_i}) S=({p}, {q}) → {error:.2e}")
        assert error < 1e-6

    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        magnitude, angle = rng.uniform(0.5, 1.2), rng.uniform(-np.pi, np.pi)
        p, q = rng.uniform(-2.0, 2.0, size=2)
        worst = max(worst, load_jacobian_check(magnitude * np.cos(angle), magnitude * np.sin(angle), p, q))
    print(f"  100 random operating points → worst {worst:.2e}")
    assert worst < 1e-6

    lc = load_current(1.0, 0.0, 1.0, 0.5)
    # I = conj(S / V) at V = 1
    assert np.isclose(lc.i_r[0], 1.0) and np.isclose(lc.i_i[0], -0.5)
    return True


def test_load_hessian_matches_differences():
    print_section("Load Hessian")
    v_r, v_i, p, q, lam_r, lam_i, h = 0.9, -0.2, 1.2, 0.4, 0.7, -0.3, 1e-6

    def weighted(vr, vi):
        lc = load_current(vr, vi, p, q)
        return (
            lam_r * lc.di_r_dvr[0] + lam_i * lc.di_i_dvr[0],
            lam_r * lc.di_r_dvi[0] + lam_i * lc.di_i_dvi[0],
        )

    h_rr, h_ri = load_hessian(v_r, v_i, p, q, lam_r, lam_i)
    d_vr = (np.array(weighted(v_r + h, v_i)) - np.array(weighted(v_r - h, v_i))) / (2 * h)
    d_vi = (np.array(weighted(v_r, v_i + h)) - np.array(weighted(v_r, v_i - h))) / (2 * h)
    assert np.isclose(h_rr[0], d_vr[0], rtol=1e-5)
    assert np.isclose(h_ri[0], d_vr[1], rtol=1e-5)
    assert np.isclose(h_ri[0], d_vi[0], rtol=1e-5)
    assert np.isclose(-h_rr[0], d_vi[1], rtol=1e-5)
    print(f"✓ h_rr={h_rr[0]:.4f} h_ri={h_ri[0]:.4f}")
    return True


def test_voltage_collapse():
    print_section("Voltage Collapse")
    with pytest.raises(VoltageCollapseError) as info:
        load_current(np.array([1.0, 1e-5]), np.array([0.0, 0.0]), np.array([1.0, 1.0]), np.zeros(2), labels=["a.A", "b.A"])
    assert info.value.node == "b.A"

    # Unloaded node-phases are exempt and return exact zeros
    lc = load_current(0.0, 0.0, 0.0, 0.0)
    assert lc.i_r[0] == 0.0 and lc.di_r_dvr[0] == 0.0
    print("✓ collapse raised for the loaded near-zero voltage only")
    return True


def test_valid_networks_always_stamp():
    """Any network that passes validation stamps to consistent shapes."""
    print_section("Validate-Then-Stamp Fuzz")
    rng = np.random.default_rng(77)
    stamped = rejected = 0
    for trial in range(200):
        network = radial_feeder(
            n_nodes=int(rng.integers(4, 40)),
            seed=trial,
            overloaded_lateral=bool(rng.integers(2)),
            balanced=bool(rng.integers(2)),
        )
        branches = [b.id for b in network.branches]
        for branch_id in rng.choice(branches, size=int(rng.integers(0, 3)), replace=False):
            network = network.with_branch_status(str(branch_id), BranchStatus.OPEN)
        network = network.reordered(rng.permutation([b.id for b in network.buses]).tolist())

        if validate(network):
            rejected += 1
            continue
        adm = stamp_linear(network)
        n = len(network.node_phases())
        assert adm.G.shape == adm.B.shape == (n, n)
        assert adm.load_p.shape == adm.current_base.shape == (n,)
        assert sorted(adm.index_map.values()) == list(range(n))
        assert adm.slack_rows.size == 3
        assert np.all(np.isfinite(adm.G.data)) and np.all(np.isfinite(adm.B.data))
        stamped += 1
    print(f"  {stamped} stamped, {rejected} rejected by validation")
    assert stamped > 0
    return True


def main():
    """Run all tests."""
    print_section("STAMP TEST SUITE")

    tests = [
        ("Two-Bus Stamp", test_two_bus_matrices),
        ("Symmetry", test_symmetry_and_zero_row_sums),
        ("Capacitor and Open Switch", test_capacitor_and_open_branch),
        ("Flat Start", test_flat_start_angles),
        ("Load Current Partials", test_load_current_partials),
        ("Load Hessian", test_load_hessian_matches_differences),
        ("Voltage Collapse", test_voltage_collapse),
        ("Validate-Then-Stamp Fuzz", test_valid_networks_always_stamp),
    ]

    results = []
    for test_name, test_func in tests:
        try:
            results.append((test_name, test_func()))
        except Exception as e:
            print(f"\n✗ FATAL ERROR in {test_name}: {e}")
            results.append((test_name, False))

    print_section("TEST SUMMARY")
    passed = sum(1 for _, result in results if result)
    for test_name, result in results:
        print(f"{'✓ PASS' if result else '✗ FAIL'}: {test_name}")
    print(f"\nTotal: {passed}/{len(results)} tests passed")


if __name__ == "__main__":
    main()
