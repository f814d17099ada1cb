"""
Tests for the Newton / interior-point engine: settings, KKT assembly,
linear solves, diode limiting and full solves against analytic oracles.

The 2-bus analog (slack 1 pu, line g = 10 pu, real load P) solves
10 V^2 - 10 V + P = 0. For P = 3 there is no real root; the smallest
infeasibility current is 2*sqrt(30) - 10 at V = sqrt(0.3).

Run with `pytest test_engine.py` or `python test_engine.py`.
"""

import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np
import pytest
from scipy import sparse

from src.engine import (
    DualVars,
    EngineError,
    InfeasibilityVars,
    KktAssembler,
    KktSystem,
    MaxIterationsError,
    NonInteriorIterateError,
    SettingsError,
    SingularSystemError,
    SolveMode,
    SolverSettings,
    StateVector,
    Step,
    assemble_kkt_l1,
    assemble_kkt_l2,
    assemble_tpf,
    correct_l2_inertia,
    diode_limit,
    fraction_to_boundary,
    inertia,
    iterate_to_convergence,
    newton_step,
    nonzero_support,
    reduced_size,
    solve_sparse,
    voltage_step_limit,
)
from src.model import Phase, four_bus_feeder, two_bus_analog
from src.stamp import flat_start, stamp_linear

V_FEASIBLE = (10 + math.sqrt(60)) / 20
V_NOSE = math.sqrt(0.3)
IF_OVERLOAD = 2 * math.sqrt(30) - 10


def print_section(title: str):
    """Print a formatted section header."""
    print(f"\n{'='*60}")
    print(f"{title}")
    print('='*60)


def _state_at(adm, load_voltage: float) -> StateVector:
    v_r, v_i = flat_start(adm)
    v_r[adm.row("load", Phase.A)] = load_voltage
    return StateVector(v_r, v_i)


# Settings

def test_settings_defaults_and_validation():
    print_section("Solver Settings")
    settings = SolverSettings()
    assert settings.tolerance == 1e-6
    assert settings.max_iterations == 500
    assert settings.if_threshold == 1e-3
    assert (settings.eps_initial, settings.eps_reduction, settings.eps_floor) == (1e-1, 0.1, 1e-8)
    assert settings.sigma == 0.95

    for bad in ({"sigma": 1.0}, {"tolerance": -1.0}, {"eps_floor": 1.0}, {"max_iterations": 0}):
        with pytest.raises(SettingsError):
            settings.with_overrides(**bad)
    with pytest.raises(SettingsError) as info:
        settings.with_overrides(tolerence=1e-3)
    assert info.value.field == "tolerence"

    # Switches use the fixed model admittance; there is no setting for it
    with pytest.raises(SettingsError) as info:
        settings.with_overrides(switch_admittance=1e6)
    assert info.value.field == "switch_admittance"
    with pytest.raises(SettingsError) as info:
        settings.with_overrides(regularization_initial=1e3, regularization_max=1.0)
    assert info.value.field == "regularization_initial"
    assert settings.with_overrides(stall_iterations=25.0).stall_iterations == 25

    # None means "keep the default"
    assert settings.with_overrides(tolerance=None) == settings
    print("✓ defaults match and invalid overrides are rejected")
    return True


def test_settings_file():
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "settings.json"
        path.write_text(json.dumps({"tolerance": 1e-8, "max_iterations": 40}))
        settings = SolverSettings.from_file(path)
        assert settings.tolerance == 1e-8 and settings.max_iterations == 40

        previous = os.environ.get("TPIA_SETTINGS_FILE")
        os.environ["TPIA_SETTINGS_FILE"] = str(path)
        try:
            assert SolverSettings.from_env() == settings
        finally:
            if previous is None:
                del os.environ["TPIA_SETTINGS_FILE"]
            else:
                os.environ["TPIA_SETTINGS_FILE"] = previous

        path.write_text("[1, 2]")
        with pytest.raises(SettingsError):
            SolverSettings.from_file(path)
    return True


# KKT assembly

def test_tpf_residual_oracles():
    print_section("TPF Residual")
    adm = stamp_linear(two_bus_analog(load_pu=1.0))
    assembler = KktAssembler(adm)
    state = assembler.balance_slack(_state_at(adm, V_FEASIBLE))
    system = assemble_tpf(adm, state)
    print(f"  residual at V={V_FEASIBLE:.6f}: {system.residual_norm:.2e}")
    assert system.residual_norm < 1e-10

    unloaded = stamp_linear(two_bus_analog(load_pu=0.0))
    flat = KktAssembler(unloaded).balance_slack(StateVector(*flat_start(unloaded)))
    assert assemble_tpf(unloaded, flat).residual_norm < 1e-12
    return True


def test_jacobian_matches_differences():
    """The exact Jacobian agrees with central differences of c(x)."""
    print_section("Jacobian Check")
    adm = stamp_linear(four_bus_feeder())
    assembler = KktAssembler(adm)
    rng = np.random.default_rng(1)
    v_r, v_i = flat_start(adm)
    state = StateVector(v_r * 0.97 + 0.01 * rng.standard_normal(adm.n), v_i * 0.97, rng.standard_normal(3), rng.standard_normal(3))

    jac = assembler.jacobian(state).toarray()
    x0 = state.to_array()
    h = 1e-6
    numeric = np.zeros_like(jac)
    for k in range(x0.size):
        plus, minus = x0.copy(), x0.copy()
        plus[k] += h
        minus[k] -= h
        numeric[:, k] = (
            assembler.constraints(StateVector.from_array(plus, adm.n))
            - assembler.constraints(StateVector.from_array(minus, adm.n))
        ) / (2 * h)
    error = np.max(np.abs(jac - numeric))
    print(f"  max |J - J_fd| = {error:.2e}")
    assert error < 1e-5
    return True


def test_l2_rows():
    print_section("L2 Assembly")
    adm = stamp_linear(two_bus_analog(load_pu=3.0))
    row = adm.row("load", Phase.A)
    state = KktAssembler(adm).balance_slack(_state_at(adm, 0.8))
    lam = np.zeros(2 * adm.n + 6)
    lam[row], lam[adm.n + row] = 0.3, -0.2
    infeas = InfeasibilityVars(SolveMode.L2, [0.5, 0.1])
    system = assemble_kkt_l2(adm, state, infeas, DualVars(lam), [row])
    # i_f - lambda on the source rows
    assert np.allclose(system.block("infeas"), [0.5 - 0.3, 0.1 + 0.2])
    assert system.matrix.shape[0] == system.matrix.shape[1] == system.index.size

    # Feasible network at its power-flow solution with zero sources and duals
    feasible = stamp_linear(two_bus_analog(load_pu=1.0))
    solved = KktAssembler(feasible).balance_slack(_state_at(feasible, V_FEASIBLE))
    rows = [feasible.row("load", Phase.A)]
    system = assemble_kkt_l2(
        feasible, solved, InfeasibilityVars.zeros(SolveMode.L2, 1), DualVars(np.zeros(2 * feasible.n + 6)), rows
    )
    assert system.residual_norm < 1e-6
    print("✓ i_f - lambda rows and zero residual at a feasible solution")
    return True


def test_l1_rows_and_interior_check():
    print_section("L1 Assembly")
    adm = stamp_linear(two_bus_analog(load_pu=3.0))
    row = adm.row("load", Phase.A)
    state = KktAssembler(adm).balance_slack(_state_at(adm, 0.8))
    lam = np.zeros(2 * adm.n + 6)
    z = np.array([0.4, 0.1, 0.2, 0.3])
    mu = np.array([0.5, 1.5, 0.9, 1.1])
    eps = 1e-2
    system = assemble_kkt_l1(adm, state, InfeasibilityVars(SolveMode.L1, z), DualVars(lam, mu), eps, [row])
    assert np.allclose(system.block("mu"), mu * z - eps)
    # 1 - (+-lambda) - mu with lambda = 0
    assert np.allclose(system.block("infeas"), 1.0 - mu)

    with pytest.raises(NonInteriorIterateError) as info:
        assemble_kkt_l1(adm, state, InfeasibilityVars(SolveMode.L1, [0.4, 0.0, 0.2, 0.3]), DualVars(lam, mu), eps, [row])
    assert "R-" in info.value.variable
    print("✓ complementarity rows are mu * z - eps; boundary iterate rejected")
    return True


# Linear solves

def test_newton_step_examples():
    print_section("Newton Step")
    r = np.array([1.0, -2.0, 3.0])
    direction = newton_step(KktSystem(sparse.identity(3), r)).direction
    assert np.allclose(direction, -r)

    with pytest.raises(SingularSystemError):
        newton_step(KktSystem(sparse.csr_matrix([[1.0, 2.0], [2.0, 4.0]]), np.array([1.0, 1.0])))

    rng = np.random.default_rng(50)
    a = rng.standard_normal((50, 50))
    spd = a @ a.T + 50 * np.eye(50)
    rhs = rng.standard_normal(50)
    d = newton_step(KktSystem(sparse.csr_matrix(spd), rhs)).direction
    assert np.linalg.norm(spd @ d + rhs) <= 1e-10 * np.linalg.norm(rhs)
    print("✓ identity, singular and SPD examples")
    return True


def test_empty_rows_are_dropped():
    matrix = sparse.csr_matrix(np.array([[2.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 4.0]]))
    assert reduced_size(matrix) == 2
    result = solve_sparse(matrix, np.array([2.0, 0.0, 8.0]))
    assert np.allclose(result.direction, [1.0, 0.0, 2.0])
    assert result.size == 2
    return True


def test_ill_conditioned_names_variable():
    matrix = sparse.csr_matrix(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 1.0], [0.0, 1.0, 1.0 + 1e-10]]))
    with pytest.raises(SingularSystemError) as info:
        solve_sparse(matrix, np.ones(3), ["a", "b", "c"], condition_limit=1e8)
    assert info.value.variable in ("b", "c")
    assert info.value.condition > 1e8
    return True


def test_inertia_examples():
    print_section("Inertia")
    assert inertia(sparse.diags([2.0, -1.0, 0.0])) == (1, 1, 1)
    # Saddle-point matrix [[1, 1], [1, 0]] has one eigenvalue of each sign
    assert inertia(sparse.csr_matrix([[1.0, 1.0], [1.0, 0.0]])) == (1, 1, 0)
    assert inertia(sparse.csr_matrix((0, 0))) == (0, 0, 0)

    rng = np.random.default_rng(7)
    q, _ = np.linalg.qr(rng.standard_normal((12, 12)))
    eigenvalues = np.array([5.0, 3.0, 1e-3, 2.0, 7.0, -4.0, -1e-2, -6.0, 1.0, 9.0, -2.0, 4.0])
    matrix = q @ np.diag(eigenvalues) @ q.T
    assert inertia(sparse.csr_matrix((matrix + matrix.T) / 2)) == (8, 4, 0)
    print("✓ diagonal, saddle-point and rotated examples")
    return True


def test_l2_inertia_correction():
    print_section("L2 Inertia Correction")
    adm = stamp_linear(two_bus_analog(load_pu=3.0))
    assembler = KktAssembler(adm)
    settings = SolverSettings()
    row = adm.row("load", Phase.A)
    state = assembler.balance_slack(_state_at(adm, 0.3))
    lam = np.zeros(2 * adm.n + 6)
    lam[row] = 1e3
    infeas = InfeasibilityVars.zeros(SolveMode.L2, assembler.subset_size)
    system = assembler.assemble_l2(state, infeas, DualVars(lam))

    keep = nonzero_support(system.matrix)
    primal = int(np.count_nonzero(keep < system.index.slice("infeas").stop))
    reduced = sparse.csr_matrix(system.matrix)[keep][:, keep]
    assert inertia(reduced)[0] < primal

    corrected, shift = correct_l2_inertia(assembler, system, settings, 0.0)
    assert settings.regularization_initial <= shift <= settings.regularization_max
    assert np.array_equal(corrected.residual, system.residual)
    assert inertia(sparse.csr_matrix(corrected.matrix)[keep][:, keep])[0] >= primal
    print(f"✓ shift {shift:.1e} restores {primal} positive eigenvalues")

    # Feasible solution with zero duals needs no shift
    feasible = stamp_linear(two_bus_analog(load_pu=1.0))
    feasible_assembler = KktAssembler(feasible)
    solved = feasible_assembler.balance_slack(_state_at(feasible, V_FEASIBLE))
    system = feasible_assembler.assemble_l2(
        solved,
        InfeasibilityVars.zeros(SolveMode.L2, feasible_assembler.subset_size),
        DualVars(np.zeros(2 * feasible.n + 6)),
    )
    corrected, shift = correct_l2_inertia(feasible_assembler, system, settings, 0.0)
    assert shift == 0.0
    assert corrected is system
    return True


# Limiting

def test_diode_limit_examples():
    print_section("Diode Limiting")
    assert fraction_to_boundary(np.array([1.0, 2.0]), np.array([0.5, 0.0]), 0.95) == 1.0
    assert np.isclose(fraction_to_boundary(np.array([1.0]), np.array([-2.0]), 0.95), 0.475)
    assert np.isclose(fraction_to_boundary(np.array([1.0, 0.1]), np.array([-2.0, -1.0]), 0.95), 0.095)

    infeas = InfeasibilityVars(SolveMode.L1, [1.0, 1.0, 1.0, 1.0])
    duals = DualVars(np.zeros(8), [1.0, 0.1, 1.0, 1.0])
    step = Step(np.zeros(4), np.zeros(4), np.zeros(8), np.array([-2.0, -1.0, 0.0, 0.0]))
    alpha = diode_limit(duals, infeas, step, 0.95)
    assert np.isclose(alpha, 0.095)
    # Every limited variable keeps (1 - sigma) of its value
    assert np.all(duals.mu + alpha * step.mu >= 0.05 * duals.mu - 1e-15)
    print(f"✓ alpha = {alpha}")
    return True


def test_voltage_step_cap():
    step = Step(np.array([1.2, 0.0, 1.6, 0.0]), np.zeros(0), np.zeros(0), np.zeros(0))
    # |dV| = 2 at the first node-phase
    assert np.isclose(voltage_step_limit(step, 2, 0.5), 0.25)
    assert voltage_step_limit(step, 2, 5.0) == 1.0
    return True


# Full solves

def test_tpf_two_bus_oracle():
    print_section("TPF 2-Bus Oracle")
    adm = stamp_linear(two_bus_analog(load_pu=1.0))
    result = iterate_to_convergence(adm, SolveMode.TPF)
    v = result.state.voltage[adm.row("load", Phase.A)]
    print(f"  V = {v.real:.6f} in {result.iterations} iterations")
    assert result.converged
    assert abs(v - V_FEASIBLE) < 1e-8
    assert result.audit.primal_feasibility <= 1e-5
    return True


def test_tpf_overloaded_fails():
    settings = SolverSettings(max_iterations=60)
    with pytest.raises(MaxIterationsError) as info:
        iterate_to_convergence(two_bus_analog(load_pu=3.0), SolveMode.TPF, settings)
    assert info.value.result.converged is False
    assert info.value.result.iterations == 60
    return True


def test_l2_two_bus_oracle():
    print_section("L2 2-Bus Oracle")
    settings = SolverSettings()
    adm = stamp_linear(two_bus_analog(load_pu=3.0))
    result = iterate_to_convergence(adm, SolveMode.L2, settings)
    row = adm.row("load", Phase.A)
    print(f"  i_f = {result.infeas.if_r[0]:.6f}, V = {result.state.v_r[row]:.6f} ({result.iterations} iterations)")
    assert result.converged
    assert abs(result.infeas.if_r[0] - IF_OVERLOAD) < 1e-5
    assert abs(result.infeas.if_i[0]) < 1e-5
    assert abs(result.state.v_r[row] - V_NOSE) < 1e-5

    # Stationarity in i_f: i_f = lambda on the source rows
    assert result.audit.stationarity_if <= 10 * settings.tolerance
    assert abs(result.duals.lam_r[row] - result.infeas.if_r[0]) <= 10 * settings.tolerance
    return True


def test_l1_two_bus_oracle():
    print_section("L1 2-Bus Oracle")
    adm = stamp_linear(two_bus_analog(load_pu=3.0))
    result = iterate_to_convergence(adm, SolveMode.L1)
    row = adm.row("load", Phase.A)
    z = result.infeas.components
    print(f"  R+ - R- = {result.infeas.if_r[0]:.6f}, eps = {result.eps:.1e} ({result.iterations} iterations)")
    assert result.converged
    assert result.eps == pytest.approx(1e-8)
    assert abs(result.infeas.if_r[0] - IF_OVERLOAD) < 1e-3
    assert np.all(z > 0) and np.all(result.duals.mu > 0)

    # Dual bound on the source rows; R+ carries the current so lambda_R -> +1
    lam_r = result.duals.lam_r[row]
    lam_i = result.duals.lam_i[row]
    assert abs(lam_r) <= 1 + 1e-6 and abs(lam_i) <= 1 + 1e-6
    assert abs(lam_r - 1.0) < 1e-3
    return True


def test_feasible_four_bus_equivalence():
    """TPF, L2 and L1 agree on a feasible feeder and find no infeasibility."""
    print_section("Feasible Four-Bus")
    adm = stamp_linear(four_bus_feeder())
    tpf = iterate_to_convergence(adm, SolveMode.TPF)
    print(f"  tpf: {tpf.iterations} iterations")
    assert tpf.converged and tpf.iterations <= 10

    l2 = iterate_to_convergence(adm, SolveMode.L2)
    assert np.max(l2.infeas.magnitude) < 1e-3
    assert np.max(np.abs(l2.state.voltage - tpf.state.voltage)) < 1e-6

    l1 = iterate_to_convergence(adm, SolveMode.L1)
    assert np.max(l1.infeas.magnitude) < 1e-3
    assert np.max(np.abs(l1.state.voltage - tpf.state.voltage)) < 1e-5
    print(f"  l2: {l2.iterations} iterations, l1: {l1.iterations} iterations")
    return True


def test_bus_order_does_not_matter():
    network = four_bus_feeder(load_scale=1.5)
    a = iterate_to_convergence(network, SolveMode.L2)
    b = iterate_to_convergence(network.reordered(["n4", "n2", "n3", "n1"]), SolveMode.L2)
    assert np.max(np.abs(a.state.voltage - b.state.voltage)) <= 1e-8
    assert np.max(np.abs(a.infeas.components - b.infeas.components)) <= 1e-8
    return True


def test_solve_errors_and_progress():
    adm = stamp_linear(two_bus_analog(load_pu=1.0))
    with pytest.raises(EngineError) as info:
        iterate_to_convergence(adm, SolveMode.L2, subset_rows=[])
    assert info.value.code == "empty_subset"

    with pytest.raises(EngineError) as info:
        iterate_to_convergence(adm, SolveMode.TPF, initial_state=StateVector(np.ones(2), np.zeros(2)))
    assert info.value.code == "state_mismatch"

    seen = []
    result = iterate_to_convergence(adm, SolveMode.TPF, progress_callback=lambda *args: seen.append(args))
    assert len(seen) == result.iterations
    assert seen[0][0] == "newton" and seen[0][2]["iteration"] == 1
    return True


def main():
    """Run all tests."""
    print_section("ENGINE TEST SUITE")

    tests = [
        ("Solver Settings", test_settings_defaults_and_validation),
        ("Settings File", test_settings_file),
        ("TPF Residual", test_tpf_residual_oracles),
        ("Jacobian Check", test_jacobian_matches_differences),
        ("L2 Assembly", test_l2_rows),
        ("L1 Assembly", test_l1_rows_and_interior_check),
        ("Newton Step", test_newton_step_examples),
        ("Empty Rows Dropped", test_empty_rows_are_dropped),
        ("Ill-Conditioned Diagnostic", test_ill_conditioned_names_variable),
        ("Inertia", test_inertia_examples),
        ("L2 Inertia Correction", test_l2_inertia_correction),
        ("Diode Limiting", test_diode_limit_examples),
        ("Voltage Step Cap", test_voltage_step_cap),
        ("TPF 2-Bus Oracle", test_tpf_two_bus_oracle),
        ("TPF Overloaded", test_tpf_overloaded_fails),
        ("L2 2-Bus Oracle", test_l2_two_bus_oracle),
        ("L1 2-Bus Oracle", test_l1_two_bus_oracle),
        ("Feasible Four-Bus", test_feasible_four_bus_equivalence),
        ("Bus Order", test_bus_order_does_not_matter),
        ("Errors and Progress", test_solve_errors_and_progress),
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
