"""
Tests for network ingest and solution output: canonical documents, the GLM
subset importer and the json/csv/dot writers.

Run with `pytest test_ingest.py` or `python test_ingest.py`.
"""

import io
import json
import random
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from src.analysis import solve_tpia
from src.ingest import (
    CSV_COLUMNS,
    CanonicalSemanticError,
    CanonicalSyntaxError,
    GlmParseError,
    SingularImpedanceError,
    UnsupportedFormatError,
    detect_format,
    format_from_path,
    network_fingerprint,
    parse_canonical,
    parse_glm_subset,
    parse_value,
    read_network,
    read_solution,
    write_canonical,
    write_solution,
    write_solution_file,
)
from src.model import BranchKind, BranchStatus, NetworkModel, Phase, four_bus_feeder, radial_feeder, two_bus_analog

SAMPLE_GLM = """\
// three-bus sample feeder
#set relax_naming_rules=1
module powerflow {
    solver_method NR;
}
clock {
    starttime '2000-01-01 0:00:00';
}

object line_configuration {
    name lc1;
    z11 0.4576+1.0780j;
    z12 0.1560+0.5017j;
    z13 0.1535+0.3849j;
    z21 0.1560+0.5017j;
    z22 0.4666+1.0482j;
    z23 0.1580+0.4236j;
    z31 0.1535+0.3849j;
    z32 0.1580+0.4236j;
    z33 0.4615+1.0651j;
    c11 5.6765;
    c22 5.9809;
    c33 5.3971;
}

object transformer_configuration {
    name tc1;
    connect_type WYE_WYE;
    power_rating 6000;
    impedance 0.01+0.06j;
}

object node {
    name n1;
    phases ABCN;
    bustype SWING;
    nominal_voltage 7199.558;
}

object node { name n2; phases ABCN; nominal_voltage 7199.558; }
object node { name n3; phases ABCN; nominal_voltage 2401.777; }
object node { name n4; phases ABCN; nominal_voltage 2401.777; }

object overhead_line {
    name l12;
    phases ABCN;
    from n1;
    to n2;
    length 2000;
    configuration lc1;
}

object transformer {
    name t23;
    phases ABCN;
    from n2;
    to n3;
    configuration tc1;
}

object switch {
    name s34;
    phases ABCN;
    from n3;
    to n4;
    status CLOSED;
}

object load {
    name ld4;
    parent n4;
    phases ABCN;
    nominal_voltage 2401.777;
    constant_power_A 100000+50000j;
    constant_power_B 100000+50000j;
    constant_power_C 100000+50000j;
}

object capacitor {
    name cap4;
    parent n4;
    phases ABCN;
    capacitor_A 50000;
    capacitor_B 50000;
    capacitor_C 50000;
}
"""


def print_section(title: str):
    """Print a formatted section header."""
    print(f"\n{'='*60}")
    print(f"{title}")
    print('='*60)


def _minimal_document(**extra) -> dict:
    doc = json.loads(write_canonical(two_bus_analog(load_pu=1.0)))
    doc.update(extra)
    return doc


# Canonical format

def test_canonical_round_trip():
    print_section("Canonical Round Trip")
    for network in (four_bus_feeder(), radial_feeder(n_nodes=8, seed=3), two_bus_analog(load_pu=2.0)):
        text = write_canonical(network)
        parsed = parse_canonical(text)
        assert parsed == network
        assert write_canonical(parsed) == text
        print(f"✓ {network.name or 'two_bus'}: {len(network.buses)} buses survive a round trip")

    rng = np.random.default_rng(145)
    for trial in range(100):
        network = radial_feeder(
            n_nodes=int(rng.integers(4, 30)),
            seed=int(rng.integers(1_000_000)),
            overloaded_lateral=bool(rng.integers(2)),
            balanced=bool(rng.integers(2)),
        )
        if rng.integers(2):
            opened = network.branches[int(rng.integers(len(network.branches)))].id
            network = network.with_branch_status(opened, BranchStatus.OPEN)
        network = network.reordered(rng.permutation([b.id for b in network.buses]).tolist())
        text = write_canonical(network)
        assert parse_canonical(text) == network, f"trial {trial}"
        assert write_canonical(parse_canonical(text)) == text
    print("✓ 100 randomized feeders survive a round trip")
    return True


def test_canonical_impedance_entries():
    print_section("Canonical Impedance Entries")
    doc = {
        "version": 1,
        "name": "impedance",
        "buses": [
            {"id": "a", "phases": "ABC", "nominal_voltage": 2400.0, "kind": "slack"},
            {"id": "b", "phases": "AB", "nominal_voltage": 2400.0},
        ],
        "branches": [
            {
                "id": "ab",
                "from": "a",
                "to": "b",
                "phases": "AB",
                "r": [[0.2, 0.05, 0], [0.05, 0.2, 0], [0, 0, 0]],
                "x": [[0.4, 0.1, 0], [0.1, 0.4, 0], [0, 0, 0]],
            },
            {"id": "tie", "from": "a", "to": "b", "kind": "switch", "status": "open", "phases": "AB"},
        ],
        "loads": [{"id": "ld", "bus": "b", "p": [1000, 2000, 0], "q": [0, 0, 0]}],
    }
    network = parse_canonical(json.dumps(doc))
    line = network.branches[0]
    expected = np.zeros((3, 3), dtype=complex)
    z = np.array([[0.2 + 0.4j, 0.05 + 0.1j], [0.05 + 0.1j, 0.2 + 0.4j]])
    expected[:2, :2] = np.linalg.inv(z)
    assert np.allclose(line.series_admittance, expected)
    assert network.branches[1].kind == BranchKind.SWITCH
    assert network.branches[1].status == BranchStatus.OPEN
    assert network.bus("b").phases == frozenset({Phase.A, Phase.B})
    print("✓ r/x matrices are inverted on the branch phases")

    doc["branches"][0]["r"] = [[0, 0, 0]] * 3
    doc["branches"][0]["x"] = [[0, 0, 0]] * 3
    with pytest.raises(SingularImpedanceError) as exc:
        parse_canonical(json.dumps(doc))
    assert exc.value.code == "singular_impedance"
    assert exc.value.element == "ab"
    print("✓ Singular impedance is rejected")
    return True


def test_canonical_errors():
    print_section("Canonical Errors")

    with pytest.raises(CanonicalSyntaxError) as exc:
        parse_canonical('{"version": 1,\n  "buses": [}')
    assert exc.value.code == "syntax"
    assert exc.value.line == 2
    assert exc.value.column > 0
    print(f"✓ Syntax error located: {exc.value.message}")

    with pytest.raises(CanonicalSyntaxError):
        parse_canonical("[1, 2, 3]")

    doc = _minimal_document()
    doc.pop("version")
    with pytest.raises(CanonicalSemanticError) as exc:
        parse_canonical(json.dumps(doc))
    assert exc.value.code == "missing_version"

    with pytest.raises(CanonicalSemanticError) as exc:
        parse_canonical(json.dumps(_minimal_document(version=7)))
    assert exc.value.code == "unsupported_version"
    print("✓ Version key is required and checked")

    text = json.dumps(_minimal_document(comment="drawn by hand"))
    with pytest.raises(CanonicalSemanticError) as exc:
        parse_canonical(text)
    assert exc.value.code == "unknown_key"
    assert parse_canonical(text, strict=False) == two_bus_analog(load_pu=1.0)
    print("✓ Unknown keys: rejected when strict, ignored when lenient")

    doc = _minimal_document()
    doc["buses"][0]["kind"] = "load"
    with pytest.raises(CanonicalSemanticError) as exc:
        parse_canonical(json.dumps(doc))
    assert exc.value.code == "no_slack"
    unchecked = parse_canonical(json.dumps(doc), check=False)
    assert isinstance(unchecked, NetworkModel)
    print("✓ Network invariants are enforced unless check=False")

    doc = _minimal_document()
    doc["loads"][0]["p"] = [1.0, 2.0]
    with pytest.raises(CanonicalSemanticError):
        parse_canonical(json.dumps(doc))
    return True


def test_fingerprint():
    print_section("Network Fingerprint")
    a = network_fingerprint(four_bus_feeder())
    b = network_fingerprint(four_bus_feeder())
    c = network_fingerprint(four_bus_feeder(load_scale=1.5))
    assert a == b
    assert a != c
    assert len(a) == 64
    print(f"✓ Fingerprint {a[:12]}... is stable and load-sensitive")
    return True


# GLM subset

def test_glm_sample_feeder():
    print_section("GLM Sample Feeder")
    network = parse_glm_subset(SAMPLE_GLM, name="sample")
    assert network.name == "sample"
    assert [b.id for b in network.buses] == ["n1", "n2", "n3", "n4"]
    assert network.bus("n1").is_slack
    kinds = {b.id: b.kind for b in network.branches}
    assert kinds == {"l12": BranchKind.LINE, "t23": BranchKind.TRANSFORMER, "s34": BranchKind.SWITCH}

    line = next(b for b in network.branches if b.id == "l12")
    z = np.array([
        [0.4576 + 1.0780j, 0.1560 + 0.5017j, 0.1535 + 0.3849j],
        [0.1560 + 0.5017j, 0.4666 + 1.0482j, 0.1580 + 0.4236j],
        [0.1535 + 0.3849j, 0.1580 + 0.4236j, 0.4615 + 1.0651j],
    ]) * (2000 / 5280)
    assert np.allclose(line.series_admittance, np.linalg.inv(z))
    assert np.any(line.shunt_admittance != 0)
    print("✓ Line impedance scales with length in miles")

    (load,) = network.loads
    assert load.bus == "n4"
    assert load.id == "ld4"
    assert load.p == (1e5, 1e5, 1e5)
    assert load.q == (5e4, 5e4, 5e4)
    (cap,) = network.shunts
    assert cap.bus == "n4"
    assert cap.susceptance[0] == pytest.approx(50000 / 2401.777 ** 2)
    print("✓ Child load and capacitor attach to their parent bus")
    return True


def test_glm_line_length_units():
    def series(length: str) -> np.ndarray:
        network = parse_glm_subset(SAMPLE_GLM.replace("length 2000;", f"length {length};"))
        return next(b for b in network.branches if b.id == "l12").series_admittance

    assert np.allclose(series("0.5 mile"), series("2640 ft"))
    assert np.allclose(series("2640"), series("2640 ft"))
    assert np.allclose(series("1 km"), series(f"{1000 / 0.3048} Feet"))

    with pytest.raises(GlmParseError) as exc:
        parse_glm_subset(SAMPLE_GLM.replace("length 2000;", "length 3 furlong;"))
    assert exc.value.code == "semantic"
    assert "furlong" in str(exc.value)
    return True


def test_parse_value():
    print_section("GLM Values")
    assert parse_value("7199.558") == 7199.558
    assert parse_value("1+2j") == complex(1, 2)
    assert parse_value("1-2i") == complex(1, -2)
    assert parse_value("2400 V") == 2400.0
    polar = parse_value("100+90d")
    assert polar.real == pytest.approx(0.0, abs=1e-9)
    assert polar.imag == pytest.approx(100.0)
    assert parse_value("2+0.5r") == pytest.approx(complex(2 * np.cos(0.5), 2 * np.sin(0.5)))
    with pytest.raises(ValueError):
        parse_value("CLOSED")
    print("✓ Rectangular, polar and unit-suffixed values parse")
    return True


def test_glm_errors():
    print_section("GLM Errors")

    nested = SAMPLE_GLM.replace("    status CLOSED;", "    object node { name inner; };")
    with pytest.raises(GlmParseError) as exc:
        parse_glm_subset(nested)
    assert exc.value.code == "nested_object"
    print("✓ Nested objects are rejected")

    regulated = SAMPLE_GLM + "object regulator { name r1; from n3; to n4; }\nschedule s1 { * * * * * 1.0; }\n"
    with pytest.raises(GlmParseError) as exc:
        parse_glm_subset(regulated)
    assert exc.value.code == "unsupported_construct"
    assert exc.value.constructs == ["regulator", "schedule"]
    print(f"✓ Unsupported constructs listed: {exc.value.constructs}")

    zip_load = SAMPLE_GLM.replace("constant_power_C 100000+50000j;", "constant_impedance_C 50+10j;")
    with pytest.raises(GlmParseError) as exc:
        parse_glm_subset(zip_load)
    assert exc.value.code == "unsupported_construct"
    assert exc.value.constructs == ["load.constant_impedance_C"]

    delta = SAMPLE_GLM.replace("WYE_WYE", "DELTA_DELTA")
    with pytest.raises(GlmParseError) as exc:
        parse_glm_subset(delta)
    assert exc.value.code == "unsupported_construct"

    dangling = SAMPLE_GLM.replace("to n4;", "to n9;")
    with pytest.raises(GlmParseError) as exc:
        parse_glm_subset(dangling)
    assert exc.value.code == "dangling_reference"
    assert exc.value.constructs == ["n9"]

    duplicate = SAMPLE_GLM + "object node { name n2; phases ABCN; nominal_voltage 7199.558; }\n"
    with pytest.raises(GlmParseError) as exc:
        parse_glm_subset(duplicate)
    assert exc.value.code == "duplicate_name"

    with pytest.raises(GlmParseError) as exc:
        parse_glm_subset("object node {\n name n1;\n phases ABC;\n")
    assert exc.value.code == "syntax"

    no_slack = SAMPLE_GLM.replace("bustype SWING;", "")
    with pytest.raises(GlmParseError) as exc:
        parse_glm_subset(no_slack)
    assert exc.value.code == "semantic"
    print("✓ Dangling, duplicate, syntax and semantic errors carry their codes")
    return True


def test_glm_fuzz():
    print_section("GLM Fuzz")
    rng = random.Random(20240601)
    outcomes = {"network": 0, "error": 0}
    for trial in range(10_000):
        if trial % 2:
            text = bytes(rng.randrange(256) for _ in range(rng.randrange(1, 400)))
        else:
            chars = list(SAMPLE_GLM)
            for _ in range(rng.randrange(1, 12)):
                if rng.random() < 0.5:
                    chars.pop(rng.randrange(len(chars)))
                else:
                    chars.insert(rng.randrange(len(chars)), rng.choice("{};\" \n#0123456789abcdefghijklmnopqrstuvwxyz_.-+"))
            text = "".join(chars)
        try:
            result = parse_glm_subset(text)
        except GlmParseError:
            outcomes["error"] += 1
        else:
            assert isinstance(result, NetworkModel)
            outcomes["network"] += 1
    assert outcomes["error"] > 0
    print(f"✓ 10000 inputs: {outcomes['network']} networks, {outcomes['error']} parse errors, nothing else")
    return True


# Solution output

def _overloaded_report():
    return solve_tpia(two_bus_analog(load_pu=3.0), "l1")


def test_solution_csv():
    print_section("Solution CSV")
    report = _overloaded_report()
    text = write_solution(report, "csv")
    frame = pd.read_csv(io.StringIO(text), float_precision="round_trip")
    assert list(frame.columns) == CSV_COLUMNS
    assert len(frame) == len(report.node_phases)
    row = frame[(frame.bus_id == "load") & (frame.phase == "A")].iloc[0]
    original = next(r for r in report.node_phases if r.bus == "load" and r.phase == Phase.A)
    assert row.if_real == original.if_real
    assert row.v_real == original.v_real
    print(f"✓ {len(frame)} node-phase rows with full-precision values")
    return True


def test_solution_dot_and_json():
    print_section("Solution DOT and JSON")
    report = _overloaded_report()
    dot = write_solution(report, "dot")
    assert dot.startswith("graph ")
    assert '"load" [' in dot
    load_line = next(line for line in dot.splitlines() if line.strip().startswith('"load" ['))
    assert 'flagged="true"' in load_line
    assert "heat=" in load_line
    assert '"source" -- "load"' in dot
    print("✓ Flagged node carries heat annotations")

    restored = read_solution(write_solution(report, "json"))
    assert restored.to_dict() == report.to_dict()

    with pytest.raises(UnsupportedFormatError):
        write_solution(report, "xml")
    print("✓ JSON report reads back unchanged")
    return True


def test_files_and_formats():
    print_section("Files and Formats")
    assert detect_format("feeder.json") == "canonical"
    assert detect_format("IEEE13.GLM") == "glm"
    with pytest.raises(UnsupportedFormatError):
        detect_format("feeder.txt")
    assert format_from_path("out/report.csv") == "csv"
    with pytest.raises(UnsupportedFormatError):
        format_from_path("out/report")

    with tempfile.TemporaryDirectory() as tmp:
        glm_path = Path(tmp) / "sample.glm"
        glm_path.write_text(SAMPLE_GLM, encoding="utf-8")
        network = read_network(glm_path)
        assert network.name == "sample"

        json_path = Path(tmp) / "four.json"
        json_path.write_text(write_canonical(four_bus_feeder()), encoding="utf-8")
        assert read_network(json_path) == four_bus_feeder()

        with pytest.raises(UnsupportedFormatError):
            read_network(json_path, fmt="xlsx")

        report = _overloaded_report()
        out = write_solution_file(report, Path(tmp) / "nested" / "report.dot")
        assert out.read_text(encoding="utf-8") == write_solution(report, "dot")
        assert sorted(p.name for p in out.parent.iterdir()) == ["report.dot"]
    print("✓ Files are read by suffix and written atomically")
    return True


def main():
    """Run all tests."""
    print_section("INGEST TEST SUITE")

    tests = [
        ("Canonical Round Trip", test_canonical_round_trip),
        ("Canonical Impedance Entries", test_canonical_impedance_entries),
        ("Canonical Errors", test_canonical_errors),
        ("Network Fingerprint", test_fingerprint),
        ("GLM Sample Feeder", test_glm_sample_feeder),
        ("GLM Length Units", test_glm_line_length_units),
        ("GLM Values", test_parse_value),
        ("GLM Errors", test_glm_errors),
        ("GLM Fuzz", test_glm_fuzz),
        ("Solution CSV", test_solution_csv),
        ("Solution DOT and JSON", test_solution_dot_and_json),
        ("Files and Formats", test_files_and_formats),
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
