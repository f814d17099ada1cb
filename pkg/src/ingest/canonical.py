"""
Canonical network file format.

A versioned JSON document:

    {
      "version": 1,
      "name": "...",
      "base_power": 1000000.0,
      "buses":      [{"id", "phases", "nominal_voltage", "kind"}],
      "branches":   [{"id", "from", "to", "kind", "status", "tap",
                      "r", "x", "b", "phases"            (ohms / siemens), or
                      "y_series", "y_shunt"               ({"real", "imag"} blocks)}],
      "loads":      [{"id", "bus", "p", "q"}],
      "capacitors": [{"id", "bus", "b"}]
    }

Per-phase vectors are [A, B, C] lists or {"A": ..} objects. Switch and fuse
branches may omit impedance and give only "phases". The writer always emits
admittance blocks at full float precision, so parse(write(x)) == x.
"""

import hashlib
import json
from typing import Any, Dict, List

import numpy as np

from src.model import (
    Branch,
    BranchKind,
    BranchStatus,
    Bus,
    BusKind,
    Load,
    NetworkModel,
    Phase,
    ShuntCap,
    validate,
)
from src.utils import logger

from .errors import CanonicalSemanticError, CanonicalSyntaxError, SingularImpedanceError

CANONICAL_VERSION = 1

TOP_KEYS = {"version", "name", "base_power", "buses", "branches", "loads", "capacitors"}
BUS_KEYS = {"id", "phases", "nominal_voltage", "kind"}
BRANCH_KEYS = {"id", "from", "to", "kind", "status", "tap", "phases", "r", "x", "b", "y_series", "y_shunt"}
LOAD_KEYS = {"id", "bus", "p", "q"}
CAPACITOR_KEYS = {"id", "bus", "b"}


def _check_keys(entry: Dict, allowed: set, element: str, strict: bool) -> None:
    unknown = sorted(set(entry) - allowed)
    if not unknown:
        return
    if strict:
        raise CanonicalSemanticError(
            f"{element}: unknown key(s) {', '.join(unknown)}", element, "unknown_key"
        )
    logger.warning(f"[INGEST] {element}: ignoring unknown key(s) {', '.join(unknown)}")


def _require(entry: Dict, key: str, element: str) -> Any:
    if key not in entry:
        raise CanonicalSemanticError(f"{element}: missing required key '{key}'", element, "missing_key")
    return entry[key]


def _number(value: Any, element: str, key: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise CanonicalSemanticError(f"{element}: '{key}' must be a number", element, "type")
    return float(value)


def _text(value: Any, element: str, key: str) -> str:
    if not isinstance(value, str) or not value:
        raise CanonicalSemanticError(f"{element}: '{key}' must be a nonempty string", element, "type")
    return value


def _phase_vector(value: Any, element: str, key: str) -> List[float]:
    if isinstance(value, dict):
        bad = sorted(set(value) - {"A", "B", "C"})
        if bad:
            raise CanonicalSemanticError(f"{element}: '{key}' has unknown phase(s) {bad}", element, "type")
        return [_number(value.get(p.name, 0.0), element, key) for p in Phase]
    if not isinstance(value, list) or len(value) != 3:
        raise CanonicalSemanticError(f"{element}: '{key}' must list three per-phase values", element, "type")
    return [_number(v, element, key) for v in value]


def _matrix(value: Any, element: str, key: str) -> np.ndarray:
    if not isinstance(value, list) or len(value) != 3 or any(not isinstance(r, list) or len(r) != 3 for r in value):
        raise CanonicalSemanticError(f"{element}: '{key}' must be a 3x3 matrix", element, "type")
    return np.array([[_number(v, element, key) for v in row] for row in value], dtype=float)


def _complex_matrix(value: Any, element: str, key: str) -> np.ndarray:
    if not isinstance(value, dict) or set(value) - {"real", "imag"}:
        raise CanonicalSemanticError(f"{element}: '{key}' must be an object with 'real'/'imag'", element, "type")
    real = _matrix(value.get("real", [[0.0] * 3] * 3), element, key)
    imag = _matrix(value.get("imag", [[0.0] * 3] * 3), element, key)
    return real + 1j * imag


def _phases(value: Any, element: str) -> frozenset:
    if not isinstance(value, str):
        raise CanonicalSemanticError(f"{element}: 'phases' must be a string like \"ABC\"", element, "type")
    try:
        return Phase.parse_set(value)
    except ValueError as e:
        raise CanonicalSemanticError(f"{element}: {e}", element, "phases") from e


def _enum(enum_cls, value: Any, element: str, key: str):
    try:
        return enum_cls(value)
    except ValueError:
        choices = ", ".join(m.value for m in enum_cls)
        raise CanonicalSemanticError(f"{element}: '{key}' must be one of {choices}", element, key) from None


def _parse_branch(entry: Dict, element: str) -> Branch:
    branch_id = _text(_require(entry, "id", element), element, "id")
    from_bus = _text(_require(entry, "from", element), element, "from")
    to_bus = _text(_require(entry, "to", element), element, "to")
    kind = _enum(BranchKind, entry.get("kind", "line"), element, "kind")
    status = _enum(BranchStatus, entry.get("status", "closed"), element, "status")
    tap = _number(entry.get("tap", 1.0), element, "tap")

    if "y_series" in entry:
        series = _complex_matrix(entry["y_series"], element, "y_series")
        shunt = _complex_matrix(entry["y_shunt"], element, "y_shunt") if "y_shunt" in entry else None
        return Branch(branch_id, from_bus, to_bus, kind, series, shunt, tap, status)

    if kind in (BranchKind.SWITCH, BranchKind.FUSE) and "r" not in entry and "x" not in entry:
        phases = _phases(_require(entry, "phases", element), element)
        return Branch.switch(branch_id, from_bus, to_bus, phases, status == BranchStatus.CLOSED, kind)

    r = _matrix(_require(entry, "r", element), element, "r")
    x = _matrix(_require(entry, "x", element), element, "x")
    impedance = r + 1j * x
    if "phases" in entry:
        phases = _phases(entry["phases"], element)
    else:
        phases = [p for p in Phase if impedance[int(p), int(p)] != 0]
    b = _matrix(entry["b"], element, "b") if "b" in entry else None
    try:
        return Branch.from_impedance(branch_id, from_bus, to_bus, impedance, phases, b, kind, tap, status)
    except np.linalg.LinAlgError:
        raise SingularImpedanceError(branch_id) from None


def parse_canonical(text: str, strict: bool = True, check: bool = True) -> NetworkModel:
    """
    Parse a canonical network document.

    Args:
        text: Document text
        strict: Reject unknown keys (lenient mode logs a warning instead)
        check: Run validate() and reject networks with violations

    Returns:
        NetworkModel: Parsed network

    Raises:
        CanonicalSyntaxError: Malformed JSON (with line/column)
        CanonicalSemanticError: Missing version, bad values or invariant violations
        SingularImpedanceError: A branch impedance block is not invertible
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise CanonicalSyntaxError(e.msg, e.lineno, e.colno) from None
    if not isinstance(doc, dict):
        raise CanonicalSyntaxError("top level must be a JSON object", 1, 1)

    if "version" not in doc:
        raise CanonicalSemanticError("document: missing 'version' key", "document", "missing_version")
    if doc["version"] != CANONICAL_VERSION:
        raise CanonicalSemanticError(
            f"document: unsupported version {doc['version']!r} (expected {CANONICAL_VERSION})",
            "document",
            "unsupported_version",
        )
    _check_keys(doc, TOP_KEYS, "document", strict)

    def section(key: str) -> List[Dict]:
        entries = doc.get(key, [])
        if not isinstance(entries, list) or any(not isinstance(e, dict) for e in entries):
            raise CanonicalSemanticError(f"document: '{key}' must be a list of objects", "document", "type")
        return entries

    buses = []
    for k, entry in enumerate(section("buses")):
        element = f"buses[{k}]"
        _check_keys(entry, BUS_KEYS, element, strict)
        bus_id = _text(_require(entry, "id", element), element, "id")
        buses.append(Bus(
            bus_id,
            _phases(_require(entry, "phases", element), bus_id),
            _number(_require(entry, "nominal_voltage", element), bus_id, "nominal_voltage"),
            _enum(BusKind, entry.get("kind", "load"), bus_id, "kind"),
        ))

    branches = []
    for k, entry in enumerate(section("branches")):
        element = str(entry.get("id", f"branches[{k}]"))
        _check_keys(entry, BRANCH_KEYS, element, strict)
        branches.append(_parse_branch(entry, element))

    loads = []
    for k, entry in enumerate(section("loads")):
        element = str(entry.get("id", f"loads[{k}]"))
        _check_keys(entry, LOAD_KEYS, element, strict)
        loads.append(Load(
            _text(_require(entry, "bus", element), element, "bus"),
            _phase_vector(entry.get("p", [0.0] * 3), element, "p"),
            _phase_vector(entry.get("q", [0.0] * 3), element, "q"),
            str(entry.get("id", "")),
        ))

    shunts = []
    for k, entry in enumerate(section("capacitors")):
        element = str(entry.get("id", f"capacitors[{k}]"))
        _check_keys(entry, CAPACITOR_KEYS, element, strict)
        shunts.append(ShuntCap(
            _text(_require(entry, "bus", element), element, "bus"),
            _phase_vector(_require(entry, "b", element), element, "b"),
            str(entry.get("id", "")),
        ))

    network = NetworkModel(
        buses=buses,
        branches=branches,
        loads=loads,
        shunts=shunts,
        base_power=_number(doc.get("base_power", 1e6), "document", "base_power"),
        name=str(doc.get("name", "")),
    )

    if check:
        violations = validate(network)
        if violations:
            first = violations[0]
            more = f" (+{len(violations) - 1} more)" if len(violations) > 1 else ""
            raise CanonicalSemanticError(f"{first.element}: {first.reason}{more}", first.element, first.code)

    logger.debug(f"[INGEST] canonical: {len(buses)} buses, {len(branches)} branches, {len(loads)} loads")
    return network


def _complex_block(matrix: np.ndarray) -> Dict[str, List[List[float]]]:
    return {"real": np.real(matrix).tolist(), "imag": np.imag(matrix).tolist()}


def canonical_document(network: NetworkModel) -> Dict[str, Any]:
    """Canonical document as a dict, elements in network order."""
    return {
        "version": CANONICAL_VERSION,
        "name": network.name,
        "base_power": network.base_power,
        "buses": [
            {
                "id": bus.id,
                "phases": Phase.format_set(bus.phases),
                "nominal_voltage": bus.nominal_voltage,
                "kind": bus.kind.value,
            }
            for bus in network.buses
        ],
        "branches": [
            {
                "id": b.id,
                "from": b.from_bus,
                "to": b.to_bus,
                "kind": b.kind.value,
                "status": b.status.value,
                "tap": b.tap_ratio,
                "y_series": _complex_block(b.series_admittance),
                "y_shunt": _complex_block(b.shunt_admittance),
            }
            for b in network.branches
        ],
        "loads": [
            {"id": load.id, "bus": load.bus, "p": list(load.p), "q": list(load.q)}
            for load in network.loads
        ],
        "capacitors": [
            {"id": shunt.id, "bus": shunt.bus, "b": list(shunt.susceptance)}
            for shunt in network.shunts
        ],
    }


def write_canonical(network: NetworkModel) -> str:
    """
    Serialize a network as a canonical document.

    Output is deterministic: elements keep network order, floats use their
    shortest round-trip representation.
    """
    return json.dumps(canonical_document(network), indent=2) + "\n"


def network_fingerprint(network: NetworkModel) -> str:
    """SHA-256 of the canonical serialization."""
    return hashlib.sha256(write_canonical(network).encode("utf-8")).hexdigest()
