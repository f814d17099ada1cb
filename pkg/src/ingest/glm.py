"""
GridLAB-D GLM subset importer.

Understands flat `object <type> { key value; ... }` blocks of these types:
node, meter, load, capacitor, overhead_line, underground_line,
line_configuration, transformer, transformer_configuration, switch, fuse.

`#` directives, `module` and `clock` blocks are skipped with a warning.
Every other construct, nested objects included, is reported as an error;
nothing is dropped silently. Arbitrary input yields either a NetworkModel or
a GlmParseError.
"""

import cmath
import math
import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from src.model import (
    ALL_PHASES,
    Branch,
    BranchKind,
    Bus,
    BusKind,
    Load,
    NetworkModel,
    Phase,
    ShuntCap,
    validate,
)
from src.utils import logger, truncate_text

from .errors import GlmParseError

FEET_PER_MILE = 5280.0
# Feet per unit of a line length; a bare number is in feet
LENGTH_UNITS = {
    "ft": 1.0,
    "feet": 1.0,
    "foot": 1.0,
    "mile": FEET_PER_MILE,
    "miles": FEET_PER_MILE,
    "mi": FEET_PER_MILE,
    "m": 1.0 / 0.3048,
    "km": 1000.0 / 0.3048,
}
SYSTEM_FREQUENCY = 60.0

BUS_TYPES = {"node", "meter", "load", "capacitor"}
BRANCH_TYPES = {"overhead_line", "underground_line", "transformer", "switch", "fuse"}
CONFIG_TYPES = {"line_configuration", "transformer_configuration"}
SUPPORTED_TYPES = BUS_TYPES | BRANCH_TYPES | CONFIG_TYPES
SKIPPED_BLOCKS = {"module", "clock"}

_TOKEN = re.compile(r'"[^"\n]*"|\'[^\'\n]*\'|[{};]|[^\s{};]+')
_COMMENT = re.compile(r"//[^\n]*")
_COMPLEX = re.compile(
    r"^([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"(?:([+-](?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)([ijdr]))?$"
)


@dataclass
class GlmObject:
    """One parsed object block."""
    type: str
    name: str
    line: int
    attributes: Dict[str, str] = field(default_factory=dict)

    def get(self, key: str, default: Optional[str] = None) -> Optional[str]:
        return self.attributes.get(key, default)


def parse_value(text: str) -> complex:
    """
    Parse a GLM numeric value, dropping any trailing unit.

    Accepts rectangular complex values (1+2j, 1-2i) and polar values in
    degrees (100+30d) or radians (100+0.5r).

    Raises:
        ValueError: If the text is not numeric
    """
    token = text.strip().split()[0] if text.strip() else ""
    match = _COMPLEX.match(token)
    if not match:
        raise ValueError(f"'{truncate_text(text)}' is not a number")
    first = float(match.group(1))
    if match.group(2) is None:
        return complex(first, 0.0)
    second = float(match.group(2))
    suffix = match.group(3)
    if suffix in "ij":
        return complex(first, second)
    angle = math.radians(second) if suffix == "d" else second
    return cmath.rect(first, angle)


def _real(obj: GlmObject, key: str, default: Optional[float] = None) -> float:
    value = obj.get(key)
    if value is None:
        if default is None:
            raise GlmParseError(f"{obj.type} '{obj.name}' is missing '{key}'", "semantic", line=obj.line)
        return default
    try:
        return parse_value(value).real
    except ValueError as e:
        raise GlmParseError(f"{obj.type} '{obj.name}': {key} {e}", "semantic", line=obj.line) from None


def _complex(obj: GlmObject, key: str, default: complex = 0j) -> complex:
    value = obj.get(key)
    if value is None:
        return default
    try:
        return parse_value(value)
    except ValueError as e:
        raise GlmParseError(f"{obj.type} '{obj.name}': {key} {e}", "semantic", line=obj.line) from None


def _length_feet(obj: GlmObject) -> float:
    value = _real(obj, "length")
    tokens = obj.get("length").split()
    unit = tokens[1].lower() if len(tokens) > 1 else "ft"
    if unit not in LENGTH_UNITS:
        raise GlmParseError(f"{obj.type} '{obj.name}': unsupported length unit '{unit}'", "semantic", line=obj.line)
    return value * LENGTH_UNITS[unit]


def _phases(obj: GlmObject):
    value = obj.get("phases")
    if value is None:
        raise GlmParseError(f"{obj.type} '{obj.name}' is missing 'phases'", "semantic", line=obj.line)
    try:
        phases = Phase.parse_set(value)
    except ValueError as e:
        raise GlmParseError(f"{obj.type} '{obj.name}': {e}", "semantic", line=obj.line) from None
    if not phases:
        raise GlmParseError(f"{obj.type} '{obj.name}' has no A/B/C phase", "semantic", line=obj.line)
    return phases


# Tokenizer and block structure

def _tokenize(text: str) -> List[Tuple[str, int]]:
    tokens: List[Tuple[str, int]] = []
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith("#"):
            logger.warning(f"[INGEST] glm line {number}: skipping directive {truncate_text(stripped)}")
            continue
        line = _COMMENT.sub("", line)
        for match in _TOKEN.finditer(line):
            token = match.group(0)
            if len(token) >= 2 and token[0] in "\"'" and token[-1] == token[0]:
                token = token[1:-1]
            tokens.append((token, number))
    return tokens


def _skip_block(tokens, pos: int) -> int:
    """Skip `keyword ...;` or a balanced `keyword ... { ... }` starting at pos."""
    start_line = tokens[pos][1]
    depth = 0
    while pos < len(tokens):
        token = tokens[pos][0]
        if token == "{":
            depth += 1
        elif token == "}":
            depth -= 1
            if depth == 0:
                pos += 1
                if pos < len(tokens) and tokens[pos][0] == ";":
                    pos += 1
                return pos
            if depth < 0:
                break
        elif token == ";" and depth == 0:
            return pos + 1
        pos += 1
    raise GlmParseError("unterminated block", "syntax", line=start_line)


def _read_objects(tokens) -> Tuple[List[GlmObject], List[str]]:
    objects: List[GlmObject] = []
    unsupported: List[str] = []
    pos = 0
    counters: Dict[str, int] = {}

    while pos < len(tokens):
        token, line = tokens[pos]
        if token == ";":
            pos += 1
            continue
        if token in SKIPPED_BLOCKS:
            logger.warning(f"[INGEST] glm line {line}: skipping '{token}' block")
            pos = _skip_block(tokens, pos)
            continue
        if token != "object":
            if token in ("{", "}"):
                raise GlmParseError(f"unexpected '{token}'", "syntax", line=line)
            unsupported.append(token)
            pos = _skip_block(tokens, pos)
            continue

        if pos + 2 >= len(tokens):
            raise GlmParseError("incomplete object header", "syntax", line=line)
        header = tokens[pos + 1][0]
        if header in ("{", "}", ";"):
            raise GlmParseError("object without a type", "syntax", line=line)
        obj_type, _, obj_id = header.partition(":")
        pos += 2
        if tokens[pos][0] != "{":
            raise GlmParseError(f"expected '{{' after 'object {header}'", "syntax", line=line)
        pos += 1

        attributes: Dict[str, str] = {}
        statement: List[str] = []
        closed = False
        while pos < len(tokens):
            token, token_line = tokens[pos]
            if token == "object":
                raise GlmParseError(
                    f"nested object inside '{header}' is not supported",
                    "nested_object",
                    constructs=[f"{obj_type} > {tokens[pos + 1][0] if pos + 1 < len(tokens) else '?'}"],
                    line=token_line,
                )
            if token == "{":
                raise GlmParseError(f"unexpected '{{' inside '{header}'", "syntax", line=token_line)
            if token == "}":
                if statement:
                    attributes[statement[0]] = " ".join(statement[1:])
                closed = True
                pos += 1
                break
            if token == ";":
                if statement:
                    attributes[statement[0]] = " ".join(statement[1:])
                statement = []
            else:
                statement.append(token)
            pos += 1
        if not closed:
            raise GlmParseError(f"object '{header}' is not closed", "syntax", line=line)

        if obj_type not in SUPPORTED_TYPES:
            unsupported.append(obj_type)
            continue
        counters[obj_type] = counters.get(obj_type, 0) + 1
        name = attributes.pop("name", None) or (f"{obj_type}:{obj_id}" if obj_id else f"{obj_type}_{counters[obj_type]}")
        objects.append(GlmObject(obj_type, name, line, attributes))

    return objects, unsupported


# Network assembly

def _line_branch(obj: GlmObject, config: GlmObject) -> Branch:
    phases = _phases(obj)
    length_miles = _length_feet(obj) / FEET_PER_MILE
    impedance = np.zeros((3, 3), dtype=complex)
    capacitance = np.zeros((3, 3))
    for i, pi in enumerate(ALL_PHASES):
        for j, pj in enumerate(ALL_PHASES):
            key = f"{i + 1}{j + 1}"
            if pi in phases and pj in phases:
                impedance[i, j] = _complex(config, f"z{key}") * length_miles
                capacitance[i, j] = _complex(config, f"c{key}").real * length_miles
    # nF -> S
    susceptance = 2 * math.pi * SYSTEM_FREQUENCY * capacitance * 1e-9
    shunt = susceptance if np.any(susceptance) else None
    try:
        return Branch.from_impedance(obj.name, obj.get("from"), obj.get("to"), impedance, phases, shunt)
    except np.linalg.LinAlgError:
        raise GlmParseError(f"line '{obj.name}' has a singular impedance matrix", "semantic", line=obj.line) from None


def _transformer_branch(obj: GlmObject, config: GlmObject, secondary_bus: Bus) -> Branch:
    connect = (config.get("connect_type") or "WYE_WYE").upper()
    if connect != "WYE_WYE":
        raise GlmParseError(
            f"transformer_configuration '{config.name}' uses {connect}",
            "unsupported_construct",
            constructs=[f"connect_type {connect}"],
            line=config.line,
        )
    phases = _phases(obj)
    rating_va = _real(config, "power_rating") * 1e3
    if rating_va <= 0:
        raise GlmParseError(f"transformer_configuration '{config.name}' needs a positive power_rating", "semantic", line=config.line)
    if config.get("impedance") is not None:
        z_pu = _complex(config, "impedance")
    else:
        z_pu = complex(_real(config, "resistance", 0.0), _real(config, "reactance", 0.0))
    if z_pu == 0:
        raise GlmParseError(f"transformer_configuration '{config.name}' has zero impedance", "semantic", line=config.line)

    z_base = secondary_bus.nominal_voltage ** 2 / (rating_va / len(phases))
    admittance = 1.0 / (z_pu * z_base)
    series = np.zeros((3, 3), dtype=complex)
    for p in phases:
        series[int(p), int(p)] = admittance
    return Branch(obj.name, obj.get("from"), obj.get("to"), BranchKind.TRANSFORMER, series)


def _build_network(objects: List[GlmObject], name: str, base_power: float) -> NetworkModel:
    seen: Dict[str, GlmObject] = {}
    for obj in objects:
        if obj.name in seen:
            raise GlmParseError(
                f"duplicate object name '{obj.name}'", "duplicate_name", constructs=[obj.name], line=obj.line
            )
        seen[obj.name] = obj

    def reference(obj: GlmObject, key: str, kinds) -> GlmObject:
        target = obj.get(key)
        if target is None:
            raise GlmParseError(f"{obj.type} '{obj.name}' is missing '{key}'", "semantic", line=obj.line)
        found = seen.get(target)
        if found is None or found.type not in kinds:
            raise GlmParseError(
                f"{obj.type} '{obj.name}' refers to unknown {key} '{target}'",
                "dangling_reference",
                constructs=[target],
                line=obj.line,
            )
        return found

    # Child objects (with a parent) attach to their root bus
    def root(obj: GlmObject) -> GlmObject:
        visited = set()
        while obj.get("parent") is not None:
            if obj.name in visited:
                raise GlmParseError(f"parent cycle at '{obj.name}'", "semantic", line=obj.line)
            visited.add(obj.name)
            obj = reference(obj, "parent", BUS_TYPES)
        return obj

    buses: Dict[str, Bus] = {}
    for obj in objects:
        if obj.type in BUS_TYPES and obj.get("parent") is None:
            kind = BusKind.SLACK if (obj.get("bustype") or "").upper() == "SWING" else BusKind.LOAD
            buses[obj.name] = Bus(obj.name, _phases(obj), _real(obj, "nominal_voltage"), kind)

    loads: List[Load] = []
    shunts: List[ShuntCap] = []
    for obj in objects:
        if obj.type not in ("load", "capacitor"):
            continue
        host = root(obj)
        if host.name not in buses:
            raise GlmParseError(f"{obj.type} '{obj.name}' has no host bus", "dangling_reference", line=obj.line)
        if obj.type == "load":
            zip_keys = sorted(k for k in obj.attributes if k.startswith(("constant_impedance", "constant_current")))
            if zip_keys:
                raise GlmParseError(
                    f"load '{obj.name}' uses non-constant-power components",
                    "unsupported_construct",
                    constructs=[f"load.{k}" for k in zip_keys],
                    line=obj.line,
                )
            power = {}
            for phase in ALL_PHASES:
                value = _complex(obj, f"constant_power_{phase.name}") + _complex(obj, f"constant_power_{phase.name}N")
                if value != 0:
                    power[phase] = value
            if power:
                loads.append(Load.from_phase_power(host.name, power, id=obj.name))
        else:
            voltage = _real(obj, "nominal_voltage", buses[host.name].nominal_voltage)
            susceptance = []
            for phase in ALL_PHASES:
                rating = _real(obj, f"capacitor_{phase.name}", 0.0)
                switched_open = (obj.get(f"switch{phase.name}") or "CLOSED").upper() == "OPEN"
                susceptance.append(0.0 if switched_open else rating / voltage ** 2)
            if any(susceptance):
                shunts.append(ShuntCap(host.name, susceptance, id=obj.name))

    branches: List[Branch] = []
    for obj in objects:
        if obj.type not in BRANCH_TYPES:
            continue
        ends = [root(reference(obj, key, BUS_TYPES)).name for key in ("from", "to")]
        obj.attributes["from"], obj.attributes["to"] = ends
        if obj.type in ("overhead_line", "underground_line"):
            config = reference(obj, "configuration", {"line_configuration"})
            branches.append(_line_branch(obj, config))
        elif obj.type == "transformer":
            config = reference(obj, "configuration", {"transformer_configuration"})
            branches.append(_transformer_branch(obj, config, buses[ends[1]]))
        else:
            closed = (obj.get("status") or "CLOSED").upper() != "OPEN"
            kind = BranchKind.SWITCH if obj.type == "switch" else BranchKind.FUSE
            branches.append(Branch.switch(obj.name, ends[0], ends[1], _phases(obj), closed, kind))

    return NetworkModel(
        buses=tuple(buses.values()),
        branches=branches,
        loads=loads,
        shunts=shunts,
        base_power=base_power,
        name=name,
    )


def parse_glm_subset(
    text: Union[str, bytes],
    name: str = "",
    base_power: float = 1e6,
    check: bool = True,
) -> NetworkModel:
    """
    Parse a GLM document restricted to the supported subset.

    Args:
        text: GLM text (bytes are decoded as UTF-8, invalid bytes replaced)
        name: Network name
        base_power: Per-phase VA base of the resulting network
        check: Run validate() and reject networks with violations

    Returns:
        NetworkModel: Equivalent network

    Raises:
        GlmParseError: On unsupported constructs, nested objects, dangling
            references, duplicate names, syntax or semantic problems
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8", errors="replace")
    try:
        objects, unsupported = _read_objects(_tokenize(text))
        if unsupported:
            names = sorted(set(unsupported))
            raise GlmParseError(
                f"unsupported construct(s): {', '.join(names)}", "unsupported_construct", constructs=names
            )
        network = _build_network(objects, name, base_power)
        violations = validate(network) if check else []
    except GlmParseError:
        raise
    except Exception as e:
        raise GlmParseError(f"invalid GLM content: {e}", "semantic") from None

    if violations:
        first = violations[0]
        raise GlmParseError(f"{first.element}: {first.reason}", "semantic", constructs=[first.element])

    logger.debug(
        f"[INGEST] glm: {len(network.buses)} buses, {len(network.branches)} branches, {len(network.loads)} loads"
    )
    return network
