"""
Solution output formats: json (full report), csv (one row per node-phase)
and dot (feeder graph annotated with infeasibility heat).
"""

import io
import json
import math
from pathlib import Path
from typing import Optional, Union

import pandas as pd

from src.analysis.report import SolutionReport
from src.utils import atomic_write_text

from .errors import UnsupportedFormatError

SOLUTION_FORMATS = ("json", "csv", "dot")
CSV_COLUMNS = ["bus_id", "phase", "if_real", "if_imag", "if_mag", "v_real", "v_imag"]

# Floor for the log10 heat annotation of zero currents (per-unit)
LOG_FLOOR = 1e-12


def _json(report: SolutionReport) -> str:
    return json.dumps(report.to_dict(), indent=2) + "\n"


def _csv(report: SolutionReport) -> str:
    frame = pd.DataFrame(
        [
            {
                "bus_id": r.bus,
                "phase": r.phase.name,
                "if_real": r.if_real,
                "if_imag": r.if_imag,
                "if_mag": r.if_mag,
                "v_real": r.v_real,
                "v_imag": r.v_imag,
            }
            for r in report.node_phases
        ],
        columns=CSV_COLUMNS,
    )
    buffer = io.StringIO()
    frame.to_csv(buffer, index=False, float_format="%.17g", lineterminator="\n")
    return buffer.getvalue()


def _quote(text: str) -> str:
    return '"' + str(text).replace("\\", "\\\\").replace('"', '\\"') + '"'


def _dot(report: SolutionReport) -> str:
    per_node = report.node_max_if()
    per_node_pu = report.node_max_if_pu()
    heat = report.normalized_if()
    flagged = set(report.nonzero_nodes)

    lines = [f"graph {_quote(report.network_name or 'network')} {{", "  node [shape=circle];"]
    for bus, value in per_node.items():
        attrs = [
            f"if_max={_quote(repr(value))}",
            f"if_max_pu={_quote(repr(per_node_pu[bus]))}",
            f"log10_if={_quote(repr(math.log10(max(per_node_pu[bus], LOG_FLOOR))))}",
            f"heat={_quote(repr(heat[bus]))}",
        ]
        if bus in flagged:
            attrs.append('flagged="true"')
        lines.append(f"  {_quote(bus)} [{', '.join(attrs)}];")
    for edge in report.edges:
        style = ', style="dashed"' if edge.get("status") == "open" else ""
        lines.append(
            f"  {_quote(edge['from'])} -- {_quote(edge['to'])} "
            f"[id={_quote(edge['id'])}, kind={_quote(edge['kind'])}{style}];"
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


def write_solution(report: SolutionReport, fmt: str = "json") -> str:
    """
    Serialize a report.

    Args:
        report: Completed solve
        fmt: "json", "csv" or "dot"

    Returns:
        str: Document text

    Raises:
        UnsupportedFormatError: For any other format tag
    """
    writers = {"json": _json, "csv": _csv, "dot": _dot}
    if fmt not in writers:
        raise UnsupportedFormatError(fmt, SOLUTION_FORMATS)
    return writers[fmt](report)


def read_solution(text: str) -> SolutionReport:
    """Parse a json report written by write_solution."""
    return SolutionReport.from_dict(json.loads(text))


def format_from_path(path: Union[str, Path]) -> str:
    suffix = Path(path).suffix.lower().lstrip(".")
    if suffix not in SOLUTION_FORMATS:
        raise UnsupportedFormatError(suffix or "(none)", SOLUTION_FORMATS)
    return suffix


def write_solution_file(report: SolutionReport, path: Union[str, Path], fmt: Optional[str] = None) -> Path:
    """Write a report atomically; the format defaults to the file suffix."""
    return atomic_write_text(path, write_solution(report, fmt or format_from_path(path)))
