"""
Command-line entry point.

    tpia run INPUT [--mode pf|l2|l1|all] [--json OUT] [--csv OUT] [--dot OUT] ...
    tpia remediate INPUT REPORT.json [--scale S] [--output OUT.json]
    tpia batch DIR [--output REPORT.json] [--workers N] ...
    tpia generate FEEDER OUT [--seed S] [--nodes N]

Exit codes for `run`: 0 = converged and feasible, 2 = converged with nonzero
infeasibility currents, 1 = input, solver or I/O failure. `remediate` exits
0 when the remediated network validates and 1 otherwise.
"""

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import pandas as pd

from src import __version__
from src.analysis import (
    InvalidNetworkError,
    NodeSubset,
    SolutionReport,
    SubsetError,
    WarmStart,
    WarmStartMismatchError,
    missing_power_by_node,
    remediate_and_validate,
    solve_power_flow,
    solve_tpia,
    warm_start_chain,
)
from src.engine import EngineError, SettingsError, SolverSettings
from src.ingest import (
    INPUT_FORMATS,
    IngestError,
    UnsupportedFormatError,
    network_fingerprint,
    read_network,
    read_solution,
    write_canonical,
    write_solution_file,
)
from src.model import FEEDER_NAMES, NetworkModel, feeder_by_name
from src.stamp import VoltageCollapseError
from src.utils import atomic_write_text, get_settings_file_path, logger, set_log_level

EXIT_FEASIBLE = 0
EXIT_FAILURE = 1
EXIT_INFEASIBLE = 2

MODES = ("pf", "l2", "l1", "all")
MODE_ORDER = {"pf": ("pf",), "l2": ("l2",), "l1": ("l1",), "all": ("pf", "l2", "l1")}
SUMMARY_COLUMNS = ["case", "mode", "converged", "iterations", "matrix_size", "time_s", "nonzero_if", "nonzero_nodes"]

# RunConfig field -> SolverSettings field
SETTING_OVERRIDES = {
    "tolerance": "tolerance",
    "max_iterations": "max_iterations",
    "if_threshold": "if_threshold",
    "eps_initial": "eps_initial",
    "eps_reduction": "eps_reduction",
    "eps_floor": "eps_floor",
}


@dataclass
class RunConfig:
    """One CLI run; `mode == "all"` runs pf, l2 and l1 on the same network."""
    input_path: Optional[Path] = None
    input_format: Optional[str] = None
    mode: str = "all"
    subset_path: Optional[Path] = None
    warm_start_scales: List[float] = field(default_factory=list)
    warm_start_path: Optional[Path] = None
    save_warm_start_path: Optional[Path] = None
    settings_path: Optional[Path] = None
    tolerance: Optional[float] = None
    max_iterations: Optional[int] = None
    if_threshold: Optional[float] = None
    eps_initial: Optional[float] = None
    eps_reduction: Optional[float] = None
    eps_floor: Optional[float] = None
    json_path: Optional[Path] = None
    csv_path: Optional[Path] = None
    dot_path: Optional[Path] = None
    strict: bool = True
    remediate: bool = False
    quiet: bool = False

    def settings(self) -> SolverSettings:
        """
        Settings file (explicit path, else TPIA_SETTINGS_FILE, else defaults) plus overrides.

        Raises:
            SettingsError: On invalid values
        """
        path = self.settings_path or get_settings_file_path()
        base = SolverSettings.from_file(path) if path else SolverSettings()
        overrides = {target: getattr(self, source) for source, target in SETTING_OVERRIDES.items()}
        return base.with_overrides(**overrides)


class CliError(Exception):
    """Failure reported to the user with a diagnostic category."""

    def __init__(self, message: str, category: str):
        super().__init__(message)
        self.message = message
        self.category = category


def _load(config: RunConfig) -> NetworkModel:
    path = config.input_path
    try:
        return read_network(path, config.input_format, strict=config.strict)
    except FileNotFoundError:
        raise CliError(f"input file not found: {path}", "I/O error") from None
    except OSError as e:
        raise CliError(f"cannot read {path}: {e}", "I/O error") from None
    except UnsupportedFormatError as e:
        raise CliError(e.message, "input error") from None
    except IngestError as e:
        raise CliError(f"{path}: {e.message}", "parse error") from None


def _output_path(path: Path, mode: str, multiple: bool) -> Path:
    if not multiple:
        return path
    return path.with_name(f"{path.stem}.{mode}{path.suffix}")


def _solve(
    network: NetworkModel,
    mode: str,
    settings: SolverSettings,
    subset: Optional[NodeSubset],
    warm: Optional[WarmStart],
) -> SolutionReport:
    if mode == "pf":
        return solve_power_flow(network, settings, warm)
    return solve_tpia(network, "l1" if mode == "l1" else "least_squares", subset, settings, warm)


def _failed_row(case: str, mode: str, error: str) -> Dict:
    row = {column: None for column in SUMMARY_COLUMNS}
    row.update({"case": case, "mode": mode, "converged": False, "error": error})
    return row


def _warm_start(config: RunConfig, network: NetworkModel, settings: SolverSettings) -> Optional[WarmStart]:
    if config.warm_start_path and config.warm_start_scales:
        raise CliError("--warm-start and --warm-start-file cannot be combined", "input error")
    if config.save_warm_start_path and not config.warm_start_scales:
        raise CliError("--save-warm-start needs --warm-start load scales", "input error")

    if config.warm_start_path:
        path = Path(config.warm_start_path)
        try:
            warm = WarmStart.load(path)
        except FileNotFoundError:
            raise CliError(f"warm-start file not found: {path}", "I/O error") from None
        except OSError as e:
            raise CliError(f"cannot read {path}: {e}", "I/O error") from None
        except (ValueError, KeyError, TypeError) as e:
            raise CliError(f"{path}: not a warm-start file ({e})", "input error") from None
        try:
            warm.check(network)
        except WarmStartMismatchError as e:
            raise CliError(e.message, "input error") from None
    elif config.warm_start_scales:
        try:
            warm = warm_start_chain(network, config.warm_start_scales, settings)
        except ValueError as e:
            raise CliError(str(e), "input error") from None
        if config.save_warm_start_path:
            try:
                warm.save(config.save_warm_start_path)
            except OSError as e:
                raise CliError(f"cannot write warm start: {e}", "I/O error") from None
            logger.info(f"[CLI] Saved warm start (scale {warm.load_scale}) to {config.save_warm_start_path}")
    else:
        return None
    return warm if warm.converged else None


def solve_case(
    config: RunConfig,
    network: Optional[NetworkModel] = None,
) -> Tuple[List[Dict], Dict[str, SolutionReport], List[str]]:
    """
    Solve one input for every requested mode.

    Args:
        config: Run configuration
        network: Already-loaded network (default: read config.input_path)

    Returns:
        Tuple: (summary rows, reports by mode, failure messages)

    Raises:
        CliError: When the input or the settings cannot be used at all
    """
    try:
        settings = config.settings()
    except SettingsError as e:
        raise CliError(e.message, "settings error") from None

    if network is None:
        network = _load(config)
    case = Path(config.input_path).stem

    subset = None
    if config.subset_path:
        try:
            subset = NodeSubset.parse(Path(config.subset_path).read_text(encoding="utf-8"), network)
        except OSError as e:
            raise CliError(f"cannot read subset file: {e}", "I/O error") from None
        except SubsetError as e:
            raise CliError(e.message, "input error") from None

    warm = _warm_start(config, network, settings)

    rows: List[Dict] = []
    reports: Dict[str, SolutionReport] = {}
    failures: List[str] = []
    for mode in MODE_ORDER[config.mode]:
        try:
            report = _solve(network, mode, settings, subset, warm)
        except InvalidNetworkError as e:
            raise CliError(e.message, "input error") from None
        except WarmStartMismatchError as e:
            raise CliError(e.message, "input error") from None
        except (EngineError, VoltageCollapseError) as e:
            logger.info(f"[CLI] {case} {mode}: solver failure: {e}")
            failures.append(f"{mode}: {e}")
            rows.append(_failed_row(case, mode, str(e)))
            continue
        reports[mode] = report
        row = dict(report.summary_row(case))
        row["mode"] = mode
        if not report.converged:
            row["error"] = report.error
        rows.append(row)
    return rows, reports, failures


def _exit_code(config: RunConfig, reports: Dict[str, SolutionReport], failures: List[str]) -> int:
    tpia = [m for m in MODE_ORDER[config.mode] if m != "pf"]
    if failures:
        return EXIT_FAILURE
    if not tpia:
        pf = reports["pf"]
        return EXIT_FEASIBLE if pf.converged else EXIT_FAILURE
    # With TPIA modes present, a diverged power flow is a finding rather than a failure
    if any(reports[m].nonzero_count for m in tpia):
        return EXIT_INFEASIBLE
    return EXIT_FEASIBLE


def summary_table(rows: Sequence[Dict]) -> str:
    frame = pd.DataFrame(list(rows), columns=SUMMARY_COLUMNS)
    return frame.to_string(index=False)


def _remediate(
    network: NetworkModel,
    report: SolutionReport,
    settings: SolverSettings,
    injection_scale: float = 1.0,
) -> Dict:
    """Remediation outcome as a document; validation failures go to stderr."""
    outcome = remediate_and_validate(network, report, settings, injection_scale)
    for failure in outcome.failures:
        print(f"remediation failed: {failure}", file=sys.stderr)
    document = outcome.to_dict()
    document["missing_power_by_node"] = {
        bus: {"p": power.real, "q": power.imag} for bus, power in missing_power_by_node(report).items()
    }
    return document


def remediate(
    config: RunConfig,
    report_path: Path,
    injection_scale: float = 1.0,
    output: Optional[Path] = None,
) -> int:
    """
    Validate battery remediation for a saved json report of config.input_path.

    Returns:
        int: 0 when the remediated network validates, 1 otherwise
    """
    try:
        settings = config.settings()
    except SettingsError as e:
        print(f"settings error: {e.message}", file=sys.stderr)
        return EXIT_FAILURE
    try:
        network = _load(config)
        try:
            report = read_solution(Path(report_path).read_text(encoding="utf-8"))
        except OSError as e:
            raise CliError(f"cannot read {report_path}: {e}", "I/O error") from None
        except (ValueError, KeyError, TypeError) as e:
            raise CliError(f"{report_path}: not a json report ({e})", "parse error") from None
        if report.fingerprint and report.fingerprint != network_fingerprint(network):
            raise CliError(f"{report_path} was computed for a different network", "input error")
        if not report.converged:
            raise CliError(f"{report_path} is not a converged solve", "input error")
    except CliError as e:
        print(f"{e.category}: {e.message}", file=sys.stderr)
        return EXIT_FAILURE

    document = _remediate(network, report, settings, injection_scale)
    if output:
        try:
            atomic_write_text(output, json.dumps(document, indent=2) + "\n")
        except OSError as e:
            print(f"I/O error: cannot write output: {e}", file=sys.stderr)
            return EXIT_FAILURE
    if not config.quiet:
        print(json.dumps(document, indent=2))
    return EXIT_FEASIBLE if document["success"] else EXIT_FAILURE


def run(config: RunConfig) -> int:
    """
    Solve one network, write the requested outputs and print the summary.

    Returns:
        int: Exit code (0 feasible, 2 infeasible, 1 failure)
    """
    try:
        network = _load(config)
        rows, reports, failures = solve_case(config, network)
    except CliError as e:
        print(f"{e.category}: {e.message}", file=sys.stderr)
        return EXIT_FAILURE

    multiple = len(MODE_ORDER[config.mode]) > 1
    try:
        for mode, report in reports.items():
            for fmt, path in (("json", config.json_path), ("csv", config.csv_path), ("dot", config.dot_path)):
                if path:
                    target = write_solution_file(report, _output_path(Path(path), mode, multiple), fmt)
                    logger.info(f"[CLI] Wrote {fmt} report to {target}")
    except OSError as e:
        print(f"I/O error: cannot write output: {e}", file=sys.stderr)
        return EXIT_FAILURE

    if not config.quiet:
        print(summary_table(rows))

    if config.remediate:
        flagged = [reports[m] for m in ("l1", "l2") if m in reports and reports[m].nonzero_count]
        if flagged:
            document = _remediate(network, flagged[0], config.settings())
            if not config.quiet:
                print(json.dumps(document, indent=2))

    for failure in failures:
        print(f"solver error: {failure}", file=sys.stderr)
    return _exit_code(config, reports, failures)


def batch(directory: Path, template: RunConfig, output: Optional[Path] = None, workers: int = 1) -> Dict:
    """
    Solve every network file in a directory with the same settings.

    Per-case failures become failed rows; the batch always completes. When
    template.json_path names a directory, per-case json reports are written
    there atomically.

    Returns:
        Dict: {"cases": n, "rows": [...], "failed": [...]}
    """
    directory = Path(directory)
    files = sorted(
        p for p in directory.iterdir()
        if p.is_file() and p.suffix.lower() in (".json", ".glm")
    )
    logger.info(f"[BATCH] {len(files)} case(s) in {directory}")

    def one(path: Path) -> Tuple[Path, List[Dict], Dict[str, SolutionReport]]:
        config = replace(template, input_path=path, json_path=None, csv_path=None, dot_path=None, remediate=False)
        try:
            rows, reports, _ = solve_case(config)
        except CliError as e:
            logger.info(f"[BATCH] {path.name}: {e.category}: {e.message}")
            return path, [_failed_row(path.stem, m, f"{e.category}: {e.message}") for m in MODE_ORDER[template.mode]], {}
        return path, rows, reports

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(one, files))

    rows: List[Dict] = []
    for path, case_rows, reports in results:
        rows.extend(case_rows)
        if template.json_path:
            for mode, report in reports.items():
                target = Path(template.json_path) / f"{path.stem}.{mode}.json"
                write_solution_file(report, target, "json")

    document = {
        "cases": len(files),
        "rows": rows,
        "failed": sorted({row["case"] for row in rows if row.get("error")}),
    }
    if output:
        atomic_write_text(output, json.dumps(_deterministic(document), indent=2) + "\n")
    return document


def _deterministic(document: Dict) -> Dict:
    """Aggregate without wall-time fields."""
    rows = [{k: v for k, v in row.items() if k != "time_s"} for row in document["rows"]]
    return {**document, "rows": rows}


def generate(feeder: str, output: Path, seed: int = 0, nodes: int = 24) -> Path:
    network = feeder_by_name(feeder, seed, nodes)
    target = atomic_write_text(output, write_canonical(network))
    logger.info(f"[CLI] Wrote {feeder} ({len(network.buses)} buses) to {target}")
    return target


def _add_solver_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--format", dest="input_format", choices=INPUT_FORMATS, help="Input format (default: from suffix)")
    parser.add_argument("--mode", choices=MODES, default="all", help="Formulation(s) to run (default: all)")
    parser.add_argument("--subset", dest="subset_path", type=Path, help="Node subset file (bus or bus.PHASE per line)")
    parser.add_argument("--warm-start", dest="warm_start", help="Comma-separated load scales in (0, 1], e.g. 0.5,0.8")
    parser.add_argument("--settings", dest="settings_path", type=Path, help="JSON settings file (default: $TPIA_SETTINGS_FILE)")
    parser.add_argument("--tolerance", type=float, help="Newton tolerance (per-unit)")
    parser.add_argument("--max-iter", dest="max_iterations", type=int, help="Maximum Newton iterations")
    parser.add_argument("--if-threshold", dest="if_threshold", type=float, help="Infeasibility current threshold (per-unit)")
    parser.add_argument("--eps-initial", dest="eps_initial", type=float, help="Initial complementarity perturbation")
    parser.add_argument("--eps-reduction", dest="eps_reduction", type=float, help="Perturbation reduction factor")
    parser.add_argument("--eps-floor", dest="eps_floor", type=float, help="Perturbation floor")
    parser.add_argument("--lenient", action="store_true", help="Warn on unknown canonical keys instead of failing")
    parser.add_argument("--quiet", action="store_true", help="Do not print the summary table")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tpia", description="Three-phase infeasibility analysis")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--verbose", action="store_true", help="Log every Newton iteration (same as TPIA_LOG_LEVEL=DEBUG)")
    commands = parser.add_subparsers(dest="command", required=True)

    run_parser = commands.add_parser("run", help="Solve one network")
    run_parser.add_argument("input", type=Path, help="Network file (.json canonical or .glm)")
    _add_solver_options(run_parser)
    run_parser.add_argument("--json", dest="json_path", type=Path, help="Write the json report here")
    run_parser.add_argument("--csv", dest="csv_path", type=Path, help="Write the csv report here")
    run_parser.add_argument("--dot", dest="dot_path", type=Path, help="Write the dot heatmap graph here")
    run_parser.add_argument("--remediate", action="store_true", help="Validate battery remediation of flagged nodes")
    run_parser.add_argument("--warm-start-file", dest="warm_start_path", type=Path, help="Seed the solves from a saved warm start")
    run_parser.add_argument("--save-warm-start", dest="save_warm_start_path", type=Path, help="Save the --warm-start chain result here")

    remediate_parser = commands.add_parser("remediate", help="Validate battery remediation from a saved json report")
    remediate_parser.add_argument("input", type=Path, help="Network file the report was computed for")
    remediate_parser.add_argument("report", type=Path, help="json report written by `tpia run --json`")
    _add_solver_options(remediate_parser)
    remediate_parser.add_argument("--scale", type=float, default=1.0, help="Multiplier on the injected power (default: 1)")
    remediate_parser.add_argument("--output", type=Path, help="Write the remediation document here")

    batch_parser = commands.add_parser("batch", help="Solve every network in a directory")
    batch_parser.add_argument("directory", type=Path, help="Directory of .json/.glm network files")
    _add_solver_options(batch_parser)
    batch_parser.add_argument("--output", type=Path, help="Aggregate json report")
    batch_parser.add_argument("--reports", dest="json_path", type=Path, help="Directory for per-case json reports")
    batch_parser.add_argument("--workers", type=int, default=1, help="Concurrent cases (default: 1)")

    generate_parser = commands.add_parser("generate", help="Write a synthetic feeder as a canonical file")
    generate_parser.add_argument("feeder", choices=FEEDER_NAMES)
    generate_parser.add_argument("output", type=Path)
    generate_parser.add_argument("--seed", type=int, default=0)
    generate_parser.add_argument("--nodes", type=int, default=24)
    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    scales: List[float] = []
    if args.warm_start:
        scales = [float(s) for s in args.warm_start.split(",") if s.strip()]
    return RunConfig(
        input_path=getattr(args, "input", None),
        input_format=args.input_format,
        mode=args.mode,
        subset_path=args.subset_path,
        warm_start_scales=scales,
        warm_start_path=getattr(args, "warm_start_path", None),
        save_warm_start_path=getattr(args, "save_warm_start_path", None),
        settings_path=args.settings_path,
        tolerance=args.tolerance,
        max_iterations=args.max_iterations,
        if_threshold=args.if_threshold,
        eps_initial=args.eps_initial,
        eps_reduction=args.eps_reduction,
        eps_floor=args.eps_floor,
        json_path=getattr(args, "json_path", None),
        csv_path=getattr(args, "csv_path", None),
        dot_path=getattr(args, "dot_path", None),
        strict=not args.lenient,
        remediate=getattr(args, "remediate", False),
        quiet=args.quiet,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.verbose:
        set_log_level("DEBUG")

    if args.command == "generate":
        try:
            generate(args.feeder, args.output, args.seed, args.nodes)
        except OSError as e:
            print(f"I/O error: {e}", file=sys.stderr)
            return EXIT_FAILURE
        return EXIT_FEASIBLE

    try:
        config = _config_from_args(args)
    except ValueError as e:
        print(f"input error: invalid --warm-start value ({e})", file=sys.stderr)
        return EXIT_FAILURE

    if args.command == "run":
        return run(config)
    if args.command == "remediate":
        return remediate(config, args.report, args.scale, args.output)

    if not args.directory.is_dir():
        print(f"I/O error: not a directory: {args.directory}", file=sys.stderr)
        return EXIT_FAILURE
    try:
        document = batch(args.directory, config, args.output, args.workers)
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return EXIT_FAILURE
    if not config.quiet:
        print(summary_table(document["rows"]))
    return EXIT_FEASIBLE


if __name__ == "__main__":
    sys.exit(main())
