"""
FastAPI application for the TPIA solver.

Exposes network validation and the three solve modes over HTTP. Solves are
CPU-bound, so the endpoints are plain functions and run in FastAPI's
thread pool.
"""

from typing import Dict, List, Optional

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from src import __version__
from src.analysis import (
    InvalidNetworkError,
    NodeSubset,
    SubsetError,
    missing_power_by_node,
    solve_power_flow,
    solve_tpia,
)
from src.engine import EngineError, SettingsError, SolverSettings
from src.ingest import INPUT_FORMATS, IngestError, parse_canonical, parse_glm_subset
from src.model import NetworkModel, validate
from src.stamp import VoltageCollapseError
from src.utils import get_settings_file_path, logger

API_MODES = ("pf", "l2", "l1")

app = FastAPI(
    title="TPIA",
    description="Three-phase infeasibility analysis for distribution feeders",
    version=__version__,
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


class NetworkPayload(BaseModel):
    text: str = Field(..., description="Network document (canonical json or GLM)")
    format: str = Field("canonical", description="canonical or glm")
    strict: bool = True


class SolvePayload(NetworkPayload):
    mode: str = Field("l2", description="pf, l2 or l1")
    subset: Optional[List[str]] = Field(None, description='Node-phases like "bus" or "bus.A"')
    settings: Dict[str, float] = Field(default_factory=dict)


def _parse(payload: NetworkPayload, check: bool) -> NetworkModel:
    if payload.format not in INPUT_FORMATS:
        raise HTTPException(status_code=400, detail=f"Unsupported format '{payload.format}'")
    try:
        if payload.format == "glm":
            return parse_glm_subset(payload.text, check=check)
        return parse_canonical(payload.text, strict=payload.strict, check=check)
    except IngestError as e:
        logger.info(f"[API] Parse failure ({e.code}): {e.message}")
        raise HTTPException(status_code=400, detail={"code": e.code, "message": e.message})


def _settings(overrides: Dict[str, float]) -> SolverSettings:
    path = get_settings_file_path()
    try:
        base = SolverSettings.from_file(path) if path else SolverSettings()
        return base.with_overrides(**overrides)
    except SettingsError as e:
        raise HTTPException(status_code=422, detail={"code": e.code, "message": e.message})


@app.get("/health")
def health_check():
    return {"status": "healthy", "version": __version__}


@app.get("/api/info")
def api_info():
    """
    Get API information.

    Returns:
        dict: Version, supported modes and formats, and the default settings
    """
    path = get_settings_file_path()
    return {
        "name": "TPIA",
        "version": __version__,
        "modes": list(API_MODES),
        "input_formats": list(INPUT_FORMATS),
        "settings_file": str(path) if path else None,
        "default_settings": SolverSettings().to_dict(),
    }


@app.post("/api/validate")
def validate_network(payload: NetworkPayload):
    """
    Parse a network and list its invariant violations.

    Returns:
        dict: valid flag, counts and violations (element, reason, code)
    """
    network = _parse(payload, check=False)
    violations = validate(network)
    logger.info(f"[API] Validated '{network.name}': {len(violations)} violation(s)")
    return {
        "valid": not violations,
        "name": network.name,
        "buses": len(network.buses),
        "branches": len(network.branches),
        "violations": [v.to_dict() for v in violations],
    }


@app.post("/api/solve")
def solve(payload: SolvePayload):
    """
    Solve a network with one formulation and return the json report.

    Power-flow divergence is reported in the body (converged false); TPIA
    solver failures are 422 responses. missing_power_by_node sums the
    missing power (W, var) over the phases of each flagged bus.
    """
    if payload.mode not in API_MODES:
        raise HTTPException(status_code=400, detail=f"Unknown mode '{payload.mode}'")
    settings = _settings(payload.settings)
    network = _parse(payload, check=True)

    try:
        subset = NodeSubset.parse("\n".join(payload.subset), network) if payload.subset else None
    except SubsetError as e:
        raise HTTPException(status_code=400, detail={"code": e.code, "message": e.message})

    logger.info(f"[API] Solving '{network.name}' ({len(network.buses)} buses) mode={payload.mode}")
    try:
        if payload.mode == "pf":
            report = solve_power_flow(network, settings)
        else:
            objective = "l1" if payload.mode == "l1" else "least_squares"
            report = solve_tpia(network, objective, subset, settings)
    except InvalidNetworkError as e:
        raise HTTPException(status_code=400, detail={"code": e.code, "message": e.message})
    except (EngineError, VoltageCollapseError) as e:
        logger.info(f"[API] Solver failure: {e}")
        raise HTTPException(status_code=422, detail={"code": e.code, "message": str(e)})
    body = report.to_dict()
    body["missing_power_by_node"] = {
        bus: {"p": power.real, "q": power.imag} for bus, power in missing_power_by_node(report).items()
    }
    return body


@app.on_event("startup")
def startup_event():
    logger.info(f"[API] TPIA {__version__} ready")
