"""
Solver settings.

Defaults can be overridden from a JSON file (TPIA_SETTINGS_FILE) or
programmatically; every construction path validates.
"""

import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional, Union

from src.utils import get_settings_file_path, logger

from .errors import SettingsError


@dataclass(frozen=True)
class SolverSettings:
    """
    Newton / interior-point parameters.

    Tolerances are per-unit infinity norms. The complementary-slackness
    perturbation starts at eps_initial, is multiplied by eps_reduction each
    time the Newton residual drops below 10x its current value, and stops at
    eps_floor.

    TPIA-L2 shifts the voltage block of its Hessian (starting at
    regularization_initial, capped at regularization_max) whenever the KKT
    matrix has the wrong inertia, and gives up early after stall_iterations
    iterations without a 1% residual improvement.
    """
    tolerance: float = 1e-6
    max_iterations: int = 500
    if_threshold: float = 1e-3
    eps_initial: float = 1e-1
    eps_reduction: float = 0.1
    eps_floor: float = 1e-8
    sigma: float = 0.95
    collapse_floor: float = 1e-8
    voltage_step_cap: float = 0.5
    condition_limit: float = 1e14
    l1_initial_current: float = 1e-3
    l1_initial_dual: float = 1.0
    max_damping_halvings: int = 30
    regularization_initial: float = 1e-4
    regularization_max: float = 1e10
    stall_iterations: int = 60

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        """
        Check settings invariants.

        Raises:
            SettingsError: If any value is non-positive or sigma / eps_reduction
                fall outside (0, 1)
        """
        for f in fields(self):
            value = getattr(self, f.name)
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise SettingsError(f"{f.name} must be numeric, got {value!r}", f.name)
            if not value > 0:
                raise SettingsError(f"{f.name} must be positive, got {value}", f.name)
        if not 0 < self.sigma < 1:
            raise SettingsError(f"sigma must lie in (0, 1), got {self.sigma}", "sigma")
        if not 0 < self.eps_reduction < 1:
            raise SettingsError(f"eps_reduction must lie in (0, 1), got {self.eps_reduction}", "eps_reduction")
        if self.eps_floor > self.eps_initial:
            raise SettingsError("eps_floor must not exceed eps_initial", "eps_floor")
        if self.regularization_initial > self.regularization_max:
            raise SettingsError("regularization_initial must not exceed regularization_max", "regularization_initial")
        if int(self.max_iterations) != self.max_iterations:
            raise SettingsError("max_iterations must be an integer", "max_iterations")

    def with_overrides(self, **overrides: Any) -> "SolverSettings":
        """
        Copy with some fields replaced; None values are ignored.

        Raises:
            SettingsError: On unknown fields or invalid values
        """
        known = {f.name for f in fields(self)}
        clean = {k: v for k, v in overrides.items() if v is not None}
        unknown = sorted(set(clean) - known)
        if unknown:
            raise SettingsError(f"Unknown setting(s): {', '.join(unknown)}", unknown[0])
        for name in ("max_iterations", "max_damping_halvings", "stall_iterations"):
            if name in clean:
                clean[name] = int(clean[name])
        return replace(self, **clean)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "SolverSettings":
        """
        Load overrides from a JSON object file.

        Raises:
            SettingsError: If the file cannot be read or holds invalid values
        """
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise SettingsError(f"Cannot read settings file {path}: {e}", "file") from e
        if not isinstance(data, dict):
            raise SettingsError(f"Settings file {path} must hold a JSON object", "file")
        return cls().with_overrides(**data)

    @classmethod
    def from_env(cls) -> "SolverSettings":
        """Defaults, overridden by TPIA_SETTINGS_FILE when it is set."""
        path: Optional[Path] = get_settings_file_path()
        if path is None:
            return cls()
        logger.info(f"[CONFIG] Loading solver settings from {path}")
        return cls.from_file(path)
