from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

import yaml

from errors import ConfigError

logger = logging.getLogger(__name__)

DEFAULTS_PATH = Path(__file__).with_name("defaults.yaml")
GRID_ENV_VAR = "TWOLEVEL_GRID_POINTS"
MIN_GRID_POINTS = 101
FORMATS = ("json", "csv")


def load_defaults(filepath: str | os.PathLike = DEFAULTS_PATH) -> dict[str, Any]:
    """Load the run defaults and catalog schemas from a YAML file."""
    try:
        with open(filepath, "r") as file:
            data = yaml.safe_load(file)
    except OSError as exc:
        raise ConfigError(f"cannot read defaults file {filepath}: {exc}", path=str(filepath)) from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed defaults file {filepath}: {exc}", path=str(filepath)) from exc
    if not isinstance(data, dict) or "run" not in data or "catalog" not in data:
        raise ConfigError(f"defaults file {filepath} needs 'run' and 'catalog' sections", path=str(filepath))
    return data


def check_grid_points(value: Any, source: str = "grid_points") -> int:
    try:
        n = int(str(value).strip())
    except ValueError:
        raise ConfigError(f"{source} must be an integer, got {value!r}", source=source, value=str(value)) from None
    if n < MIN_GRID_POINTS or n % 2 == 0:
        raise ConfigError(f"{source} must be odd and >= {MIN_GRID_POINTS}, got {n}", source=source, value=n)
    return n


def grid_points_from_env(environ: Mapping[str, str] | None = None) -> int | None:
    environ = os.environ if environ is None else environ
    raw = environ.get(GRID_ENV_VAR)
    if raw is None or raw == "":
        return None
    return check_grid_points(raw, GRID_ENV_VAR)


@dataclass(frozen=True)
class Tolerances:
    b_tolerance: float = 1e-8
    node_floor: float = 1e-6
    overlap_min: float = 0.999
    tol_coefficient: float = 0.1
    tail_limit: float = 0.01
    boundary_amplitude: float = 1e-10
    expand_factor: float = 1.5
    max_expansions: int = 3


@dataclass(frozen=True)
class RunConfig:
    """Everything one CLI run needs; built from defaults, environment, then flags."""
    xi: str | None = None
    catalog: str | None = None
    params: Mapping[str, float] = field(default_factory=dict)
    e1: float | None = None
    e2: float | None = None
    domain: tuple[float, float] | None = None
    default_domain: tuple[float, float] = (-8.0, 8.0)
    grid_points: int = 4001
    scan_points: int = 2048
    output_format: str = "csv"
    output_path: str | None = None
    tolerances: Tolerances = field(default_factory=Tolerances)

    def __post_init__(self):
        check_grid_points(self.grid_points)
        if self.output_format not in FORMATS:
            raise ConfigError(f"output format must be one of {FORMATS}, got {self.output_format!r}")
        if self.domain is not None and not self.domain[0] < self.domain[1]:
            raise ConfigError(f"domain must be increasing, got {self.domain}")
        if self.scan_points < 64:
            raise ConfigError(f"scan_points must be at least 64, got {self.scan_points}")

    @classmethod
    def from_defaults(cls, defaults: Mapping[str, Any], environ: Mapping[str, str] | None = None,
                      **overrides: Any) -> RunConfig:
        run = defaults["run"]
        known = {f for f in Tolerances.__dataclass_fields__}
        tolerances = Tolerances(**{k: v for k, v in run.items() if k in known})
        config = cls(
            grid_points=check_grid_points(run.get("grid_points", 4001)),
            scan_points=int(run.get("scan_points", 2048)),
            output_format=run.get("format", "csv"),
            default_domain=tuple(float(v) for v in run.get("domain", (-8.0, 8.0))),
            tolerances=tolerances,
        )
        env_points = grid_points_from_env(environ)
        if env_points is not None:
            logger.debug("grid points %d taken from %s", env_points, GRID_ENV_VAR)
            config = replace(config, grid_points=env_points)
        flags = {k: v for k, v in overrides.items() if v is not None}
        return replace(config, **flags)
