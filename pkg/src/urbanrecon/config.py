"""Pipeline configuration: defaults, file parsing and validation.

Configuration files are plain ``key = value`` lines with ``#``
comments; keys mirror the dataclass field names.  Precedence is
command-line flag over file over default.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError
from .selection import SelectionWeights

WALL_SOURCES = ("auto", "footprint", "inferred")


@dataclass
class PipelineConfig:
    resolution: float = 0.20
    epsilon_d: float = 0.25  # meters of allowed contour deviation
    epsilon_c: float = 2.0  # simplification cost budget
    lambda_data: float = 0.34
    lambda_complexity: float = 0.62
    lambda_roof: float = 0.04
    k_neighbors: int = 16
    angle_tol_deg: float = 20.0
    dist_tol: float | None = None  # None picks 2.5x median spacing
    min_support: int = 10
    vertical_angle_tol_deg: float = 10.0
    min_roof_height: float = 0.5  # meters above ground; lower planes are terrain
    canny_low: float = 0.3
    canny_high: float = 0.8
    morph_kernel: int = 3
    min_edge_group: int = 5
    offset_tol: float = 0.3
    snap_tol: float = 1e-6
    min_face_area: float = 1e-4
    time_limit: float = 120.0
    face_prior: bool = True
    merge_coplanar: bool = True
    wall_source: str = "auto"
    min_points: int = 30
    threads: int = 1
    triangulate: bool = False
    seed: int = 0

    def weights(self) -> SelectionWeights:
        return SelectionWeights(
            data=self.lambda_data,
            complexity=self.lambda_complexity,
            roof=self.lambda_roof,
        )

    def validate(self) -> "PipelineConfig":
        if self.resolution <= 0:
            raise ConfigError("resolution must be positive")
        if self.epsilon_d <= 0:
            raise ConfigError("epsilon_d must be positive")
        if self.epsilon_c < 0:
            raise ConfigError("epsilon_c must be non-negative")
        self.weights().validate()
        if self.k_neighbors < 3:
            raise ConfigError("k_neighbors must be at least 3")
        if not 0 < self.angle_tol_deg < 90:
            raise ConfigError("angle_tol_deg must be in (0, 90)")
        if self.dist_tol is not None and self.dist_tol <= 0:
            raise ConfigError("dist_tol must be positive or omitted")
        if not 0 < self.vertical_angle_tol_deg < 45:
            raise ConfigError("vertical_angle_tol_deg must be in (0, 45)")
        if self.min_roof_height < 0:
            raise ConfigError("min_roof_height must be non-negative")
        if not 0 < self.canny_low <= self.canny_high:
            raise ConfigError("need 0 < canny_low <= canny_high")
        if self.morph_kernel < 1 or self.morph_kernel % 2 == 0:
            raise ConfigError("morph_kernel must be odd and positive")
        if self.min_edge_group < 1:
            raise ConfigError("min_edge_group must be positive")
        if self.offset_tol < 0:
            raise ConfigError("offset_tol must be non-negative")
        if self.snap_tol <= 0 or self.min_face_area <= 0:
            raise ConfigError("snap_tol and min_face_area must be positive")
        if self.time_limit <= 0:
            raise ConfigError("time_limit must be positive")
        if self.wall_source not in WALL_SOURCES:
            raise ConfigError(
                f"wall_source must be one of {', '.join(WALL_SOURCES)}"
            )
        if self.min_points < 3:
            raise ConfigError("min_points must be at least 3")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        return self


_FIELD_TYPES = {f.name: f.type for f in fields(PipelineConfig)}


def _coerce(name: str, raw: str):
    kind = _FIELD_TYPES[name]
    raw = raw.strip()
    if name == "dist_tol":
        if raw.lower() in ("auto", "none", ""):
            return None
        return float(raw)
    if kind == "bool":
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"cannot read {raw!r} as a boolean for {name}")
    if kind == "int":
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"cannot read {raw!r} as an integer for {name}") from None
    if kind == "float":
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"cannot read {raw!r} as a number for {name}") from None
    return raw


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; unknown keys are an error."""
    out = {}
    text = Path(path).read_text()
    for ln, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {ln}: expected key = value, got {line!r}")
        key, raw = (s.strip() for s in body.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {ln}: unknown configuration key {key!r}")
        out[key] = _coerce(key, raw)
    return out


def resolve_config(file_path=None, overrides=None) -> PipelineConfig:
    """defaults <- config file <- explicit overrides, then validate."""
    values = {}
    if file_path is not None:
        values.update(read_config_file(file_path))
    for key, val in (overrides or {}).items():
        if val is None:
            continue
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown configuration key {key!r}")
        values[key] = val
    return PipelineConfig(**values).validate()
