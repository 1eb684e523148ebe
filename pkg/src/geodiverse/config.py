"""Run configuration and its ``key = value`` file format.

A configuration file is a flat TOML document, for example::

    lambda = 0.0001
    airport_radius_km = 100
    uni_radius_km = 20
    alpha = 2
    top_k_airports = 5
    geo_bin_deg = 5
    entropy_log_base = "e"          # or 2
    strata_bounds = [0, 1, 1.02, 1.04, 1.06, 1.08, 1.1, 1.15, 1.2, 1.25, 1.5, 1.75, 2, 2.5, 3]
    north_south_table_path = "north_south.csv"

Unknown keys are rejected so that typos do not silently fall back to defaults.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ValidationError

DEFAULT_STRATA_BOUNDS = (
    0.0, 1.0, 1.02, 1.04, 1.06, 1.08, 1.10, 1.15, 1.20, 1.25, 1.50, 1.75, 2.0, 2.5, 3.0,
)

_FILE_KEYS = {
    "lambda": "lam",
    "airport_radius_km": "airport_radius_km",
    "uni_radius_km": "uni_radius_km",
    "alpha": "alpha",
    "top_k_airports": "top_k_airports",
    "geo_bin_deg": "geo_bin_deg",
    "entropy_log_base": "entropy_log_base",
    "strata_bounds": "strata_bounds",
    "north_south_table_path": "north_south_table_path",
}


@dataclass(frozen=True)
class Config:
    lam: float = 1e-4
    airport_radius_km: float = 100.0
    uni_radius_km: float = 20.0
    alpha: float = 2.0
    top_k_airports: int = 5
    geo_bin_deg: float = 5.0
    entropy_log_base: str | float = "e"
    strata_bounds: tuple[float, ...] = field(default=DEFAULT_STRATA_BOUNDS)
    north_south_table_path: str | None = None

    def __post_init__(self):
        if not 0.0 < self.lam < 1.0:
            raise ValidationError(f"lambda must lie in (0, 1), got {self.lam!r}")
        if self.airport_radius_km <= 0 or self.uni_radius_km <= 0:
            raise ValidationError("radii must be positive")
        if self.top_k_airports < 1:
            raise ValidationError("top_k_airports must be >= 1")
        if self.geo_bin_deg <= 0:
            raise ValidationError("geo_bin_deg must be positive")
        bounds = tuple(float(b) for b in self.strata_bounds)
        if len(bounds) < 2 or any(b >= c for b, c in zip(bounds, bounds[1:])):
            raise ValidationError("strata_bounds must be strictly increasing with >= 2 entries")
        object.__setattr__(self, "strata_bounds", bounds)
        log_base(self.entropy_log_base)

    @property
    def log_base(self) -> float:
        return log_base(self.entropy_log_base)

    def replace(self, **changes) -> "Config":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        """Snapshot using the file key names (stable ordering)."""
        out = {}
        for file_key, attr in _FILE_KEYS.items():
            value = getattr(self, attr)
            if isinstance(value, tuple):
                value = list(value)
            out[file_key] = value
        return out


def log_base(value) -> float:
    if value in ("e", "E", None):
        return math.e
    try:
        base = float(value)
    except (TypeError, ValueError):
        raise ValidationError(f"entropy_log_base must be 'e' or a number, got {value!r}") from None
    if base <= 0 or base == 1:
        raise ValidationError(f"invalid logarithm base {base}")
    return base


def load_config(path: str | Path | None = None, **overrides) -> Config:
    """Read a config file (if given) and apply keyword overrides on top."""
    values = {}
    if path is not None:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
        unknown = sorted(set(raw) - set(_FILE_KEYS))
        if unknown:
            raise ValidationError(f"unknown config keys: {', '.join(unknown)}")
        for key, value in raw.items():
            values[_FILE_KEYS[key]] = tuple(value) if key == "strata_bounds" else value
        table = values.get("north_south_table_path")
        if table is not None and not Path(table).is_absolute():
            values["north_south_table_path"] = str(Path(path).parent / table)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return Config(**values)
