"""Pipeline defaults and key=value config file handling.

Precedence is: explicit CLI flag > config file entry > built-in default.
"""

from __future__ import annotations

import os

DEFAULTS: dict[str, object] = {
    "radius": 16,        # WGIF window half-size
    "lam": 1e-3,         # WGIF regularization
    "eps": 1e-6,         # WGIF edge-weight floor
    "omega": 0.95,       # dark-channel haze retention
    "patch_radius": 7,   # dark-channel patch half-size
    "eta": 4.0,          # recovery gate midpoint 1/eta
    "t0": 0.1,           # recovery transmission floor
    "t_floor": 0.05,     # transmission map floor
    "w_c": 0.01,         # color loss weight
    "lr": 1e-3,          # training step size
    "steps": 1000,
    "seed": 0,
    "min_block": 16,     # airlight quad-tree stop size
    "input_size": 256,   # network input resolution
    "grid_depth": 8,     # bilateral grid intensity bins
}

_TYPES = {k: type(v) for k, v in DEFAULTS.items()}


class ConfigError(ValueError):
    pass


def parse_config(path: str | os.PathLike) -> dict[str, object]:
    """Parse key=value lines; blank lines and # comments allowed."""
    values: dict[str, object] = {}
    with open(path) as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, val = line.partition("=")
            key = key.strip()
            if key not in DEFAULTS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                values[key] = _TYPES[key](val.strip())
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    return values


def resolve(key: str, flag_value, config: dict[str, object]):
    """flag > config file > default."""
    if flag_value is not None:
        return flag_value
    if key in config:
        return config[key]
    return DEFAULTS[key]
