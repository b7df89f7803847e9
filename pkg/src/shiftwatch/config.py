"""Application configuration: a flat key = value text file plus CLI flag
overrides. Flags win over file values, which win over defaults."""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields
from typing import Optional, Tuple

from .errors import ConfigError

_FLOAT_KEYS = {
    "alpha_source",
    "alpha_prod",
    "alpha1",
    "alpha2",
    "eps_tol",
    "delta_corr",
    "fdp_max",
    "ablation_fraction",
}
_INT_KEYS = {"k", "horizon", "onset", "seed", "n_seeds", "workers"}
_STR_KEYS = {"source", "production", "scores", "out_dir", "schedule", "feature_kinds"}
_LIST_KEYS = {"p_values", "p_hat_values", "eps_harm_grid", "eps_tol_grid"}
KNOWN_KEYS = _FLOAT_KEYS | _INT_KEYS | _STR_KEYS | _LIST_KEYS


@dataclass
class AppConfig:
    source: Optional[str] = None
    production: Optional[str] = None
    scores: Optional[str] = None
    out_dir: str = "out"
    k: int = 10
    p_values: Optional[Tuple[float, ...]] = None
    p_hat_values: Optional[Tuple[float, ...]] = None
    fdp_max: float = 0.2
    alpha_source: float = 0.05
    alpha_prod: float = 0.05
    alpha1: Optional[float] = None
    alpha2: Optional[float] = None
    eps_tol: float = 0.0
    delta_corr: float = 0.0
    schedule: str = "sudden"
    horizon: int = 2000
    onset: Optional[int] = None
    seed: int = 0
    n_seeds: int = 1
    workers: int = 1
    feature_kinds: Optional[str] = None
    ablation_fraction: float = 0.8
    eps_harm_grid: Tuple[float, ...] = (0.0, 0.02, 0.05, 0.1)
    eps_tol_grid: Tuple[float, ...] = (0.0,)


def _coerce(key: str, raw):
    if raw is None:
        return None
    try:
        if key in _FLOAT_KEYS:
            return float(raw)
        if key in _INT_KEYS:
            return int(raw)
        if key in _LIST_KEYS:
            if isinstance(raw, (tuple, list)):
                return tuple(float(x) for x in raw)
            return tuple(float(x) for x in str(raw).split(",") if x.strip())
        return str(raw)
    except (TypeError, ValueError):
        raise ConfigError(key, f"cannot parse value {raw!r}")


def _read_config_file(path: str) -> dict:
    if not os.path.exists(path):
        raise ConfigError("config", f"file not found: {path}")
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError("config", f"line {lineno}: expected key = value")
            key, raw = (part.strip() for part in line.split("=", 1))
            if key not in KNOWN_KEYS:
                raise ConfigError(key, "unknown configuration key")
            values[key] = raw
    return values


def parse_config(file: Optional[str] = None, **flags) -> AppConfig:
    """Build and validate an AppConfig from an optional file plus flag
    overrides (flags with value None are treated as unset)."""
    merged = {}
    if file:
        merged.update(_read_config_file(file))
    for key, value in flags.items():
        if value is None:
            continue
        if key not in KNOWN_KEYS:
            raise ConfigError(key, "unknown configuration key")
        merged[key] = value

    cfg = AppConfig()
    for key, raw in merged.items():
        setattr(cfg, key, _coerce(key, raw))
    _validate(cfg)
    return cfg


def _validate(cfg: AppConfig) -> None:
    for key in ("alpha_source", "alpha_prod"):
        v = getattr(cfg, key)
        if not 0.0 < v < 1.0:
            raise ConfigError(key, f"must lie in (0, 1), got {v}")
    for key in ("alpha1", "alpha2"):
        v = getattr(cfg, key)
        if v is not None and not 0.0 < v < 1.0:
            raise ConfigError(key, f"must lie in (0, 1), got {v}")
    if not 0.0 < cfg.fdp_max < 1.0:
        raise ConfigError("fdp_max", f"must lie in (0, 1), got {cfg.fdp_max}")
    if cfg.eps_tol < 0.0:
        raise ConfigError("eps_tol", "must be >= 0")
    if cfg.delta_corr < 0.0:
        raise ConfigError("delta_corr", "must be >= 0")
    if cfg.k < 1:
        raise ConfigError("k", "must be >= 1")
    if cfg.horizon < 1:
        raise ConfigError("horizon", "must be >= 1")
    if cfg.schedule not in ("none", "sudden", "sigmoid"):
        raise ConfigError("schedule", f"unknown schedule {cfg.schedule!r}")
    if cfg.onset is not None and not 1 <= cfg.onset <= cfg.horizon:
        raise ConfigError("onset", "must lie in [1, horizon]")
    if not 0.0 < cfg.ablation_fraction <= 1.0:
        raise ConfigError("ablation_fraction", "must lie in (0, 1]")
    if cfg.n_seeds < 1:
        raise ConfigError("n_seeds", "must be >= 1")
    if cfg.workers < 1:
        raise ConfigError("workers", "must be >= 1")
    for key in ("source", "production", "scores"):
        path = getattr(cfg, key)
        if path is not None and path != "-" and not os.path.exists(path):
            raise ConfigError(key, f"file not found: {path}")
