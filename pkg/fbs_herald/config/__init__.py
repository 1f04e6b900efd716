"""Model parameters: the single source of rates, truncation bounds and tolerances."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from fbs_herald.exceptions import UsageError
from fbs_herald.utils import get_logger, throw

logger = get_logger(__name__)

DEFAULT_TRUNC_TOL = 1e-12
UNITS = ("gt", "si")
REQUIRED_KEYS = ("g", "gamma", "n_max")
CONFIG_KEYS = frozenset(
    {
        "g",
        "gamma",
        "omega_p",
        "Omega",
        "n_max",
        "trunc_tol",
        "suppressed_modes",
        "units",
        "time_unit",
        "mech_decoherence_rate",
        "preset",
    }
)

# Desk-scale run used when no config file is given.
DEFAULT_CONFIG: dict[str, Any] = {"g": 1.0, "gamma": 0.0, "n_max": 40}

PRESETS: dict[str, dict[str, Any]] = {
    # Silicon waveguide figures: g ~ 2π·29 kHz, mechanical T2^-1 ~ 2π·1.2 kHz.
    "silicon": {
        "units": "si",
        "g": 2 * math.pi * 29e3,
        "gamma": 2 * math.pi * 29e3,
        "mech_decoherence_rate": 2 * math.pi * 1.2e3,
        "n_max": 40,
    },
}


@dataclass(frozen=True)
class SystemConfig:
    g: float
    gamma: float
    n_max: int
    omega_p: float = 0.0
    Omega: float = 0.0
    trunc_tol: float = DEFAULT_TRUNC_TOL
    suppressed_modes: frozenset[int] = field(default_factory=frozenset)
    # Seconds per unit of internal time; 1.0 when the config was given in gt units.
    time_unit: float = 1.0
    mech_decoherence_rate: float | None = None

    @property
    def dim(self) -> int:
        return self.n_max + 1

    @property
    def loss_ratio(self) -> float:
        if self.g == 0:
            throw("gamma/g is undefined for g = 0.", UsageError)
        return self.gamma / self.g

    def gt_from_time(self, t: float) -> float:
        return self.g * t

    def time_from_gt(self, gt: float) -> float:
        if self.g == 0:
            if gt == 0:
                return 0.0
            throw("Cannot convert gt to time with g = 0.", UsageError)
        return gt / self.g

    def is_suppressed(self, mode: int) -> bool:
        return mode in self.suppressed_modes

    def with_changes(self, **changes: Any) -> SystemConfig:
        """Revalidated copy with `changes` applied."""
        raw = self.as_dict()
        raw.update(changes)
        return make_config(raw)

    def as_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["suppressed_modes"] = sorted(self.suppressed_modes)
        data["units"] = "gt"
        return data


def _number(raw: dict[str, Any], key: str, default: Any = None) -> float:
    value = raw.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        throw(f"{key} must be a number, got {value!r}.")
    if not math.isfinite(value):
        throw(f"{key} must be finite.")
    return float(value)


def _nonnegative(raw: dict[str, Any], key: str, default: Any = None) -> float:
    value = _number(raw, key, default)
    if value < 0:
        throw(f"{key} must be nonnegative")
    return value


def _n_max(raw: dict[str, Any]) -> int:
    value = raw.get("n_max")
    if isinstance(value, float) and value.is_integer():
        value = int(value)
    if isinstance(value, bool) or not isinstance(value, int):
        throw(f"n_max must be an integer, got {value!r}.")
    if value < 1:
        throw("n_max must be at least 1")
    return value


def _suppressed_modes(raw: dict[str, Any]) -> frozenset[int]:
    value = raw.get("suppressed_modes") or []
    if isinstance(value, int) and not isinstance(value, bool):
        value = [value]
    elif isinstance(value, str):
        try:
            value = [int(part) for part in value.split(",") if part.strip()]
        except ValueError:
            throw(f"suppressed_modes must be comma-separated integers, got {value!r}.")
    if not isinstance(value, (list, tuple, set, frozenset)):
        throw("suppressed_modes must be a list of integer mode indices.")
    modes = []
    for mode in value:
        if isinstance(mode, bool) or not isinstance(mode, int):
            throw(f"suppressed_modes entries must be integers, got {mode!r}.")
        modes.append(mode)
    return frozenset(modes)


def make_config(raw: dict[str, Any]) -> SystemConfig:
    """Validate a flat key-value map and return a SystemConfig.

    With ``units="si"`` all rates are read in rad/s and rescaled to units of
    g, so the stored config always has ``g == 1`` and ``time_unit == 1/g_si``.
    """
    raw = dict(raw or {})
    preset = raw.pop("preset", None)
    if preset is not None:
        if preset not in PRESETS:
            throw(f"Unknown preset {preset!r}; expected one of {', '.join(sorted(PRESETS))}.")
        raw = {**PRESETS[preset], **raw}

    unknown = sorted(set(raw) - CONFIG_KEYS)
    if unknown:
        throw(f"Unknown config keys: {', '.join(unknown)}")
    missing = [key for key in REQUIRED_KEYS if key not in raw]
    if missing:
        throw(f"Missing required config keys: {', '.join(missing)}")

    units = raw.get("units") or "gt"
    if units not in UNITS:
        throw(f"units must be one of {', '.join(UNITS)}, got {units!r}.")

    g = _nonnegative(raw, "g")
    gamma = _nonnegative(raw, "gamma")
    omega_p = _number(raw, "omega_p", 0.0)
    Omega = _number(raw, "Omega", 0.0)
    time_unit = _number(raw, "time_unit", 1.0)
    if time_unit <= 0:
        throw("time_unit must be positive")
    mech_rate = None
    if raw.get("mech_decoherence_rate") is not None:
        mech_rate = _nonnegative(raw, "mech_decoherence_rate")
    trunc_tol = _number(raw, "trunc_tol", DEFAULT_TRUNC_TOL)
    if not 0 < trunc_tol < 1:
        throw("trunc_tol must lie in (0, 1)")

    if units == "si":
        if g == 0:
            throw("g must be positive when units='si'")
        scale = g
        gamma, omega_p, Omega = gamma / scale, omega_p / scale, Omega / scale
        if mech_rate is not None:
            mech_rate = mech_rate / scale
        time_unit = time_unit / scale
        g = 1.0
        logger.debug("SI config rescaled to units of g (time_unit=%.6g s)", time_unit)

    return SystemConfig(
        g=g,
        gamma=gamma,
        n_max=_n_max(raw),
        omega_p=omega_p,
        Omega=Omega,
        trunc_tol=trunc_tol,
        suppressed_modes=_suppressed_modes(raw),
        time_unit=time_unit,
        mech_decoherence_rate=mech_rate,
    )


def read_config_file(path: str | Path) -> dict[str, Any]:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        throw(f"Config file not found: {path}")
    except json.JSONDecodeError as exc:
        throw(f"Invalid JSON in config file {path}: {exc}")
    if not isinstance(raw, dict):
        throw("Config file must hold a flat JSON object.")
    nested = [key for key, value in raw.items() if isinstance(value, dict)]
    if nested:
        throw(f"Config must be flat; nested values for: {', '.join(nested)}")
    return raw


def load_config(path: str | Path | None = None, overrides: list[str] | None = None) -> SystemConfig:
    """Config file (DEFAULT_CONFIG when path is None) with KEY=VALUE overrides on top."""
    raw = read_config_file(path) if path else dict(DEFAULT_CONFIG)
    return make_config(apply_overrides(raw, overrides))


def parse_override(item: str) -> tuple[str, Any]:
    key, sep, value = item.partition("=")
    key = key.strip()
    if not sep or not key:
        throw(f"Override must look like KEY=VALUE, got {item!r}.")
    try:
        return key, json.loads(value)
    except json.JSONDecodeError:
        return key, value.strip()


def apply_overrides(raw: dict[str, Any], items: list[str] | None) -> dict[str, Any]:
    out = dict(raw)
    for item in items or []:
        key, value = parse_override(item)
        out[key] = value
    return out
