from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import platform
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import scipy

import fbs_herald
from fbs_herald.config import SystemConfig
from fbs_herald.exceptions import FBSError
from fbs_herald.utils import get_logger, throw

from .result import ExperimentResult

logger = get_logger(__name__)

EXPERIMENT_NAMES = ("fig3", "oracle-check", "glauber-check", "herald-mc", "stopband", "tomography")
MANIFEST_NAME = "manifest.json"
SIGNIFICANT_DIGITS = 12


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    out_dir: Path
    config_path: Path | None = None
    overrides: dict[str, Any] = field(default_factory=dict)
    seed: int = 0
    # Experiment parameters split off the overrides (trials, gt, dt, ...).
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.name not in EXPERIMENT_NAMES:
            throw(f"Unknown experiment {self.name!r}; expected one of {', '.join(EXPERIMENT_NAMES)}.")
        out_dir = Path(self.out_dir)
        object.__setattr__(self, "out_dir", out_dir)
        if self.config_path is not None:
            object.__setattr__(self, "config_path", Path(self.config_path))

    def ensure_out_dir(self) -> Path:
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            throw(f"Cannot create output directory {self.out_dir}: {exc}")
        if not os.access(self.out_dir, os.W_OK):
            throw(f"Output directory {self.out_dir} is not writable.")
        return self.out_dir


def fmt(value: Any) -> str:
    if value is None or value == "":
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.{SIGNIFICANT_DIGITS}g}"
    return str(value)


def atomic_write_text(path: Path, text: str) -> Path:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_csv(path: Path, header: list[str], rows: list[list[Any]]) -> Path:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(value) for value in row])
    return atomic_write_text(path, buffer.getvalue())


def dumps(payload: dict[str, Any]) -> str:
    return json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n"


def write_json(path: Path, payload: dict[str, Any]) -> Path:
    return atomic_write_text(path, dumps(payload))


def _json_default(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.integer, np.floating, np.bool_)):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def sha256_of_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def versions() -> dict[str, str]:
    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "fbs_herald": fbs_herald.__version__,
    }


def get_float(params: dict[str, Any], key: str, default: float | None) -> float | None:
    value = params.get(key, default)
    if value is None:
        return None
    try:
        return float(value)
    except (TypeError, ValueError):
        throw(f"Parameter {key} must be a number, got {value!r}.")


def get_int(params: dict[str, Any], key: str, default: int) -> int:
    value = params.get(key, default)
    if isinstance(value, float) and value.is_integer():
        value = int(value)
    if isinstance(value, bool) or not isinstance(value, int):
        throw(f"Parameter {key} must be an integer, got {value!r}.")
    return value


def get_list(params: dict[str, Any], key: str, default: list[Any]) -> list[Any]:
    value = params.get(key, default)
    if isinstance(value, str):
        value = [json.loads(part) for part in value.split(",") if part.strip()]
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        value = [value]
    if not isinstance(value, (list, tuple)):
        throw(f"Parameter {key} must be a list, got {value!r}.")
    return list(value)


def record_failure(result: ExperimentResult, code: str, exc: FBSError) -> None:
    logger.error("%s: %s", code, exc)
    result.add_error(code, str(exc), error_type=type(exc).__name__)


def add_output(result: ExperimentResult, path: Path) -> Path:
    result.outputs.append(path.name)
    return path


def finalize_result(result: ExperimentResult, spec: ExperimentSpec, cfg: SystemConfig) -> dict[str, Any]:
    """Settle the status, write the run manifest and return the result payload."""
    result.status = "passed" if result.passed else "failed"
    if result.message is None:
        failed = [check.name for check in result.checks if not check.passed]
        result.message = "All checks passed." if result.passed else f"Failed: {', '.join(failed) or 'errors'}"
    out_dir = spec.out_dir
    manifest = {
        "experiment": spec.name,
        "status": result.status,
        "seed": spec.seed,
        "config": cfg.as_dict(),
        "config_path": str(spec.config_path) if spec.config_path else None,
        "overrides": spec.overrides,
        "params": spec.params,
        "versions": versions(),
        "outputs": {name: sha256_of_file(out_dir / name) for name in result.outputs},
        "checks": [check.as_dict() for check in result.checks],
        "warnings": [warning.as_dict() for warning in result.warnings],
        "errors": [error.as_dict() for error in result.errors],
    }
    write_json(out_dir / MANIFEST_NAME, manifest)
    return result.as_dict()
