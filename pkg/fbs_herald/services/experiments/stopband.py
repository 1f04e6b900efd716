from __future__ import annotations

from typing import Any

import numpy as np

from fbs_herald.config import SystemConfig
from fbs_herald.exceptions import FBSError
from fbs_herald.services.integrator import IntegratorSpec, stop_band_deviation
from fbs_herald.services.ladder import choose_n_max
from fbs_herald.services.tomography import STOP_BAND_TOL, validate_stop_band

from .common import ExperimentSpec, add_output, finalize_result, get_float, get_list, record_failure, write_csv
from .result import ExperimentResult

CONTROL_MIN_DEVIATION = 1e-3
STOPBAND_HEADER = ["mode", "role", "deviation", "threshold", "passed"]


def run_stopband(spec: ExperimentSpec, cfg: SystemConfig) -> dict[str, Any]:
    result = ExperimentResult(experiment=spec.name)
    out_dir = spec.ensure_out_dir()
    gt_max = get_float(spec.params, "gt_max", 2.0)
    control_gt = get_float(spec.params, "control_gt", 1.0)
    rows: list[list[Any]] = []

    try:
        cfg = cfg.with_changes(gamma=0.0, n_max=max(cfg.n_max, choose_n_max(gt_max, cfg.trunc_tol)))
    except FBSError as exc:
        record_failure(result, "stopband_failed", exc)
        return finalize_result(result, spec, cfg)

    for mode in get_list(spec.params, "modes", [1, 2, 3]):
        try:
            report = validate_stop_band(cfg, int(mode), gt_max=gt_max)
        except FBSError as exc:
            record_failure(result, "stopband_failed", exc)
            continue
        result.add_check(f"stop_band[m={report.mode}]", report.deviation, f"< {STOP_BAND_TOL:.0e}", report.passed)
        rows.append([report.mode, "stop_band", report.deviation, STOP_BAND_TOL, report.passed])

    # Suppressing a Stokes mode must visibly change the trajectory.
    for mode in get_list(spec.params, "control_modes", [-1]):
        try:
            control_spec = IntegratorSpec.from_gt(np.linspace(0.0, control_gt, 11), cfg)
            deviation = stop_band_deviation(cfg, int(mode), control_spec)
        except FBSError as exc:
            record_failure(result, "control_failed", exc)
            continue
        passed = result.add_check(
            f"negative_control[m={int(mode)}]",
            deviation,
            f"> {CONTROL_MIN_DEVIATION:.0e}",
            deviation > CONTROL_MIN_DEVIATION,
        )
        rows.append([int(mode), "negative_control", deviation, CONTROL_MIN_DEVIATION, passed])

    add_output(result, write_csv(out_dir / "stopband.csv", STOPBAND_HEADER, rows))
    result.metrics = {"n_max": cfg.n_max, "gt_max": gt_max}
    return finalize_result(result, spec, cfg)
