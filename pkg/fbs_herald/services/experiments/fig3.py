from __future__ import annotations

import math
from typing import Any

import numpy as np

from fbs_herald.config import SystemConfig
from fbs_herald.exceptions import FBSError
from fbs_herald.services.analytic import coherence_check, herald_probabilities
from fbs_herald.services.integrator import IntegratorSpec, integrate_lindblad
from fbs_herald.services.ladder import choose_n_max, density_from_state, initial_state

from .common import ExperimentSpec, add_output, finalize_result, get_int, record_failure, write_csv, write_json
from .result import ExperimentResult

GT_STEPS = 300
GT_STEP = 0.01
CROSSING_TARGET = 1.0
CROSSING_TOL = 0.01
LINDBLAD_TOL = 1e-8


def gt_grid() -> np.ndarray:
    """0.00, 0.01, ..., 3.00 rounded so the column prints exactly."""
    return np.round(np.arange(GT_STEPS + 1) * GT_STEP, 2)


def _table(cfg: SystemConfig, grid: np.ndarray, orders: int) -> np.ndarray:
    return np.array([herald_probabilities(float(gt), cfg).probs[: orders + 1] for gt in grid])


def lindblad_deviation(cfg: SystemConfig, grid: np.ndarray, lossy: np.ndarray) -> float:
    """Max gap between the lossy table and click probabilities from integrating the coefficient equations."""
    cfg = cfg.with_changes(n_max=max(cfg.n_max, choose_n_max(float(grid[-1]), cfg.trunc_tol)))
    spec = IntegratorSpec.from_gt(grid, cfg)
    trajectory = integrate_lindblad(density_from_state(initial_state(cfg)), cfg, spec)
    return float(np.max(np.abs(trajectory.probabilities()[:, : lossy.shape[1]] - lossy)))


def crossing_point(grid: np.ndarray, p0: np.ndarray, p1: np.ndarray) -> float | None:
    """First gt > 0 where P1 overtakes P0, linearly interpolated between grid points."""
    diff = p0 - p1
    for i in range(1, diff.size):
        if diff[i] == 0:
            return float(grid[i])
        if diff[i - 1] > 0 > diff[i]:
            return float(grid[i - 1] + (grid[i] - grid[i - 1]) * diff[i - 1] / (diff[i - 1] - diff[i]))
    return None


def run_fig3(spec: ExperimentSpec, cfg: SystemConfig) -> dict[str, Any]:
    result = ExperimentResult(experiment=spec.name)
    out_dir = spec.ensure_out_dir()
    orders = get_int(spec.params, "orders", 3)
    grid = gt_grid()
    header = ["gt", *(f"P{j}" for j in range(orders + 1))]

    try:
        if cfg.n_max < orders:
            cfg = cfg.with_changes(n_max=orders)
        lossless_cfg = cfg.with_changes(gamma=0.0)
        lossy_cfg = cfg.with_changes(gamma=cfg.g)
        lossless = _table(lossless_cfg, grid, orders)
        lossy = _table(lossy_cfg, grid, orders)
        deviation = lindblad_deviation(lossy_cfg, grid, lossy) if cfg.g > 0 else None
    except FBSError as exc:
        record_failure(result, "fig3_failed", exc)
        return finalize_result(result, spec, cfg)

    add_output(result, write_csv(out_dir / "fig3_lossless.csv", header, np.column_stack([grid, lossless]).tolist()))
    add_output(result, write_csv(out_dir / "fig3_lossy.csv", header, np.column_stack([grid, lossy]).tolist()))

    crossing = crossing_point(grid, lossless[:, 0], lossless[:, 1])
    result.add_check(
        "p0_p1_crossing",
        crossing,
        f"|gt - {CROSSING_TARGET:.2f}| <= {CROSSING_TOL}",
        crossing is not None and abs(crossing - CROSSING_TARGET) <= CROSSING_TOL,
    )
    if deviation is not None:
        result.add_check("lossy_lindblad", deviation, f"< {LINDBLAD_TOL:.0e}", deviation < LINDBLAD_TOL)
    result.add_check("initial_p0", float(lossless[0, 0]), "== 1", math.isclose(lossless[0, 0], 1.0))

    warning = coherence_check(cfg, cfg.time_from_gt(float(grid[-1]))) if cfg.g > 0 else None
    if warning:
        result.add_warning("coherence_window", warning)

    result.metrics = {"crossing_gt": crossing, "rows": int(grid.size), "max_lindblad_deviation": deviation}
    add_output(result, write_json(out_dir / "fig3_summary.json", result.metrics))
    return finalize_result(result, spec, cfg)
