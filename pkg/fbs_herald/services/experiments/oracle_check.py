"""Cross-checks of the closed forms against the numerical integrators."""

from __future__ import annotations

import math
from collections.abc import Sequence
from typing import Any

import numpy as np

from fbs_herald.config import SystemConfig
from fbs_herald.exceptions import FBSError
from fbs_herald.services.analytic import (
    conditional_phonon_state,
    density_closed_form,
    herald_probabilities,
    wavefunction_closed_form,
)
from fbs_herald.services.integrator import (
    IntegratorSpec,
    SchrodingerTrajectory,
    integrate_lindblad,
    integrate_schrodinger,
    trajectory_header,
    trajectory_rows,
)
from fbs_herald.services.ladder import choose_n_max, density_from_state, initial_state
from fbs_herald.utils import get_logger

from .common import (
    ExperimentSpec,
    add_output,
    finalize_result,
    get_float,
    get_list,
    record_failure,
    write_csv,
)
from .result import ExperimentResult

logger = get_logger(__name__)

ORACLE_TOL = 1e-8
FIDELITY_TOL = 1e-12
FACTORIZED_ORDERS = 3
DEFAULT_LOSS_RATIOS = (0.0, 1.0, 3.0)
CONVERGENCE_BAND = (8.0, 32.0)
DEVIATION_HEADER = ["check", "loss_ratio", "max_deviation", "threshold", "passed"]


def gt_steps(stop: float, step: float = 0.1) -> np.ndarray:
    return np.round(np.arange(int(round(stop / step)) + 1) * step, 10)


def _sized(cfg: SystemConfig, gt_max: float, **changes: Any) -> SystemConfig:
    n_max = max(cfg.n_max, choose_n_max(gt_max, cfg.trunc_tol))
    return cfg.with_changes(n_max=n_max, **changes)


def schrodinger_deviation(
    cfg: SystemConfig, gt_grid: Sequence[float], **spec_kwargs: Any
) -> tuple[float, SchrodingerTrajectory]:
    """Max amplitude deviation of the integrated wavefunction from the closed form, and the trajectory."""
    spec = IntegratorSpec.from_gt(gt_grid, cfg, **spec_kwargs)
    trajectory = integrate_schrodinger(initial_state(cfg), cfg, spec)
    closed = np.array([wavefunction_closed_form(float(gt), cfg).amps for gt in gt_grid])
    return float(np.max(np.abs(trajectory.amplitudes() - closed))), trajectory


def convergence_ratio(cfg: SystemConfig, dt: float, gt_grid: Sequence[float]) -> float:
    """deviation(dt) / deviation(dt/2) against the closed form; about 16 for RK4."""
    coarse, _ = schrodinger_deviation(cfg, gt_grid, method="rk4", dt=dt)
    fine, _ = schrodinger_deviation(cfg, gt_grid, method="rk4", dt=dt / 2)
    if fine == 0:
        return math.inf
    return coarse / fine


def lindblad_deviations(cfg: SystemConfig, gt_grid: Sequence[float], **spec_kwargs: Any) -> dict[str, float]:
    spec = IntegratorSpec.from_gt(gt_grid, cfg, **spec_kwargs)
    rho0 = density_from_state(initial_state(cfg))
    trajectory = integrate_lindblad(rho0, cfg, spec)
    lossless = cfg.with_changes(gamma=0.0)

    closed_dev = factor_dev = 0.0
    fidelity_dev = 0.0
    for block in trajectory.blocks:
        closed = density_closed_form(block.t, cfg)
        closed_dev = max(
            closed_dev,
            float(np.max(np.abs(block.alpha - closed.alpha))),
            float(np.max(np.abs(block.beta - closed.beta))),
        )
        expected = herald_probabilities(cfg.gt_from_time(block.t), lossless).probs[: FACTORIZED_ORDERS + 1]
        expected = expected * math.exp(-cfg.gamma * block.t)
        numeric = block.click_probabilities()[: FACTORIZED_ORDERS + 1]
        factor_dev = max(factor_dev, float(np.max(np.abs(numeric - expected))))
        for j in range(FACTORIZED_ORDERS + 1):
            state = conditional_phonon_state(block, j)
            if state.click_probability > 0:
                fidelity_dev = max(fidelity_dev, abs(state.fidelity - 1.0), abs(state.purity - 1.0))

    return {
        "closed_form": closed_dev,
        "loss_factorization": factor_dev,
        "heralded_fidelity": fidelity_dev,
        "trace_drift": float(max(abs(trace - 1.0) for trace in trajectory.traces)),
    }


def lossless_consistency(cfg: SystemConfig, gt_grid: Sequence[float], **spec_kwargs: Any) -> float:
    """With gamma = 0 the Lindblad block must equal the pure-state outer product."""
    cfg = cfg.with_changes(gamma=0.0)
    spec = IntegratorSpec.from_gt(gt_grid, cfg, **spec_kwargs)
    psi0 = initial_state(cfg)
    pure = integrate_schrodinger(psi0, cfg, spec)
    mixed = integrate_lindblad(density_from_state(psi0), cfg, spec)
    return float(
        max(
            np.max(np.abs(block.alpha - np.outer(state.amps, state.amps.conj())))
            for state, block in zip(pure.states, mixed.blocks)
        )
    )


def _loss_ratios(spec: ExperimentSpec, cfg: SystemConfig) -> list[float]:
    ratios = {float(r) for r in get_list(spec.params, "loss_ratios", list(DEFAULT_LOSS_RATIOS))}
    if cfg.g > 0:
        ratios.add(cfg.loss_ratio)
    return sorted(ratios)


def run_oracle_check(spec: ExperimentSpec, cfg: SystemConfig) -> dict[str, Any]:
    result = ExperimentResult(experiment=spec.name)
    out_dir = spec.ensure_out_dir()
    params = spec.params
    spec_kwargs: dict[str, Any] = {"method": params.get("method", "rk4")}
    if params.get("dt") is not None:
        spec_kwargs["dt"] = get_float(params, "dt", None)
    gt_max = get_float(params, "gt_max", 3.0)
    lindblad_gt_max = get_float(params, "lindblad_gt_max", 2.0)
    rows: list[list[Any]] = []

    def check(name: str, value: float, threshold: float, ratio: float | None = None) -> None:
        passed = value < threshold
        result.add_check(name if ratio is None else f"{name}[gamma/g={ratio:g}]", value, f"< {threshold:.0e}", passed)
        rows.append([name, "" if ratio is None else ratio, value, threshold, passed])

    try:
        schrodinger_cfg = _sized(cfg, gt_max, gamma=0.0)
        deviation, trajectory = schrodinger_deviation(schrodinger_cfg, gt_steps(gt_max), **spec_kwargs)
        check("schrodinger", deviation, ORACLE_TOL)
        result.metrics["schrodinger_n_max"] = schrodinger_cfg.n_max
        add_output(
            result,
            write_csv(
                out_dir / "oracle_schrodinger.csv",
                trajectory_header(schrodinger_cfg.n_max),
                trajectory_rows(trajectory),
            ),
        )
    except FBSError as exc:
        record_failure(result, "schrodinger_failed", exc)

    lindblad_grid = gt_steps(lindblad_gt_max)
    for ratio in _loss_ratios(spec, cfg):
        try:
            lossy_cfg = _sized(cfg, lindblad_gt_max, gamma=ratio * cfg.g)
            deviations = lindblad_deviations(lossy_cfg, lindblad_grid, **spec_kwargs)
        except FBSError as exc:
            record_failure(result, "lindblad_failed", exc)
            continue
        check("lindblad", deviations["closed_form"], ORACLE_TOL, ratio)
        check("trace_drift", deviations["trace_drift"], ORACLE_TOL, ratio)
        check("loss_factorization", deviations["loss_factorization"], ORACLE_TOL, ratio)
        check("heralded_fidelity", deviations["heralded_fidelity"], FIDELITY_TOL, ratio)

    try:
        consistency = lossless_consistency(_sized(cfg, lindblad_gt_max), lindblad_grid, **spec_kwargs)
        check("lossless_consistency", consistency, ORACLE_TOL)
    except FBSError as exc:
        record_failure(result, "consistency_failed", exc)

    if spec_kwargs.get("dt") is None and spec_kwargs["method"] == "rk4":
        convergence_dt = get_float(params, "convergence_dt", 0.01)
        try:
            ratio = convergence_ratio(_sized(cfg, 2.0, gamma=0.0), convergence_dt, gt_steps(2.0, 0.5))
            low, high = CONVERGENCE_BAND
            result.add_check("rk4_convergence_ratio", ratio, f"in [{low:g}, {high:g}]", low <= ratio <= high)
            rows.append(["rk4_convergence_ratio", "", ratio, f"{low:g}..{high:g}", low <= ratio <= high])
        except FBSError as exc:
            record_failure(result, "convergence_failed", exc)

    add_output(result, write_csv(out_dir / "oracle_deviations.csv", DEVIATION_HEADER, rows))
    result.metrics["deviations"] = {item.name: item.value for item in result.checks}
    logger.info("oracle-check: %d checks, %d errors", len(result.checks), len(result.errors))
    return finalize_result(result, spec, cfg)
