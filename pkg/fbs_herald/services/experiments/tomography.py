from __future__ import annotations

import math
from typing import Any

import numpy as np

from fbs_herald.config import SystemConfig
from fbs_herald.exceptions import FBSError
from fbs_herald.services.analytic import density_closed_form
from fbs_herald.services.herald import DetectorModel
from fbs_herald.services.ladder import choose_n_max
from fbs_herald.services.tomography import (
    READOUT_HEADER,
    PulseSpec,
    ReadoutRegister,
    apply_beam_splitter_pulse,
    make_pulse,
    tomography_round_trip,
    total_quanta_distribution,
)
from fbs_herald.utils import get_logger

from .common import (
    ExperimentSpec,
    add_output,
    finalize_result,
    get_float,
    get_int,
    get_list,
    record_failure,
    write_csv,
)
from .result import ExperimentResult

logger = get_logger(__name__)

READOUT_TOL = 1e-10
INVARIANT_TOL = 1e-12


def _pulse_invariants(j: int, dim: int, pulse: PulseSpec) -> tuple[float, float]:
    """(norm drift, largest change of the total-quanta distribution) for a swap of |j, 0⟩."""
    before = ReadoutRegister.from_fock(j, dim)
    after = apply_beam_splitter_pulse(before, pulse)
    norm_drift = abs(float(np.sum(np.abs(after.psi) ** 2)) - 1.0)
    quanta_drift = float(np.max(np.abs(total_quanta_distribution(after) - total_quanta_distribution(before))))
    return norm_drift, quanta_drift


def run_tomography(spec: ExperimentSpec, cfg: SystemConfig) -> dict[str, Any]:
    result = ExperimentResult(experiment=spec.name)
    out_dir = spec.ensure_out_dir()
    params = spec.params
    gt = get_float(params, "gt", 1.0)
    stop_band_mode = get_int(params, "stop_band_mode", 1)

    try:
        cfg = cfg.with_changes(
            n_max=max(cfg.n_max, choose_n_max(gt, cfg.trunc_tol)),
            suppressed_modes=sorted(cfg.suppressed_modes | {stop_band_mode}),
        )
        pulse = make_pulse(
            cfg,
            stop_band_mode,
            area=get_float(params, "area", math.pi),
            coupling=get_float(params, "coupling", 1.0),
        )
        detector = DetectorModel(
            efficiency=get_float(params, "efficiency", 1.0),
            dark_rate=get_float(params, "dark_rate", 0.0),
        )
        rho = density_closed_form(cfg.time_from_gt(gt), cfg)
    except FBSError as exc:
        record_failure(result, "tomography_failed", exc)
        return finalize_result(result, spec, cfg)

    reports = []
    for j in get_list(params, "focks", [0, 1, 2, 3]):
        j = int(j)
        try:
            report = tomography_round_trip(rho, j, pulse, detector, cfg.trunc_tol)
            norm_drift, quanta_drift = _pulse_invariants(j, cfg.dim, pulse)
        except FBSError as exc:
            record_failure(result, "round_trip_failed", exc)
            continue
        add_output(
            result,
            write_csv(
                out_dir / f"readout_j{j}.csv",
                READOUT_HEADER,
                [[n, p] for n, p in enumerate(report.readout.tolist())],
            ),
        )
        result.add_check(
            f"readout_mass[j={j}]",
            report.mass_at_fock,
            f"> 1 - {READOUT_TOL:.0e}",
            report.mass_at_fock > 1.0 - READOUT_TOL,
        )
        result.add_check(f"unitarity[j={j}]", norm_drift, f"< {INVARIANT_TOL:.0e}", norm_drift < INVARIANT_TOL)
        result.add_check(
            f"quanta_conservation[j={j}]", quanta_drift, f"< {INVARIANT_TOL:.0e}", quanta_drift < INVARIANT_TOL
        )
        reports.append(report.as_dict())

    result.metrics = {"gt": gt, "pulse": pulse.as_dict(), "detector": detector.as_dict(), "round_trips": reports}
    logger.info("tomography: %d round trips", len(reports))
    return finalize_result(result, spec, cfg)
