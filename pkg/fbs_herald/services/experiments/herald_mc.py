from __future__ import annotations

import math
from typing import Any

from fbs_herald.config import SystemConfig
from fbs_herald.exceptions import FBSError
from fbs_herald.services.analytic import coherence_check, herald_probabilities, weak_coherent_herald_probabilities
from fbs_herald.services.herald import (
    OUTCOME_HEADER,
    DetectorModel,
    click_distribution,
    outcome_rows,
    sample_heralds,
    summarize,
)
from fbs_herald.services.ladder import choose_n_max
from fbs_herald.utils import get_logger

from .common import (
    ExperimentSpec,
    add_output,
    finalize_result,
    get_float,
    get_int,
    record_failure,
    write_csv,
    write_json,
)
from .result import ExperimentResult

logger = get_logger(__name__)

SIGMA_BAND = 3.0


def _band(probability: float, trials: int) -> float:
    return SIGMA_BAND * math.sqrt(probability * (1.0 - probability) / trials)


def run_herald_mc(spec: ExperimentSpec, cfg: SystemConfig) -> dict[str, Any]:
    result = ExperimentResult(experiment=spec.name)
    out_dir = spec.ensure_out_dir()
    params = spec.params
    gt = get_float(params, "gt", 1.0)
    trials = get_int(params, "trials", 100_000)
    workers = get_int(params, "workers", 1)
    significance = get_float(params, "significance", 0.001)
    alpha_in = get_float(params, "alpha_in", None)

    try:
        cfg = cfg.with_changes(n_max=max(cfg.n_max, choose_n_max(gt, cfg.trunc_tol)))
        detector = DetectorModel(
            efficiency=get_float(params, "efficiency", 1.0),
            dark_rate=get_float(params, "dark_rate", 0.0),
        )
        if alpha_in is None:
            table = herald_probabilities(gt, cfg)
        else:
            if abs(alpha_in) > 0.3:
                result.add_warning("weak_coherent_amplitude", f"|alpha_in| = {abs(alpha_in):.3f} exceeds 0.3")
            table = weak_coherent_herald_probabilities(gt, alpha_in, cfg)
        dist = click_distribution(table, detector, gt=gt)
        sample = sample_heralds(dist, trials, spec.seed, workers=workers)
    except FBSError as exc:
        record_failure(result, "herald_mc_failed", exc)
        return finalize_result(result, spec, cfg)

    add_output(result, write_csv(out_dir / "herald_outcomes.csv", OUTCOME_HEADER, outcome_rows(sample.outcomes)))
    summary = summarize(dist, sample)
    summary["detector"] = detector.as_dict()
    summary["alpha_in"] = alpha_in
    summary["gt"] = gt
    add_output(result, write_json(out_dir / "herald_summary.json", summary))

    result.add_check("chi_square_p_value", summary["p_value"], f">= {significance:g}", summary["p_value"] >= significance)
    freqs = sample.frequencies
    if 1 in dist.channels:
        exact = dist.probability_of(1)
        empirical = float(freqs.click_frequencies()[list(dist.channels).index(1)])
        band = _band(exact, trials)
        result.add_check("click_j1_band", abs(empirical - exact), f"<= {band:.3e} (3σ)", abs(empirical - exact) <= band)
    band = _band(dist.no_click, trials)
    no_click_gap = abs(freqs.no_click_frequency() - dist.no_click)
    result.add_check("no_click_band", no_click_gap, f"<= {band:.3e} (3σ)", no_click_gap <= band)

    warning = coherence_check(cfg, cfg.time_from_gt(gt)) if cfg.g > 0 else None
    if warning:
        result.add_warning("coherence_window", warning)

    result.metrics = {
        "trials": trials,
        "seed": spec.seed,
        "chi_square": summary["chi_square"],
        "p_value": summary["p_value"],
        "no_click_exact": dist.no_click,
        "no_click_empirical": freqs.no_click_frequency(),
    }
    logger.info("herald-mc: %d trials, p=%.4f", trials, summary["p_value"])
    return finalize_result(result, spec, cfg)
