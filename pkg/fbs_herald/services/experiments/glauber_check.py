from __future__ import annotations

from typing import Any

from fbs_herald.config import SystemConfig
from fbs_herald.exceptions import FBSError
from fbs_herald.services.integrator import check_glauber_factorization

from .common import ExperimentSpec, add_output, finalize_result, get_int, get_list, record_failure, write_csv
from .result import ExperimentResult

GLAUBER_TOL = 1e-9
DEFAULT_GTS = (0.0, 0.25, 0.5)


def run_glauber_check(spec: ExperimentSpec, cfg: SystemConfig) -> dict[str, Any]:
    result = ExperimentResult(experiment=spec.name)
    out_dir = spec.ensure_out_dir()
    n_max_small = get_int(spec.params, "n_max_small", 10)
    rows = []
    for gt in get_list(spec.params, "gts", list(DEFAULT_GTS)):
        try:
            deviation = check_glauber_factorization(float(gt), n_max_small)
        except FBSError as exc:
            record_failure(result, "glauber_failed", exc)
            continue
        passed = result.add_check(
            f"glauber[gt={float(gt):g}]", deviation, f"< {GLAUBER_TOL:.0e}", deviation < GLAUBER_TOL
        )
        rows.append([gt, n_max_small, deviation, passed])

    add_output(result, write_csv(out_dir / "glauber.csv", ["gt", "n_max_small", "deviation", "passed"], rows))
    result.metrics = {"n_max_small": n_max_small, "max_deviation": max((row[2] for row in rows), default=None)}
    return finalize_result(result, spec, cfg)
