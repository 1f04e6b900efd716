from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Any

from fbs_herald import __version__
from fbs_herald.config import CONFIG_KEYS, load_config, parse_override
from fbs_herald.exceptions import FBSError
from fbs_herald.services.experiments import (
    run_fig3,
    run_glauber_check,
    run_herald_mc,
    run_oracle_check,
    run_stopband,
    run_tomography,
)
from fbs_herald.services.experiments.common import EXPERIMENT_NAMES, ExperimentSpec, dumps
from fbs_herald.utils import get_logger, log_error, setup_logging, throw

logger = get_logger(__name__)

EXPERIMENTS = {
    "fig3": run_fig3,
    "oracle-check": run_oracle_check,
    "glauber-check": run_glauber_check,
    "herald-mc": run_herald_mc,
    "stopband": run_stopband,
    "tomography": run_tomography,
}

# Experiment parameters accepted through --set next to the config keys.
PARAM_KEYS = frozenset(
    {
        "alpha_in",
        "area",
        "control_gt",
        "control_modes",
        "convergence_dt",
        "coupling",
        "dark_rate",
        "dt",
        "efficiency",
        "focks",
        "gt",
        "gt_max",
        "gts",
        "lindblad_gt_max",
        "loss_ratios",
        "method",
        "modes",
        "n_max_small",
        "orders",
        "significance",
        "stop_band_mode",
        "trials",
        "workers",
    }
)


def _response(
    ok: bool, experiment: str | None, status: Any, errors: list | None = None, result: dict | None = None
) -> dict[str, Any]:
    return {
        "ok": ok,
        "experiment": experiment,
        "status": status,
        "errors": errors or [],
        "result": result,
    }


def _split_overrides(items: list[str] | None) -> tuple[list[str], dict[str, Any]]:
    """Config items stay as KEY=VALUE strings for load_config; parameters are parsed."""
    config_items: list[str] = []
    params: dict[str, Any] = {}
    for item in items or []:
        key, value = parse_override(item)
        if key in CONFIG_KEYS:
            config_items.append(item)
        elif key in PARAM_KEYS:
            params[key] = value
        else:
            throw(f"Unknown override key {key!r}; not a config key or experiment parameter.")
    return config_items, params


def run_experiment(
    name: str,
    config_path: str | Path | None = None,
    out_dir: str | Path = ".",
    overrides: list[str] | None = None,
    seed: int = 0,
) -> dict[str, Any]:
    """Run one named experiment and wrap its result in the response envelope."""
    handler = EXPERIMENTS.get(name)
    if not handler:
        return _response(False, name, "rejected", [f"Unsupported experiment {name}"])

    try:
        config_items, params = _split_overrides(overrides)
        if seed < 0:
            throw("seed must be a nonnegative integer")
        spec = ExperimentSpec(
            name=name,
            out_dir=Path(out_dir),
            config_path=Path(config_path) if config_path else None,
            overrides=dict(parse_override(item) for item in config_items),
            seed=seed,
            params=params,
        )
        cfg = load_config(config_path, config_items)
        logger.info("Running %s into %s", name, spec.out_dir)
        result = handler(spec, cfg)
        errors = [err.get("message") for err in result.get("errors", [])]
        return _response(result.get("status") == "passed", name, result.get("status"), errors, result)
    except FBSError as exc:
        log_error(title=f"fbs_herald {name} rejected")
        return _response(False, name, "failed", [str(exc)])
    except Exception as exc:
        log_error(title=f"fbs_herald {name} failure")
        return _response(False, name, "failed", [str(exc)])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fbs-herald",
        description="Heralded phonon Fock states from forward Brillouin scattering.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENT_NAMES:
        sub = subparsers.add_parser(name)
        sub.add_argument("--config", default=None, help="flat JSON config file (default: g=1, gamma=0, n_max=40)")
        sub.add_argument("--out", default=".", help="output directory")
        sub.add_argument("--seed", type=int, default=0)
        sub.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="config key or experiment parameter override (repeatable)",
        )
        sub.add_argument("--verbose", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)
    response = run_experiment(
        args.experiment,
        config_path=args.config,
        out_dir=args.out,
        overrides=args.overrides,
        seed=args.seed,
    )
    sys.stdout.write(dumps(response))
    return 0 if response["ok"] else 1
