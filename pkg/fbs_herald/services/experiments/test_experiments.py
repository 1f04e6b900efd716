# Copyright (c) 2026, FBS Herald Contributors
# See license.txt

import csv
import json
import math
import tempfile
from pathlib import Path
from unittest import TestCase

import numpy as np

from fbs_herald.config import DEFAULT_CONFIG, make_config
from fbs_herald.exceptions import ValidationError
from fbs_herald.services.experiments import (
	run_fig3,
	run_glauber_check,
	run_herald_mc,
	run_oracle_check,
	run_stopband,
	run_tomography,
)
from fbs_herald.services.experiments.common import (
	ExperimentSpec,
	fmt,
	get_list,
	sha256_of_file,
	write_csv,
)
from fbs_herald.services.experiments.fig3 import crossing_point, gt_grid
from fbs_herald.services.experiments.oracle_check import convergence_ratio, gt_steps
from fbs_herald.services.experiments.result import ExperimentResult
from fbs_herald.services.ladder import choose_n_max


def _read_csv(path):
	with open(path, newline="", encoding="utf-8") as handle:
		return list(csv.reader(handle))


class ExperimentTestCase(TestCase):
	def setUp(self):
		self._tmp = tempfile.TemporaryDirectory()
		self.out = Path(self._tmp.name)
		self.cfg = make_config(DEFAULT_CONFIG)

	def tearDown(self):
		self._tmp.cleanup()

	def spec(self, name, out=None, seed=0, **params):
		return ExperimentSpec(name=name, out_dir=out or self.out, seed=seed, params=params)

	def manifest(self, out=None):
		return json.loads(((out or self.out) / "manifest.json").read_text(encoding="utf-8"))


class TestCommon(TestCase):
	def test_fmt(self):
		self.assertEqual(fmt(1 / 3), "0.333333333333")
		self.assertEqual(fmt(3), "3")
		self.assertEqual(fmt(True), "1")
		self.assertEqual(fmt(None), "")
		self.assertEqual(fmt(1e-20), "1e-20")

	def test_unknown_experiment(self):
		with self.assertRaises(ValidationError):
			ExperimentSpec(name="fig4", out_dir=Path("."))

	def test_get_list(self):
		self.assertEqual(get_list({"modes": "1,2"}, "modes", []), [1, 2])
		self.assertEqual(get_list({"modes": 3}, "modes", []), [3])
		self.assertEqual(get_list({}, "modes", [1]), [1])

	def test_csv_is_written_atomically(self):
		with tempfile.TemporaryDirectory() as tmp:
			path = write_csv(Path(tmp) / "x.csv", ["a", "b"], [[1, 0.5]])
			self.assertEqual(path.read_text(encoding="utf-8"), "a,b\n1,0.5\n")
			self.assertEqual([p.name for p in Path(tmp).iterdir()], ["x.csv"])
			self.assertEqual(len(sha256_of_file(path)), 64)

	def test_result_status(self):
		result = ExperimentResult(experiment="fig3")
		self.assertTrue(result.add_check("a", 1.0, "< 2", True))
		self.assertTrue(result.passed)
		result.add_error("boom", "failed")
		self.assertFalse(result.passed)
		self.assertEqual(result.as_dict()["errors"][0]["code"], "boom")


class TestFig3(ExperimentTestCase):
	def test_grid(self):
		grid = gt_grid()
		self.assertEqual(grid.size, 301)
		self.assertEqual(grid[0], 0.0)
		self.assertEqual(grid[-1], 3.0)

	def test_crossing_point(self):
		grid = gt_grid()
		self.assertAlmostEqual(crossing_point(grid, np.exp(-(grid**2)), grid**2 * np.exp(-(grid**2))), 1.0, delta=1e-3)

	def test_default_run(self):
		result = run_fig3(self.spec("fig3"), self.cfg)
		self.assertEqual(result["status"], "passed")
		rows = _read_csv(self.out / "fig3_lossless.csv")
		self.assertEqual(rows[0], ["gt", "P0", "P1", "P2", "P3"])
		self.assertEqual(len(rows), 302)
		self.assertEqual(rows[1][:2], ["0", "1"])
		self.assertEqual(rows[-1][0], "3")
		lossy = _read_csv(self.out / "fig3_lossy.csv")
		for plain, damped in zip(rows[1:], lossy[1:]):
			gt = float(plain[0])
			for a, b in zip(plain[1:], damped[1:]):
				self.assertAlmostEqual(float(b), float(a) * math.exp(-gt), delta=2e-12)
		self.assertAlmostEqual(result["metrics"]["crossing_gt"], 1.0, delta=0.01)
		checks = {check["name"]: check for check in result["checks"]}
		self.assertTrue(checks["lossy_lindblad"]["passed"])
		self.assertLess(result["metrics"]["max_lindblad_deviation"], 1e-8)

	def test_manifest(self):
		run_fig3(self.spec("fig3", seed=5), self.cfg)
		manifest = self.manifest()
		self.assertEqual(manifest["experiment"], "fig3")
		self.assertEqual(manifest["seed"], 5)
		self.assertEqual(manifest["config"]["n_max"], 40)
		self.assertEqual(
			manifest["outputs"]["fig3_lossless.csv"], sha256_of_file(self.out / "fig3_lossless.csv")
		)
		self.assertIn("numpy", manifest["versions"])

	def test_reproducible_bytes(self):
		other = self.out / "again"
		run_fig3(self.spec("fig3"), self.cfg)
		run_fig3(self.spec("fig3", out=other), self.cfg)
		self.assertEqual((self.out / "manifest.json").read_bytes(), (other / "manifest.json").read_bytes())

	def test_coherence_warning(self):
		cfg = self.cfg.with_changes(mech_decoherence_rate=0.1)
		result = run_fig3(self.spec("fig3"), cfg)
		self.assertEqual(result["warnings"][0]["code"], "coherence_window")


class TestOracleCheck(ExperimentTestCase):
	def test_default_run_passes(self):
		result = run_oracle_check(self.spec("oracle-check"), self.cfg.with_changes(n_max=1))
		self.assertEqual(result["status"], "passed", result["checks"])
		names = {check["name"] for check in result["checks"]}
		self.assertIn("schrodinger", names)
		self.assertIn("lindblad[gamma/g=3]", names)
		self.assertIn("rk4_convergence_ratio", names)
		ratio = next(check["value"] for check in result["checks"] if check["name"] == "rk4_convergence_ratio")
		self.assertTrue(8.0 <= ratio <= 32.0)
		self.assertTrue((self.out / "oracle_schrodinger.csv").exists())

	def test_convergence_ratio_over_gt2(self):
		cfg = self.cfg.with_changes(n_max=choose_n_max(2.0, 1e-12))
		ratio = convergence_ratio(cfg, 0.01, gt_steps(2.0, 0.5))
		self.assertGreaterEqual(ratio, 8.0)
		self.assertLessEqual(ratio, 32.0)

	def test_coarse_step_fails(self):
		result = run_oracle_check(
			self.spec("oracle-check", dt=0.5, loss_ratios=[0]), self.cfg.with_changes(n_max=1)
		)
		self.assertEqual(result["status"], "failed")
		self.assertTrue(result["errors"])
		self.assertEqual(self.manifest()["status"], "failed")


class TestGlauberCheck(ExperimentTestCase):
	def test_default_run(self):
		result = run_glauber_check(self.spec("glauber-check"), self.cfg)
		self.assertEqual(result["status"], "passed")
		self.assertEqual(len(_read_csv(self.out / "glauber.csv")), 4)

	def test_support_guard_fails_run(self):
		result = run_glauber_check(self.spec("glauber-check", gts=[2.0]), self.cfg)
		self.assertEqual(result["status"], "failed")
		self.assertEqual(result["errors"][0]["details"]["error_type"], "TruncationError")


class TestHeraldMC(ExperimentTestCase):
	def test_deterministic(self):
		other = self.out / "again"
		first = run_herald_mc(self.spec("herald-mc", seed=42, trials=20_000), self.cfg)
		run_herald_mc(self.spec("herald-mc", out=other, seed=42, trials=20_000), self.cfg)
		self.assertEqual(
			(self.out / "herald_outcomes.csv").read_bytes(), (other / "herald_outcomes.csv").read_bytes()
		)
		self.assertEqual(
			(self.out / "herald_summary.json").read_bytes(), (other / "herald_summary.json").read_bytes()
		)
		self.assertEqual(first["metrics"]["trials"], 20_000)

	def test_outcome_file(self):
		run_herald_mc(self.spec("herald-mc", seed=1, trials=100), self.cfg)
		rows = _read_csv(self.out / "herald_outcomes.csv")
		self.assertEqual(rows[0], ["trial", "clicked", "channel", "heralded_phonon"])
		self.assertEqual(len(rows), 101)

	def test_lossy_no_click_rate(self):
		result = run_herald_mc(self.spec("herald-mc", seed=42, trials=100_000), self.cfg.with_changes(gamma=1.0))
		summary = json.loads((self.out / "herald_summary.json").read_text(encoding="utf-8"))
		self.assertAlmostEqual(summary["exact_no_click"], 1 - math.exp(-1), delta=1e-12)
		band = 3 * math.sqrt(summary["exact_no_click"] * (1 - summary["exact_no_click"]) / 100_000)
		self.assertLess(abs(summary["empirical_no_click"] - summary["exact_no_click"]), band)
		checks = {check["name"]: check for check in result["checks"]}
		self.assertTrue(checks["no_click_band"]["passed"])

	def test_weak_coherent_input(self):
		run_herald_mc(self.spec("herald-mc", seed=2, trials=1000, alpha_in=0.1), self.cfg)
		summary = json.loads((self.out / "herald_summary.json").read_text(encoding="utf-8"))
		self.assertAlmostEqual(summary["exact_click"][1], 0.01 * math.exp(-1), delta=1e-15)

	def test_invalid_detector(self):
		result = run_herald_mc(self.spec("herald-mc", efficiency=2.0), self.cfg)
		self.assertEqual(result["status"], "failed")


class TestStopband(ExperimentTestCase):
	def test_default_run(self):
		result = run_stopband(self.spec("stopband"), self.cfg)
		self.assertEqual(result["status"], "passed", result["checks"])
		rows = _read_csv(self.out / "stopband.csv")
		self.assertEqual(rows[0], ["mode", "role", "deviation", "threshold", "passed"])
		self.assertEqual([row[1] for row in rows[1:]], ["stop_band"] * 3 + ["negative_control"])

	def test_stokes_mode_is_rejected(self):
		result = run_stopband(self.spec("stopband", modes=[-1]), self.cfg)
		self.assertEqual(result["status"], "failed")


class TestTomography(ExperimentTestCase):
	def test_round_trips(self):
		result = run_tomography(self.spec("tomography"), self.cfg)
		self.assertEqual(result["status"], "passed", result["checks"])
		for j in range(4):
			rows = _read_csv(self.out / f"readout_j{j}.csv")
			self.assertEqual(rows[0], ["n", "probability"])
			self.assertGreater(float(rows[j + 1][1]), 1 - 1e-10)

	def test_stokes_stop_band_rejected(self):
		result = run_tomography(self.spec("tomography", stop_band_mode=-1), self.cfg)
		self.assertEqual(result["status"], "failed")
