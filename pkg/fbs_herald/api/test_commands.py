# Copyright (c) 2026, FBS Herald Contributors
# See license.txt

import io
import json
import tempfile
from contextlib import redirect_stdout
from pathlib import Path
from unittest import TestCase

from fbs_herald.api.commands import EXPERIMENTS, _split_overrides, build_parser, main, run_experiment
from fbs_herald.exceptions import ValidationError
from fbs_herald.services.experiments.common import EXPERIMENT_NAMES


class TestOverrides(TestCase):
	def test_split(self):
		config, params = _split_overrides(["gamma=1", "trials=500", "suppressed_modes=[1]"])
		self.assertEqual(config, ["gamma=1", "suppressed_modes=[1]"])
		self.assertEqual(params, {"trials": 500})

	def test_unknown_key(self):
		with self.assertRaisesRegex(ValidationError, "bogus"):
			_split_overrides(["bogus=1"])



class TestRunExperiment(TestCase):
	def setUp(self):
		self._tmp = tempfile.TemporaryDirectory()
		self.out = Path(self._tmp.name)

	def tearDown(self):
		self._tmp.cleanup()

	def test_every_experiment_has_a_handler(self):
		self.assertEqual(set(EXPERIMENTS), set(EXPERIMENT_NAMES))

	def test_unsupported_experiment(self):
		response = run_experiment("fig9", out_dir=self.out)
		self.assertFalse(response["ok"])
		self.assertEqual(response["status"], "rejected")

	def test_fig3_envelope(self):
		response = run_experiment("fig3", out_dir=self.out, seed=3)
		self.assertTrue(response["ok"])
		self.assertEqual(response["status"], "passed")
		self.assertEqual(response["result"]["experiment"], "fig3")
		self.assertTrue((self.out / "manifest.json").exists())

	def test_config_file(self):
		path = self.out / "cfg.json"
		path.write_text(json.dumps({"g": 1, "gamma": 0, "n_max": 12}), encoding="utf-8")
		response = run_experiment("glauber-check", config_path=path, out_dir=self.out / "run")
		self.assertTrue(response["ok"])
		manifest = json.loads((self.out / "run" / "manifest.json").read_text(encoding="utf-8"))
		self.assertEqual(manifest["config"]["n_max"], 12)
		self.assertEqual(manifest["config_path"], str(path))

	def test_overrides_reach_config_and_manifest(self):
		response = run_experiment("fig3", out_dir=self.out, overrides=["gamma=0.5", "suppressed_modes=2,3"])
		self.assertTrue(response["ok"])
		manifest = json.loads((self.out / "manifest.json").read_text(encoding="utf-8"))
		self.assertEqual(manifest["config"]["gamma"], 0.5)
		self.assertEqual(manifest["config"]["suppressed_modes"], [2, 3])
		self.assertEqual(manifest["overrides"], {"gamma": 0.5, "suppressed_modes": "2,3"})

	def test_invalid_config_is_reported(self):
		with self.assertLogs("fbs_herald", level="ERROR"):
			response = run_experiment("fig3", out_dir=self.out, overrides=["n_max=0"])
		self.assertFalse(response["ok"])
		self.assertIn("n_max must be at least 1", response["errors"][0])

	def test_negative_seed(self):
		with self.assertLogs("fbs_herald", level="ERROR"):
			response = run_experiment("herald-mc", out_dir=self.out, seed=-1)
		self.assertFalse(response["ok"])


class TestMain(TestCase):
	def test_parser(self):
		args = build_parser().parse_args(["herald-mc", "--seed", "42", "--set", "trials=10", "--set", "gt=1"])
		self.assertEqual(args.experiment, "herald-mc")
		self.assertEqual(args.seed, 42)
		self.assertEqual(args.overrides, ["trials=10", "gt=1"])

	def test_exit_status(self):
		with tempfile.TemporaryDirectory() as tmp:
			buffer = io.StringIO()
			with redirect_stdout(buffer):
				code = main(["stopband", "--out", tmp])
			self.assertEqual(code, 0)
			self.assertTrue(json.loads(buffer.getvalue())["ok"])

			with redirect_stdout(io.StringIO()):
				code = main(["stopband", "--out", tmp, "--set", "modes=[-1]"])
			self.assertEqual(code, 1)
