# Copyright (c) 2026, FBS Herald Contributors
# See license.txt

import math
from unittest import TestCase

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from fbs_herald.config import make_config
from fbs_herald.exceptions import TruncationError, ValidationError
from fbs_herald.services.analytic import density_closed_form
from fbs_herald.services.ladder import phonon_operators
from fbs_herald.services.tomography import (
	PulseSpec,
	ReadoutRegister,
	apply_beam_splitter_pulse,
	make_pulse,
	phonon_statistics,
	readout_statistics,
	tomography_round_trip,
	total_quanta_distribution,
	validate_pulse,
	validate_stop_band,
)


def _cfg(**kwargs):
	raw = {"g": 1.0, "gamma": 0.0, "n_max": 30}
	raw.update(kwargs)
	return make_config(raw)


def _pulse(area=math.pi):
	return PulseSpec(target_optical_mode=3, pump_mode=2, area=area, coupling=1.0)


class TestPulseSpec(TestCase):
	def test_duration(self):
		pulse = PulseSpec(target_optical_mode=3, pump_mode=2, area=math.pi, coupling=2.0)
		self.assertAlmostEqual(pulse.duration, math.pi / 4)

	def test_invalid_pulses(self):
		with self.assertRaises(ValidationError):
			PulseSpec(target_optical_mode=3, pump_mode=2, area=0.0, coupling=1.0)
		with self.assertRaises(ValidationError):
			PulseSpec(target_optical_mode=3, pump_mode=1, area=math.pi, coupling=1.0)

	def test_make_pulse_requires_stop_band(self):
		with self.assertRaises(ValidationError):
			make_pulse(_cfg(), 1)
		pulse = make_pulse(_cfg(suppressed_modes=[1]), 1)
		self.assertEqual((pulse.pump_mode, pulse.target_optical_mode), (2, 3))

	def test_pump_must_not_be_suppressed(self):
		with self.assertRaises(ValidationError):
			validate_pulse(_pulse(), _cfg(suppressed_modes=[1, 2]))


class TestBeamSplitter(TestCase):
	def test_swap_fock_two(self):
		out = apply_beam_splitter_pulse(ReadoutRegister.from_fock(2, 6), _pulse())
		np.testing.assert_allclose(readout_statistics(out), np.eye(6)[2], atol=1e-12)
		np.testing.assert_allclose(phonon_statistics(out), np.eye(6)[0], atol=1e-12)

	def test_half_pulse_splits_one_excitation(self):
		out = apply_beam_splitter_pulse(ReadoutRegister.from_fock(1, 4), _pulse(math.pi / 2))
		np.testing.assert_allclose(readout_statistics(out)[:2], [0.5, 0.5], atol=1e-12)

	def test_matches_dense_exponential(self):
		dim = 6
		b, b_dag = phonon_operators(dim - 1)
		h = np.kron(b, b_dag) + np.kron(b_dag, b)
		amps = np.zeros(dim, dtype=complex)
		amps[:3] = [0.6, 0.0, 0.8j]
		register = ReadoutRegister.from_phonon(amps, dim)
		pulse = _pulse(1.1)
		expected = expm(-1j * pulse.coupling * pulse.duration * h) @ register.psi.ravel()
		out = apply_beam_splitter_pulse(register, pulse)
		np.testing.assert_allclose(out.psi.ravel(), expected, atol=1e-12)

	@settings(max_examples=25, deadline=None)
	@given(st.integers(min_value=0, max_value=5), st.floats(min_value=0.01, max_value=2 * math.pi))
	def test_unitarity_and_quanta_conservation(self, j, area):
		before = ReadoutRegister.from_fock(j, 8)
		after = apply_beam_splitter_pulse(before, _pulse(area))
		self.assertAlmostEqual(float(np.sum(np.abs(after.psi) ** 2)), 1.0, delta=1e-12)
		np.testing.assert_allclose(total_quanta_distribution(after), total_quanta_distribution(before), atol=1e-12)

	def test_truncated_sector_rejected(self):
		psi = np.zeros((3, 3), dtype=complex)
		psi[2, 2] = 1.0
		with self.assertRaises(TruncationError):
			apply_beam_splitter_pulse(ReadoutRegister(psi=psi), _pulse())

	def test_register_validation(self):
		with self.assertRaises(ValidationError):
			ReadoutRegister(psi=np.zeros((2, 2)))
		with self.assertRaises(ValidationError):
			ReadoutRegister.from_fock(4, 4)


class TestStopBandValidation(TestCase):
	def test_anti_stokes_modes_pass(self):
		for j in (1, 2, 3):
			report = validate_stop_band(_cfg(), j)
			self.assertTrue(report.passed)
			self.assertLess(report.deviation, 1e-10)

	def test_stokes_mode_rejected(self):
		with self.assertRaises(ValidationError):
			validate_stop_band(_cfg(), 0)
		with self.assertRaises(ValidationError):
			validate_stop_band(_cfg(), -1)


class TestRoundTrip(TestCase):
	def test_heralded_fock_reads_out(self):
		cfg = _cfg(suppressed_modes=[1])
		pulse = make_pulse(cfg, 1)
		rho = density_closed_form(1.0, cfg)
		for j in range(4):
			report = tomography_round_trip(rho, j, pulse)
			self.assertEqual(report.peak, j)
			self.assertGreater(report.mass_at_fock, 1 - 1e-10)
			self.assertAlmostEqual(report.post_click.fidelity, 1.0, delta=1e-12)
