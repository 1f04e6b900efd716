# Copyright (c) 2026, FBS Herald Contributors
# See license.txt

import math
from unittest import TestCase

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import poisson

from fbs_herald.config import make_config
from fbs_herald.exceptions import TruncationError, ValidationError
from fbs_herald.services.ladder import (
	DensityBlock,
	LadderState,
	apply_hamiltonian,
	check_normalized,
	choose_n_max,
	coupling_matrix,
	coupling_vector,
	density_from_state,
	initial_state,
	mode_index,
	phonon_operators,
	shift_operators,
	to_full_picture,
)


def _cfg(**kwargs):
	raw = {"g": 1.0, "gamma": 0.0, "n_max": 10}
	raw.update(kwargs)
	return make_config(raw)


class TestLadderState(TestCase):
	def test_initial_state(self):
		psi = initial_state(_cfg())
		self.assertEqual(psi.n_max, 10)
		self.assertEqual(psi.amps[0], 1.0)
		self.assertEqual(psi.norm_squared(), 1.0)

	def test_amplitudes_are_read_only(self):
		psi = initial_state(_cfg())
		with self.assertRaises(ValueError):
			psi.amps[0] = 0.0

	def test_too_short_state_rejected(self):
		with self.assertRaises(ValidationError):
			LadderState(amps=np.array([1.0]))

	def test_check_normalized(self):
		check_normalized(initial_state(_cfg()), 1e-12)
		with self.assertRaises(ValidationError):
			check_normalized(LadderState(amps=np.array([1.0, 1.0])), 1e-12)

	def test_mode_index(self):
		self.assertEqual(mode_index(0), 0)
		self.assertEqual(mode_index(3), -3)

	def test_full_picture_only_adds_phase(self):
		cfg = _cfg(omega_p=2.5)
		state = LadderState(amps=np.array([0.6, 0.8j]), vac_amp=0.0, t=1.3)
		full = to_full_picture(state, cfg)
		np.testing.assert_allclose(full.probabilities(), state.probabilities())
		np.testing.assert_allclose(full.amps, state.amps * np.exp(-2.5j * 1.3))


class TestChooseNMax(TestCase):
	def test_zero_time(self):
		self.assertEqual(choose_n_max(0.0, 1e-12), 1)

	def test_gt3_matches_direct_tail(self):
		n = choose_n_max(3.0, 1e-12)
		self.assertLess(poisson.sf(n - 1, 9.0), 1e-12)
		self.assertGreaterEqual(poisson.sf(n - 2, 9.0), 1e-12)

	def test_large_gt_below_level_cap(self):
		n = choose_n_max(300.0, 1e-12)
		self.assertLess(poisson.sf(n - 1, 300.0**2), 1e-12)
		self.assertGreaterEqual(poisson.sf(n - 2, 300.0**2), 1e-12)

	def test_gt_past_level_cap_raises(self):
		with self.assertRaisesRegex(TruncationError, "levels"):
			choose_n_max(330.0, 1e-12)

	def test_invalid_arguments(self):
		with self.assertRaises(ValidationError):
			choose_n_max(-1.0, 1e-12)
		with self.assertRaises(ValidationError):
			choose_n_max(1.0, 0.0)

	@settings(max_examples=40, deadline=None)
	@given(st.floats(min_value=0.0, max_value=5.0), st.sampled_from([1e-6, 1e-9, 1e-12]))
	def test_tail_bound(self, gt_max, tol):
		n = choose_n_max(gt_max, tol)
		self.assertGreaterEqual(n, 1)
		self.assertLess(poisson.sf(n, gt_max**2), tol)


class TestGenerator(TestCase):
	def test_couplings(self):
		np.testing.assert_allclose(coupling_vector(_cfg(g=2.0)), 2.0 * np.sqrt(np.arange(1, 11)))

	def test_generator_is_real_symmetric(self):
		K = coupling_matrix(_cfg()).toarray()
		self.assertTrue(np.isrealobj(K))
		np.testing.assert_array_equal(K, K.T)
		self.assertEqual(K[0, 1], 1.0)
		self.assertAlmostEqual(K[3, 4], 2.0)

	def test_generator_hermitian_up_to_100_levels(self):
		for n_max in (1, 2, 10, 50, 100):
			for modes in ([], [-3], [1, -7]):
				K = coupling_matrix(_cfg(n_max=n_max, suppressed_modes=modes)).toarray()
				generator = -1j * K
				self.assertEqual(K.shape, (n_max + 1, n_max + 1))
				np.testing.assert_array_equal(generator, -generator.conj().T)

	def test_suppressed_stokes_mode_cuts_both_links(self):
		couplings = coupling_vector(_cfg(suppressed_modes=[-2]))
		self.assertEqual(couplings[1], 0.0)
		self.assertEqual(couplings[2], 0.0)
		self.assertNotEqual(couplings[0], 0.0)

	def test_suppressed_anti_stokes_mode_is_inert(self):
		np.testing.assert_array_equal(coupling_vector(_cfg(suppressed_modes=[1, 2])), coupling_vector(_cfg()))

	def test_apply_hamiltonian_on_ground_state(self):
		deriv = apply_hamiltonian(initial_state(_cfg()), _cfg())
		self.assertEqual(deriv.amps[1], -1j)
		self.assertEqual(np.count_nonzero(deriv.amps), 1)

	def test_apply_hamiltonian_dimension_mismatch(self):
		with self.assertRaises(ValidationError):
			apply_hamiltonian(initial_state(_cfg(n_max=5)), _cfg())

	def test_zero_coupling_is_stationary(self):
		deriv = apply_hamiltonian(initial_state(_cfg(g=0.0)), _cfg(g=0.0))
		self.assertFalse(np.any(deriv.amps))

	@settings(max_examples=30, deadline=None)
	@given(st.lists(st.complex_numbers(max_magnitude=1.0, allow_nan=False, allow_infinity=False), min_size=11, max_size=11))
	def test_generator_conserves_norm(self, values):
		# d/dt ||ψ||² = 2 Re⟨ψ|ψ'⟩ vanishes for a Hermitian generator.
		amps = np.array(values, dtype=complex)
		deriv = apply_hamiltonian(LadderState(amps=amps), _cfg())
		self.assertAlmostEqual(float(np.real(np.vdot(amps, deriv.amps))), 0.0, places=12)


class TestOperators(TestCase):
	def test_shift_commutator_vanishes_inside_register(self):
		A, A_dag = shift_operators(10, anti_stokes=1)
		commutator = A @ A_dag - A_dag @ A
		# Only the two register edges break [A, A†] = 0.
		np.testing.assert_array_equal(commutator[1:-1, 1:-1], 0.0)
		for i in range(1, A.shape[0] - 1):
			np.testing.assert_array_equal(commutator @ np.eye(A.shape[0])[i], 0.0)

	def test_shift_moves_photon_down(self):
		A, _ = shift_operators(4)
		vec = np.zeros(5)
		vec[0] = 1.0
		np.testing.assert_array_equal(A @ vec, np.eye(5)[1])

	def test_phonon_operators(self):
		b, b_dag = phonon_operators(4)
		np.testing.assert_allclose(np.diag(b_dag @ b), np.arange(5.0))
		self.assertAlmostEqual(b[1, 2], math.sqrt(2))


class TestDensityBlock(TestCase):
	def test_from_state(self):
		state = LadderState(amps=np.array([0.6, 0.0]), vac_amp=0.8)
		rho = density_from_state(state)
		self.assertAlmostEqual(rho.trace(), 1.0)
		self.assertAlmostEqual(rho.beta[0], 0.64)
		np.testing.assert_allclose(rho.click_probabilities(), [0.36, 0.0])

	def test_shape_validation(self):
		with self.assertRaises(ValidationError):
			DensityBlock(alpha=np.eye(3), beta=np.zeros(2))
		with self.assertRaises(ValidationError):
			DensityBlock(alpha=np.zeros((2, 3)), beta=np.zeros(2))
