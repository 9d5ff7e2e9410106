import sys
import os
import math
import unittest

import numpy as np

# Ensure app is in path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from app.engine.hilbert import (
    StateVector, parity_apply, parity_signs, reversal_apply, rng_for, sigma_z_signs, supersymmetric_couplings, translate,
    xyz_hamiltonian,
)
from app.engine.susy import (
    SusyError, check_annihilation, conjugated_first_insertion, conjugation_residual, ground_energy,
    ground_state_check, insertion_operator, local_supercharge, m_i_relation_residual, overlap_coefficients,
    representative_states, representative_states_literal, supercharge, susy_algebra_residuals, susy_hamiltonian,
    susy_kernel, zero_energy_states,
)


class TestSupercharge(unittest.TestCase):

    def test_zeta_zero_is_excluded(self):
        """ζ = 0 is not a supersymmetric point."""
        with self.assertRaises(SusyError) as cm:
            local_supercharge(0.0)
        self.assertIn("excluded", str(cm.exception))

    def test_local_supercharge(self):
        """q|↑> = 0 and q|↓> = |↑↑> - ζ|↓↓>."""
        q = local_supercharge(0.7)
        np.testing.assert_allclose(q(StateVector.basis("u")).amplitudes, 0.0)
        image = q(StateVector.basis("d"))
        self.assertAlmostEqual(image.amplitude("uu"), 1.0)
        self.assertAlmostEqual(image.amplitude("dd"), -0.7)
        self.assertAlmostEqual(image.amplitude("ud"), 0.0)

    def test_single_site_insertion_is_local_charge(self):
        """On one site q_1 is q itself."""
        np.testing.assert_allclose(insertion_operator(1, 1, 1.3).to_dense(), local_supercharge(1.3).to_dense())

    def test_insertion_site_range(self):
        """Insertions happen at sites 0..L."""
        with self.assertRaises(SusyError) as cm:
            insertion_operator(3, 4, 1.0)
        self.assertIn("Insertion site", str(cm.exception))

    def test_zero_insertion_is_conjugated_first(self):
        """q_0 = S^-1 q_1 S."""
        for length in (2, 3, 4):
            np.testing.assert_allclose(insertion_operator(length, 0, 0.4).to_dense(),
                                       conjugated_first_insertion(length, 0.4).to_dense(), atol=1e-14)

    def test_nilpotent(self):
        """Q_(L+1) Q_L vanishes for several ζ, including negative ones."""
        for zeta in (0.3, 1.0, 2.5, -1.2):
            for length in (1, 2, 3, 4):
                product = supercharge(length + 1, zeta).to_dense() @ supercharge(length, zeta).to_dense()
                self.assertLess(float(np.max(np.abs(product))), 1e-12)

    def test_parity_relations(self):
        """Q anticommutes with the σᶻ string and commutes with P, including ζ < 0."""
        for zeta in (-0.4, -1.7, 0.6):
            for length in range(2, 7):
                q = supercharge(length, zeta).to_dense()
                z, z_next = np.diag(sigma_z_signs(length)), np.diag(sigma_z_signs(length + 1))
                p, p_next = np.diag(parity_signs(length)), np.diag(parity_signs(length + 1))
                self.assertLess(float(np.max(np.abs(z_next @ q + q @ z))), 1e-12)
                self.assertLess(float(np.max(np.abs(p_next @ q - q @ p))), 1e-12)

    def test_algebra_on_random_states(self):
        """The supersymmetric Hamiltonian reproduces H_XYZ - E0 on the alternate-cyclic sector."""
        rng = rng_for(11, "algebra")
        for length in (3, 4):
            residuals = susy_algebra_residuals(length, 0.7, rng, samples=4)
            self.assertIn("ZQ+QZ", residuals)
            self.assertIn("PQ-QP", residuals)
            for name, value in residuals.items():
                self.assertLess(value, 1e-11, name)

    def test_hamiltonian_needs_two_sites(self):
        """H is only defined from L = 2 on."""
        with self.assertRaises(SusyError):
            susy_hamiltonian(1, 1.0)

    def test_conjugation_by_m_lambda(self):
        """M(λ) Q(ζ/λ²) = Q(ζ) M(λ)."""
        rng = rng_for(12, "conjugation")
        self.assertLess(conjugation_residual(3, 1.3, 0.8, rng), 1e-12)
        self.assertLess(conjugation_residual(4, 0.6, -1.2, rng), 1e-12)

    def test_m_i_flips_zeta(self):
        """M(i) maps H_XYZ(ζ) to H_XYZ(-ζ)."""
        for length in (3, 4):
            self.assertLess(m_i_relation_residual(length, 0.7), 1e-12)


class TestRepresentatives(unittest.TestCase):

    def test_coefficients(self):
        """Φ weighs odd-k states by ζ^((k-1)/2), Φ̄ even-k states by ζ^(k/2)."""
        reps = representative_states(1, 2.0)
        self.assertAlmostEqual(reps.phi.amplitude("duu"), 1.0)
        self.assertAlmostEqual(reps.phi.amplitude("ddd"), 2.0)
        self.assertAlmostEqual(reps.phi.amplitude("uuu"), 0.0)
        self.assertAlmostEqual(reps.phi_bar.amplitude("uuu"), 1.0)
        self.assertAlmostEqual(reps.phi_bar.amplitude("ddu"), 2.0)

    def test_literal_construction_matches(self):
        """The √ζ construction gives the same states for ζ > 0."""
        for zeta in (1.0, 2.3, 0.4):
            closed = representative_states(2, zeta)
            literal = representative_states_literal(2, zeta)
            np.testing.assert_allclose(literal.phi.amplitudes, closed.phi.amplitudes, rtol=1e-12, atol=1e-14)
            np.testing.assert_allclose(literal.phi_bar.amplitudes, closed.phi_bar.amplitudes, rtol=1e-12, atol=1e-14)

    def test_literal_construction_needs_positive_zeta(self):
        """√ζ is only taken for ζ > 0."""
        with self.assertRaises(SusyError):
            representative_states_literal(1, -1.0)

    def test_n_must_be_positive(self):
        """n = 0 has no representatives."""
        with self.assertRaises(SusyError):
            representative_states(0, 1.0)

    def test_annihilation(self):
        """Q kills Φ(ζ), Φ̄(ζ) and Q† kills Φ(1/ζ), Φ̄(1/ζ)."""
        for zeta in (0.3, 1.0, -1.2):
            for n in (1, 2, 3):
                self.assertLess(check_annihilation(n, zeta).max_residual, 1e-11)


class TestZeroEnergyStates(unittest.TestCase):

    def test_kernel_dimension_law(self):
        """dim ker H on W^L is 0 for even L and 2 for odd L."""
        dims = [susy_kernel(length, 0.5).dimension for length in range(2, 8)]
        self.assertEqual(dims, [0, 2, 0, 2, 0, 2])

    def test_kernel_iterative_path(self):
        """Lanczos in both parity sectors agrees with the dense count."""
        self.assertEqual(susy_kernel(5, 0.5, dense_limit=3).dimension, 2)
        self.assertEqual(susy_kernel(6, 0.5, dense_limit=3).dimension, 0)

    def test_zero_energy_pair(self):
        """ψ has parity +1, ψ̄ = Rψ and both are XYZ ground states."""
        self.assertIsNone(zero_energy_states(4, 0.5))
        pair = zero_energy_states(5, 0.5)
        psi = pair.psi
        np.testing.assert_allclose(parity_apply(psi).amplitudes, psi.amplitudes, atol=1e-10)
        np.testing.assert_allclose(reversal_apply(psi).amplitudes, pair.psi_bar.amplitudes, atol=1e-12)
        np.testing.assert_allclose(translate(psi).amplitudes, psi.amplitudes, atol=1e-10)
        self.assertLess(pair.h_residual, 1e-10)
        xyz = xyz_hamiltonian(5, *supersymmetric_couplings(0.5))
        image = xyz(psi) - psi * ground_energy(5, 0.5)
        self.assertLess(image.norm(), 1e-9)
        self.assertGreaterEqual(float(np.min(psi.amplitudes.real)), -1e-10)

    def test_overlaps(self):
        """All overlap coefficients are non-zero and the decompositions hold."""
        zeta = 0.5
        pair = zero_energy_states(3, zeta)
        report = overlap_coefficients(pair, representative_states(1, zeta), representative_states(1, 1 / zeta))
        self.assertFalse(report.falsified)
        self.assertLess(report.nu_ratio_residual, 1e-10)
        for name, value in report.decomposition_residuals.items():
            self.assertLess(value, 1e-9, name)

    def test_overlaps_reject_mismatched_representatives(self):
        """Representatives must be taken at ζ and 1/ζ."""
        pair = zero_energy_states(3, 0.5)
        with self.assertRaises(SusyError):
            overlap_coefficients(pair, representative_states(1, 0.5), representative_states(1, 0.5))


class TestGroundState(unittest.TestCase):

    def test_ground_energy_formula(self):
        """E0 = -L(3+ζ²)/4."""
        self.assertEqual(ground_energy(3, 1.0), -3.0)
        self.assertTrue(math.isclose(ground_energy(5, 0.5), -5 * 3.25 / 4))

    def test_odd_chains_have_doubly_degenerate_minimum(self):
        """The XYZ minimum is E0 with multiplicity 2 on odd chains."""
        for zeta in (1.0, 0.3, -1.2):
            for length in (3, 5, 7):
                report = ground_state_check(length, zeta)
                self.assertLess(report.relative_error, 1e-10)
                self.assertEqual(report.multiplicity, 2)

    def test_ground_state_iterative_path(self):
        """The Lanczos path finds the same minimum."""
        report = ground_state_check(7, 0.8, dense_limit=4)
        self.assertEqual(report.method, "krylov-extremal")
        self.assertLess(report.relative_error, 1e-10)
        self.assertEqual(report.multiplicity, 2)


if __name__ == "__main__":
    unittest.main()
