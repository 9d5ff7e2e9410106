import sys
import os
import unittest

import numpy as np

# Ensure app is in path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from app.engine.hilbert import (
    HilbertError, LinearMap, SpinState, StateVector, alternate_cyclic_eigenvalue, alternate_cyclic_projector,
    dimension, m_lambda_apply, parity_apply, parity_map, parity_projector, reversal_apply, reversal_map, rng_for,
    supersymmetric_couplings, translate, translation_map, translation_projector, xyz_hamiltonian,
)


class TestBasis(unittest.TestCase):

    def test_dimension_rejects_empty_chain(self):
        """Chains need at least one site."""
        self.assertEqual(dimension(3), 8)
        with self.assertRaises(HilbertError) as cm:
            dimension(0)
        self.assertIn("must be positive", str(cm.exception))

    def test_label_encoding(self):
        """Site 1 is the least significant bit and a down spin sets it."""
        state = SpinState.from_label("↑↓↑")
        self.assertEqual(state.code, 2)
        self.assertEqual(state.spin(2), 1)
        self.assertEqual(state.n_down, 1)
        self.assertEqual(SpinState.from_label("udu"), state)
        self.assertEqual(state.label(ascii=True), "udu")

    def test_label_rejects_unknown_symbol(self):
        """Only arrows and u/d are spin symbols."""
        with self.assertRaises(HilbertError) as cm:
            SpinState.from_label("uxd")
        self.assertIn("Unknown spin symbol", str(cm.exception))

    def test_amplitude_shape_is_checked(self):
        """A state on L sites carries exactly 2^L amplitudes."""
        with self.assertRaises(HilbertError) as cm:
            StateVector(3, np.zeros(4))
        self.assertIn("does not match", str(cm.exception))

    def test_rng_for_is_deterministic(self):
        """Same seed and keys give the same stream, other keys another."""
        first = rng_for(7, "weights", 3).standard_normal(4)
        again = rng_for(7, "weights", 3).standard_normal(4)
        other = rng_for(7, "weights", 4).standard_normal(4)
        np.testing.assert_array_equal(first, again)
        self.assertFalse(np.allclose(first, other))


class TestSymmetries(unittest.TestCase):

    def test_translation_moves_last_site_first(self):
        """S|s1 s2 s3> = |s3 s1 s2>."""
        image = translate(StateVector.basis("ddu"))
        self.assertAlmostEqual(abs(image.amplitude("udd")), 1.0)

    def test_translation_has_order_length(self):
        """S^L is the identity."""
        rng = rng_for(1, "translation")
        for length in (2, 3, 5):
            psi = StateVector.random(length, rng)
            back = translate(psi, length)
            np.testing.assert_allclose(back.amplitudes, psi.amplitudes)
            dense = translation_map(length).to_dense()
            np.testing.assert_allclose(np.linalg.matrix_power(dense, length), np.eye(dimension(length)))

    def test_parity_sign(self):
        """P acts on a basis state with k down spins as (-1)^L (-1)^k."""
        self.assertAlmostEqual(parity_apply(StateVector.all_up(3)).amplitude("uuu"), -1.0)
        self.assertAlmostEqual(parity_apply(StateVector.all_up(2)).amplitude("uu"), 1.0)
        self.assertAlmostEqual(parity_apply(StateVector.basis("udu")).amplitude("udu"), 1.0)

    def test_reversal_flips_every_spin(self):
        """R exchanges up and down everywhere."""
        image = reversal_apply(StateVector.basis("udu"))
        self.assertAlmostEqual(image.amplitude("dud"), 1.0)
        dense = reversal_map(4).to_dense()
        np.testing.assert_allclose(dense @ dense, np.eye(16))

    def test_m_lambda_weights(self):
        """M(λ) scales a basis state with k down spins by λ^(L+k)."""
        image = m_lambda_apply(2.0, StateVector.basis("udu"))
        self.assertAlmostEqual(image.amplitude("udu"), 16.0)
        with self.assertRaises(HilbertError):
            m_lambda_apply(0.0, StateVector.basis("udu"))

    def test_translation_commutes_with_parity_and_reversal(self):
        """S commutes with P and with R."""
        for length in (3, 4):
            s = translation_map(length).to_dense()
            p = parity_map(length).to_dense()
            r = reversal_map(length).to_dense()
            for x, y in ((s, p), (s, r)):
                np.testing.assert_allclose(x @ y, y @ x, atol=1e-14)


class TestProjectors(unittest.TestCase):

    def test_parity_projector_rejects_bad_sector(self):
        """Parity sectors are +1 and -1."""
        with self.assertRaises(HilbertError):
            parity_projector(3, 0)

    def test_translation_projector_is_orthogonal(self):
        """Projectors onto S-eigenspaces are idempotent and Hermitian."""
        for length in (3, 4):
            proj = translation_projector(length, alternate_cyclic_eigenvalue(length)).to_dense()
            np.testing.assert_allclose(proj @ proj, proj, atol=1e-13)
            np.testing.assert_allclose(proj, proj.conj().T, atol=1e-13)

    def test_translation_projector_rejects_non_root(self):
        """The eigenvalue must be an L-th root of unity."""
        with self.assertRaises(HilbertError) as cm:
            translation_projector(3, -1)
        self.assertIn("not an eigenvalue", str(cm.exception))

    def test_alternate_cyclic_sector(self):
        """W^L has S-eigenvalue +1 for odd L and -1 for even L."""
        self.assertEqual(alternate_cyclic_eigenvalue(3), 1)
        self.assertEqual(alternate_cyclic_eigenvalue(4), -1)
        rng = rng_for(2, "projector")
        psi = StateVector.random(4, rng)
        image = alternate_cyclic_projector(4)(psi)
        np.testing.assert_allclose(translate(image).amplitudes, -image.amplitudes, atol=1e-13)


class TestLinearMaps(unittest.TestCase):

    def test_map_algebra_matches_dense(self):
        """Sums, products and adjoints agree with their dense counterparts."""
        rng = rng_for(3, "maps")
        a = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
        first = LinearMap.dense(a, 3, 3)
        second = translation_map(3)
        b = second.to_dense()
        np.testing.assert_allclose((first + second).to_dense(), a + b)
        np.testing.assert_allclose((first @ second).to_dense(), a @ b)
        np.testing.assert_allclose((first * 2.0 - second).to_dense(), 2 * a - b)
        np.testing.assert_allclose(first.adjoint().to_dense(), a.conj().T)

    def test_matrix_free_adjoint(self):
        """A matrix-free map without rmatvec has no adjoint."""
        opaque = LinearMap.matrix_free(lambda x: 2 * x, 2, 2)
        with self.assertRaises(HilbertError) as cm:
            opaque.adjoint()
        self.assertIn("no adjoint", str(cm.exception))

    def test_composition_checks_lengths(self):
        """Maps compose only when lengths line up."""
        with self.assertRaises(HilbertError):
            translation_map(3) @ translation_map(4)


class TestXYZ(unittest.TestCase):

    def test_supersymmetric_couplings(self):
        """ζ = 1 gives the XXZ point (2, 0, 0)."""
        self.assertEqual(supersymmetric_couplings(1.0), (2.0, 0.0, 0.0))
        jx, jy, jz = supersymmetric_couplings(0.5)
        self.assertAlmostEqual(jz, -0.375)

    def test_hamiltonian_is_hermitian_and_symmetric(self):
        """H_XYZ is Hermitian and commutes with S, P and R."""
        h = xyz_hamiltonian(4, 1.3, 0.4, -0.7).to_dense()
        np.testing.assert_allclose(h, h.conj().T, atol=1e-14)
        for sym in (translation_map(4), parity_map(4), reversal_map(4)):
            s = sym.to_dense()
            np.testing.assert_allclose(h @ s, s @ h, atol=1e-13)

    def test_heisenberg_ground_energy(self):
        """Isotropic L=2 ring: both bonds join the same pair, so H = -σ·σ."""
        levels = np.linalg.eigvalsh(xyz_hamiltonian(2, 1.0, 1.0, 1.0).to_dense())
        np.testing.assert_allclose(levels, [-1.0, -1.0, -1.0, 3.0], atol=1e-13)

    def test_hamiltonian_needs_two_sites(self):
        """A single site has no bond."""
        with self.assertRaises(HilbertError) as cm:
            xyz_hamiltonian(1, 1.0, 1.0, 1.0)
        self.assertIn("L ≥ 2", str(cm.exception))


if __name__ == "__main__":
    unittest.main()
