import sys
import os
import math
import unittest

import mpmath
import numpy as np
import pytest

# Ensure app is in path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from app.engine.elliptic import (
    EllipticError, EllipticParams, commuting_transfer_residual, jacobi_theta, jz_theta,
    sample_constrained_weights, tu_zero_checks, weights_from_elliptic, yang_baxter_residual, zeta_and_jz_consistency,
    zeta_theta,
)
from app.engine.hilbert import rng_for
from app.engine.vertex import WeightError

SUSY_ETA = math.pi / 3


class TestTheta(unittest.TestCase):

    def test_theta3_series(self):
        """ϑ3(0, 0.1) = 1 + 2(0.1 + 0.1^4 + 0.1^9 + ...)."""
        expected = 1.0 + 2 * (0.1 + 1e-4 + 1e-9 + 1e-16)
        self.assertLess(abs(jacobi_theta(3, 0.0, 0.1) - expected), 1e-15)

    def test_zero_nome(self):
        """At q = 0 only the constant terms survive."""
        self.assertEqual(jacobi_theta(1, 0.7, 0.0), 0.0)
        self.assertEqual(jacobi_theta(3, 0.7, 0.0), 1.0)
        self.assertEqual(jacobi_theta(4, 0.7, 0.0), 1.0)

    def test_symmetries(self):
        """ϑ1 is odd and π-antiperiodic, ϑ4 is even and π-periodic."""
        for q in (0.04, 0.25):
            for u in (0.3, 1.1):
                self.assertAlmostEqual(jacobi_theta(1, -u, q), -jacobi_theta(1, u, q), places=13)
                self.assertAlmostEqual(jacobi_theta(1, u + math.pi, q), -jacobi_theta(1, u, q), places=13)
                self.assertAlmostEqual(jacobi_theta(4, -u, q), jacobi_theta(4, u, q), places=13)
                self.assertAlmostEqual(jacobi_theta(4, u + math.pi, q), jacobi_theta(4, u, q), places=13)

    def test_jacobi_identity(self):
        """ϑ3(0)^4 = ϑ2(0)^4 + ϑ4(0)^4."""
        q = 0.3
        lhs = jacobi_theta(3, 0.0, q) ** 4
        rhs = jacobi_theta(2, 0.0, q) ** 4 + jacobi_theta(4, 0.0, q) ** 4
        self.assertLess(abs(lhs - rhs) / lhs, 1e-13)

    def test_matches_extended_precision(self):
        """The series agree with 30-digit reference values up to nomes close to 1."""
        points = [(0.3, 0.05), (1.1, 0.2), (-0.7, 0.5), (2.4, 0.81), (0.45, 0.95)]
        with mpmath.workdps(30):
            for u, q in points:
                # absolute scale of the series terms
                scale = 1.0 + math.sqrt(math.pi / -math.log(q))
                for kind in (1, 2, 3, 4):
                    reference = float(mpmath.jtheta(kind, mpmath.mpf(u), mpmath.mpf(q)))
                    self.assertLess(abs(jacobi_theta(kind, u, q) - reference), 1e-13 * scale, (kind, u, q))

    def test_argument_checks(self):
        """Kinds run 1..4 and the nome lies in [0, 1)."""
        with self.assertRaises(EllipticError) as cm:
            jacobi_theta(5, 0.0, 0.1)
        self.assertIn("Theta kind", str(cm.exception))
        with self.assertRaises(EllipticError) as cm:
            jacobi_theta(1, 0.0, 1.0)
        self.assertIn("Nome must lie", str(cm.exception))
        with self.assertRaises(EllipticError):
            EllipticParams(eta=SUSY_ETA, nome=1.5, u=0.4)


class TestEllipticWeights(unittest.TestCase):

    def test_constraint_on_susy_manifold(self):
        """η = π/3 weights satisfy the constraint for any nome and spectral parameter."""
        for nome in (0.05, 0.2, 0.6):
            for u in (0.2, 0.4, 0.8):
                w = weights_from_elliptic(EllipticParams(eta=SUSY_ETA, nome=nome, u=u))
                self.assertLess(w.constraint_residual, 1e-11)

    def test_constraint_fails_off_manifold(self):
        """Other crossing parameters miss the constraint."""
        w = weights_from_elliptic(EllipticParams(eta=math.pi / 4, nome=0.2, u=0.4))
        self.assertGreater(w.constraint_residual, 1e-7)

    def test_trigonometric_limit(self):
        """Nome 0 must be asked for and gives the six-vertex weights."""
        params = EllipticParams(eta=SUSY_ETA, nome=0.0, u=0.4)
        with self.assertRaises(EllipticError) as cm:
            weights_from_elliptic(params)
        self.assertIn("trigonometric", str(cm.exception))
        w = weights_from_elliptic(params, allow_trigonometric=True)
        self.assertTrue(w.six_vertex)
        self.assertAlmostEqual(w.a, math.sin(0.4 + 2 * SUSY_ETA))
        self.assertAlmostEqual(w.c, math.sin(2 * SUSY_ETA))

    def test_lattice_zero(self):
        """b vanishes at u = 0, which strict mode rejects."""
        with self.assertRaises(WeightError) as cm:
            weights_from_elliptic(EllipticParams(eta=SUSY_ETA, nome=0.2, u=0.0))
        self.assertIn("vanishes", str(cm.exception))
        w = weights_from_elliptic(EllipticParams(eta=SUSY_ETA, nome=0.2, u=0.0), strict=False)
        self.assertAlmostEqual(w.b, 0.0)

    def test_sampler(self):
        """Sampled quadruples sit on the constraint surface."""
        for w in sample_constrained_weights(rng_for(31, "sampler"), 6):
            self.assertLess(w.constraint_residual, 1e-10)


class TestThetaIdentities(unittest.TestCase):

    def test_zeta_and_jz(self):
        """Theta expressions for ζ and Jz match the weights, and Jz = (ζ²-1)/2 at η = π/3."""
        for nome in (0.1, 0.2, 0.45):
            for u in (0.3, 0.7):
                report = zeta_and_jz_consistency(EllipticParams(eta=SUSY_ETA, nome=nome, u=u))
                self.assertLess(report.zeta_residual, 1e-11)
                self.assertLess(report.jz_residual, 1e-11)
                self.assertLess(report.susy_jz_residual, 1e-11)

    def test_zeta_is_u_independent(self):
        """cd/ab does not depend on the spectral parameter."""
        values = [weights_from_elliptic(EllipticParams(eta=SUSY_ETA, nome=0.3, u=u)).zeta for u in (0.2, 0.5, 0.9)]
        for value in values:
            self.assertAlmostEqual(value / zeta_theta(SUSY_ETA, 0.3), 1.0, places=11)

    def test_six_vertex_limit(self):
        """At p = 0, ζ = 0 and Jz = cos 2η = -1/2."""
        self.assertEqual(zeta_theta(SUSY_ETA, 0.0), 0.0)
        self.assertAlmostEqual(jz_theta(SUSY_ETA, 0.0), -0.5)
        report = zeta_and_jz_consistency(EllipticParams(eta=SUSY_ETA, nome=0.0, u=0.4))
        self.assertTrue(report.zeta_vanishes)
        self.assertLess(report.jz_residual, 1e-12)

    def test_generic_eta(self):
        """The theta identities hold off the supersymmetric manifold too."""
        report = zeta_and_jz_consistency(EllipticParams(eta=0.9, nome=0.2, u=0.4))
        self.assertLess(report.zeta_residual, 1e-11)
        self.assertLess(report.jz_residual, 1e-11)
        self.assertGreater(report.susy_jz_residual, 1e-6)


class TestIntegrability(unittest.TestCase):

    def test_yang_baxter(self):
        """The elliptic R-matrix satisfies the Yang-Baxter equation."""
        rng = rng_for(32, "yang-baxter")
        for _ in range(10):
            eta, nome = rng.uniform(0.2, 1.2), rng.uniform(0.0, 0.6)
            u, v = rng.uniform(-1.0, 1.0, size=2)
            self.assertLess(yang_baxter_residual(eta, nome, u, v), 1e-10)
        self.assertLess(yang_baxter_residual(SUSY_ETA, 0.0, 0.4, 0.3), 1e-10)

    def test_commuting_transfer_matrices(self):
        """T(u) and T(v) commute at equal crossing parameter and nome."""
        rng = rng_for(33, "commuting")
        for length in (3, 4):
            self.assertLess(commuting_transfer_residual(SUSY_ETA, 0.2, 0.4, 0.7, length, rng), 1e-10)

    def test_transfer_near_zero(self):
        """T(0) is a multiple of S and its log-derivative reproduces H_XYZ."""
        report = tu_zero_checks(SUSY_ETA, 0.2, 4)
        self.assertLess(report.shift_residual, 1e-10)
        self.assertLess(report.log_derivative_residual, 1e-7)
        self.assertLess(report.susy_coupling_residual, 1e-9)

    def test_transfer_near_zero_trigonometric(self):
        """The six-vertex limit gives XXZ couplings (1, 1, cos 2η)."""
        report = tu_zero_checks(SUSY_ETA, 0.0, 3)
        jx, jy, jz = report.couplings
        self.assertAlmostEqual(jx, 1.0, places=8)
        self.assertAlmostEqual(jy, 1.0, places=8)
        self.assertAlmostEqual(jz, -0.5, places=8)


@pytest.mark.parametrize("nome", [0.01, 0.1, 0.3, 0.5])
@pytest.mark.parametrize("u", [-0.6, 0.25, 0.9])
def test_susy_manifold_sweep(nome, u):
    w = weights_from_elliptic(EllipticParams(eta=SUSY_ETA, nome=nome, u=u))
    assert w.constraint_residual < 1e-10
    assert abs(w.zeta - zeta_theta(SUSY_ETA, nome)) < 1e-10 * max(1.0, abs(w.zeta))


if __name__ == "__main__":
    unittest.main()
