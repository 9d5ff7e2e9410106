import sys
import os
import unittest

from pydantic import ValidationError

# Ensure app is in path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from app.db.schemas import SUITE_ORDER, SuiteConfig
from app.engine.builder import DEFAULT_ZETAS, Builder, BuildError
from app.engine.report import _run_task, config_hash, generate_record, run_suite
from app.engine.suites import ACTIVE_SUITES, CheckTask, Outcome, collect_tasks
from app.engine.vertex import WeightError

BROKEN = [1.0, 1.0, 1.0, 1.01]


class TestBuilderStrict(unittest.TestCase):

    def test_length_bound(self):
        """Builder should reject chains beyond the supported maximum."""
        config = SuiteConfig(suite="constraint", L_list=[3, 17], weights=[1, 1, 1, 1])
        with self.assertRaises(BuildError) as cm:
            Builder().build(config)
        self.assertIn("exceed the supported maximum", str(cm.exception))

    def test_zero_weight(self):
        """Builder should reject a, b or c equal to zero."""
        config = SuiteConfig(suite="constraint", weights=[0, 1, 1, 1], allow_unconstrained=True)
        with self.assertRaises(BuildError) as cm:
            Builder().build(config)
        self.assertIn("must be non-zero", str(cm.exception))

    def test_unconstrained_weights(self):
        """Builder should reject weights off the constraint unless explicitly allowed."""
        with self.assertRaises(BuildError) as cm:
            Builder().build(SuiteConfig(suite="constraint", weights=BROKEN))
        self.assertIn("violate", str(cm.exception))
        self.assertIn("allow_unconstrained", str(cm.exception))
        workload = Builder().build(SuiteConfig(suite="constraint", weights=BROKEN, allow_unconstrained=True))
        self.assertEqual(workload.weights[0].d, 1.01)

    def test_missing_root(self):
        """Three weights without a real positive d are rejected."""
        with self.assertRaises(BuildError) as cm:
            Builder().build(SuiteConfig(suite="constraint", weights=[1, 1, 2]))
        self.assertIn("No real positive d", str(cm.exception))

    def test_solve_d_source_takes_three_values(self):
        """weight_source 'solve-d' reads a, b, c only."""
        with self.assertRaises(BuildError) as cm:
            Builder().build(SuiteConfig(suite="constraint", weight_source="solve-d", weights=[1, 1, 1, 1]))
        self.assertIn("takes a,b,c", str(cm.exception))
        workload = Builder().build(SuiteConfig(suite="constraint", weight_source="solve-d", weights=[2, 1, 1]))
        self.assertAlmostEqual(workload.weights[0].d, 2.0)

    def test_unknown_tolerance_key(self):
        """Builder should reject tolerance keys it does not know."""
        config = SuiteConfig(suite="constraint", weights=[1, 1, 1, 1], tolerance_overrides={"eigen": 1e-8})
        with self.assertRaises(BuildError) as cm:
            Builder().build(config)
        self.assertIn("Unknown tolerance keys", str(cm.exception))

    def test_non_positive_tolerance(self):
        """Tolerances must be positive."""
        config = SuiteConfig(suite="constraint", weights=[1, 1, 1, 1], tolerance_overrides={"eigenvalue": 0.0})
        with self.assertRaises(BuildError) as cm:
            Builder().build(config)
        self.assertIn("must be positive", str(cm.exception))

    def test_invalid_nome(self):
        """Nomes outside [0, 1) are rejected before any check runs."""
        with self.assertRaises(BuildError) as cm:
            Builder().build(SuiteConfig(suite="elliptic", nome=1.5, u=0.4))
        self.assertIn("Invalid elliptic parameters", str(cm.exception))

    def test_elliptic_source_needs_point(self):
        """Elliptic weights need a nome and a spectral parameter."""
        with self.assertRaises(BuildError) as cm:
            Builder().build(SuiteConfig(suite="constraint", weight_source="elliptic", nome=0.2))
        self.assertIn("needs nome and u", str(cm.exception))
        workload = Builder().build(SuiteConfig(suite="constraint", weight_source="elliptic", nome=0.2, u=0.4))
        self.assertLess(workload.weights[0].constraint_residual, 1e-11)

    def test_zeta_zero(self):
        """ζ = 0 is excluded for the spin-chain suites."""
        with self.assertRaises(BuildError) as cm:
            Builder().build(SuiteConfig(suite="ground-state", zeta=0.0))
        self.assertIn("ζ = 0 is excluded", str(cm.exception))

    def test_zeta_resolution(self):
        """ζ comes from the config, else from explicit weights, else the default sweep."""
        self.assertEqual(Builder().build(SuiteConfig(suite="ground-state", zeta=0.5)).zetas, [0.5])
        self.assertEqual(Builder().build(SuiteConfig(suite="ground-state", weights=[2, 1, 1, 2])).zetas, [1.0])
        self.assertEqual(Builder().build(SuiteConfig(suite="ground-state")).zetas, list(DEFAULT_ZETAS))

    def test_sampled_weights(self):
        """Without weights the builder samples constrained quadruples from the seed."""
        first = Builder().build(SuiteConfig(suite="constraint", samples=4, seed=5))
        again = Builder().build(SuiteConfig(suite="constraint", samples=4, seed=5))
        self.assertFalse(first.weights_explicit)
        self.assertEqual(len(first.weights), 4)
        self.assertEqual([w.as_tuple() for w in first.weights], [w.as_tuple() for w in again.weights])

    def test_all_expands_in_order(self):
        """'all' runs every suite, and every suite has an evaluator."""
        workload = Builder().build(SuiteConfig(weights=[1, 1, 1, 1]))
        self.assertEqual(workload.suites, SUITE_ORDER)
        self.assertEqual(set(ACTIVE_SUITES), set(SUITE_ORDER))


class TestSuiteConfig(unittest.TestCase):

    def test_lengths_validated(self):
        """L_list must be non-empty and positive; duplicates collapse."""
        with self.assertRaises(ValidationError):
            SuiteConfig(L_list=[])
        with self.assertRaises(ValidationError):
            SuiteConfig(L_list=[3, 0])
        self.assertEqual(SuiteConfig(L_list=[5, 3, 5]).L_list, [3, 5])

    def test_extra_keys_forbidden(self):
        """Unknown configuration keys are rejected."""
        with self.assertRaises(ValidationError):
            SuiteConfig(suite="constraint", lengths=[3])

    def test_unknown_suite(self):
        """Suite names are a closed set."""
        with self.assertRaises(ValidationError):
            SuiteConfig(suite="bethe-ansatz")

    def test_config_hash_is_stable(self):
        """Equal configurations hash equally; any change alters the hash."""
        a = SuiteConfig(suite="word-sum", n_max=2)
        b = SuiteConfig(suite="word-sum", n_max=2)
        c = SuiteConfig(suite="word-sum", n_max=3)
        self.assertEqual(config_hash(a), config_hash(b))
        self.assertNotEqual(config_hash(a), config_hash(c))


class TestRecords(unittest.TestCase):

    def test_raising_check_becomes_failed_record(self):
        """A check that raises is recorded as a failure with its error message."""
        def compute() -> Outcome:
            raise WeightError("n must be ≥ 1, got 0")
        task = CheckTask("stroganov/L=01/w00", "stroganov", {"L": 1}, 1e-8, compute)
        record = generate_record(*_run_task(task))
        self.assertEqual(record.verdict, "fail")
        self.assertIn("WeightError", record.error)
        self.assertIsNone(record.residual)

    def test_non_finite_residual_fails(self):
        """NaN residuals fail and are flagged in the summary."""
        task = CheckTask("constraint/w00", "constraint", {}, 1e-10, lambda: Outcome(residual=float("nan")))
        record = generate_record(*_run_task(task))
        self.assertEqual(record.verdict, "fail")
        self.assertTrue(record.summary["non_finite_residual"])

    def test_explicit_verdict_wins(self):
        """An outcome verdict overrides the residual comparison."""
        task = CheckTask("kernel-law/L=03/zeta=1", "kernel-law", {}, None,
                         lambda: Outcome(residual=None, summary={"dimension": 2}, passed=True))
        self.assertEqual(generate_record(*_run_task(task)).verdict, "pass")

    def test_check_ids(self):
        """Check ids are sha256 digests of name, suite and inputs."""
        workload = Builder().build(SuiteConfig(suite="word-sum", n_max=2))
        ids = [task.check_id for task in collect_tasks(workload)]
        self.assertEqual(len(ids), len(set(ids)))
        self.assertTrue(all(len(i) == 64 for i in ids))
        again = [task.check_id for task in collect_tasks(Builder().build(SuiteConfig(suite="word-sum", n_max=2)))]
        self.assertEqual(ids, again)


class TestSuiteRuns(unittest.TestCase):

    def test_stroganov_uniform_weights(self):
        """(1,1,1,1) on three and five sites: Θ = 8 and 32, each twice."""
        report = run_suite(SuiteConfig(suite="stroganov", L_list=[3, 5], weights=[1, 1, 1, 1]))
        self.assertTrue(report.passed, [r.name for r in report.checks if r.verdict == "fail"])
        records = {r.name: r for r in report.checks}
        self.assertEqual(records["stroganov/L=03/w00"].summary["theta"], 8.0)
        self.assertEqual(records["stroganov/L=03/w00"].summary["multiplicity"], 2)
        self.assertEqual(records["stroganov/L=05/w00"].summary["theta"], 32.0)
        self.assertIn("stroganov/L=05/limit", records)

    def test_kernel_law(self):
        """Kernel dimensions alternate 0, 2 with the chain length."""
        report = run_suite(SuiteConfig(suite="kernel-law", L_list=list(range(2, 10)), zeta=0.5))
        self.assertTrue(report.passed)
        dims = [r.summary["dimension"] for r in report.checks if not r.name.endswith("/overlaps")]
        self.assertEqual(dims, [0, 2, 0, 2, 0, 2, 0, 2])

    def test_elliptic_defaults(self):
        """The elliptic suite passes at the default point."""
        report = run_suite(SuiteConfig(suite="elliptic", L_list=[3, 4]))
        self.assertTrue(report.passed, [r.name for r in report.checks if r.verdict == "fail"])

    def test_negative_control(self):
        """Weights off the constraint fail every check that depends on it."""
        for suite in ("constraint", "local-identity", "tq-anticommutation", "stroganov"):
            report = run_suite(SuiteConfig(suite=suite, L_list=[3], weights=BROKEN, allow_unconstrained=True))
            self.assertFalse(report.passed, suite)
        # The R-matrix identity does not involve the configured weights
        report = run_suite(SuiteConfig(suite="yang-baxter", L_list=[3], weights=BROKEN, allow_unconstrained=True))
        self.assertTrue(report.passed)

    def test_deterministic_output(self):
        """Same configuration, same records, whatever the worker count."""
        serial = run_suite(SuiteConfig(suite="word-sum", n_max=3, seed=9))
        parallel = run_suite(SuiteConfig(suite="word-sum", n_max=3, seed=9, workers=3))
        self.assertTrue(serial.passed)
        self.assertEqual([r.model_dump() for r in serial.checks], [r.model_dump() for r in parallel.checks])


if __name__ == "__main__":
    unittest.main()
