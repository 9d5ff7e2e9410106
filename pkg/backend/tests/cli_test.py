import sys
import os
import csv
import io
import json
import math
import tempfile
import unittest
from contextlib import redirect_stderr, redirect_stdout

# Ensure app is in path
BACKEND = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, BACKEND)

from cli.verify import main, parse_angle, parse_lengths


def run_cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = main(list(argv))
    return code, out.getvalue(), err.getvalue()


class TestFlagParsing(unittest.TestCase):

    def test_lengths(self):
        """Length lists are comma-separated or ranges."""
        self.assertEqual(parse_lengths("3,5"), [3, 5])
        self.assertEqual(parse_lengths("2..5"), [2, 3, 4, 5])

    def test_angles(self):
        """Angles accept multiples of pi."""
        self.assertAlmostEqual(parse_angle("pi/3"), math.pi / 3)
        self.assertAlmostEqual(parse_angle("2*pi/3"), 2 * math.pi / 3)
        self.assertAlmostEqual(parse_angle("0.9"), 0.9)

    def test_usage_errors_exit_two(self):
        """argparse failures exit with status 2."""
        with redirect_stderr(io.StringIO()):
            with self.assertRaises(SystemExit) as cm:
                main(["verify", "--L", "three"])
        self.assertEqual(cm.exception.code, 2)


class TestCommands(unittest.TestCase):

    def test_word_sum(self):
        """word-sum --n 2 --weights 2,1 prints 243."""
        code, out, _ = run_cli("word-sum", "--n", "2", "--weights", "2,1")
        self.assertEqual(code, 0)
        payload = json.loads(out)
        self.assertEqual(payload["command"], "word-sum")
        self.assertAlmostEqual(payload["result"]["value"], 243.0)

    def test_stroganov(self):
        """stroganov --n 1 on (1,1,1,1) finds Θ = 8 twice."""
        code, out, _ = run_cli("stroganov", "--n", "1", "--weights", "1,1,1,1")
        self.assertEqual(code, 0)
        result = json.loads(out)["result"]
        self.assertEqual(result["theta"], 8.0)
        self.assertEqual(result["multiplicity"], 2)

    def test_spectrum_csv(self):
        """The csv spectrum lists clusters with their multiplicities."""
        code, out, _ = run_cli("spectrum", "--L", "3", "--weights", "1,1,1,1", "--format", "csv")
        self.assertEqual(code, 0)
        rows = list(csv.DictReader(io.StringIO(out)))
        top = [r for r in rows if abs(float(r["re"]) - 8.0) < 1e-9]
        self.assertEqual(len(top), 1)
        self.assertEqual(top[0]["multiplicity"], "2")
        self.assertEqual(sum(int(r["multiplicity"]) for r in rows), 8)

    def test_csv_only_for_spectrum(self):
        """Other commands refuse csv output."""
        code, _, err = run_cli("word-sum", "--n", "1", "--weights", "2,1", "--format", "csv")
        self.assertEqual(code, 2)
        self.assertIn("only available for the spectrum command", err)

    def test_elliptic(self):
        """Elliptic weights at η = π/3 satisfy the constraint."""
        code, out, _ = run_cli("elliptic", "--eta", "pi/3", "--nome", "0.2", "--u", "0.4")
        self.assertEqual(code, 0)
        self.assertLess(json.loads(out)["result"]["constraint_residual"], 1e-11)

    def test_susy(self):
        """The SUSY chain on three sites has a two-dimensional kernel."""
        code, out, _ = run_cli("susy", "--L", "3", "--zeta", "0.5")
        self.assertEqual(code, 0)
        self.assertEqual(json.loads(out)["result"]["kernel_dimension"], 2)

    def test_verify_all(self):
        """verify on (1,1,1,1) with L = 3 passes every suite."""
        code, out, _ = run_cli("verify", "--L", "3", "--weights", "1,1,1,1", "--n-max", "2")
        report = json.loads(out)
        failed = [c["name"] for c in report["checks"] if c["verdict"] == "fail"]
        self.assertEqual(failed, [])
        self.assertEqual(code, 0)
        self.assertTrue({"stroganov", "kernel-law", "word-sum"} <= {c["suite"] for c in report["checks"]})

    def test_verify_config_file(self):
        """A JSON config drives verify; the report goes to --out."""
        with tempfile.TemporaryDirectory() as tmp:
            target = os.path.join(tmp, "report.json")
            code, out, _ = run_cli("verify", "--config", os.path.join(BACKEND, "sample_config.json"), "--out", target)
            self.assertEqual(code, 0)
            self.assertEqual(out, "")
            with open(target) as f:
                report = json.load(f)
        self.assertTrue(report["passed"])
        self.assertEqual(report["config"]["suite"], "stroganov")

    def test_unconstrained_weights_rejected(self):
        """Weights off the constraint exit 2 unless allowed."""
        code, _, err = run_cli("stroganov", "--n", "1", "--weights", "1,1,1,1.01")
        self.assertEqual(code, 2)
        self.assertIn("violate", err)

    def test_failed_checks_exit_one(self):
        """A completed run with failures exits 1."""
        code, out, _ = run_cli("verify", "--suite", "constraint", "--weights", "1,1,1,1.01", "--allow-unconstrained")
        self.assertEqual(code, 1)
        self.assertFalse(json.loads(out)["passed"])

    def test_bad_config_exits_two(self):
        """Invalid configuration is reported on one line with exit 2."""
        code, _, err = run_cli("verify", "--suite", "constraint", "--L", "3,20", "--weights", "1,1,1,1")
        self.assertEqual(code, 2)
        self.assertIn("exceed", err)

    def test_unknown_tolerance(self):
        """Unknown --tol keys are usage errors."""
        code, _, err = run_cli("word-sum", "--n", "1", "--weights", "2,1", "--tol", "bogus=1e-3")
        self.assertEqual(code, 2)
        self.assertIn("unknown tolerance keys", err)


if __name__ == "__main__":
    unittest.main()
