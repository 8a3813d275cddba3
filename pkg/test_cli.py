"""
Command-Line Tests
Each subcommand driven through cli.main against temporary instance files
"""

import contextlib
import io
import json
import os
import tempfile
import unittest

import numpy as np

import cli
from sample_instances import (EXAMPLE1_MU, EXAMPLE1_R, EXAMPLE2_MU, EXAMPLE2_R, EXAMPLE2_SIGMA,
                              TANDEM_BETA, TANDEM_C, TANDEM_SIGMA)

EXAMPLE2 = {"sigma": EXAMPLE2_SIGMA, "mu": EXAMPLE2_MU, "r": EXAMPLE2_R}
EXAMPLE1 = {"sigma": np.eye(4).tolist(), "mu": EXAMPLE1_MU, "r": EXAMPLE1_R}
TANDEM = {"tandem": {"beta": TANDEM_BETA, "c": TANDEM_C}}
TWO_STATION = {"sigma": [[2.0, -1.0], [-1.0, 2.0]], "mu": [-1.0, -1.0], "r": [[1.0, 0.0], [-1.0, 1.0]]}
ONE_DIMENSIONAL = {"sigma": [[1.0]], "mu": [-1.0], "r": [[1.0]]}


class CliTestCase(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def path(self, name):
        return os.path.join(self.tmp.name, name)

    def instance(self, doc, name="instance.json"):
        path = self.path(name)
        with open(path, "w") as f:
            json.dump(doc, f)
        return path

    def run_cli(self, *argv):
        return cli.main(["--quiet", "--config-dir", self.path("config"), *argv])

    def load(self, name):
        with open(self.path(name)) as f:
            return json.load(f)


class TestDiagnose(CliTestCase):
    def test_example_not_product_form(self):
        code = self.run_cli("diagnose", self.instance(EXAMPLE2), "--json-out", self.path("out.json"))
        self.assertEqual(code, cli.EXIT_NOT_PRODUCT_FORM)
        doc = self.load("out.json")
        self.assertEqual(doc["verdict"], "not product form")
        failing = doc["product_form"]["failing_pairs"][0]
        self.assertEqual(failing["pair"], [1, 2])
        self.assertAlmostEqual(failing["gamma_at_tau"], -1.0, places=9)
        np.testing.assert_allclose(doc["geometry"]["tau"], [1.0, 2.0, 1.0], atol=1e-9)

    def test_tandem_product_form(self):
        code = self.run_cli("diagnose", self.instance(TANDEM), "--json-out", self.path("out.json"))
        self.assertEqual(code, cli.EXIT_PRODUCT_FORM)
        doc = self.load("out.json")
        np.testing.assert_allclose(doc["product_form"]["alpha"], [1.0, 2.0, 3.0], atol=1e-12)
        self.assertNotIn("generated_at", doc)
        self.assertIn("velocities", doc["vp"])

    def test_vp_target(self):
        code = self.run_cli("diagnose", self.instance(TANDEM), "--json-out", self.path("out.json"),
                            "--vp-target", "0", "0", "3")
        self.assertEqual(code, cli.EXIT_PRODUCT_FORM)
        path = self.load("out.json")["vp"]["path"]
        np.testing.assert_allclose(path[1]["end"], [1.0, 1.0, 0.0], atol=1e-12)
        self.assertEqual(self.load("out.json")["vp"]["path_status"], "conjecture (not proven optimal)")

    def test_malformed_json(self):
        path = self.path("bad.json")
        with open(path, "w") as f:
            f.write("{\"sigma\": [[1.0]")
        self.assertEqual(self.run_cli("diagnose", path), cli.EXIT_INVALID)

    def test_missing_field(self):
        path = self.instance({"sigma": [[1.0]], "r": [[1.0]]})
        self.assertEqual(self.run_cli("diagnose", path), cli.EXIT_INVALID)

    def test_invalid_sigma_still_writes_document(self):
        path = self.instance({"sigma": [[1.0, 2.0], [2.0, 1.0]], "mu": [-1.0, -1.0],
                              "r": [[1.0, 0.0], [0.0, 1.0]]})
        self.assertEqual(self.run_cli("diagnose", path, "--json-out", self.path("out.json")),
                         cli.EXIT_INVALID)
        self.assertEqual(self.load("out.json")["verdict"], "invalid instance")

    def test_unstable_instance(self):
        path = self.instance({"sigma": [[1.0]], "mu": [1.0], "r": [[1.0]]})
        self.assertEqual(self.run_cli("diagnose", path, "--json-out", self.path("out.json")),
                         cli.EXIT_INVALID)

    def test_identical_output(self):
        path = self.instance(TANDEM)
        self.run_cli("diagnose", path, "--json-out", self.path("a.json"))
        self.run_cli("diagnose", path, "--json-out", self.path("b.json"))
        with open(self.path("a.json"), "rb") as a, open(self.path("b.json"), "rb") as b:
            self.assertEqual(a.read(), b.read())

    def test_standard_output_has_timestamp(self):
        out = io.StringIO()
        with contextlib.redirect_stdout(out):
            code = self.run_cli("diagnose", self.instance(EXAMPLE2))
        self.assertEqual(code, cli.EXIT_NOT_PRODUCT_FORM)
        self.assertIn("generated_at", json.loads(out.getvalue()))

    def test_tolerance_flag(self):
        self.run_cli("--tol", "1e-6", "diagnose", self.instance(EXAMPLE2),
                     "--json-out", self.path("out.json"))
        self.assertEqual(self.load("out.json")["tolerances"]["verdict"], 1e-6)

    def test_strict_profile(self):
        self.run_cli("--profile", "strict", "diagnose", self.instance(EXAMPLE2),
                     "--json-out", self.path("out.json"))
        self.assertEqual(self.load("out.json")["tolerances"]["verdict"], 1e-10)

    def test_unknown_profile(self):
        self.assertEqual(self.run_cli("--profile", "nope", "diagnose", self.instance(EXAMPLE2)),
                         cli.EXIT_INVALID)


class TestProject(CliTestCase):
    def test_tandem_pair(self):
        code = self.run_cli("project", self.instance(TANDEM), "--pair", "1", "2",
                            "--json-out", self.path("out.json"))
        self.assertEqual(code, cli.EXIT_PRODUCT_FORM)
        doc = self.load("out.json")
        np.testing.assert_allclose(doc["pair_srbm"]["r_tilde"], [[1.0, 0.0], [-1.0, 1.0]], atol=1e-12)
        np.testing.assert_allclose(doc["pair_srbm"]["sigma_tilde"], [[2.0, -1.0], [-1.0, 2.0]], atol=1e-12)

    def test_two_dimensional_echo(self):
        code = self.run_cli("project", self.instance(TWO_STATION), "--pair", "1", "2",
                            "--json-out", self.path("out.json"))
        self.assertEqual(code, cli.EXIT_PRODUCT_FORM)
        pair = self.load("out.json")["pair_srbm"]
        np.testing.assert_allclose(pair["sigma_tilde"], TWO_STATION["sigma"], atol=1e-12)
        np.testing.assert_allclose(pair["mu_tilde"], TWO_STATION["mu"], atol=1e-12)
        np.testing.assert_allclose(pair["r_tilde"], TWO_STATION["r"], atol=1e-12)

    def test_example_pair_not_product_form(self):
        code = self.run_cli("project", self.instance(EXAMPLE2), "--pair", "1", "2",
                            "--json-out", self.path("out.json"))
        self.assertEqual(code, cli.EXIT_NOT_PRODUCT_FORM)

    def test_degenerate_pair(self):
        code = self.run_cli("project", self.instance(EXAMPLE1), "--pair", "3", "4",
                            "--json-out", self.path("out.json"))
        self.assertEqual(code, cli.EXIT_INVALID)
        doc = self.load("out.json")
        self.assertTrue(doc["degenerate"])
        self.assertLess(abs(doc["c_ij"]), 1e-10)

    def test_bad_pair(self):
        path = self.instance(TANDEM)
        self.assertEqual(self.run_cli("project", path, "--pair", "2", "1"), cli.EXIT_INVALID)
        self.assertEqual(self.run_cli("project", path, "--pair", "1", "4"), cli.EXIT_INVALID)


class TestPlot(CliTestCase):
    def test_svg_and_csv(self):
        code = self.run_cli("plot", self.instance(EXAMPLE2), "--pair", "1", "2",
                            "--svg", self.path("slice.svg"), "--csv", self.path("slice.csv"),
                            "--samples", "40")
        self.assertEqual(code, cli.EXIT_PRODUCT_FORM)
        with open(self.path("slice.svg"), encoding="utf-8") as f:
            text = f.read()
        self.assertIn('id="symmetry-point-i"', text)
        self.assertIn('id="symmetry-point-j"', text)
        with open(self.path("slice.csv")) as f:
            self.assertEqual(len(f.read().splitlines()), 41)

    def test_minimal_sampling(self):
        code = self.run_cli("plot", self.instance(TANDEM), "--pair", "1", "3",
                            "--csv", self.path("slice.csv"), "--samples", "8")
        self.assertEqual(code, cli.EXIT_PRODUCT_FORM)
        code = self.run_cli("plot", self.instance(TANDEM), "--pair", "1", "3",
                            "--csv", self.path("slice.csv"), "--samples", "4")
        self.assertEqual(code, cli.EXIT_INVALID)

    def test_degenerate_pair(self):
        code = self.run_cli("plot", self.instance(EXAMPLE1), "--pair", "3", "4",
                            "--svg", self.path("slice.svg"))
        self.assertEqual(code, cli.EXIT_INVALID)
        self.assertFalse(os.path.exists(self.path("slice.svg")))

    def test_needs_an_output(self):
        self.assertEqual(self.run_cli("plot", self.instance(TANDEM), "--pair", "1", "2"),
                         cli.EXIT_INVALID)


class TestSimulate(CliTestCase):
    def test_one_dimensional_check(self):
        code = self.run_cli("simulate", self.instance(ONE_DIMENSIONAL), "--step", "0.01",
                            "--horizon", "5000", "--burn-in", "500", "--seed", "11",
                            "--check-alpha", "--json-out", self.path("sim.json"))
        self.assertEqual(code, cli.EXIT_PRODUCT_FORM)
        doc = self.load("sim.json")
        self.assertLess(abs(doc["estimate"]["marginal_rate"][0] - 2.0), 0.3)
        self.assertTrue(doc["empirical_check"]["passed"])
        self.assertEqual(doc["config"]["step"], 0.01)

    def test_tandem_check(self):
        code = self.run_cli("simulate", self.instance(TANDEM), "--seed", "20240601",
                            "--check-alpha", "--json-out", self.path("sim.json"))
        self.assertEqual(code, cli.EXIT_PRODUCT_FORM)
        check = self.load("sim.json")["empirical_check"]
        self.assertTrue(check["passed"])
        np.testing.assert_allclose(check["alpha"], [1.0, 2.0, 3.0])

    def test_example_check_fails(self):
        code = self.run_cli("simulate", self.instance(EXAMPLE2), "--horizon", "10000",
                            "--burn-in", "1000", "--seed", "20240601", "--check-alpha",
                            "--json-out", self.path("sim.json"))
        self.assertEqual(code, cli.EXIT_NOT_PRODUCT_FORM)
        check = self.load("sim.json")["empirical_check"]
        self.assertFalse(check["passed"])
        self.assertGreaterEqual(len(check["failing_pairs"]), 1)

    def test_dump(self):
        code = self.run_cli("simulate", self.instance(TANDEM), "--step", "0.01", "--horizon", "50",
                            "--burn-in", "5", "--no-bridge", "--dump", self.path("path.csv"),
                            "--json-out", self.path("sim.json"))
        self.assertEqual(code, cli.EXIT_PRODUCT_FORM)
        self.assertFalse(self.load("sim.json")["config"]["boundary_bridge"])
        with open(self.path("path.csv")) as f:
            self.assertTrue(f.readline().startswith("t,z1,z2,z3"))

    def test_progress_is_logged(self):
        with self.assertLogs(level="DEBUG") as logs:
            cli._log_progress({"steps_per_second": 2.5e6, "memory_mb": 80.0, "cpu_percent": 99.0})
        self.assertIn("2.5e+06 steps/s", logs.output[0])

    def test_bad_settings(self):
        code = self.run_cli("simulate", self.instance(ONE_DIMENSIONAL), "--step", "1.0",
                            "--horizon", "10")
        self.assertEqual(code, cli.EXIT_INVALID)

    def test_invalid_instance(self):
        path = self.instance({"sigma": [[1.0]], "mu": [1.0], "r": [[1.0]]})
        self.assertEqual(self.run_cli("simulate", path), cli.EXIT_INVALID)


class TestTandem(CliTestCase):
    def test_expand_flags(self):
        code = self.run_cli("tandem", "--beta", "1", "2", "3", "4", "--c", "1", "1", "1", "1",
                            "--out", self.path("raw.json"))
        self.assertEqual(code, cli.EXIT_PRODUCT_FORM)
        doc = self.load("raw.json")
        np.testing.assert_allclose(doc["sigma"], TANDEM_SIGMA)
        np.testing.assert_allclose(doc["mu"], [-1.0, -1.0, -1.0])

    def test_expand_file(self):
        code = self.run_cli("tandem", self.instance(TANDEM), "--out", self.path("raw.json"))
        self.assertEqual(code, cli.EXIT_PRODUCT_FORM)
        doc = self.load("raw.json")
        self.assertEqual(set(doc), {"sigma", "mu", "r", "tolerances"})
        self.assertEqual(doc["tolerances"]["verdict"], 1e-8)

    def test_expanded_file_diagnoses_the_same(self):
        self.run_cli("tandem", self.instance(TANDEM), "--out", self.path("raw.json"))
        code = self.run_cli("diagnose", self.path("raw.json"), "--json-out", self.path("out.json"))
        self.assertEqual(code, cli.EXIT_PRODUCT_FORM)

    def test_file_without_tandem(self):
        self.assertEqual(self.run_cli("tandem", self.instance(EXAMPLE2)), cli.EXIT_INVALID)

    def test_invalid_spec(self):
        code = self.run_cli("tandem", "--beta", "3", "2", "--c", "1", "1")
        self.assertEqual(code, cli.EXIT_INVALID)

    def test_records_tolerance_flag(self):
        self.run_cli("--tol", "1e-6", "tandem", self.instance(TANDEM), "--out", self.path("raw.json"))
        self.assertEqual(self.load("raw.json")["tolerances"]["verdict"], 1e-6)


class TestCheck(CliTestCase):
    def diagnose(self, doc):
        self.run_cli("diagnose", self.instance(doc), "--json-out", self.path("out.json"))
        return self.path("out.json")

    def test_consistent_documents(self):
        for doc in (TANDEM, EXAMPLE2):
            self.assertEqual(self.run_cli("check", self.diagnose(doc)), cli.EXIT_PRODUCT_FORM)

    def test_tampered_verdict(self):
        path = self.diagnose(EXAMPLE2)
        stored = self.load("out.json")
        stored["verdict"] = "product form"
        with open(path, "w") as f:
            json.dump(stored, f)
        self.assertEqual(self.run_cli("check", path), cli.EXIT_INTERNAL)

    def test_not_a_document(self):
        self.assertEqual(self.run_cli("check", self.instance(TANDEM)), cli.EXIT_INVALID)


if __name__ == '__main__':
    unittest.main()
