"""
Simulator Tests
Complementarity steps, reflected paths, stationary estimates and the
empirical product-form check
"""

import csv
import os
import tempfile
import unittest

import numpy as np

import simulator as sim
from exceptions import LcpRayTermination
from sample_instances import (TANDEM_R, example1, example2, one_dimensional, random_p_matrix,
                              tandem_product_form)

SYMMETRIC_P = [[1.0, 0.5], [0.5, 1.0]]


def short_config(**overrides):
    values = dict(step=0.01, horizon=20.0, burn_in=1.0, seed=7, block_steps=500)
    values.update(overrides)
    return sim.SimConfig(**values)


class TestSolveLcp(unittest.TestCase):
    def test_interior(self):
        z, dy = sim.solve_lcp([0.5, 1.0, 0.0], TANDEM_R)
        np.testing.assert_array_equal(z, [0.5, 1.0, 0.0])
        np.testing.assert_array_equal(dy, [0.0, 0.0, 0.0])

    def test_one_dimensional_boundary(self):
        z, dy = sim.solve_lcp([-2.0], [[1.0]])
        np.testing.assert_allclose(dy, [2.0])
        np.testing.assert_allclose(z, [0.0], atol=1e-15)

    def test_tandem_cascade(self):
        z, dy = sim.solve_lcp([-1.0, 0.0, 0.0], TANDEM_R)
        np.testing.assert_allclose(dy, [1.0, 1.0, 1.0], atol=1e-12)
        np.testing.assert_allclose(z, [0.0, 0.0, 0.0], atol=1e-12)

    def test_lemke_interior_solution(self):
        np.testing.assert_allclose(sim.lemke([-1.0, -1.0], SYMMETRIC_P), [2 / 3, 2 / 3], atol=1e-12)

    def test_lemke_single_face(self):
        z, dy = sim.solve_lcp([-1.0, 2.0], SYMMETRIC_P, m_matrix=False)
        np.testing.assert_allclose(dy, [1.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(z, [0.0, 2.5], atol=1e-12)

    def test_ray_termination(self):
        with self.assertRaises(LcpRayTermination) as ctx:
            sim.lemke([-1.0], [[-1.0]])
        self.assertEqual(ctx.exception.w, [-1.0])

    def test_complementarity_random(self):
        rng = np.random.default_rng(5)
        for k in range(200):
            d = 2 + k % 4
            r = random_p_matrix(rng, d)
            w = rng.normal(size=d)
            for m_matrix in (False, None):
                z, dy = sim.solve_lcp(w, r, m_matrix=m_matrix)
                bound = 1e-10 * (1.0 + np.max(np.abs(w)))
                self.assertLessEqual(abs(z @ dy), bound)
                self.assertTrue(np.all(z >= -1e-12))
                self.assertTrue(np.all(dy >= -1e-12))
                np.testing.assert_allclose(z, w + r @ dy, atol=1e-12)


class TestSimConfig(unittest.TestCase):
    def test_defaults(self):
        config = sim.SimConfig()
        self.assertEqual(config.n_steps, 20_000_000)
        self.assertEqual(config.burn_steps, 2_000_000)

    def test_burn_in_beyond_horizon(self):
        with self.assertRaises(ValueError):
            sim.SimConfig(horizon=10.0, burn_in=10.0, step=0.001)

    def test_coarse_step(self):
        with self.assertRaises(ValueError):
            sim.SimConfig(horizon=10.0, burn_in=1.0, step=0.1)

    def test_negative_initial_state(self):
        with self.assertRaises(ValueError):
            short_config(initial_state=(-1.0, 0.0, 0.0))


class TestPaths(unittest.TestCase):
    def test_projected_path_invariants(self):
        data = tandem_product_form()
        config = short_config(boundary_bridge=False)
        _, z, dy = sim.sample_path(data, config)
        self.assertEqual(z.shape, (2000, 3))
        self.assertTrue(np.all(z >= -1e-12))
        self.assertTrue(np.all(dy >= 0.0))
        self.assertTrue(np.any(dy > 0.0))
        residual = np.abs(np.sum(z * dy, axis=1))
        self.assertLess(float(np.max(residual)), 1e-10)

    def test_bridge_path_stays_in_orthant(self):
        _, z, dy = sim.sample_path(tandem_product_form(), short_config())
        self.assertTrue(np.all(z >= -1e-12))
        self.assertTrue(np.all(dy >= 0.0))

    def test_block_size_does_not_change_projected_path(self):
        data = tandem_product_form()
        _, small, _ = sim.sample_path(data, short_config(boundary_bridge=False, block_steps=300))
        _, large, _ = sim.sample_path(data, short_config(boundary_bridge=False, block_steps=5000))
        np.testing.assert_allclose(small, large, atol=1e-9)

    def test_lemke_path(self):
        data = example1()
        config = sim.SimConfig(step=0.005, horizon=5.0, burn_in=0.5, seed=3)
        _, z, dy = sim.sample_path(data, config)
        self.assertTrue(np.all(z >= -1e-9))
        self.assertTrue(np.all(dy >= -1e-12))
        self.assertLess(float(np.max(np.abs(np.sum(z * dy, axis=1)))), 1e-8)

    def test_initial_state(self):
        config = short_config(initial_state=(5.0,), horizon=1.0, burn_in=0.0, step=0.001)
        _, z, _ = sim.sample_path(one_dimensional(), config)
        self.assertGreater(z[0, 0], 4.0)


class TestDeterminism(unittest.TestCase):
    def test_same_seed_same_estimate(self):
        data = tandem_product_form()
        first = sim.simulate(data, short_config())
        second = sim.simulate(data, short_config())
        for name in ("marginal_mean", "covariance", "boundary_push", "ci_halfwidth"):
            np.testing.assert_array_equal(getattr(first, name), getattr(second, name))

    def test_progress_readings(self):
        readings = []
        sim.simulate(tandem_product_form(), short_config(), progress=readings.append)
        self.assertGreaterEqual(len(readings), 1)
        self.assertGreater(readings[-1]["steps_per_second"], 0.0)

    def test_seed_changes_estimate(self):
        data = tandem_product_form()
        first = sim.simulate(data, short_config())
        second = sim.simulate(data, short_config(seed=8))
        self.assertFalse(np.array_equal(first.marginal_mean, second.marginal_mean))

    def test_replications_pool_in_order(self):
        data = tandem_product_form()
        serial = sim.simulate(data, short_config(replications=3))
        threaded = sim.simulate(data, short_config(replications=3, workers=3))
        np.testing.assert_array_equal(serial.marginal_mean, threaded.marginal_mean)
        np.testing.assert_array_equal(serial.ci_halfwidth, threaded.ci_halfwidth)
        self.assertEqual(serial.replications, 3)
        self.assertEqual(serial.batches, 60)
        single = sim.simulate(data, short_config())
        self.assertEqual(serial.samples, 3 * single.samples)


class TestSampleDump(unittest.TestCase):
    def test_dump_rows_and_pushes(self):
        data = tandem_product_form()
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "path.csv")
            sim.simulate(data, short_config(dump_path=path, dump_every=10))
            with open(path, newline="") as handle:
                rows = list(csv.reader(handle))
        self.assertEqual(rows[0], ["t", "z1", "z2", "z3", "dy1", "dy2", "dy3"])
        self.assertEqual(len(rows), 201)
        self.assertAlmostEqual(float(rows[-1][0]), 20.0)
        _, _, dy = sim.sample_path(data, short_config())
        dumped = np.array([[float(v) for v in row[4:]] for row in rows[1:]])
        np.testing.assert_allclose(dumped.sum(axis=0), dy.sum(axis=0), atol=1e-9)


class TestEmpiricalCheck(unittest.TestCase):
    def setUp(self):
        rng = np.random.default_rng(21)
        self.alpha = np.array([1.0, 2.0, 3.0])
        self.estimate = sim.estimate_from_samples(rng.exponential(1.0 / self.alpha, size=(200000, 3)))

    def test_exact_samples_pass(self):
        verdict = sim.empirical_product_form_test(self.estimate, self.alpha)
        self.assertTrue(verdict.passed)
        self.assertEqual(verdict.failing_pairs, [])

    def test_wrong_rates_fail(self):
        verdict = sim.empirical_product_form_test(self.estimate, 1.5 * self.alpha)
        self.assertFalse(verdict.passed)
        self.assertFalse(any(verdict.coordinates))

    def test_dependent_samples_fail(self):
        rng = np.random.default_rng(22)
        x = rng.exponential(1.0, size=100000)
        samples = np.column_stack([x, x + rng.exponential(1.0, size=100000)])
        estimate = sim.estimate_from_samples(samples)
        verdict = sim.empirical_product_form_test(estimate, 1.0 / estimate.marginal_mean)
        self.assertEqual(verdict.failing_pairs, [(0, 1)])
        self.assertEqual(verdict.to_dict()["failing_pairs"], [[1, 2]])


class TestOneDimensionalOracle(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.estimate = sim.simulate(one_dimensional(1.0, -1.0), sim.SimConfig())

    def test_rate(self):
        self.assertLess(abs(self.estimate.marginal_rate[0] - 2.0), 0.1)

    def test_boundary_push(self):
        self.assertLess(abs(self.estimate.boundary_push[0] - 1.0), 0.03)

    def test_coarse_step_push(self):
        estimate = sim.simulate(one_dimensional(1.0, -1.0), sim.SimConfig(step=0.01))
        self.assertLess(abs(estimate.boundary_push[0] - 1.0), 0.03)

    def test_resources_attached(self):
        self.assertIn("wall_seconds", self.estimate.resources)


class TestTandemOracle(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.estimate = sim.simulate(tandem_product_form(), sim.SimConfig())

    def test_rates(self):
        np.testing.assert_allclose(self.estimate.marginal_rate, [1.0, 2.0, 3.0], rtol=0.05)

    def test_correlations(self):
        off = self.estimate.correlation[~np.eye(3, dtype=bool)]
        self.assertLess(float(np.max(np.abs(off))), 0.05)

    def test_boundary_push(self):
        np.testing.assert_allclose(self.estimate.boundary_push, [1.0, 2.0, 3.0], rtol=0.05)

    def test_empirical_check(self):
        self.assertTrue(sim.empirical_product_form_test(self.estimate, [1.0, 2.0, 3.0]).passed)

    def test_minimum_state(self):
        self.assertTrue(np.all(self.estimate.minimum_state >= -1e-12))


class TestNonProductFormOracle(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.estimate = sim.simulate(example2(), sim.SimConfig(horizon=1e4, burn_in=1e3))
        cls.verdict = sim.empirical_product_form_test(cls.estimate, [1.0, 4.0 / 3.0, 1.0 / 3.0])

    def test_check_fails(self):
        self.assertFalse(self.verdict.passed)

    def test_pairs_stay_correlated(self):
        self.assertGreaterEqual(len(self.verdict.failing_pairs), 1)
        off = self.estimate.correlation[~np.eye(3, dtype=bool)]
        self.assertGreater(float(np.max(np.abs(off))), 0.05)

    def test_third_rate_misses_formula(self):
        self.assertFalse(self.verdict.coordinates[2])


if __name__ == '__main__':
    unittest.main()
