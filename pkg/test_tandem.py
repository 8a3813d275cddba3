"""
Tandem Tests
Tandem SRBM construction, closed forms against the general geometry,
entrance velocities and the conjectured path
"""

import unittest

import numpy as np

import geometry as geo
import product_form as pf
import projection as pj
import tandem as td
from exceptions import (DomainError, IndexOutOfRange, InfeasiblePath, InstanceError, InvalidSpec,
                        NotProductForm)
from sample_instances import (EXAMPLE2_MU, EXAMPLE2_R, EXAMPLE2_SIGMA, TANDEM_BETA, TANDEM_C,
                              TANDEM_MU, TANDEM_R, TANDEM_SIGMA, random_tandem_spec)


def example2_spec():
    return td.TandemSpec([2.0, 2.5, 4.0, 2.5], [0.0, 1.0, 2.0, 1.0])


def product_form_spec():
    return td.TandemSpec(TANDEM_BETA, TANDEM_C)


def random_specs(seed, count, dims=(3, 4)):
    rng = np.random.default_rng(seed)
    for k in range(count):
        product_form = k % 2 == 0
        yield random_tandem_spec(rng, dims[(k // 2) % len(dims)], product_form), product_form


class TestTandemSpec(unittest.TestCase):
    def test_unstable_station(self):
        with self.assertRaises(InvalidSpec):
            td.TandemSpec([2.0, 3.0, 2.0], [1.0, 1.0, 1.0])

    def test_length_mismatch(self):
        with self.assertRaises(InvalidSpec):
            td.TandemSpec([1.0, 2.0, 3.0], [1.0, 1.0])

    def test_zero_variability(self):
        with self.assertRaises(InvalidSpec):
            td.TandemSpec([1.0, 2.0], [0.0, 0.0])

    def test_negative_variability(self):
        with self.assertRaises(InvalidSpec):
            td.TandemSpec([1.0, 2.0], [-1.0, 1.0])

    def test_zero_scv_allowed(self):
        self.assertEqual(example2_spec().d, 3)

    def test_dict(self):
        spec = td.TandemSpec.from_dict(product_form_spec().to_dict())
        np.testing.assert_array_equal(spec.beta, TANDEM_BETA)
        with self.assertRaises(InstanceError):
            td.TandemSpec.from_dict({"beta": [1.0, 2.0]})


class TestBuildSrbm(unittest.TestCase):
    def test_product_form_instance(self):
        data = td.build_srbm(product_form_spec())
        np.testing.assert_array_equal(data.sigma, TANDEM_SIGMA)
        np.testing.assert_array_equal(data.mu, TANDEM_MU)
        np.testing.assert_array_equal(data.r, TANDEM_R)

    def test_tandem_example(self):
        data = td.build_srbm(example2_spec())
        np.testing.assert_array_equal(data.sigma, EXAMPLE2_SIGMA)
        np.testing.assert_array_equal(data.mu, EXAMPLE2_MU)
        np.testing.assert_array_equal(data.r, EXAMPLE2_R)

    def test_single_station(self):
        data = td.build_srbm(td.TandemSpec([1.0, 2.0], [1.0, 1.0]))
        np.testing.assert_array_equal(data.sigma, [[2.0]])
        np.testing.assert_array_equal(data.mu, [-1.0])
        np.testing.assert_array_equal(data.r, [[1.0]])

    def test_singular_covariance(self):
        with self.assertRaises(InvalidSpec):
            td.build_srbm(td.TandemSpec([1.0, 2.0, 3.0], [0.0, 0.0, 1.0]))

    def test_stability_vector(self):
        spec = example2_spec()
        data = td.build_srbm(spec)
        np.testing.assert_allclose(-np.linalg.solve(data.r, data.mu), spec.b, atol=1e-12)


class TestClosedForms(unittest.TestCase):
    def test_tau(self):
        np.testing.assert_allclose(td.tau_closed_form(example2_spec()), [1, 2, 1])
        np.testing.assert_allclose(td.tau_closed_form(product_form_spec()), [1, 2, 3])
        np.testing.assert_allclose(td.tau_closed_form(td.TandemSpec([1.0, 2.0], [1.0, 1.0])), [1])

    def test_rays_match_geometry(self):
        for spec, _ in random_specs(seed=31, count=100):
            bundle = geo.compute_rays(td.build_srbm(spec))
            closed = td.closed_form_bundle(spec)
            np.testing.assert_allclose(closed.tau, bundle.tau, rtol=1e-10, atol=1e-10)
            np.testing.assert_allclose(closed.a_matrix, bundle.a_matrix, rtol=1e-10, atol=1e-10)
            np.testing.assert_allclose(closed.delta, bundle.delta, rtol=1e-10, atol=1e-10)
            np.testing.assert_allclose(closed.c, bundle.c, rtol=1e-10, atol=1e-10)

    def test_ray_pattern(self):
        np.testing.assert_allclose(td.ray_closed_form(product_form_spec()),
                                   [[1, 2, 3], [0, 2, 3], [0, 0, 3]])

    def test_symmetry_points_match_geometry(self):
        for spec, _ in random_specs(seed=32, count=60):
            data = td.build_srbm(spec)
            bundle = geo.compute_rays(data)
            for i in range(spec.d):
                for j in range(i + 1, spec.d):
                    sym_i, sym_j = td.symmetry_points_closed_form(spec, i, j)
                    pair = geo.symmetry_point(data, bundle, i, j)
                    np.testing.assert_allclose(sym_i, pair.sym_i, atol=1e-9)
                    np.testing.assert_allclose(sym_j, pair.sym_j, atol=1e-9)

    def test_symmetry_points_coincide_under_product_form(self):
        for spec, product_form in random_specs(seed=33, count=40):
            if not product_form:
                continue
            tau = td.tau_closed_form(spec)
            for i in range(spec.d):
                for j in range(i + 1, spec.d):
                    sym_i, sym_j = td.symmetry_points_closed_form(spec, i, j)
                    np.testing.assert_allclose(sym_i[[i, j]], tau[[i, j]], atol=1e-10)
                    np.testing.assert_allclose(sym_j[[i, j]], tau[[i, j]], atol=1e-10)

    def test_pair_data_match_projection(self):
        for spec, _ in random_specs(seed=34, count=40):
            data = td.build_srbm(spec)
            bundle = geo.compute_rays(data)
            for i in range(spec.d):
                for j in range(i + 1, spec.d):
                    closed = td.pair_closed_form(spec, i, j)
                    general = pj.pair_srbm(data, bundle, i, j)
                    np.testing.assert_allclose(closed.sigma_tilde, general.sigma_tilde, atol=1e-9)
                    np.testing.assert_allclose(closed.mu_tilde, general.mu_tilde, atol=1e-9)
                    np.testing.assert_allclose(closed.r_tilde, general.r_tilde, atol=1e-9)

    def test_sigma_mu_star(self):
        sigma_star, mu_star = td.sigma_mu_star_closed_form(product_form_spec())
        np.testing.assert_allclose(sigma_star, [[2, 2, 3], [2, 8, 6], [3, 6, 18]])
        np.testing.assert_allclose(mu_star, [-1, -4, -9])
        for spec, _ in random_specs(seed=35, count=20):
            data = td.build_srbm(spec)
            expected = pj.sigma_mu_star(data, geo.compute_rays(data))
            for closed, general in zip(td.sigma_mu_star_closed_form(spec), expected):
                np.testing.assert_allclose(closed, general, rtol=1e-9, atol=1e-9)

    def test_pair_order(self):
        with self.assertRaises(IndexOutOfRange):
            td.pair_closed_form(product_form_spec(), 2, 1)


class TestProductFormCondition(unittest.TestCase):
    def test_last_station_unconstrained(self):
        self.assertTrue(td.product_form_condition(td.TandemSpec([1.0, 2.0, 3.0, 4.0], [1.0, 1.0, 1.0, 5.0])))

    def test_tandem_example(self):
        self.assertFalse(td.product_form_condition(example2_spec()))

    def test_single_station(self):
        self.assertTrue(td.product_form_condition(td.TandemSpec([1.0, 2.0], [3.0, 0.5])))

    def test_agrees_with_both_verdicts(self):
        for spec, constructed in random_specs(seed=2024, count=200):
            condition = td.product_form_condition(spec)
            report = pf.diagnose_product_form(td.build_srbm(spec))
            self.assertEqual(condition, constructed)
            self.assertEqual(condition, report.skew_ok)
            self.assertEqual(condition, report.geometric_ok)


class TestEntranceVelocities(unittest.TestCase):
    def test_product_form_tandem(self):
        report = td.entrance_velocities(product_form_spec())
        np.testing.assert_allclose(report.velocities[(0, 1)], [-1, 2])
        np.testing.assert_allclose(report.velocities[(0, 2)], [-2, 3])
        np.testing.assert_allclose(report.velocities[(1, 2)], [-1, 3])
        np.testing.assert_allclose(report.normal, [-1, -1, 3], atol=1e-12)

    def test_equal_rates(self):
        report = td.entrance_velocities(td.TandemSpec([1.0, 2.0, 2.0, 3.0], TANDEM_C))
        np.testing.assert_allclose(report.velocities[(0, 1)], [0, 1])

    def test_rejects_non_product_form(self):
        with self.assertRaises(NotProductForm):
            td.entrance_velocities(example2_spec())

    def test_match_pair_velocities(self):
        for spec, product_form in random_specs(seed=36, count=60):
            if not product_form:
                continue
            data = td.build_srbm(spec)
            bundle = geo.compute_rays(data)
            report = td.entrance_velocities(spec)
            for (i, j), velocity in report.velocities.items():
                pair = pj.pair_srbm(data, bundle, i, j)
                points = geo.symmetry_point(data, bundle, i, j)
                for point in (points.sym_i, points.sym_j):
                    np.testing.assert_allclose(td.pair_velocity(pair, point[[i, j]]), velocity, atol=1e-9)

    def test_report_dict(self):
        doc = td.entrance_velocities(product_form_spec()).to_dict()
        self.assertEqual(doc["velocities"][0]["pair"], [1, 2])
        self.assertNotIn("path", doc)


class TestConjecturedPath(unittest.TestCase):
    def setUp(self):
        self.report = td.conjectured_path(product_form_spec(), [0.0, 0.0, 3.0])

    def test_junctions(self):
        first, second, third = self.report.path
        np.testing.assert_allclose(first.start, [0, 0, 0])
        np.testing.assert_allclose(first.end, [1.5, 0, 0], atol=1e-12)
        np.testing.assert_allclose(second.end, [1, 1, 0], atol=1e-12)
        np.testing.assert_allclose(third.end, [0, 0, 3])

    def test_segments_follow_velocities(self):
        for segment in self.report.path:
            np.testing.assert_allclose(segment.start + segment.duration * segment.velocity,
                                       segment.end, atol=1e-12)
        self.assertEqual([s.duration for s in self.report.path], [1.5, 0.5, 1.0])
        np.testing.assert_allclose(self.report.path[0].velocity, [1, 0, 0])

    def test_chained(self):
        path = self.report.path
        for prev, nxt in zip(path, path[1:]):
            np.testing.assert_array_equal(prev.end, nxt.start)

    def test_labelled_as_conjecture(self):
        doc = self.report.to_dict()
        self.assertIn("conjecture", doc["path_status"])
        self.assertEqual(len(doc["path"]), 3)

    def test_target_on_face(self):
        with self.assertRaises(DomainError):
            td.conjectured_path(product_form_spec(), [1.0, 1.0, 0.0])

    def test_needs_three_stations(self):
        with self.assertRaises(InvalidSpec):
            td.conjectured_path(td.TandemSpec([1.0, 2.0, 3.0], [1.0, 1.0, 1.0]), [0.0, 1.0])

    def test_needs_equal_end_variability(self):
        with self.assertRaises(NotProductForm):
            td.conjectured_path(td.TandemSpec(TANDEM_BETA, [1.0, 1.0, 1.0, 2.0]), [0.0, 0.0, 1.0])

    def test_rate_order(self):
        with self.assertRaises(InfeasiblePath):
            td.conjectured_path(td.TandemSpec([1.0, 3.0, 2.0, 4.0], TANDEM_C), [0.0, 0.0, 1.0])


if __name__ == '__main__':
    unittest.main()
