import io
import itertools
import math
import unittest

import numpy as np

from mvlab import (
    ConvergenceError,
    EmpiricalMeasure,
    GaussianMeasure,
    MeasureError,
    bootstrap_se,
    gaussian_kl,
    gaussian_w2,
    noise_floor,
    pth_moment,
    wasserstein,
)
from mvlab._measures import (
    median_cost,
    wasserstein_1d,
    wasserstein_assignment,
    wasserstein_lp,
    wasserstein_sinkhorn,
)

from . import util


class TestEmpiricalMeasure(unittest.TestCase):
    def test_defaults(self):
        mu = util.cloud(0, 1, 2, 3)
        self.assertEqual(mu.n, 4)
        self.assertEqual(mu.dim, 1)
        self.assertTrue(mu.is_uniform)
        np.testing.assert_allclose(mu.weights, [0.25] * 4)
        np.testing.assert_allclose(mu.mean(), [1.5])

    def test_dirac(self):
        mu = EmpiricalMeasure.dirac(3.0)
        self.assertEqual(mu.points.shape, (1, 1))

        mu = EmpiricalMeasure.dirac([1.0, 2.0])
        self.assertEqual(mu.points.shape, (1, 2))
        np.testing.assert_array_equal(mu.mean(), [1.0, 2.0])

    def test_immutable(self):
        mu = util.cloud(0, 1)
        with self.assertRaises(ValueError):
            mu.points[0, 0] = 5.0

    def test_invalid(self):
        for points, weights in [
            ([], None),
            ([0.0, float("nan")], None),
            ([0.0, 1.0], [0.5]),
            ([0.0, 1.0], [1.5, -0.5]),
            ([0.0, 1.0], [0.5, 0.6]),
        ]:
            with self.subTest(points=points, weights=weights):
                self.assertRaises(MeasureError, EmpiricalMeasure, points, weights)

    def test_weighted(self):
        mu = EmpiricalMeasure([0.0, 4.0], [0.75, 0.25])
        self.assertFalse(mu.is_uniform)
        np.testing.assert_allclose(mu.mean(), [1.0])
        np.testing.assert_allclose(mu.covariance(), [[3.0]])

    def test_reflect(self):
        mu = EmpiricalMeasure([[1.0, -2.0]])
        np.testing.assert_array_equal(mu.reflect().points, [[-1.0, 2.0]])

    def test_resample(self):
        mu = EmpiricalMeasure([0.0, 1.0], [1.0, 0.0])
        rng = np.random.default_rng(1)
        sample = mu.resample(10, rng)
        self.assertEqual(sample.n, 10)
        np.testing.assert_array_equal(sample.points, np.zeros((10, 1)))

    def test_sample_gaussian(self):
        g = GaussianMeasure([1.0, -1.0], np.eye(2))
        first = EmpiricalMeasure.sample_gaussian(g, 100, seed=3)
        second = EmpiricalMeasure.sample_gaussian(g, 100, seed=3)
        self.assertEqual(first.points.shape, (100, 2))
        np.testing.assert_array_equal(first.points, second.points)

    def test_csv(self):
        mu = util.random_cloud(5, 2, seed=4)
        stream = io.StringIO()
        mu.to_csv(stream)
        self.assertEqual(stream.getvalue().splitlines()[0], "x_1,x_2")

        stream.seek(0)
        back = EmpiricalMeasure.from_csv(stream)
        np.testing.assert_array_equal(back.points, mu.points)

    def test_csv_weights(self):
        mu = EmpiricalMeasure([0.1, 0.7], [0.3, 0.7])
        stream = io.StringIO()
        mu.to_csv(stream)
        self.assertEqual(stream.getvalue().splitlines()[0], "x_1,weight")

        stream.seek(0)
        back = EmpiricalMeasure.from_csv(stream)
        np.testing.assert_array_equal(back.weights, mu.weights)

    def test_csv_header_mismatch(self):
        stream = io.StringIO("x_1\n1,2\n")
        self.assertRaises(MeasureError, EmpiricalMeasure.from_csv, stream)

    def test_binary(self):
        mu = EmpiricalMeasure([[0.0, 1.0], [2.0, 3.0]], [0.25, 0.75])
        data = mu.to_binary()
        self.assertEqual(len(data), 24 + 8 * 4 + 8 * 2)
        self.assertEqual(
            list(np.frombuffer(data[:24], dtype="<u8")), [2, 2, 1],
        )
        back = EmpiricalMeasure.from_binary(data)
        np.testing.assert_array_equal(back.points, mu.points)
        np.testing.assert_array_equal(back.weights, mu.weights)

        uniform = util.cloud(1, 2, 3)
        self.assertEqual(len(uniform.to_binary()), 24 + 8 * 3)

    def test_binary_truncated(self):
        data = util.cloud(1, 2, 3).to_binary()
        self.assertRaises(MeasureError, EmpiricalMeasure.from_binary, data[:10])
        self.assertRaises(MeasureError, EmpiricalMeasure.from_binary, data[:-8])


class TestGaussianMeasure(unittest.TestCase):
    def test_scalars(self):
        g = GaussianMeasure(0.0, 2.0)
        self.assertEqual(g.dim, 1)
        np.testing.assert_array_equal(g.covariance, [[2.0]])

    def test_invalid(self):
        self.assertRaises(MeasureError, GaussianMeasure, [0.0, 0.0], [[1.0, 0.5], [0.0, 1.0]])
        self.assertRaises(MeasureError, GaussianMeasure, 0.0, -1.0)

    def test_w2(self):
        for g1, g2, expected in [
            (GaussianMeasure(0, 1), GaussianMeasure(0, 1), 0.0),
            (GaussianMeasure(0, 1), GaussianMeasure(1, 1), 1.0),
            (GaussianMeasure(0, 1), GaussianMeasure(0, 4), 1.0),
            (
                GaussianMeasure([0, 0], np.eye(2)),
                GaussianMeasure([3, 4], 4 * np.eye(2)),
                math.sqrt(25 + 2),
            ),
        ]:
            with self.subTest(g1=g1, g2=g2):
                self.assertAlmostEqual(gaussian_w2(g1, g2), expected, places=9)

    def test_kl(self):
        self.assertAlmostEqual(
            gaussian_kl(GaussianMeasure(0, 1), GaussianMeasure(0, 1)), 0.0
        )
        self.assertAlmostEqual(
            gaussian_kl(GaussianMeasure(1, 1), GaussianMeasure(0, 1)), 0.5
        )
        self.assertAlmostEqual(
            gaussian_kl(GaussianMeasure(0, 2), GaussianMeasure(0, 1)),
            0.5 * (2 - 1 - math.log(2)),
        )
        self.assertAlmostEqual(
            gaussian_kl(GaussianMeasure(0, 2), GaussianMeasure(0, 1)), 0.1534, places=4
        )

    def test_kl_degenerate(self):
        self.assertRaises(
            MeasureError, gaussian_kl, GaussianMeasure(0, 1), GaussianMeasure(0, 0)
        )
        self.assertEqual(
            gaussian_kl(GaussianMeasure(0, 0), GaussianMeasure(0, 1)), float("inf")
        )


class TestWasserstein1D(unittest.TestCase):
    def test_examples(self):
        for mu, nu, p, expected in [
            (util.cloud(0, 1), util.cloud(0, 1), 2, 0.0),
            (util.cloud(0), util.cloud(1), 1, 1.0),
            (util.cloud(0, 2), util.cloud(1, 3), 2, 1.0),
            (util.cloud(3, 1), util.cloud(0, 2), 1, 1.0),
        ]:
            with self.subTest(mu=mu.points.ravel(), nu=nu.points.ravel(), p=p):
                self.assertAlmostEqual(wasserstein_1d(mu, nu, p), expected)

    def test_weighted(self):
        mu = EmpiricalMeasure([0.0, 1.0], [0.5, 0.5])
        nu = util.cloud(0.0)
        self.assertAlmostEqual(wasserstein_1d(mu, nu, 1), 0.5)
        self.assertAlmostEqual(wasserstein_1d(mu, nu, 2), math.sqrt(0.5))
        self.assertAlmostEqual(wasserstein_1d(mu, nu, 1.5), 0.5 ** (1 / 1.5))

        # unequal sizes go through the common refinement of the quantiles
        mu = util.cloud(0, 1, 2)
        nu = util.cloud(0, 2)
        self.assertAlmostEqual(wasserstein_1d(mu, nu, 1), 1 / 3)

    def test_metric(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            mu, nu, rho = (EmpiricalMeasure(rng.normal(size=20)) for _ in range(3))
            d_mn = wasserstein_1d(mu, nu, 2)
            self.assertGreaterEqual(d_mn, 0.0)
            self.assertAlmostEqual(d_mn, wasserstein_1d(nu, mu, 2))
            self.assertLessEqual(
                d_mn, wasserstein_1d(mu, rho, 2) + wasserstein_1d(rho, nu, 2) + 1e-12
            )
            self.assertLessEqual(wasserstein_1d(mu, nu, 1), d_mn + 1e-12)

    def test_dimension(self):
        mu = util.random_cloud(3, 2)
        self.assertRaises(MeasureError, wasserstein_1d, mu, mu, 2)
        self.assertRaises(MeasureError, wasserstein_1d, util.cloud(0), util.cloud(1), 0.5)


class TestAssignment(unittest.TestCase):
    def test_identical(self):
        mu = util.random_cloud(10, 3, seed=2)
        self.assertAlmostEqual(wasserstein_assignment(mu, mu, 2), 0.0)

    def test_translation(self):
        mu = util.random_cloud(12, 2, seed=3)
        nu = EmpiricalMeasure(mu.points + np.array([3.0, 4.0]))
        self.assertAlmostEqual(wasserstein_assignment(mu, nu, 2), 5.0, places=9)

    def test_brute_force(self):
        mu = util.random_cloud(8, 2, seed=5)
        nu = util.random_cloud(8, 2, seed=6)
        cost = np.sum((mu.points[:, None, :] - nu.points[None, :, :]) ** 2, axis=2)
        best = min(
            np.mean(cost[np.arange(8), list(perm)])
            for perm in itertools.permutations(range(8))
        )
        self.assertAlmostEqual(wasserstein_assignment(mu, nu, 2), math.sqrt(best), places=9)

    def test_matches_1d(self):
        for n in (1, 5, 64):
            with self.subTest(n=n):
                mu = util.random_cloud(n, 1, seed=n)
                nu = util.random_cloud(n, 1, seed=n + 100, loc=0.5)
                for p in (1, 2, 3):
                    self.assertLess(
                        abs(wasserstein_assignment(mu, nu, p) - wasserstein_1d(mu, nu, p)),
                        1e-9,
                    )

    def test_preconditions(self):
        self.assertRaises(
            MeasureError, wasserstein_assignment, util.cloud(0, 1), util.cloud(0), 2
        )
        mu = util.random_cloud(10, 2)
        self.assertRaises(MeasureError, wasserstein_assignment, mu, mu, 2, cap=5)
        weighted = EmpiricalMeasure([0.0, 1.0], [0.2, 0.8])
        self.assertRaises(
            MeasureError, wasserstein_assignment, weighted, util.cloud(0, 1), 2
        )


class TestLinearProgram(unittest.TestCase):
    def test_point_mass(self):
        dirac = EmpiricalMeasure.dirac(np.array([1.0, -2.0]))
        mu = util.random_cloud(700, 2, seed=14)
        distances = np.linalg.norm(mu.points - np.array([1.0, -2.0]), axis=1)
        for p in (1, 2, 3):
            with self.subTest(p=p):
                expected = np.mean(distances ** p) ** (1.0 / p)
                self.assertAlmostEqual(wasserstein_lp(dirac, mu, p), expected, places=9)
                self.assertAlmostEqual(wasserstein_lp(mu, dirac, p), expected, places=9)

    def test_matches_assignment(self):
        mu = util.random_cloud(30, 3, seed=15)
        nu = util.random_cloud(30, 3, seed=16, loc=0.7)
        for p in (1, 2):
            with self.subTest(p=p):
                self.assertLess(
                    abs(wasserstein_lp(mu, nu, p) - wasserstein_assignment(mu, nu, p)),
                    1e-9,
                )

    def test_unequal_sizes(self):
        mu = EmpiricalMeasure(np.array([[0.0, 0.0], [2.0, 0.0]]))
        nu = EmpiricalMeasure(
            np.array([[0.0, 0.0], [0.0, 0.0], [2.0, 0.0], [2.0, 1.0]])
        )
        # half of the mass at (2, 0) moves one unit
        self.assertAlmostEqual(wasserstein_lp(mu, nu, 2), math.sqrt(0.25), places=9)

    def test_cap(self):
        mu = util.random_cloud(10, 2)
        self.assertRaises(MeasureError, wasserstein_lp, mu, mu, 2, cap=5)

    def test_auto_point_mass(self):
        dirac = EmpiricalMeasure.dirac(np.zeros(2))
        mu = util.random_cloud(900, 2, seed=17)
        estimate = wasserstein(dirac, mu, 2)
        self.assertEqual(estimate.estimator, "point_mass")
        self.assertAlmostEqual(estimate.value, wasserstein_lp(dirac, mu, 2))


class TestSinkhorn(unittest.TestCase):
    def test_identical(self):
        mu = util.random_cloud(32, 2, seed=8)
        self.assertLess(wasserstein_sinkhorn(mu, mu, 2, reg=0.1), 1e-6)

    def test_matches_assignment(self):
        mu = util.random_cloud(128, 2, seed=9)
        nu = util.random_cloud(128, 2, seed=10, loc=1.0)
        exact = wasserstein_assignment(mu, nu, 2)
        reg = 1e-2 * median_cost(mu, nu, 2)
        value = wasserstein_sinkhorn(mu, nu, 2, reg, max_iter=50_000)
        self.assertLess(abs(value - exact), 0.02 * exact)

    def test_translation(self):
        mu = util.random_cloud(64, 2, seed=11)
        nu = EmpiricalMeasure(mu.points + np.array([0.0, 2.0]))
        value = wasserstein_sinkhorn(mu, nu, 2, reg=1e-2, max_iter=50_000)
        self.assertLess(abs(value - 2.0), 0.04)

    def test_not_converged(self):
        mu = util.random_cloud(64, 2, seed=12)
        nu = util.random_cloud(64, 2, seed=13, loc=3.0)
        with self.assertRaises(ConvergenceError) as cm:
            wasserstein_sinkhorn(mu, nu, 2, reg=1e-4, max_iter=2, tol=1e-12)
        self.assertGreater(cm.exception.residual, 1e-12)

    def test_invalid_reg(self):
        mu = util.random_cloud(4, 2)
        self.assertRaises(MeasureError, wasserstein_sinkhorn, mu, mu, 2, reg=0.0)


class TestDispatch(unittest.TestCase):
    def test_auto(self):
        self.assertEqual(
            wasserstein(util.cloud(0, 1), util.cloud(2), 2).estimator, "1d"
        )
        mu = util.random_cloud(16, 2, seed=1)
        nu = util.random_cloud(16, 2, seed=2)
        self.assertEqual(wasserstein(mu, nu, 2).estimator, "assignment")

        nu = util.random_cloud(20, 2, seed=2)
        self.assertEqual(wasserstein(mu, nu, 2, reg=0.5).estimator, "sinkhorn")

    def test_subsampled(self):
        mu = util.random_cloud(40, 2, seed=1)
        nu = util.random_cloud(30, 2, seed=2, loc=0.5)
        estimate = wasserstein(mu, nu, 2, reg=0.5, sinkhorn_cap=20)
        self.assertEqual(estimate.estimator, "sinkhorn_subsampled")
        self.assertGreater(estimate.value, 0.0)

    def test_auto_multivariate(self):
        mu = util.random_cloud(1000, 2, seed=21)
        nu = EmpiricalMeasure(mu.points + np.array([0.0, 1.0]))
        estimate = wasserstein(mu, nu, 2.0)
        self.assertEqual(estimate.estimator, "sinkhorn")
        self.assertLess(abs(estimate.value - 1.0), 1e-2)

        other = util.random_cloud(1000, 2, seed=22, loc=0.05)
        estimate = wasserstein(mu, other, 2.0)
        self.assertTrue(np.isfinite(estimate.value))
        self.assertGreaterEqual(estimate.value, 0.0)

    def test_noise_floor_multivariate(self):
        floor = noise_floor(util.random_cloud(600, 2, seed=23), 2.0, n_pairs=2)
        self.assertGreater(floor, 0.0)
        self.assertLess(floor, 1.0)

    def test_unknown(self):
        mu = util.random_cloud(4, 2)
        nu = util.random_cloud(5, 2)
        self.assertRaises(MeasureError, wasserstein, mu, nu, 2, "emd")

    def test_dimension_mismatch(self):
        self.assertRaises(
            MeasureError, wasserstein, util.random_cloud(4, 2), util.random_cloud(4, 3), 2
        )


class TestFunctionals(unittest.TestCase):
    def test_pth_moment(self):
        self.assertAlmostEqual(pth_moment(util.cloud(-1, 1), 2), 1.0)
        self.assertAlmostEqual(pth_moment(EmpiricalMeasure.dirac(3.0), 1), 3.0)
        self.assertAlmostEqual(pth_moment(EmpiricalMeasure.dirac(3.0), 4), 3.0)
        self.assertAlmostEqual(pth_moment(util.cloud(0, 2), 1), 1.0)
        self.assertRaises(MeasureError, pth_moment, util.cloud(0), 0.5)

    def test_noise_floor(self):
        small = util.random_cloud(100, 1, seed=3)
        large = util.random_cloud(2000, 1, seed=3)
        self.assertGreater(noise_floor(small, 2), noise_floor(large, 2))
        self.assertEqual(noise_floor(EmpiricalMeasure.dirac(1.0), 2), 0.0)

    def test_bootstrap_se(self):
        samples = np.random.default_rng(0).normal(size=400)
        se = bootstrap_se(samples)
        self.assertLess(abs(se - 1 / math.sqrt(400)), 0.015)
        self.assertEqual(bootstrap_se(samples, seed=4), bootstrap_se(samples, seed=4))

    def test_sampled_gaussians(self):
        g1 = GaussianMeasure(0.0, 1.0)
        g2 = GaussianMeasure(1.0, 4.0)
        values = [
            wasserstein(
                EmpiricalMeasure.sample_gaussian(g1, 10_000, seed=seed),
                EmpiricalMeasure.sample_gaussian(g2, 10_000, seed=seed + 50),
                2,
            ).value
            for seed in range(8)
        ]
        se = bootstrap_se(np.array(values))
        self.assertLess(
            abs(np.mean(values) - gaussian_w2(g1, g2)), 3 * se + 0.05
        )
