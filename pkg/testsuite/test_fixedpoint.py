import io
import math
import unittest

import numpy as np

from mvlab import (
    ConfigError,
    DegenerateInputError,
    EmpiricalMeasure,
    FixedPointConfig,
    GaussianMeasure,
    ModelError,
    SimConfig,
    apply_T,
    builtin_model,
    estimate_contraction,
    estimate_ergodicity,
    fit_exponential_rate,
    measure_convergence,
    phase_scan,
    picard_solve,
    sample_density_1d,
    self_consistency_roots,
    stationary_density_1d,
    wasserstein,
)
from mvlab._fixedpoint import spread_cloud

from . import util

SIM = SimConfig(n_particles=2000, step=1e-2, horizon=8.0, record_every=100)


def ou(c=0.5, a=1.0):
    return builtin_model("mean_field_ou", {"a": a, "c": c, "s": math.sqrt(2)})


def double_well(c=0.0, s=1.0):
    return builtin_model("granular_media_1d", {"theta1": 0.25, "theta2": 1, "c": c, "s": s})


class TestFixedPointConfig(unittest.TestCase):
    def test_defaults(self):
        options = FixedPointConfig()
        self.assertEqual(options.tol, 1e-2)
        self.assertEqual(options.max_iter, 20)
        self.assertIsNone(options.burn_in)
        self.assertFalse(options.pooled)
        self.assertEqual(options.floor_multiple, 3.0)

    def test_invalid(self):
        for kwds in [
            {"tol": 0},
            {"max_iter": 0},
            {"burn_in": -1},
            {"merge_tol": -0.1},
            {"explosion_bound": 0},
            {"floor_multiple": -1},
            {"stall_iterations": 0},
        ]:
            with self.subTest(kwds):
                self.assertRaises(ValueError, FixedPointConfig, **kwds)


class TestFitExponentialRate(unittest.TestCase):
    def test_exact(self):
        fit = fit_exponential_rate([(0, 1), (1, math.exp(-0.5)), (2, math.exp(-1))])
        self.assertAlmostEqual(fit.lambda_bar, 0.5)
        self.assertAlmostEqual(fit.r2, 1.0)
        self.assertAlmostEqual(fit.C_bar, 1.0)

        fit = fit_exponential_rate([(0, 2), (1, 2 * math.exp(-1)), (2, 2 * math.exp(-2))])
        self.assertAlmostEqual(fit.lambda_bar, 1.0)
        self.assertAlmostEqual(fit.C_bar, 1.0)

    def test_noisy(self):
        rng = np.random.default_rng(3)
        t = np.linspace(0, 10, 101)
        w = np.exp(-0.3 * t) * (1 + 0.01 * rng.standard_normal(len(t)))
        fit = fit_exponential_rate(np.column_stack([t, w]))
        self.assertLess(abs(fit.lambda_bar - 0.3), 0.02)
        self.assertGreater(fit.r2, 0.99)

    def test_floor(self):
        series = [(0, 1.0), (1, 0.5), (2, 0.25), (3, 0.01), (4, 0.2)]
        fit = fit_exponential_rate(series, floor=0.1)
        self.assertAlmostEqual(fit.lambda_bar, math.log(2))

    def test_degenerate(self):
        self.assertRaises(DegenerateInputError, fit_exponential_rate, [(0, 1.0), (1, 0.5)])
        with self.assertRaises(DegenerateInputError) as cm:
            fit_exponential_rate([(0, 1.0), (1, 0.5), (2, 0.25)], floor=2.0)
        self.assertEqual(cm.exception.details["points"], 0)


class TestSpreadCloud(unittest.TestCase):
    def test_symmetric(self):
        cloud = spread_cloud(np.array([1.5]), 101, seed=0)
        np.testing.assert_allclose(cloud.points[:, 0] - 1.5, -(cloud.points[::-1, 0] - 1.5))
        self.assertAlmostEqual(float(cloud.mean()[0]), 1.5)

    def test_multivariate(self):
        cloud = spread_cloud(np.zeros(2), 50, seed=3)
        self.assertEqual(cloud.points.shape, (50, 2))
        np.testing.assert_array_equal(cloud.points, spread_cloud(np.zeros(2), 50, seed=3).points)


class TestApplyT(unittest.TestCase, util.TestMixin):
    def test_linear(self):
        image = apply_T(ou(), EmpiricalMeasure.dirac(1.0), SIM, 0.0)
        points = image.points[:, 0]
        se = 1 / math.sqrt(SIM.n_particles)
        self.assert_within(float(points.mean()), 0.5, 3 * se + 0.01)
        self.assert_within(float(points.var()), 1.0, 0.1)

    def test_constant_map(self):
        first = apply_T(ou(c=0), EmpiricalMeasure.dirac(0.0), SIM, 0.0)
        second = apply_T(ou(c=0), EmpiricalMeasure.dirac(5.0), SIM, 0.0)
        self.assertLess(wasserstein(first, second, 2).value, 3 / math.sqrt(SIM.n_particles))

    def test_symmetric_well(self):
        image = apply_T(double_well(s=2.0), EmpiricalMeasure.dirac(0.0), SIM, 0.0)
        points = image.points[:, 0]
        self.assert_within(float(points.mean()), 0.0, 3 * float(points.std()) / math.sqrt(len(points)))

    def test_pooled(self):
        cfg = SIM.replace(n_particles=100, horizon=2.0, record_every=50)
        image = apply_T(ou(), EmpiricalMeasure.dirac(0.0), cfg, 1.0, pooled=True)
        # snapshots at t = 1.0, 1.5 and 2.0
        self.assertEqual(image.n, 300)

    def test_burn_in(self):
        with self.assertRaises(ConfigError) as cm:
            apply_T(ou(), EmpiricalMeasure.dirac(0.0), SIM, 8.0)
        self.assertEqual(cm.exception.key, "fixedpoint.burn_in")
        self.assertRaises(ValueError, apply_T, ou(), EmpiricalMeasure.dirac(0.0), SIM, -1.0)


class TestPicard(unittest.TestCase, util.TestMixin):
    def test_linear(self):
        seen = []
        options = FixedPointConfig(tol=0.02, max_iter=20, floor_multiple=0.0)
        result = picard_solve(
            ou(),
            EmpiricalMeasure.dirac(1.0),
            0.02,
            20,
            SIM,
            options,
            hooks=[lambda iteration, gap, measure: seen.append((iteration, gap))],
        )
        self.assertTrue(result.converged)
        self.assertEqual(result.stop_reason, "tol")
        self.assertEqual(result.threshold, 0.02)
        self.assertEqual(result.iterations_used, len(result.iterates))
        self.assertEqual([item[0] for item in seen], list(range(1, result.iterations_used + 1)))
        self.assertEqual(len(result.iterate_means), result.iterations_used + 1)

        means = result.iterate_means[:, 0]
        self.assert_within(means[0], 1.0, 1e-12)
        self.assert_within(means[1], 0.5, 0.1)
        self.assert_within(means[2], 0.25, 0.1)
        self.assert_within(float(result.measure.mean()[0]), 0.0, 0.1)
        self.assert_within(result.contraction_estimate, 0.5, 0.05)

        reference = EmpiricalMeasure.sample_gaussian(
            GaussianMeasure(0.0, 1.0), SIM.n_particles, seed=9
        )
        self.assertLess(wasserstein(result.measure, reference, 2).value, 0.2)

    def test_constant_map(self):
        result = picard_solve(ou(c=0), EmpiricalMeasure.dirac(0.0), 0.01, 10, SIM)
        self.assertTrue(result.converged)
        self.assertLessEqual(result.iterations_used, 2)
        self.assertEqual(result.iterates[-1], 0.0)
        self.assertEqual(result.stop_reason, "tol")

    def test_max_iter(self):
        result = picard_solve(ou(), EmpiricalMeasure.dirac(1.0), 0.01, 1, SIM)
        self.assertFalse(result.converged)
        self.assertEqual(result.stop_reason, "max_iter")
        self.assertEqual(result.contraction_estimate, 0.0)

    def test_non_contraction(self):
        cfg = SIM.replace(n_particles=500, horizon=4.0)
        result = picard_solve(ou(c=1.5), EmpiricalMeasure.dirac(1.0), 0.01, 20, cfg)
        self.assertFalse(result.converged)
        self.assertEqual(result.stop_reason, "non_contraction")
        self.assertEqual(result.iterations_used, 5)
        self.assertGreater(result.contraction_estimate, 1.0)

    def test_options(self):
        options = FixedPointConfig(tol=0.05, max_iter=20, pooled=True, burn_in=4.0)
        result = picard_solve(ou(), EmpiricalMeasure.dirac(1.0), 0.05, 20, SIM, options)
        self.assertEqual(result.burn_in, 4.0)
        self.assertTrue(result.converged)
        self.assertGreater(result.measure.n, SIM.n_particles)

    def test_overrides(self):
        options = FixedPointConfig(tol=1e-6, max_iter=20, floor_multiple=0.0)
        start = EmpiricalMeasure.dirac(1.0)

        result = picard_solve(ou(), start, None, 2, SIM, options)
        self.assertEqual(result.iterations_used, 2)
        self.assertEqual(result.stop_reason, "max_iter")
        self.assertEqual(result.threshold, 1e-6)

        result = picard_solve(ou(), start, None, None, SIM, options.replace(max_iter=1))
        self.assertEqual(result.iterations_used, 1)

        result = picard_solve(ou(c=0), EmpiricalMeasure.dirac(0.0), 0.3, None, SIM, options)
        self.assertEqual(result.threshold, 0.3)
        self.assertTrue(result.converged)

        self.assertRaises(ValueError, picard_solve, ou(), start, None, 0, SIM, options)

    def test_to_dict(self):
        result = picard_solve(ou(c=0), EmpiricalMeasure.dirac(0.0), 0.01, 10, SIM)
        data = result.to_dict("measure.csv")
        self.assertEqual(data["measure_file"], "measure.csv")
        self.assertEqual(
            set(data),
            {
                "measure_file",
                "iterates",
                "contraction_estimate",
                "converged",
                "iterations_used",
                "stop_reason",
                "noise_floor",
                "threshold",
                "iterate_means",
                "burn_in",
            },
        )

    def test_invalid(self):
        self.assertRaises(ValueError, picard_solve, ou(), EmpiricalMeasure.dirac(0.0), 0, 5, SIM)
        self.assertRaises(ValueError, picard_solve, ou(), EmpiricalMeasure.dirac(0.0), 0.1, 0, SIM)


class TestContraction(unittest.TestCase):
    def test_linear(self):
        mu = util.random_cloud(1000, 1, seed=1)
        nu = util.random_cloud(1000, 1, seed=2, loc=2.0)
        ratio = estimate_contraction(ou(), mu, nu, SIM)
        self.assertLess(abs(ratio - 0.5), 0.05)

    def test_constant_map(self):
        mu = util.random_cloud(1000, 1, seed=1)
        nu = util.random_cloud(1000, 1, seed=2, loc=2.0)
        self.assertLess(estimate_contraction(ou(c=0), mu, nu, SIM), 0.05)

    def test_degenerate(self):
        mu = util.random_cloud(1000, 1, seed=1)
        nu = EmpiricalMeasure(mu.points[::-1])
        self.assertRaises(DegenerateInputError, estimate_contraction, ou(), mu, nu, SIM)


class TestErgodicity(unittest.TestCase):
    CFG = SimConfig(n_particles=2000, step=1e-2, horizon=5.0, record_every=10)

    def test_ou(self):
        estimate = estimate_ergodicity(
            ou(c=0), EmpiricalMeasure.dirac(0.0), [EmpiricalMeasure.dirac(3.0)], self.CFG
        )
        self.assertTrue(estimate.usable)
        self.assertFalse(estimate.degenerate)
        self.assertLess(abs(estimate.lambda_hat - 1.0), 0.1)
        self.assertGreaterEqual(estimate.C_hat, 1.0)
        self.assertLess(estimate.C_hat, 1.3)
        self.assertEqual(len(estimate.per_start), 1)

    def test_double_well(self):
        estimate = estimate_ergodicity(
            double_well(s=2.0),
            EmpiricalMeasure.dirac(0.0),
            [EmpiricalMeasure.dirac(3.0), EmpiricalMeasure.dirac(-3.0)],
            self.CFG,
        )
        self.assertFalse(estimate.degenerate)
        self.assertGreater(estimate.lambda_hat, 0)
        self.assertEqual(len(estimate.per_start), 2)

    def test_start_at_target(self):
        frozen = EmpiricalMeasure.dirac(0.0)
        target = apply_T(ou(c=0), frozen, self.CFG, 0.0)
        estimate = estimate_ergodicity(ou(c=0), frozen, [target], self.CFG)
        self.assertTrue(estimate.degenerate)
        self.assertFalse(estimate.usable)
        self.assertTrue(math.isnan(estimate.lambda_hat))
        self.assertEqual(estimate.per_start, (None,))

    def test_no_starts(self):
        self.assertRaises(
            ValueError, estimate_ergodicity, ou(), EmpiricalMeasure.dirac(0.0), [], self.CFG
        )


class TestMeasureConvergence(unittest.TestCase):
    def test_decay(self):
        cfg = SimConfig(n_particles=2000, step=1e-2, horizon=6.0, record_every=25)
        mu_bar = spread_cloud(np.zeros(1), 2000, 0)
        trajectory = measure_convergence(ou(), EmpiricalMeasure.dirac(2.0), mu_bar, cfg)
        distances = trajectory.summaries.wp_to_ref
        self.assertEqual(trajectory.estimator, "1d")
        self.assertEqual(len(distances), len(trajectory.times))

        window = (trajectory.times >= 1.0) & (trajectory.times <= 4.0)
        fit = fit_exponential_rate(
            np.column_stack([trajectory.times[window], distances[window]])
        )
        self.assertLess(abs(fit.lambda_bar - 0.5), 0.1)

    def test_start_at_limit(self):
        cfg = SimConfig(n_particles=1000, step=1e-2, horizon=2.0, record_every=50)
        mu_bar = spread_cloud(np.zeros(1), 1000, 0)
        trajectory = measure_convergence(ou(c=0), mu_bar, mu_bar, cfg)
        self.assertEqual(trajectory.summaries.wp_to_ref[0], 0.0)
        self.assertTrue(np.all(trajectory.summaries.wp_to_ref < 0.2))


class TestStationaryDensity(unittest.TestCase):
    def test_gaussian(self):
        grid = np.linspace(-10, 10, 4001)
        found = stationary_density_1d(ou(), EmpiricalMeasure.dirac(1.0), grid)
        self.assertLess(abs(found.mean - 0.5), 1e-8)
        expected = np.exp(-0.5 * (grid - 0.5) ** 2) / math.sqrt(2 * math.pi)
        np.testing.assert_allclose(found.density, expected, atol=1e-8)

    def test_symmetric(self):
        grid = np.linspace(-4, 4, 1601)
        found = stationary_density_1d(double_well(), EmpiricalMeasure.dirac(0.0), grid)
        self.assertLess(abs(found.mean), 1e-10)
        np.testing.assert_allclose(found.density, found.density[::-1], rtol=1e-9)

    def test_odd_in_mean(self):
        grid = np.linspace(-4, 4, 1601)
        model = double_well(c=0.3)
        plus = stationary_density_1d(model, EmpiricalMeasure.dirac(0.7), grid).mean
        minus = stationary_density_1d(model, EmpiricalMeasure.dirac(-0.7), grid).mean
        self.assertGreater(plus, 0)
        self.assertLess(abs(plus + minus), 1e-10)

    def test_errors(self):
        grid = np.linspace(-5, 5, 101)
        two = builtin_model("mean_field_ou", {"a": 1, "c": 0, "s": 1, "d": 2})
        self.assertRaises(
            ModelError, stationary_density_1d, two, EmpiricalMeasure.dirac([0, 0]), grid
        )
        self.assertRaises(
            DegenerateInputError,
            stationary_density_1d,
            ou(a=-1.0, c=0),
            EmpiricalMeasure.dirac(0.0),
            grid,
        )
        varying = builtin_model(
            "custom",
            {
                "drift": lambda x, summary: -x,
                "diffusion": lambda x, summary: 1 + 0.1 * x[0] ** 2,
            },
        )
        self.assertRaises(
            DegenerateInputError, stationary_density_1d, varying, EmpiricalMeasure.dirac(0.0), grid
        )
        self.assertRaises(
            ValueError, stationary_density_1d, ou(), EmpiricalMeasure.dirac(0.0), [0.0, 1.0]
        )
        self.assertRaises(
            ValueError, stationary_density_1d, ou(), EmpiricalMeasure.dirac(0.0), [0.0, 2.0, 1.0]
        )

    def test_sample(self):
        grid = np.linspace(-8, 8, 3201)
        density = np.exp(-0.5 * grid ** 2) / math.sqrt(2 * math.pi)
        sample = sample_density_1d(grid, density, 1000)
        self.assertEqual(sample.n, 1000)
        self.assertLess(abs(float(sample.mean()[0])), 1e-6)
        self.assertLess(abs(float(np.sqrt(sample.covariance()[0, 0])) - 1), 0.01)


class TestSelfConsistency(unittest.TestCase):
    M_GRID = np.linspace(-1.5, 1.5, 30)
    X_GRID = np.linspace(-4, 4, 1601)

    def test_low_noise(self):
        roots = self_consistency_roots(double_well(c=1.0, s=0.2), self.M_GRID, self.X_GRID)
        self.assertEqual(len(roots), 3)
        self.assertEqual([root.stable for root in roots], [True, False, True])
        self.assertLess(abs(roots[0].m + roots[2].m), 1e-6)
        self.assertLess(abs(abs(roots[2].m) - 1.0), 0.1)
        self.assertLess(abs(roots[1].m), 1e-6)

    def test_high_noise(self):
        roots = self_consistency_roots(
            double_well(c=1.0, s=2.0), self.M_GRID, np.linspace(-6, 6, 2401)
        )
        self.assertEqual(len(roots), 1)
        self.assertTrue(roots[0].stable)
        self.assertLess(abs(roots[0].m), 1e-6)

    def test_linear(self):
        roots = self_consistency_roots(ou(), self.M_GRID, np.linspace(-10, 10, 2001))
        self.assertEqual(len(roots), 1)
        self.assertLess(abs(roots[0].m), 1e-8)
        self.assertTrue(roots[0].stable)


class TestPhaseScan(unittest.TestCase):
    CFG = SimConfig(n_particles=500, step=2e-2, horizon=5.0, record_every=50)
    STARTS = [EmpiricalMeasure.dirac(-2.0), EmpiricalMeasure.dirac(2.0)]

    def family(self, c):
        return ou(c=c)

    def test_linear(self):
        report = phase_scan(self.family, ("c", [0.0, 0.25, 0.5]), self.STARTS, self.CFG)
        self.assertEqual(report.parameter, "c")
        np.testing.assert_array_equal(report.parameter_grid, [0.0, 0.25, 0.5])
        np.testing.assert_array_equal(report.multiplicity, [1, 1, 1])
        for cell in report.cells:
            self.assertEqual(cell.errors, {})
            self.assertEqual(cell.clusters, ((0, 1),))
            self.assertEqual(cell.distances.shape, (2, 2))
            self.assertLess(abs(float(cell.cluster_means()[0, 0])), 0.4)

        means, distances = report.fixed_points_per_value[0]
        self.assertEqual(means.shape, (2, 1))

    def test_threads(self):
        serial = phase_scan(self.family, ("c", [0.0, 0.5]), self.STARTS, self.CFG)
        threaded = phase_scan(self.family, ("c", [0.0, 0.5]), self.STARTS, self.CFG, threads=2)
        for first, second in zip(serial.cells, threaded.cells):
            np.testing.assert_array_equal(first.means, second.means)

    def test_construction_failure(self):
        def family(c):
            if c > 1:
                raise ValueError(f"c={c} outside the admissible range")
            return ou(c=c)

        report = phase_scan(family, ("c", [0.0, 2.0]), self.STARTS, self.CFG)
        np.testing.assert_array_equal(report.multiplicity, [1, 0])
        self.assertEqual(report.cells[0].errors, {})

        failed = report.cells[1]
        self.assertEqual(failed.results, (None, None))
        self.assertEqual(sorted(failed.errors), [0, 1])
        self.assertTrue(failed.errors[0].startswith("ModelError: c=2.0 outside"))
        self.assertEqual(report.to_dict()["cells"][1]["clusters"], [])

        stream = io.StringIO()
        report.to_csv(stream)
        self.assertEqual(len(stream.getvalue().splitlines()), 3)

    def test_output(self):
        report = phase_scan(self.family, ("c", [0.0]), self.STARTS, self.CFG, merge_tol=0.5)
        self.assertEqual(report.cells[0].merge_tol, 0.5)

        stream = io.StringIO()
        report.to_csv(stream)
        lines = stream.getvalue().splitlines()
        self.assertEqual(lines[0], "param_value,start_id,fixed_point_mean_1,multiplicity")
        self.assertEqual(len(lines), 3)

        data = report.to_dict()
        self.assertEqual(data["multiplicity"], [1])
        self.assertEqual(data["cells"][0]["clusters"], [[0, 1]])
        self.assertEqual(len(data["cells"][0]["results"]), 2)

    def test_failures(self):
        options = FixedPointConfig(explosion_bound=0.5)
        report = phase_scan(self.family, ("c", [0.0]), self.STARTS, self.CFG, options=options)
        cell = report.cells[0]
        self.assertEqual(set(cell.errors), {0, 1})
        self.assertIn("NonErgodicError", cell.errors[0])
        self.assertEqual(cell.multiplicity, 0)
        self.assertEqual(cell.results, (None, None))

    def test_starts(self):
        self.assertRaises(
            ValueError, phase_scan, self.family, ("c", [0.0]), self.STARTS[:1], self.CFG
        )
