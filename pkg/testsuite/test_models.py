import math
import unittest
import unittest.mock

import numpy as np

from mvlab import (
    AssumptionConstants,
    EmpiricalMeasure,
    ModelError,
    available_models,
    builtin_model,
    check_dissipativity,
    check_ellipticity,
    eval_diffusion,
    eval_drift,
    register_model,
)
from mvlab._models import a2_sigma_factor, gaussian_tuple_sampler

ZOO = [
    ("mean_field_ou", {"a": 1, "c": 0.5, "s": math.sqrt(2)}),
    ("mean_field_ou", {"a": 1, "c": 0.0, "s": math.sqrt(2), "d": 2}),
    ("granular_media_1d", {"theta1": 0.25, "theta2": 1, "c": 0.3, "s": 1}),
    ("curie_weiss", {"beta": 2.0, "J": 0.5, "d": 2}),
]


class TestConstants(unittest.TestCase):
    def test_defaults(self):
        constants = AssumptionConstants()
        self.assertEqual(constants.p, 1.0)
        self.assertEqual(constants.sigma_sup, math.inf)
        self.assertFalse(constants.has_local_dissipativity)

    def test_invalid(self):
        for kwds in [
            {"p": 0.5},
            {"delta": -1},
            {"sigma0": -1},
            {"sigma_sup": 0},
            {"sigma0": 2, "sigma_sup": 1},
            {"K1": 1.0},
            {"K1": -1.0, "r0": 1.0},
        ]:
            with self.subTest(kwds):
                self.assertRaises(ModelError, AssumptionConstants, **kwds)

    def test_sigma_factor(self):
        constants = AssumptionConstants(sigma0=1, sigma_sup=2)
        self.assertEqual(a2_sigma_factor(constants, 1), 7)
        self.assertEqual(a2_sigma_factor(constants, 3), 8)
        self.assertEqual(a2_sigma_factor(AssumptionConstants(), 1), math.inf)


class TestZoo(unittest.TestCase):
    def test_available(self):
        names = available_models()
        self.assertEqual(list(names), sorted(names))
        for nm in ("curie_weiss", "custom", "granular_media_1d", "mean_field_ou"):
            self.assertIn(nm, names)

    def test_mean_field_ou(self):
        model = builtin_model("mean_field_ou", {"a": 1, "c": 0.5, "s": math.sqrt(2), "d": 1})
        self.assertEqual(model.dim, 1)
        self.assertEqual(model.constants.K0, -1)
        self.assertAlmostEqual(model.constants.delta ** 2, 0.25)
        self.assertAlmostEqual(model.constants.sigma0, math.sqrt(2))
        self.assertAlmostEqual(model.constants.sigma_sup, math.sqrt(2))
        self.assertEqual(model.constants.p, 1)
        self.assertTrue(model.additive_noise)

    def test_pure_ou(self):
        model = builtin_model("mean_field_ou", {"a": 1, "c": 0, "s": math.sqrt(2)})
        self.assertEqual(model.constants.K0, -2)
        self.assertEqual(model.constants.delta, 0)
        self.assertEqual(
            eval_drift(model, 1.0, EmpiricalMeasure.dirac(7.0)).tolist(), [-1.0]
        )

    def test_granular_media(self):
        model = builtin_model(
            "granular_media_1d", {"θ1": 0.25, "θ2": 1, "c": 0.3, "σ": 1}
        )
        self.assertEqual(model.params["theta1"], 0.25)
        self.assertAlmostEqual(model.constants.delta, math.sqrt(2) * 0.3)
        self.assertTrue(model.constants.has_local_dissipativity)
        self.assertAlmostEqual(
            float(eval_drift(model, 0.0, EmpiricalMeasure.dirac(2.0))[0]), 0.6
        )

    def test_invalid_params(self):
        for name, params in [
            ("granular_media_1d", {"theta1": 0, "theta2": 1, "c": 0, "s": 1}),
            ("granular_media_1d", {"theta2": 1, "c": 0, "s": 1}),
            ("mean_field_ou", {"a": "one", "c": 0, "s": 1}),
            ("mean_field_ou", {"a": 1, "c": 0, "s": 1, "d": 1.5}),
            ("curie_weiss", {"beta": -1, "J": 0}),
            ("custom", {"drift": None}),
            ("no_such_model", {}),
        ]:
            with self.subTest(name=name, params=params):
                self.assertRaises(ModelError, builtin_model, name, params)

    def test_missing_key(self):
        with self.assertRaises(ModelError) as cm:
            builtin_model("mean_field_ou", {"a": 1, "c": 0})
        self.assertEqual(cm.exception.details["key"], "s")

    def test_register(self):
        def factory(params):
            return builtin_model("mean_field_ou", {"a": params["rate"], "c": 0, "s": 1})

        register_model("test_registered_ou", factory)
        self.assertIn("test_registered_ou", available_models())
        model = builtin_model("test_registered_ou", {"rate": 3})
        self.assertEqual(model.constants.K0, -6)

        self.assertRaises(ModelError, register_model, "test_registered_ou", factory)
        self.assertRaises(ModelError, register_model, "mean_field_ou", factory)


class TestEvaluation(unittest.TestCase):
    def test_drift(self):
        ou = builtin_model("mean_field_ou", {"a": 1, "c": 0.5, "s": math.sqrt(2)})
        self.assertAlmostEqual(float(eval_drift(ou, 0, EmpiricalMeasure.dirac(2.0))[0]), 1.0)

        well = builtin_model("granular_media_1d", {"theta1": 0.25, "theta2": 1, "c": 0, "s": 1})
        anything = EmpiricalMeasure([-3.0, 5.0])
        self.assertAlmostEqual(float(eval_drift(well, 1.0, anything)[0]), 0.0)
        self.assertAlmostEqual(float(eval_drift(well, 2.0, anything)[0]), -3.0)

    def test_diffusion(self):
        one = builtin_model("mean_field_ou", {"a": 1, "c": 0, "s": math.sqrt(2)})
        np.testing.assert_allclose(
            eval_diffusion(one, 0.3, EmpiricalMeasure.dirac(0.0)), [[math.sqrt(2)]]
        )
        two = builtin_model("mean_field_ou", {"a": 1, "c": 0, "s": math.sqrt(2), "d": 2})
        np.testing.assert_allclose(
            eval_diffusion(two, [1.0, 2.0], EmpiricalMeasure.dirac([0.0, 0.0])),
            math.sqrt(2) * np.eye(2),
        )

    def test_custom(self):
        model = builtin_model(
            "custom",
            {
                "dim": 2,
                "drift": lambda x, summary: -x,
                "diffusion": lambda x, summary: 1 + 0.1 * math.tanh(
                    float(np.linalg.norm(summary.mean))
                ),
                "sigma0": 1.0,
                "sigma_sup": 2.0,
            },
        )
        self.assertEqual(model.name, "custom")
        self.assertEqual(model.constants.sigma0, 1.0)
        np.testing.assert_array_equal(
            eval_diffusion(model, [4.0, -1.0], EmpiricalMeasure.dirac([0.0, 0.0])),
            np.eye(2),
        )
        np.testing.assert_array_equal(
            eval_drift(model, [4.0, -1.0], EmpiricalMeasure.dirac([0.0, 0.0])),
            [-4.0, 1.0],
        )

    def test_dimension_mismatch(self):
        model = builtin_model("mean_field_ou", {"a": 1, "c": 0, "s": 1, "d": 2})
        self.assertRaises(ModelError, eval_drift, model, 1.0, EmpiricalMeasure.dirac([0, 0]))
        self.assertRaises(
            ModelError, eval_diffusion, model, [1.0, 0.0], EmpiricalMeasure.dirac(0.0)
        )

    def test_referential_transparency(self):
        model = builtin_model("curie_weiss", {"beta": 1, "J": 1, "d": 2})
        mu = EmpiricalMeasure([[0.5, 1.0], [-1.0, 2.0]])
        first = eval_drift(model, [0.3, -0.7], mu)
        second = eval_drift(model, [0.3, -0.7], mu)
        np.testing.assert_array_equal(first, second)


class TestDissipativity(unittest.TestCase):
    def test_zoo(self):
        for name, params in ZOO:
            with self.subTest(name=name, params=params):
                report = check_dissipativity(builtin_model(name, params), n=400)
                self.assertFalse(report.violated)
                self.assertEqual(report.n_checked, 400)
                self.assertIn("A1", report.checks)

    def test_local_conditions(self):
        model = builtin_model("granular_media_1d", {"theta1": 0.25, "theta2": 1, "c": 0.3, "s": 1})
        report = check_dissipativity(model, n=200)
        self.assertEqual(set(report.checks), {"A1", "A2", "A2'"})

    def test_ou_sharp(self):
        model = builtin_model("mean_field_ou", {"a": 1, "c": 0.5, "s": math.sqrt(2)})
        report = check_dissipativity(model, n=10_000)
        self.assertLessEqual(report.max_violation, 1e-9)

    def test_diagonal(self):
        model = builtin_model("mean_field_ou", {"a": 1, "c": 0.5, "s": math.sqrt(2)})

        def diagonal(rng):
            x = rng.standard_normal(1)
            mu = EmpiricalMeasure(rng.standard_normal(4))
            return x, x, mu, mu

        report = check_dissipativity(model, sampler=diagonal, n=50)
        self.assertLessEqual(report.max_violation, 0.0)

    def test_understated_delta(self):
        model = builtin_model("mean_field_ou", {"a": 1, "c": 0.5, "s": math.sqrt(2)})
        report = check_dissipativity(model.with_constants(delta=0.1), n=2000)
        self.assertTrue(report.violated)
        self.assertGreater(report.max_violation, 0)
        self.assertIsNotNone(report.witness)
        self.assertEqual(report.witness.mu.dim, 1)

    def test_sampler(self):
        sample = gaussian_tuple_sampler(3)
        x, y, mu, nu = sample(np.random.default_rng(0))
        self.assertEqual(x.shape, (3,))
        self.assertEqual(y.shape, (3,))
        self.assertEqual(mu.dim, 3)
        self.assertEqual(nu.dim, 3)


    def test_exact_distances(self):
        model = builtin_model("curie_weiss", {"beta": 2.0, "J": 0.5, "d": 2})
        with unittest.mock.patch(
            "mvlab._measures._entropic_transport_cost",
            side_effect=AssertionError("entropic estimate used"),
        ):
            first = check_dissipativity(model, n=300, seed=4)
        second = check_dissipativity(model, n=300, seed=4)
        self.assertFalse(first.violated)
        self.assertEqual(first.max_violation, second.max_violation)
    def test_invalid_count(self):
        model = builtin_model("mean_field_ou", {"a": 1, "c": 0, "s": 1})
        self.assertRaises(ModelError, check_dissipativity, model, n=0)


class TestEllipticity(unittest.TestCase):
    def test_zoo(self):
        for name, params in ZOO:
            with self.subTest(name=name, params=params):
                model = builtin_model(name, params)
                report = check_ellipticity(model, n=100)
                self.assertTrue(report.sigma0_ok)
                self.assertTrue(report.sigma_sup_ok)
                self.assertGreaterEqual(
                    report.min_singular_value, model.constants.sigma0 - 1e-12
                )

    def test_overstated(self):
        model = builtin_model("mean_field_ou", {"a": 1, "c": 0, "s": 1})
        report = check_ellipticity(model.with_constants(sigma0=1.5, sigma_sup=2.0), n=10)
        self.assertFalse(report.sigma0_ok)
        self.assertTrue(report.sigma_sup_ok)
