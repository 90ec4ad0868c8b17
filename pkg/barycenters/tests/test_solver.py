import math

import numpy as np
from django.test import SimpleTestCase

from barycenters import experiments, generators, quantile1d, scatterlocation, solver
from barycenters.core import Constant, FiniteSupport, PowerDecay, make_rng
from barycenters.exceptions import InvalidConfig, RejectedSchedule, RequiresFiniteSupport
from barycenters.solver import SolverConfig


def worked_example(m=1000):
    return FiniteSupport([0.3, 0.7], [quantile1d.from_gaussian(1.0, 1.0, m), quantile1d.from_gaussian(3.0, 1.0, m)])


def random_univariate(rng, m=50):
    n = int(rng.integers(2, 6))
    population = generators.random_gaussian_1d(rng, n=n, m=m, uniform=False).population()
    mu = quantile1d.from_gaussian(rng.uniform(-3.0, 3.0), rng.uniform(0.3, 3.0), m)
    return population, mu


class SolverConfigTests(SimpleTestCase):
    def test_invalid_configs(self):
        population = worked_example(10)
        for kwargs in (
            {'max_steps': 0},
            {'batch_size': 0},
            {'batch_size': [4, 0]},
            {'snapshot_stride': 0},
            {'stop_rule': 'patience'},
            {'stop_rule': solver.GRAD_NORM_BELOW},
            {'stop_rule': solver.W2_TO_REFERENCE_BELOW, 'stop_threshold': 0.1},
        ):
            with self.subTest(kwargs=kwargs), self.assertRaises(InvalidConfig):
                SolverConfig(schedule=PowerDecay(), **kwargs).validate(population)

    def test_schedule_validated(self):
        with self.assertRaises(RejectedSchedule):
            SolverConfig(schedule=Constant(0.1)).validate()
        SolverConfig(schedule=Constant(0.1), schedule_mode='any').validate()

    def test_generative_gradient_stop_needs_monitoring(self):
        model = generators.gaussian_1d_model(m=20)
        config = SolverConfig(schedule=PowerDecay(), stop_rule=solver.GRAD_NORM_BELOW, stop_threshold=1e-3)
        with self.assertRaises(InvalidConfig):
            config.validate(model.population)
        SolverConfig(schedule=PowerDecay(), stop_rule=solver.GRAD_NORM_BELOW, stop_threshold=1e-3,
                     monitor_samples=10).validate(model.population)

    def test_batch_size_list(self):
        config = SolverConfig(schedule=PowerDecay(), batch_size=[1, 2, 4])
        self.assertEqual([config.batch_size_at(k) for k in range(5)], [1, 2, 4, 4, 4])


class RunTests(SimpleTestCase):
    def test_point_population_stops_after_one_step(self):
        m = quantile1d.from_gaussian(2.0, 1.5, 40)
        population = FiniteSupport([1.0], [m])
        config = SolverConfig(schedule=PowerDecay(), max_steps=100, stop_rule=solver.GRAD_NORM_BELOW,
                              stop_threshold=1e-12)
        record = solver.run(quantile1d.FAMILY, population, quantile1d.from_gaussian(0.0, 1.0, 40), config)
        self.assertEqual(record.executed_steps, 1)
        self.assertEqual(record.stop_reason, solver.GRAD_NORM_BELOW)
        np.testing.assert_array_equal(record.final.values, m.values)
        self.assertEqual(record.F[-1], 0.0)

    def test_worked_example_converges(self):
        population = worked_example()
        reference = quantile1d.exact_barycenter(population)
        config = SolverConfig(schedule=PowerDecay(), max_steps=10 ** 4, seed=0, reference=reference)
        record = solver.run(quantile1d.FAMILY, population, population.measures[0], config)
        self.assertEqual(record.executed_steps, 10 ** 4)
        self.assertLessEqual(record.last('w2_ref'), 0.05)
        optimum = quantile1d.functional_F(reference, population)
        gaps = np.minimum.accumulate(np.array(record.F) - optimum)
        self.assertLess(gaps[-1], 1e-3 * record.F[0])

    def test_batches_reduce_spread_over_seeds(self):
        population = worked_example(100)
        reference = quantile1d.exact_barycenter(population)
        finals = {}
        for size in (1, 16):
            config = SolverConfig(schedule=PowerDecay(), batch_size=size, max_steps=1000, reference=reference,
                                  snapshot_stride=1000)
            records = solver.run_seeds(quantile1d.FAMILY, population, population.measures[0], config, range(50))
            finals[size] = np.array([r.last('w2_ref') for r in records])
            self.assertTrue(all(r.batch_sizes == [size] * 1001 for r in records))
        self.assertLess(finals[16].var(), finals[1].var())

    def test_iterates_are_running_means_of_samples(self):
        population = FiniteSupport([0.2, 0.5, 0.3], [quantile1d.from_gaussian(mean, std, 30)
                                                      for mean, std in ((0, 1), (2, 0.5), (-1, 2))])
        mu0 = quantile1d.from_gaussian(5.0, 1.0, 30)
        for offset, includes_start in ((1.0, False), (2.0, True)):
            config = SolverConfig(schedule=PowerDecay(offset=offset), max_steps=1000, seed=77, snapshot_stride=1)
            record = solver.run(quantile1d.FAMILY, population, mu0, config)
            rng = make_rng(77)
            total, count = (mu0.values.copy(), 1) if includes_start else (np.zeros(30), 0)
            for k, snapshot in record.snapshots[1:]:
                index = rng.choice(3, size=1, p=population.weights)[0]
                total, count = total + population.measures[index].values, count + 1
                with self.subTest(offset=offset, k=k):
                    np.testing.assert_allclose(snapshot.values, total / count, rtol=0, atol=1e-10)

    def test_runs_are_reproducible(self):
        population = worked_example(50)
        config = SolverConfig(schedule=PowerDecay(exponent=0.75), batch_size=[1, 2, 3], max_steps=200, seed=5,
                              snapshot_stride=20)
        first = solver.run(quantile1d.FAMILY, population, population.measures[1], config)
        second = solver.run(quantile1d.FAMILY, population, population.measures[1], config)
        self.assertEqual(first.F, second.F)
        self.assertEqual(first.grad_norm_sq, second.grad_norm_sq)
        for (k1, a), (k2, b) in zip(first.snapshots, second.snapshots):
            self.assertEqual(k1, k2)
            np.testing.assert_array_equal(a.values, b.values)

    def test_snapshot_scalars_recompute_exactly(self):
        rng = make_rng(6)
        population = generators.spd_ensemble(rng, n=3, q=2, condition=5.0).population()
        reference = scatterlocation.fixed_point_barycenter(population)
        config = SolverConfig(schedule=PowerDecay(), max_steps=60, seed=2, reference=reference, snapshot_stride=7)
        record = solver.run(scatterlocation.FAMILY, population, population.measures[0], config)
        for k, value, grad, distance in experiments.recompute_scalars(record, scatterlocation.FAMILY, population,
                                                                      reference):
            self.assertEqual(value, record.F[k])
            self.assertEqual(grad, record.grad_norm_sq[k])
            self.assertEqual(distance, record.w2_ref[k])
        self.assertEqual(record.snapshots[-1][0], 60)

    def test_reference_stop_rule(self):
        population = worked_example(100)
        reference = quantile1d.exact_barycenter(population)
        config = SolverConfig(schedule=PowerDecay(), max_steps=10 ** 4, seed=1, reference=reference,
                              stop_rule=solver.W2_TO_REFERENCE_BELOW, stop_threshold=0.1)
        record = solver.run(quantile1d.FAMILY, population, population.measures[0], config)
        self.assertEqual(record.stop_reason, solver.W2_TO_REFERENCE_BELOW)
        self.assertLess(record.last('w2_ref'), 0.1)
        self.assertLess(record.executed_steps, 10 ** 4)

    def test_generative_populations_reach_averaged_quantiles(self):
        model = generators.gaussian_1d_model(mean_low=-1.0, mean_high=1.0, std_low=0.5, std_high=1.5, m=50)
        config = SolverConfig(schedule=PowerDecay(), max_steps=1000, reference=model.oracle, snapshot_stride=1000)
        initial = quantile1d.from_gaussian(3.0, 2.0, 50)
        for record in solver.run_seeds(quantile1d.FAMILY, model.population, initial, config, range(50)):
            self.assertLessEqual(record.last('w2_ref'), 0.1)
            self.assertTrue(math.isnan(record.last('F')))

    def test_generative_monitoring(self):
        model = generators.gaussian_1d_model(m=40)
        config = SolverConfig(schedule=PowerDecay(), max_steps=20, reference=model.oracle, monitor_samples=50)
        unmonitored = SolverConfig(schedule=PowerDecay(), max_steps=20, reference=model.oracle)
        initial = quantile1d.from_gaussian(0.0, 1.0, 40)
        monitored = solver.run(quantile1d.FAMILY, model.population, initial, config)
        self.assertTrue(all(math.isfinite(v) for v in monitored.F))
        plain = solver.run(quantile1d.FAMILY, model.population, initial, unmonitored)
        np.testing.assert_array_equal(monitored.final.values, plain.final.values)


class GradientDescentTests(SimpleTestCase):
    def test_univariate_fixed_point_in_one_step(self):
        population = worked_example(200)
        record = solver.gradient_descent(quantile1d.FAMILY, population, quantile1d.from_gaussian(-5.0, 3.0, 200))
        self.assertEqual(record.method, 'fixed_point')
        self.assertEqual(record.executed_steps, 1)
        np.testing.assert_allclose(record.final.values, quantile1d.exact_barycenter(population).values, atol=1e-12)

    def test_damped_descent_on_gaussians(self):
        rng = make_rng(10)
        population = generators.spd_ensemble(rng, n=4, q=3, condition=20.0).population()
        reference = scatterlocation.fixed_point_barycenter(population)
        record = solver.gradient_descent(scatterlocation.FAMILY, population, population.measures[0], gamma=0.5,
                                         max_steps=500, reference=reference)
        self.assertEqual(record.method, 'gradient_descent')
        self.assertEqual(record.stop_reason, solver.GRAD_NORM_BELOW)
        self.assertLess(record.last('w2_ref'), 1e-3)
        self.assertTrue(all(b <= a + 1e-10 for a, b in zip(record.F, record.F[1:])))

    def test_requires_finite_population(self):
        model = generators.gaussian_1d_model(m=10)
        with self.assertRaises(RequiresFiniteSupport):
            solver.gradient_descent(quantile1d.FAMILY, model.population, model.oracle)


class EstimatorTests(SimpleTestCase):
    def test_point_population_estimates(self):
        m = quantile1d.from_gaussian(1.0, 2.0, 40)
        mu = quantile1d.from_gaussian(0.0, 1.0, 40)
        estimate = solver.estimate_F_and_gradnorm(quantile1d.FAMILY, FiniteSupport([1.0], [m]), mu, 100, seed=0)
        self.assertAlmostEqual(estimate.F, 0.5 * quantile1d.w2(mu, m) ** 2)
        self.assertLess(estimate.F_se, 1e-12)
        self.assertAlmostEqual(estimate.grad_norm_sq, quantile1d.w2(mu, m) ** 2)

    def test_estimates_match_exact_functionals(self):
        rng = make_rng(14)
        population, mu = random_univariate(rng)
        value, grad = quantile1d.FAMILY.functional_and_gradient(mu, population)
        estimate = solver.estimate_F_and_gradnorm(quantile1d.FAMILY, population, mu, 10 ** 4, seed=3)
        self.assertLessEqual(abs(estimate.F - value), 4 * estimate.F_se)
        self.assertLessEqual(abs(estimate.grad_norm_sq - grad), 4 * estimate.grad_norm_sq_se)

    def test_gradient_estimate_vanishes_at_barycenter(self):
        population, _ = random_univariate(make_rng(15))
        barycenter = quantile1d.exact_barycenter(population)
        estimate = solver.estimate_F_and_gradnorm(quantile1d.FAMILY, population, barycenter, 10 ** 4, seed=4)
        self.assertLessEqual(abs(estimate.grad_norm_sq), 4 * estimate.grad_norm_sq_se)

    def test_generative_estimate(self):
        model = generators.gaussian_1d_model(m=30)
        estimate = solver.estimate_F_and_gradnorm(quantile1d.FAMILY, model.population, model.oracle, 2000, seed=1)
        self.assertGreater(estimate.F, 0.0)
        self.assertLessEqual(abs(estimate.grad_norm_sq), 4 * estimate.grad_norm_sq_se)

    def test_estimator_sample_sizes(self):
        population = worked_example(10)
        with self.assertRaises(InvalidConfig):
            solver.estimate_F_and_gradnorm(quantile1d.FAMILY, population, population.measures[0], 1, seed=0)
        with self.assertRaises(InvalidConfig):
            solver.verify_descent_inequality(quantile1d.FAMILY, population, population.measures[0], 0.5, 99, seed=0)


class IntegratedVarianceTests(SimpleTestCase):
    def test_point_population_has_no_variance(self):
        m = quantile1d.from_gaussian(1.0, 2.0, 40)
        mu = quantile1d.from_gaussian(0.0, 1.0, 40)
        for size in (1, 4):
            estimate = solver.integrated_variance(quantile1d.FAMILY, FiniteSupport([1.0], [m]), mu, size, 100, seed=0)
            self.assertAlmostEqual(estimate.value, 0.0, places=20)

    def test_variance_law(self):
        population, mu = random_univariate(make_rng(16), m=100)
        value, grad = quantile1d.FAMILY.functional_and_gradient(mu, population)
        predicted = 2.0 * value - grad
        for size in (1, 2, 4, 8, 16):
            estimate = solver.integrated_variance(quantile1d.FAMILY, population, mu, size, 10 ** 5, seed=size)
            with self.subTest(size=size):
                self.assertLessEqual(abs(estimate.value * size - predicted), 4 * estimate.se * size)

    def test_variance_law_for_gaussians(self):
        rng = make_rng(17)
        population = generators.spd_ensemble(rng, n=5, q=2, condition=10.0, uniform=False).population()
        mu = scatterlocation.ScatterLocationMeasure(b=[0.5, -0.5], sigma=np.diag([2.0, 0.5]))
        value, grad = scatterlocation.FAMILY.functional_and_gradient(mu, population)
        for size in (1, 4):
            estimate = solver.integrated_variance(scatterlocation.FAMILY, population, mu, size, 2 * 10 ** 4, seed=1)
            with self.subTest(size=size):
                self.assertLessEqual(abs(estimate.value * size - (2.0 * value - grad)), 4 * estimate.se * size)


class DescentInequalityTests(SimpleTestCase):
    def test_point_population_holds_with_equality(self):
        m = quantile1d.from_gaussian(1.0, 2.0, 40)
        mu = quantile1d.from_gaussian(0.0, 1.0, 40)
        report = solver.verify_descent_inequality(quantile1d.FAMILY, FiniteSupport([1.0], [m]), mu, 1.0, 100, seed=0)
        self.assertTrue(report.passed)
        self.assertAlmostEqual(report.lhs, -report.F)
        self.assertAlmostEqual(report.rhs, -report.F)

    def test_random_univariate_trials(self):
        rng = make_rng(18)
        for trial in range(100):
            population, mu = random_univariate(rng)
            gamma = float(rng.uniform(0.05, 1.0))
            report = solver.verify_descent_inequality(quantile1d.FAMILY, population, mu, gamma, 10 ** 4,
                                                      seed=trial, n_se=4)
            with self.subTest(trial=trial):
                self.assertTrue(report.passed)

    def test_random_gaussian_trials(self):
        rng = make_rng(19)
        for trial in range(100):
            q = int(rng.integers(2, 4))
            population = generators.spd_ensemble(rng, n=int(rng.integers(2, 5)), q=q, condition=20.0,
                                                 uniform=False, mean_scale=0.0).population()
            mu = scatterlocation.ScatterLocationMeasure(b=np.zeros(q), sigma=generators.random_spd(rng, q, 20.0))
            gamma = float(rng.uniform(0.3, 1.0))
            report = solver.verify_descent_inequality(scatterlocation.FAMILY, population, mu, gamma, 10 ** 4,
                                                      seed=trial)
            exact = sum(w * scatterlocation.FAMILY.functional_F(scatterlocation.sgd_step(mu, [m], gamma), population)
                        for w, m in zip(population.weights, population.measures)) - report.F
            with self.subTest(trial=trial, q=q):
                self.assertTrue(report.passed)
                self.assertLessEqual(exact, report.rhs + 1e-12 * max(1.0, report.F))

    def test_small_steps_are_first_order(self):
        population, mu = random_univariate(make_rng(20))
        gamma = 1e-3
        report = solver.verify_descent_inequality(quantile1d.FAMILY, population, mu, gamma, 10 ** 4, seed=1)
        self.assertLessEqual(abs(report.lhs + gamma * report.grad_norm_sq),
                             2 * gamma ** 2 * report.F + 4 * report.lhs_se)

    def test_batch_steps(self):
        population, mu = random_univariate(make_rng(22))
        report = solver.verify_descent_inequality(quantile1d.FAMILY, population, mu, 0.5, 2000, seed=2, batch_size=4)
        self.assertTrue(report.passed)
