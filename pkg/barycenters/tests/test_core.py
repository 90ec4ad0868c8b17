import math

import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings, strategies as st
from scipy import stats

from barycenters import quantile1d
from barycenters.core import (
    ANY,
    CONVERGENT,
    Constant,
    FiniteSupport,
    Generative,
    PowerDecay,
    RunRecord,
    check_step,
    make_rng,
    require_finite,
    sample_batch,
    schedule_from_dict,
    validate_schedule,
)
from barycenters.exceptions import (
    EmptyBatch,
    InvalidConfig,
    InvalidPopulation,
    RejectedSchedule,
    RequiresFiniteSupport,
)

grids = st.lists(
    st.floats(min_value=-50, max_value=50, allow_nan=False), min_size=16, max_size=16,
).map(lambda xs: quantile1d.QuantileGrid(sorted(xs)))


class StepScheduleTests(SimpleTestCase):
    def test_harmonic_schedule(self):
        schedule = PowerDecay()
        self.assertEqual(schedule.gamma(0), 1.0)
        self.assertAlmostEqual(schedule.gamma(9), 0.1)
        np.testing.assert_allclose(schedule.gammas(4), [1.0, 0.5, 1 / 3, 0.25])

    def test_zero_offset_is_guarded(self):
        schedule = PowerDecay(scale=0.5, offset=0.0, exponent=0.75)
        self.assertEqual(schedule.gamma(0), 0.5)
        self.assertEqual(schedule.gamma(1), 0.5)
        self.assertLess(schedule.gamma(2), 0.5)

    def test_convergent_power_schedules_accepted(self):
        for exponent in (0.51, 0.75, 1.0):
            validate_schedule(PowerDecay(exponent=exponent), CONVERGENT)

    def test_rejected_power_schedules(self):
        for schedule in (
            PowerDecay(exponent=0.5),
            PowerDecay(exponent=1.2),
            PowerDecay(scale=2.0),
            PowerDecay(scale=0.0),
            PowerDecay(offset=-1.0),
        ):
            with self.subTest(schedule=schedule), self.assertRaises(RejectedSchedule):
                validate_schedule(schedule, CONVERGENT)

    def test_slow_decay_allowed_outside_convergent_mode(self):
        validate_schedule(PowerDecay(exponent=0.3), ANY)
        with self.assertRaises(RejectedSchedule):
            validate_schedule(PowerDecay(exponent=0.3), CONVERGENT)

    def test_partial_sums_match_the_convergence_decision(self):
        n = 10 ** 5
        for exponent in (0.6, 0.75, 1.0):
            gammas = PowerDecay(exponent=exponent).gammas(n)
            if exponent == 1.0:
                lower = math.log(n + 1)
            else:
                lower = ((n + 1) ** (1.0 - exponent) - 1.0) / (1.0 - exponent)
            with self.subTest(exponent=exponent):
                validate_schedule(PowerDecay(exponent=exponent), CONVERGENT)
                self.assertGreaterEqual(gammas.sum(), lower)
                self.assertLessEqual(np.sum(gammas ** 2), 1.0 + 1.0 / (2.0 * exponent - 1.0))
        square_summable_fails = PowerDecay(exponent=0.5)
        self.assertGreaterEqual(np.sum(square_summable_fails.gammas(n) ** 2), math.log(n + 1))
        with self.assertRaises(RejectedSchedule):
            validate_schedule(square_summable_fails, CONVERGENT)
        summable = PowerDecay(exponent=1.5)
        self.assertLessEqual(summable.gammas(n).sum(), 1.0 + 1.0 / 0.5)
        with self.assertRaises(RejectedSchedule):
            validate_schedule(summable, CONVERGENT)

    def test_constant_schedule(self):
        validate_schedule(Constant(0.2), ANY)
        with self.assertRaises(RejectedSchedule):
            validate_schedule(Constant(0.2), CONVERGENT)
        with self.assertRaises(RejectedSchedule):
            validate_schedule(Constant(1.5), ANY)
        with self.assertRaises(RejectedSchedule):
            validate_schedule(Constant(0.0), ANY)

    def test_schedule_from_dict(self):
        self.assertEqual(schedule_from_dict({'kind': 'power', 'offset': 2}), PowerDecay(offset=2.0))
        self.assertEqual(schedule_from_dict({'kind': 'constant', 'gamma': 0.3}), Constant(0.3))
        self.assertEqual(schedule_from_dict(PowerDecay(exponent=0.6).to_dict()), PowerDecay(exponent=0.6))
        with self.assertRaises(RejectedSchedule):
            schedule_from_dict({'kind': 'cosine'})

    def test_check_step(self):
        check_step(0.0)
        check_step(1.0)
        for gamma in (-0.1, 1.01, math.nan):
            with self.assertRaises(InvalidConfig):
                check_step(gamma)


class PopulationTests(SimpleTestCase):
    def setUp(self):
        self.a = quantile1d.from_gaussian(0.0, 1.0, 8)
        self.b = quantile1d.from_gaussian(2.0, 1.0, 8)

    def test_weights_validated(self):
        for weights in ([0.5, 0.6], [1.5, -0.5], [1.0, 0.0], [1.0]):
            with self.subTest(weights=weights), self.assertRaises(InvalidPopulation):
                FiniteSupport(weights, [self.a, self.b])

    def test_weights_are_read_only(self):
        population = FiniteSupport([0.25, 0.75], [self.a, self.b])
        with self.assertRaises(ValueError):
            population.weights[0] = 0.5

    def test_draws_follow_weights(self):
        population = FiniteSupport([0.3, 0.7], [self.a, self.b])
        indices = population.draw_indices(20000, make_rng(0))
        self.assertAlmostEqual(indices.mean(), 0.7, delta=0.02)

    def test_draw_frequencies_pass_chi_square(self):
        weights = np.array([0.1, 0.15, 0.2, 0.25, 0.3])
        population = FiniteSupport(weights, [self.a] * 5)
        n = 10 ** 5
        counts = np.bincount(population.draw_indices(n, make_rng(7)), minlength=5)
        self.assertGreater(stats.chisquare(counts, weights * n).pvalue, 1e-3)

    def test_draws_are_reproducible(self):
        population = FiniteSupport.uniform([self.a, self.b, self.a])
        first = population.draw_indices(50, make_rng(3))
        np.testing.assert_array_equal(first, population.draw_indices(50, make_rng(3)))

    def test_single_atom(self):
        population = FiniteSupport([1.0], [self.a])
        self.assertEqual(sample_batch(population, 3, make_rng(0)), [self.a, self.a, self.a])

    def test_empty_batch(self):
        population = FiniteSupport([1.0], [self.a])
        with self.assertRaises(EmptyBatch):
            sample_batch(population, 0, make_rng(0))

    def test_generative_population(self):
        population = Generative(lambda rng: quantile1d.from_gaussian(rng.normal(), 1.0, 8), 'normal means')
        batch = sample_batch(population, 4, make_rng(1))
        self.assertEqual(len(batch), 4)
        with self.assertRaises(RequiresFiniteSupport):
            require_finite(population, 'functional_F')
        with self.assertRaises(RequiresFiniteSupport):
            quantile1d.FAMILY.functional_F(self.a, population)


class FamilyContractTests(SimpleTestCase):
    @settings(max_examples=50, deadline=None)
    @given(grids, grids)
    def test_tangent_norm_is_squared_distance(self, mu, m):
        t = quantile1d.FAMILY.tangent(mu, m)
        self.assertAlmostEqual(float(t @ t), quantile1d.w2(mu, m) ** 2, delta=1e-9 * max(1.0, float(t @ t)))

    def test_point_population_functionals(self):
        mu = quantile1d.from_gaussian(0.0, 1.0, 32)
        m = quantile1d.from_gaussian(1.0, 2.0, 32)
        population = FiniteSupport([1.0], [m])
        value, grad = quantile1d.FAMILY.functional_and_gradient(mu, population)
        self.assertAlmostEqual(value, 0.5 * quantile1d.w2(mu, m) ** 2)
        self.assertAlmostEqual(grad, 2.0 * value)
        self.assertAlmostEqual(quantile1d.FAMILY.karcher_residual(mu, population), grad)

    def test_gradient_step_with_unit_step_is_barycenter(self):
        population = FiniteSupport([0.3, 0.7], [quantile1d.from_gaussian(1.0, 1.0, 16),
                                                 quantile1d.from_gaussian(3.0, 1.0, 16)])
        mu = quantile1d.from_gaussian(0.0, 2.0, 16)
        step = quantile1d.FAMILY.gradient_step(mu, population, 1.0)
        np.testing.assert_allclose(step.values, quantile1d.exact_barycenter(population).values, atol=1e-12)


class RunRecordTests(SimpleTestCase):
    def test_rows_and_last(self):
        record = RunRecord(family='univariate', seed=1, schedule='power()')
        record.append(0, 1.0, 2.0, 4.0, math.nan, 1)
        record.append(1, 0.5, 1.0, 0.5, math.nan, 1)
        record.finish(final=None, stop_reason='max_steps')
        row = list(record.rows())[1]
        self.assertTrue(math.isnan(row.pop('w2_ref')))
        self.assertEqual(row, {'k': 1, 'gamma': 0.5, 'F': 1.0, 'grad_norm_sq': 0.5, 'batch_size': 1})
        self.assertEqual(record.executed_steps, 1)
        self.assertEqual(record.last('F'), 1.0)
        self.assertTrue(math.isnan(record.last('w2_ref')))
        self.assertGreaterEqual(record.wall_time, 0.0)
