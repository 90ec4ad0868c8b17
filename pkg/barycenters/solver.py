"""SGD / batch SGD driver over any BarycenterFamily, deterministic gradient
descent, and the Monte Carlo estimators used to check the descent and
variance-reduction properties of the iteration.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Any, NamedTuple, Optional, Sequence, Union

import numpy as np

from .core import (
    CONVERGENT,
    RunRecord,
    StepSchedule,
    check_step,
    defaults,
    make_rng,
    require_finite,
    sample_batch,
    validate_schedule,
)
from .exceptions import InvalidConfig

logger = logging.getLogger(__name__)

MAX_STEPS = 'max_steps'
GRAD_NORM_BELOW = 'grad_norm_below'
W2_TO_REFERENCE_BELOW = 'w2_to_reference_below'
STOP_RULES = (MAX_STEPS, GRAD_NORM_BELOW, W2_TO_REFERENCE_BELOW)

# Upper bound on floats held at once by the chunked Monte Carlo loops.
CHUNK_FLOATS = 2_000_000


@dataclass(frozen=True)
class SolverConfig:
    schedule: StepSchedule
    batch_size: Union[int, Sequence[int]] = 1
    max_steps: int = 1000
    seed: int = 0
    snapshot_stride: Optional[int] = None
    reference: Any = None
    stop_rule: str = MAX_STEPS
    stop_threshold: float = 0.0
    schedule_mode: str = CONVERGENT
    monitor_samples: int = 0

    def batch_size_at(self, k):
        """S_k; a list shorter than the run repeats its last entry."""
        if isinstance(self.batch_size, (int, np.integer)):
            return int(self.batch_size)
        sizes = list(self.batch_size)
        return int(sizes[min(k, len(sizes) - 1)])

    @property
    def stride(self):
        return defaults('SNAPSHOT_STRIDE', self.snapshot_stride)

    def validate(self, population=None):
        if self.max_steps < 1:
            raise InvalidConfig(f"max_steps must be at least 1, got {self.max_steps}")
        sizes = [self.batch_size] if isinstance(self.batch_size, (int, np.integer)) else list(self.batch_size)
        if not sizes or any(int(s) < 1 for s in sizes):
            raise InvalidConfig(f"batch sizes must be at least 1, got {self.batch_size}")
        if self.stride < 1:
            raise InvalidConfig(f"snapshot stride must be at least 1, got {self.stride}")
        validate_schedule(self.schedule, self.schedule_mode)
        if self.stop_rule not in STOP_RULES:
            raise InvalidConfig(f"unknown stop rule {self.stop_rule!r}; expected one of {STOP_RULES}")
        if self.stop_rule != MAX_STEPS and not self.stop_threshold > 0.0:
            raise InvalidConfig(f"stop rule {self.stop_rule} needs a positive threshold")
        if self.stop_rule == W2_TO_REFERENCE_BELOW and self.reference is None:
            raise InvalidConfig("stopping on the distance to the reference needs a reference barycenter")
        if (
            self.stop_rule == GRAD_NORM_BELOW
            and population is not None
            and not population.is_finite
            and self.monitor_samples < 2
        ):
            raise InvalidConfig("stopping on the gradient norm of a generative population needs monitor_samples >= 2")
        return self


def _monitor(family, mu, population, rng, monitor_samples):
    if population.is_finite:
        return family.functional_and_gradient(mu, population)
    if monitor_samples >= 2:
        estimate = _estimate(family, population, mu, monitor_samples, rng)
        return estimate.F, estimate.grad_norm_sq
    return math.nan, math.nan


def _stop_reason(cfg, grad, distance):
    if cfg.stop_rule == GRAD_NORM_BELOW and grad < cfg.stop_threshold:
        return GRAD_NORM_BELOW
    if cfg.stop_rule == W2_TO_REFERENCE_BELOW and distance < cfg.stop_threshold:
        return W2_TO_REFERENCE_BELOW
    return None


def run(family, population, mu0, cfg: SolverConfig) -> RunRecord:
    """mu_{k+1} = [(1 - g_k) I + g_k / S_k sum_i T_{mu_k}^{m_k^i}](mu_k), m_k^i iid from the population.

    The sampling stream is ``default_rng(cfg.seed)``; monitoring estimates for
    generative populations draw from an independent child stream, so the
    trajectory does not depend on whether it is monitored.
    """
    cfg.validate(population)
    family.check_members(mu0)
    if population.is_finite:
        family.check_members(mu0, *population.measures)
    if cfg.reference is not None:
        family.check_members(mu0, cfg.reference)

    rng = make_rng(cfg.seed)
    monitor_rng = make_rng([cfg.seed, 1])
    record = RunRecord(family=family.name, seed=cfg.seed, schedule=cfg.schedule.describe())
    logger.info(f"Starting {family.name} SGD run: {record.schedule}, batch {cfg.batch_size}, "
                f"{cfg.max_steps} steps, seed {cfg.seed}")

    mu, reason = mu0, None
    for k in range(cfg.max_steps + 1):
        value, grad = _monitor(family, mu, population, monitor_rng, cfg.monitor_samples)
        distance = family.w2(mu, cfg.reference) if cfg.reference is not None else math.nan
        gamma, size = cfg.schedule.gamma(k), cfg.batch_size_at(k)
        record.append(k, gamma, value, grad, distance, size)
        if k % cfg.stride == 0:
            record.snapshot(k, mu)
            logger.debug(f"step {k}: F={value:.6g} grad_norm_sq={grad:.6g} w2_ref={distance:.6g}")
        reason = _stop_reason(cfg, grad, distance)
        if reason is not None or k == cfg.max_steps:
            break
        mu = family.sgd_step(mu, sample_batch(population, size, rng), gamma)

    if record.snapshots[-1][0] != record.steps[-1]:
        record.snapshot(record.steps[-1], mu)
    record.finish(mu, reason or MAX_STEPS)
    logger.info(f"Finished after {record.executed_steps} steps ({record.stop_reason}) in "
                f"{record.wall_time:.2f}s: F={record.last('F'):.6g}, w2_ref={record.last('w2_ref'):.6g}")
    return record


def run_seeds(family, population, mu0, cfg: SolverConfig, seeds, max_workers=None):
    """Independent runs differing only in their seed; each owns its generator."""
    configs = [replace(cfg, seed=int(seed)) for seed in seeds]
    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        return list(executor.map(lambda c: run(family, population, mu0, c), configs))


def gradient_descent(family, population, mu0, gamma=1.0, max_steps=None, tol=None, reference=None) -> RunRecord:
    """mu_{n+1} = G_gamma(mu_n) on a finite population; gamma = 1 is the fixed-point iteration.

    Stops when ||F'(mu_n)||^2 < tol (default: the configured fixed-point
    tolerance times the mean second-moment scale F(mu_0) + 1).
    """
    require_finite(population, 'gradient_descent')
    check_step(gamma)
    max_steps = defaults('FIXED_POINT_MAX_ITER', max_steps)
    method = 'fixed_point' if gamma == 1.0 else 'gradient_descent'
    record = RunRecord(family=family.name, seed=None, schedule=f"constant(gamma={gamma})", method=method)
    family.check_members(mu0, *population.measures)

    mu, reason = mu0, None
    for k in range(max_steps + 1):
        value, grad = family.functional_and_gradient(mu, population)
        if tol is None:
            tol = defaults('FIXED_POINT_TOL') * (value + 1.0)
        distance = family.w2(mu, reference) if reference is not None else math.nan
        record.append(k, gamma, value, grad, distance, len(population))
        record.snapshot(k, mu)
        if grad < tol:
            reason = GRAD_NORM_BELOW
            break
        if k == max_steps:
            break
        mu = family.gradient_step(mu, population, gamma)
    record.finish(mu, reason or MAX_STEPS)
    logger.info(f"{method} finished after {record.executed_steps} iterations ({record.stop_reason})")
    return record


# --- Monte Carlo estimators -------------------------------------------------

class TangentSampler:
    """Draws tangents T_mu^m - I for m from the population.

    For finite populations the atom tangents are computed once and draws
    only pick indices.
    """

    def __init__(self, family, population, mu):
        self.family = family
        self.population = population
        self.mu = mu
        self.atoms = family.tangents(mu, population.measures) if population.is_finite else None

    @property
    def dimension(self):
        if self.atoms is not None:
            return self.atoms.shape[1]
        return None

    def draw(self, shape, rng):
        """Tangents of shape ``shape + (d,)``."""
        count = int(np.prod(shape))
        if self.atoms is not None:
            indices = self.population.draw_indices(count, rng)
            return self.atoms[indices].reshape(*shape, -1)
        measures = sample_batch(self.population, count, rng)
        return self.family.tangents(self.mu, measures).reshape(*shape, -1)


def _chunks(total, per_item):
    size = max(1, CHUNK_FLOATS // max(per_item, 1))
    start = 0
    while start < total:
        yield min(size, total - start)
        start += size


class MonteCarloEstimate(NamedTuple):
    F: float
    F_se: float
    grad_norm_sq: float
    grad_norm_sq_se: float
    samples: int


def _mean_and_se(values):
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return float(values.mean()), math.inf
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size))


def _estimate(family, population, mu, n_mc, rng):
    sampler = TangentSampler(family, population, mu)
    pairs = n_mc // 2
    halves, products = [], []
    per_item = 2 * (sampler.dimension or 1)
    for size in _chunks(pairs, per_item):
        tangents = sampler.draw((size, 2), rng)
        halves.append(0.5 * np.einsum('ijk,ijk->ij', tangents, tangents).ravel())
        products.append(np.einsum('ik,ik->i', tangents[:, 0], tangents[:, 1]))
    F, F_se = _mean_and_se(np.concatenate(halves))
    grad, grad_se = _mean_and_se(np.concatenate(products))
    return MonteCarloEstimate(F, F_se, grad, grad_se, 2 * pairs)


def estimate_F_and_gradnorm(family, population, mu, n_mc, seed) -> MonteCarloEstimate:
    """Monte Carlo estimates of F(mu) and ||F'(mu)||^2 with standard errors.

    F is the sample mean of W2^2(mu, m) / 2. The squared gradient norm is
    estimated without bias by averaging <t_a, t_b> over independent pairs of
    tangents, since E<t_a, t_b> = ||E t||^2.
    """
    if n_mc < 2:
        raise InvalidConfig(f"n_mc must be at least 2, got {n_mc}")
    return _estimate(family, population, mu, n_mc, make_rng(seed))


class VarianceEstimate(NamedTuple):
    value: float
    se: float
    batch_size: int
    samples: int


def _batch_means(sampler, batch_size, n_mc, rng):
    per_item = batch_size * (sampler.dimension or 1)
    for size in _chunks(n_mc, per_item):
        yield sampler.draw((size, batch_size), rng).mean(axis=1)


def integrated_variance(family, population, mu, batch_size, n_mc, seed) -> VarianceEstimate:
    """Integrated variance of the batch gradient estimator -(1/S) sum_i (T_mu^{m_i} - I).

    Two passes over the same seeded stream: the first finds the mean
    estimator, the second averages squared deviations from it.
    """
    if batch_size < 1 or n_mc < 2:
        raise InvalidConfig(f"need batch_size >= 1 and n_mc >= 2, got {batch_size}, {n_mc}")
    sampler = TangentSampler(family, population, mu)
    total = None
    for means in _batch_means(sampler, batch_size, n_mc, make_rng(seed)):
        chunk_sum = means.sum(axis=0)
        total = chunk_sum if total is None else total + chunk_sum
    center = total / n_mc
    deviations = np.concatenate([
        np.einsum('ij,ij->i', means - center, means - center)
        for means in _batch_means(sampler, batch_size, n_mc, make_rng(seed))
    ])
    value = float(deviations.sum() / (n_mc - 1))
    se = float(deviations.std(ddof=1) / math.sqrt(n_mc))
    return VarianceEstimate(value, se, batch_size, n_mc)


class DescentReport(NamedTuple):
    lhs: float
    lhs_se: float
    rhs: float
    passed: bool
    F: float
    grad_norm_sq: float


def verify_descent_inequality(family, population, mu, gamma, n_mc, seed, batch_size=1, n_se=None) -> DescentReport:
    """Check E[F(mu_{k+1}) - F(mu_k) | mu_k] <= gamma^2 F(mu_k) - gamma ||F'(mu_k)||^2.

    The conditional expectation is estimated by redrawing the step from
    ``mu`` ``n_mc`` times. The pass rule allows ``n_se`` standard errors of
    the estimate plus floating-point slack.
    """
    require_finite(population, 'verify_descent_inequality')
    if n_mc < 100:
        raise InvalidConfig(f"n_mc must be at least 100, got {n_mc}")
    check_step(gamma)
    n_se = defaults('PASS_STANDARD_ERRORS', n_se)
    rng = make_rng(seed)

    value, grad = family.functional_and_gradient(mu, population)
    # the next iterate depends only on the multiset of drawn atoms
    indices = np.sort(population.draw_indices(n_mc * batch_size, rng).reshape(n_mc, batch_size), axis=1)
    outcomes = {}
    changes = np.empty(n_mc)
    for row, key in enumerate(map(tuple, indices)):
        if key not in outcomes:
            step = family.sgd_step(mu, [population.measures[i] for i in key], gamma)
            outcomes[key] = family.functional_F(step, population) - value
        changes[row] = outcomes[key]

    lhs, lhs_se = _mean_and_se(changes)
    rhs = gamma ** 2 * value - gamma * grad
    slack = 1e-12 * max(1.0, abs(value))
    passed = lhs <= rhs + n_se * lhs_se + slack
    if not passed:
        logger.warning(f"Descent inequality failed: {lhs:.6g} > {rhs:.6g} + {n_se} * {lhs_se:.3g}")
    return DescentReport(lhs, lhs_se, rhs, bool(passed), value, grad)
