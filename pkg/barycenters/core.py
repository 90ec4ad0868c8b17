"""Shared domain types: step schedules, populations, the family contract and run records."""
import abc
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

import numpy as np
from django.conf import settings

from .exceptions import (
    EmptyBatch,
    InvalidConfig,
    InvalidPopulation,
    RejectedSchedule,
    RequiresFiniteSupport,
)

logger = logging.getLogger(__name__)

CONVERGENT = 'convergent'
ANY = 'any'


def defaults(key, value=None):
    """Return ``value`` unless it is None, else the configured default for ``key``."""
    if value is not None:
        return value
    return settings.BARYCENTERS[key]


def make_rng(seed):
    """The only way randomness enters the package: an explicit seeded generator."""
    return np.random.default_rng(seed)


# --- Step schedules -------------------------------------------------------

class StepSchedule(abc.ABC):
    kind = None

    @abc.abstractmethod
    def gamma(self, k: int) -> float:
        ...

    @abc.abstractmethod
    def to_dict(self) -> dict:
        ...

    def gammas(self, n: int) -> np.ndarray:
        return np.array([self.gamma(k) for k in range(n)], dtype=float)

    def describe(self) -> str:
        params = ', '.join(f"{key}={value}" for key, value in self.to_dict().items() if key != 'kind')
        return f"{self.kind}({params})"


@dataclass(frozen=True)
class PowerDecay(StepSchedule):
    """gamma_k = scale / max(k + offset, 1) ** exponent.

    The max(., 1) guard keeps offset 0 usable: the first two steps both equal
    ``scale``. With scale 1, offset 1, exponent 1 this is 1/(k+1).
    """
    scale: float = 1.0
    offset: float = 1.0
    exponent: float = 1.0
    kind = 'power'

    def gamma(self, k):
        return self.scale / max(k + self.offset, 1.0) ** self.exponent

    def to_dict(self):
        return {'kind': self.kind, 'scale': self.scale, 'offset': self.offset, 'exponent': self.exponent}


@dataclass(frozen=True)
class Constant(StepSchedule):
    value: float = 0.1
    kind = 'constant'

    def gamma(self, k):
        return self.value

    def to_dict(self):
        return {'kind': self.kind, 'gamma': self.value}


def schedule_from_dict(data: dict) -> StepSchedule:
    kind = data.get('kind', PowerDecay.kind)
    if kind == PowerDecay.kind:
        return PowerDecay(
            scale=float(data.get('scale', 1.0)),
            offset=float(data.get('offset', 1.0)),
            exponent=float(data.get('exponent', 1.0)),
        )
    if kind == Constant.kind:
        return Constant(value=float(data.get('gamma', data.get('value', 0.1))))
    raise RejectedSchedule(f"unknown schedule kind {kind!r}")


def validate_schedule(schedule: StepSchedule, mode: str = CONVERGENT) -> StepSchedule:
    """Check that every step lies in (0, 1] and, in convergent mode, that
    sum(gamma_k^2) < inf and sum(gamma_k) = inf.

    The decision is parametric: only the supported schedule kinds are
    recognised, and for power decay the p-series criterion decides.
    """
    if mode not in (CONVERGENT, ANY):
        raise RejectedSchedule(f"unknown validation mode {mode!r}")

    if isinstance(schedule, Constant):
        if not 0.0 < schedule.value <= 1.0:
            raise RejectedSchedule(f"constant step {schedule.value} outside (0, 1]")
        if mode == CONVERGENT:
            raise RejectedSchedule("a constant step has a divergent sum of squared steps")
        return schedule

    if isinstance(schedule, PowerDecay):
        if not schedule.scale > 0.0:
            raise RejectedSchedule(f"scale must be positive, got {schedule.scale}")
        if schedule.offset < 0.0:
            raise RejectedSchedule(f"offset must be nonnegative, got {schedule.offset}")
        if schedule.exponent < 0.0:
            raise RejectedSchedule(f"exponent {schedule.exponent} makes steps grow without bound")
        # Steps are nonincreasing in k, so the first one is the largest.
        if schedule.gamma(0) > 1.0:
            raise RejectedSchedule(f"first step {schedule.gamma(0)} exceeds 1")
        if mode == CONVERGENT:
            if schedule.exponent <= 0.5:
                raise RejectedSchedule(
                    f"exponent {schedule.exponent} <= 1/2: sum of squared steps diverges"
                )
            if schedule.exponent > 1.0:
                raise RejectedSchedule(f"exponent {schedule.exponent} > 1: sum of steps converges")
        return schedule

    raise RejectedSchedule(f"unsupported schedule type {type(schedule).__name__}")


def check_step(gamma):
    if not (0.0 <= gamma <= 1.0) or math.isnan(gamma):
        raise InvalidConfig(f"step {gamma} outside [0, 1]")


# --- Populations ----------------------------------------------------------

class PopulationModel(abc.ABC):
    is_finite = False

    @abc.abstractmethod
    def sample(self, size: int, rng: np.random.Generator) -> list:
        ...


class FiniteSupport(PopulationModel):
    """Pi = sum_i weight_i * delta_{measure_i}."""
    is_finite = True

    def __init__(self, weights: Sequence[float], measures: Sequence[Any], tolerance=None):
        weights = np.asarray(weights, dtype=float)
        tolerance = defaults('WEIGHT_TOLERANCE', tolerance)
        if weights.ndim != 1 or len(weights) == 0:
            raise InvalidPopulation("a finite population needs at least one weighted atom")
        if len(weights) != len(measures):
            raise InvalidPopulation(f"{len(weights)} weights for {len(measures)} measures")
        if np.any(~np.isfinite(weights)) or np.any(weights <= 0.0):
            raise InvalidPopulation("population weights must be strictly positive")
        if abs(weights.sum() - 1.0) > tolerance:
            raise InvalidPopulation(f"population weights sum to {weights.sum()!r}, expected 1")
        self.weights = weights
        self.weights.setflags(write=False)
        self.measures = tuple(measures)

    @classmethod
    def uniform(cls, measures):
        n = len(measures)
        return cls([1.0 / n] * n, measures, tolerance=1e-9)

    def __len__(self):
        return len(self.measures)

    def draw_indices(self, size, rng):
        if size < 1:
            raise EmptyBatch()
        if len(self.measures) == 1:
            return np.zeros(size, dtype=int)
        return rng.choice(len(self.measures), size=size, p=self.weights)

    def sample(self, size, rng):
        return [self.measures[i] for i in self.draw_indices(size, rng)]


class Generative(PopulationModel):
    """A population given by a seeded sampler ``sampler(rng) -> measure``."""

    def __init__(self, sampler: Callable[[np.random.Generator], Any], description: str = '', params=None):
        self.sampler = sampler
        self.description = description
        self.params = dict(params or {})

    def sample(self, size, rng):
        if size < 1:
            raise EmptyBatch()
        return [self.sampler(rng) for _ in range(size)]


def sample_batch(population: PopulationModel, size: int, rng: np.random.Generator) -> list:
    """Draw ``size`` i.i.d. measures from the population."""
    return population.sample(size, rng)


def require_finite(population, operation):
    if not population.is_finite:
        raise RequiresFiniteSupport(operation)
    return population


# --- The family contract --------------------------------------------------

class BarycenterFamily(abc.ABC):
    """A parametric family of measures with explicit optimal transport maps.

    Concrete families implement the geometry (``weighted_step``, ``w2``,
    ``tangent``, ``exact_barycenter``); the functionals F, F' and the Karcher
    residual are derived here from tangents.

    ``tangent(mu, m)`` returns the displacement T_mu^m - I in coordinates
    where the L2(mu) inner product is the Euclidean dot product, so that
    ``tangent(mu, m) @ tangent(mu, m) == w2(mu, m) ** 2``.
    """
    name = None

    @abc.abstractmethod
    def check_members(self, *measures):
        """Raise a mismatch error unless the measures can be combined."""

    @abc.abstractmethod
    def weighted_step(self, mu, measures, weights, gamma):
        """[(1 - gamma) I + gamma * sum_i w_i T_mu^{m_i}](mu)."""

    @abc.abstractmethod
    def w2(self, mu, nu) -> float:
        ...

    @abc.abstractmethod
    def tangent(self, mu, m) -> np.ndarray:
        ...

    @abc.abstractmethod
    def exact_barycenter(self, population):
        ...

    def tangents(self, mu, measures):
        return np.array([self.tangent(mu, m) for m in measures])

    def sgd_step(self, mu, batch, gamma):
        if len(batch) == 0:
            raise EmptyBatch()
        check_step(gamma)
        weights = np.full(len(batch), 1.0 / len(batch))
        return self.weighted_step(mu, batch, weights, gamma)

    def gradient_step(self, mu, population, gamma):
        """G_gamma(mu); gamma = 1 is the fixed-point map G."""
        require_finite(population, 'gradient_step')
        check_step(gamma)
        return self.weighted_step(mu, population.measures, population.weights, gamma)

    def mean_displacement(self, mu, population):
        """-F'(mu) in tangent coordinates, exact for finite populations."""
        require_finite(population, 'mean_displacement')
        return population.weights @ self.tangents(mu, population.measures)

    def functional_F(self, mu, population) -> float:
        require_finite(population, 'functional_F')
        tangents = self.tangents(mu, population.measures)
        return 0.5 * float(population.weights @ np.einsum('ij,ij->i', tangents, tangents))

    def grad_norm_sq(self, mu, population) -> float:
        gradient = self.mean_displacement(mu, population)
        return float(gradient @ gradient)

    def karcher_residual(self, mu, population) -> float:
        return self.grad_norm_sq(mu, population)

    def functional_and_gradient(self, mu, population):
        """(F, ||F'||^2) from one tangent evaluation per atom."""
        require_finite(population, 'functional_and_gradient')
        tangents = self.tangents(mu, population.measures)
        gradient = population.weights @ tangents
        value = 0.5 * float(population.weights @ np.einsum('ij,ij->i', tangents, tangents))
        return value, float(gradient @ gradient)


# --- Run records ----------------------------------------------------------

@dataclass
class RunRecord:
    """Trajectory of one solver run.

    Row k of the scalar series describes iterate mu_k together with the step
    size and batch size applied to it; the last row carries the values the
    schedule would have used next.
    """
    family: str
    seed: Optional[int]
    schedule: str
    method: str = 'sgd'
    steps: list = field(default_factory=list)
    gammas: list = field(default_factory=list)
    F: list = field(default_factory=list)
    grad_norm_sq: list = field(default_factory=list)
    w2_ref: list = field(default_factory=list)
    batch_sizes: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    stop_reason: str = 'max_steps'
    wall_time: float = 0.0
    final: Any = None
    _started: float = field(default_factory=time.perf_counter, repr=False)

    SCALAR_COLUMNS = ('k', 'gamma', 'F', 'grad_norm_sq', 'w2_ref', 'batch_size')

    def append(self, k, gamma, value, grad, w2, batch_size):
        self.steps.append(int(k))
        self.gammas.append(float(gamma))
        self.F.append(float(value))
        self.grad_norm_sq.append(float(grad))
        self.w2_ref.append(float(w2))
        self.batch_sizes.append(int(batch_size))

    def snapshot(self, k, measure):
        self.snapshots.append((int(k), measure))

    def finish(self, final, stop_reason):
        self.final = final
        self.stop_reason = stop_reason
        self.wall_time = time.perf_counter() - self._started

    @property
    def executed_steps(self):
        return len(self.steps) - 1

    def rows(self):
        for values in zip(self.steps, self.gammas, self.F, self.grad_norm_sq, self.w2_ref, self.batch_sizes):
            yield dict(zip(self.SCALAR_COLUMNS, values))

    def last(self, column):
        series = {'F': self.F, 'grad_norm_sq': self.grad_norm_sq, 'w2_ref': self.w2_ref}[column]
        return series[-1] if series else math.nan
