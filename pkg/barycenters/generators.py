"""Seeded synthetic populations.

Every builder takes an explicit ``numpy.random.Generator`` and returns a
``GeneratedPopulation``; the same seed always reproduces the same members.
Generative models additionally return their analytic barycenter when one
is known.
"""
import logging
from typing import Any, NamedTuple, Optional

import numpy as np
from scipy import stats

from . import copula, quantile1d, scatterlocation, spherical
from .core import FiniteSupport, Generative, defaults
from .exceptions import InvalidConfig, InvalidSpec

logger = logging.getLogger(__name__)

# Families whose densities are log-concave for the drawn parameters.
LOG_CONCAVE = ('normal', 'logistic', 'gumbel', 'laplace', 'exponential', 'chi2', 'gamma', 'weibull', 'uniform')
SYMMETRIC_UNIMODAL = ('normal', 'logistic', 'laplace', 't', 'uniform')


class GeneratedPopulation(NamedTuple):
    family: str
    weights: np.ndarray
    measures: list
    description: str

    def population(self):
        return FiniteSupport(self.weights, self.measures)


def _weights(n, rng, uniform=True):
    if uniform:
        return np.full(n, 1.0 / n)
    weights = rng.dirichlet(np.ones(n))
    return weights / weights.sum()


def _count(n):
    if int(n) < 1:
        raise InvalidConfig(f"a population needs at least one member, got n={n}")
    return int(n)


def gaussian_1d(means, stds, weights=None, m=None):
    """Explicit univariate Gaussian members, e.g. means [1, 3], stds [1, 1], weights [.3, .7]."""
    if len(means) != len(stds):
        raise InvalidSpec(f"{len(means)} means for {len(stds)} standard deviations")
    weights = np.asarray(weights if weights is not None else np.full(len(means), 1.0 / len(means)), dtype=float)
    members = [quantile1d.from_gaussian(mu, sd, m) for mu, sd in zip(means, stds)]
    pairs = ', '.join(f"N({mu:g},{sd:g}^2)" for mu, sd in zip(means, stds))
    return GeneratedPopulation('univariate', weights, members, f"gaussian-1d: {pairs}")


def random_gaussian_1d(rng, n=10, mean_low=-2.0, mean_high=2.0, std_low=0.5, std_high=2.0, m=None, uniform=True):
    n = _count(n)
    means = rng.uniform(mean_low, mean_high, size=n)
    stds = rng.uniform(std_low, std_high, size=n)
    built = gaussian_1d(means, stds, _weights(n, rng, uniform), m)
    return built._replace(description=f"{n} random univariate Gaussians")


def _random_distribution(name, rng):
    """Parameters for one draw of a named family; shapes >= 1 keep log-concavity."""
    loc = rng.uniform(-2.0, 2.0)
    scale = rng.uniform(0.5, 2.0)
    if name in ('normal', 'logistic', 'gumbel', 'laplace', 'exponential'):
        return {'loc': loc, 'scale': scale}
    if name == 'uniform':
        return {'loc': loc - scale, 'scale': 2.0 * scale}
    if name == 'chi2':
        return {'df': rng.uniform(2.0, 8.0), 'loc': loc, 'scale': scale}
    if name == 'gamma':
        return {'a': rng.uniform(1.0, 5.0), 'loc': loc, 'scale': scale}
    if name == 'weibull':
        return {'c': rng.uniform(1.0, 4.0), 'loc': loc, 'scale': scale}
    if name == 't':
        return {'df': rng.uniform(2.0, 10.0), 'loc': loc, 'scale': scale}
    raise InvalidSpec(f"no parameter sampler for distribution {name!r}")


def log_concave_set(rng, n=10, m=None, families=LOG_CONCAVE, uniform=False):
    n = _count(n)
    names = rng.choice(families, size=n)
    members = [quantile1d.from_distribution(str(name), m, **_random_distribution(str(name), rng)) for name in names]
    return GeneratedPopulation('univariate', _weights(n, rng, uniform), members,
                               f"{n} log-concave members from {sorted(set(map(str, names)))}")


def symmetric_unimodal_set(rng, n=10, m=None, uniform=False):
    n = _count(n)
    members = []
    for name in rng.choice(SYMMETRIC_UNIMODAL, size=n):
        params = _random_distribution(str(name), rng)
        members.append(quantile1d.from_distribution(str(name), m, **params))
    return GeneratedPopulation('univariate', _weights(n, rng, uniform), members,
                               f"{n} symmetric unimodal members")


def symmetric_grid(rng, center=0.0, m=None):
    """A symmetric, generally multimodal grid: random positive half-increments mirrored about ``center``."""
    m = defaults('GRID_SIZE', m)
    half = np.cumsum(rng.exponential(1.0, size=(m + 1) // 2))
    if m % 2:
        half = half - half[0]
        values = np.concatenate([-half[:0:-1], half])
    else:
        values = np.concatenate([-half[::-1], half])
    return quantile1d.QuantileGrid(center + values / max(half[-1], 1.0))


def symmetric_set(rng, n=10, m=None, uniform=False):
    n = _count(n)
    members = [symmetric_grid(rng, rng.uniform(-2.0, 2.0), m) for _ in range(n)]
    return GeneratedPopulation('univariate', _weights(n, rng, uniform), members, f"{n} symmetric members")


def random_spd(rng, q, condition=100.0, scale=1.0):
    """SPD matrix with eigenvalues log-uniform in [scale, scale * condition] and a random basis."""
    if condition < 1.0:
        raise InvalidConfig(f"condition number bound must be at least 1, got {condition}")
    eigenvalues = scale * np.exp(rng.uniform(0.0, np.log(condition), size=q))
    if q == 1:
        return np.array([[eigenvalues[0]]])
    basis = stats.special_ortho_group.rvs(q, random_state=rng)
    return scatterlocation.symmetrize((basis * eigenvalues) @ basis.T)


def spd_ensemble(rng, n=20, q=3, condition=100.0, uniform=True, mean_scale=1.0):
    n = _count(n)
    members = [
        scatterlocation.ScatterLocationMeasure(b=mean_scale * rng.standard_normal(q), sigma=random_spd(rng, q, condition))
        for _ in range(n)
    ]
    return GeneratedPopulation('scatter-location', _weights(n, rng, uniform), members,
                               f"{n} scatter-location members in dimension {q}, condition <= {condition:g}")


def power_profiles(rng, n=10, q=2, m=None, uniform=True):
    """Radial maps alpha(r) = c r^a of the standard Gaussian generator on R^q."""
    n = _count(n)
    generator = spherical.gaussian_generator(q, m)
    members = []
    for _ in range(n):
        c, a = rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0)
        members.append(generator.member(lambda r, c=c, a=a: c * r ** a))
    return GeneratedPopulation('spherical', _weights(n, rng, uniform), members,
                               f"{n} power-law radial profiles of {generator.generator_id}")


def copula_measures(rng, n=10, q=2, correlation=None, m=None, uniform=True):
    """Common-copula members with log-concave marginals; Gaussian copula when ``correlation`` is given."""
    n = _count(n)
    sampler = copula.GaussianCopula(correlation) if correlation is not None else copula.IndependenceCopula(q)
    members = []
    for _ in range(n):
        marginals = log_concave_set(rng, n=sampler.q, m=m).measures
        members.append(copula.CopulaMeasure(sampler.copula_id, tuple(marginals), sampler))
    return GeneratedPopulation('copula', _weights(n, rng, uniform), members,
                               f"{n} members with {sampler.copula_id} copula in dimension {sampler.q}")


GENERATORS = {
    'gaussian-1d': lambda rng, **params: gaussian_1d(**params),
    'random-gaussian-1d': random_gaussian_1d,
    'log-concave': log_concave_set,
    'symmetric': symmetric_set,
    'symmetric-unimodal': symmetric_unimodal_set,
    'spd-ensemble': spd_ensemble,
    'power-profiles': power_profiles,
    'copula': copula_measures,
}


def generate(model, rng, **params) -> GeneratedPopulation:
    try:
        builder = GENERATORS[model]
    except KeyError:
        raise InvalidSpec(f"unknown generator {model!r}; known: {sorted(GENERATORS)}") from None
    try:
        return builder(rng, **params)
    except TypeError as e:
        raise InvalidSpec(f"bad parameters for generator {model!r}: {e}") from e


# --- Generative population models -------------------------------------------

class GenerativeModel(NamedTuple):
    family: str
    population: Generative
    oracle: Optional[Any]


def gaussian_1d_model(mean_low=-1.0, mean_high=1.0, std_low=0.5, std_high=1.5, m=None):
    """Means and standard deviations drawn uniformly and independently.

    The barycenter is N((mean_low + mean_high)/2, ((std_low + std_high)/2)^2):
    in 1D the barycenter quantile is the population-averaged quantile.
    """
    if not (mean_low <= mean_high and 0.0 < std_low <= std_high):
        raise InvalidSpec("gaussian-1d model needs mean_low <= mean_high and 0 < std_low <= std_high")
    m = defaults('GRID_SIZE', m)

    def sampler(rng):
        return quantile1d.from_gaussian(rng.uniform(mean_low, mean_high), rng.uniform(std_low, std_high), m)

    params = {'mean_low': mean_low, 'mean_high': mean_high, 'std_low': std_low, 'std_high': std_high, 'm': m}
    oracle = quantile1d.from_gaussian(0.5 * (mean_low + mean_high), 0.5 * (std_low + std_high), m)
    return GenerativeModel('univariate', Generative(sampler, 'gaussian-1d', params), oracle)


def spd_model(q=2, condition=10.0, mean_scale=1.0):
    def sampler(rng):
        return scatterlocation.ScatterLocationMeasure(
            b=mean_scale * rng.standard_normal(q), sigma=random_spd(rng, q, condition),
        )

    params = {'q': q, 'condition': condition, 'mean_scale': mean_scale}
    return GenerativeModel('scatter-location', Generative(sampler, 'spd', params), None)


GENERATIVE_MODELS = {
    'gaussian-1d': gaussian_1d_model,
    'spd': spd_model,
}


def generative_model(name, **params) -> GenerativeModel:
    try:
        builder = GENERATIVE_MODELS[name]
    except KeyError:
        raise InvalidSpec(f"unknown generative model {name!r}; known: {sorted(GENERATIVE_MODELS)}") from None
    try:
        return builder(**params)
    except TypeError as e:
        raise InvalidSpec(f"bad parameters for generative model {name!r}: {e}") from e
