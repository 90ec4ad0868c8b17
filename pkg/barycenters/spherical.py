"""Spherically equivalent families L(alpha(|x|) / |x| * x) of a generator x.

A member is stored through its radial map alpha sampled at the norm
quantiles of the generator, i.e. alpha_j = alpha(Q_|x|(p_j)) on the midpoint
levels. In these coordinates the optimal map between two members is
alpha_2 o alpha_1^-1 along rays, and SGD, W2 and the barycenter reduce to
univariate quantile arithmetic.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import quantile1d
from .core import BarycenterFamily, check_step, defaults, require_finite
from .exceptions import GeneratorMismatch, InvalidMeasure
from .quantile1d import QuantileGrid, quantile_levels

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class RadialProfile(QuantileGrid):
    """Nondecreasing, nonnegative radial map in generator norm-quantile coordinates."""

    def __post_init__(self):
        super().__post_init__()
        if self.values[0] < 0.0:
            raise InvalidMeasure("radial profile values must be nonnegative")

    def __repr__(self):
        return f"RadialProfile(m={self.m}, median={float(np.median(self.values)):.4g})"


@dataclass(frozen=True)
class SphericalGenerator:
    """The generator: an opaque tag plus the quantile grid of its norm."""
    generator_id: str
    norm_quantiles: QuantileGrid

    def identity_profile(self):
        return RadialProfile(self.norm_quantiles.values)

    def profile(self, radial_map):
        """Profile of L(alpha(|x|)/|x| x) for a vectorized nondecreasing ``radial_map``."""
        return RadialProfile(np.asarray(radial_map(self.norm_quantiles.values), dtype=float))

    def member(self, radial_map):
        return SphericalMeasure(self.generator_id, self.profile(radial_map))


def gaussian_generator(q, m=None):
    """Standard normal generator on R^q: |x| follows a chi distribution with q degrees of freedom."""
    levels = quantile_levels(defaults('GRID_SIZE', m))
    return SphericalGenerator(f"gaussian-{q}d", QuantileGrid(stats.chi(q).ppf(levels)))


@dataclass(frozen=True, eq=False)
class SphericalMeasure:
    generator_id: str
    profile: RadialProfile

    @property
    def m(self):
        return self.profile.m

    def __repr__(self):
        return f"SphericalMeasure({self.generator_id}, {self.profile!r})"


@dataclass(frozen=True, eq=False)
class RadialTransport:
    """T(x) = alpha_target(alpha_source^-1(|x|)) / |x| * x between two members."""
    source: RadialProfile
    target: RadialProfile

    def __post_init__(self):
        quantile1d.check_grids(self.source, self.target)

    def profile(self):
        """The map in norm-quantile coordinates: its values at the source's levels."""
        return RadialProfile(self.target.values)

    def then(self, other):
        if not np.array_equal(other.source.values, self.target.values):
            raise InvalidMeasure("transports do not chain: the second must start where the first ends")
        return RadialTransport(self.source, other.target)

    def radius(self, r):
        """alpha_target(alpha_source^-1(r)) by monotone interpolation between the grids."""
        return np.interp(r, self.source.values, self.target.values)

    def __call__(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        norms = np.linalg.norm(points, axis=1)
        factor = np.divide(self.radius(norms), norms, out=np.zeros_like(norms), where=norms > 0.0)
        return points * factor[:, None]


def transport_profile(alpha1: RadialProfile, alpha2: RadialProfile) -> RadialProfile:
    return RadialTransport(alpha1, alpha2).profile()


def convex_combination(transports, weights):
    """sum_i w_i T_i for transports sharing a source; again a radial transport."""
    source = transports[0].source
    for t in transports:
        if not np.array_equal(t.source.values, source.values):
            raise InvalidMeasure("convex combination needs transports from the same source")
    target = np.asarray(weights, dtype=float) @ np.stack([t.target.values for t in transports])
    return RadialTransport(source, RadialProfile(target))


class SphericalFamily(BarycenterFamily):
    name = 'spherical'

    def check_members(self, *measures):
        for m in measures:
            if not isinstance(m, SphericalMeasure):
                raise GeneratorMismatch(f"expected a SphericalMeasure, got {type(m).__name__}")
        tags = {m.generator_id for m in measures}
        if len(tags) > 1:
            raise GeneratorMismatch(f"measures come from different generators: {sorted(tags)}")
        quantile1d.check_grids(*(m.profile for m in measures))

    def optimal_map(self, m1, m2):
        self.check_members(m1, m2)
        return RadialTransport(m1.profile, m2.profile)

    def weighted_step(self, mu, measures, weights, gamma):
        self.check_members(mu, *measures)
        check_step(gamma)
        grid = quantile1d.FAMILY.weighted_step(mu.profile, [m.profile for m in measures], weights, gamma)
        return SphericalMeasure(mu.generator_id, RadialProfile(grid.values))

    def w2(self, mu, nu):
        self.check_members(mu, nu)
        return float(np.sqrt(np.mean((mu.profile.values - nu.profile.values) ** 2)))

    def tangent(self, mu, m):
        self.check_members(mu, m)
        return (m.profile.values - mu.profile.values) / np.sqrt(mu.m)

    def exact_barycenter(self, population):
        require_finite(population, 'exact_barycenter')
        self.check_members(*population.measures)
        values = population.weights @ np.stack([m.profile.values for m in population.measures])
        return SphericalMeasure(population.measures[0].generator_id, RadialProfile(values))


FAMILY = SphericalFamily()


def w2(a, b):
    return FAMILY.w2(a, b)


def sgd_step(mu, batch, gamma):
    return FAMILY.sgd_step(mu, batch, gamma)


def exact_barycenter(population):
    return FAMILY.exact_barycenter(population)
