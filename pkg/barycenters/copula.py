"""Multivariate measures sharing a common copula.

For such measures W_p^p is the sum of the marginal W_p^p, the optimal map
acts coordinatewise by monotone rearrangement and the barycenter keeps the
copula with marginal barycenters as marginals. All transport arithmetic
therefore delegates to quantile1d; the copula itself is only needed to
generate points.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import linalg, stats

from . import quantile1d
from .core import BarycenterFamily, FiniteSupport, check_step, require_finite
from .exceptions import CopulaMismatch, DimensionMismatch, InvalidMeasure, NotSpd
from .quantile1d import QuantileGrid

logger = logging.getLogger(__name__)

INDEPENDENCE = 'independence'
GAUSSIAN = 'gaussian'


class IndependenceCopula:
    kind = INDEPENDENCE

    def __init__(self, q):
        self.q = int(q)

    @property
    def copula_id(self):
        return INDEPENDENCE

    def sample(self, n, rng):
        return rng.uniform(size=(n, self.q))

    def to_dict(self):
        return {'kind': self.kind, 'params': {'q': self.q}}


class GaussianCopula:
    """u = Phi(z) with z ~ N(0, R) for a correlation matrix R."""
    kind = GAUSSIAN

    def __init__(self, correlation):
        correlation = np.atleast_2d(np.asarray(correlation, dtype=float))
        if correlation.shape[0] != correlation.shape[1]:
            raise InvalidMeasure(f"correlation matrix must be square, got {correlation.shape}")
        if not np.allclose(np.diag(correlation), 1.0) or not np.allclose(correlation, correlation.T):
            raise InvalidMeasure("correlation matrix needs a unit diagonal and symmetry")
        try:
            self._cholesky = linalg.cholesky(correlation, lower=True)
        except linalg.LinAlgError as exc:
            raise NotSpd(f"correlation matrix is not positive definite: {exc}") from exc
        self.correlation = correlation
        self.q = correlation.shape[0]

    @property
    def copula_id(self):
        entries = ','.join(f"{value:.6g}" for value in self.correlation[np.triu_indices(self.q, 1)])
        return f"{GAUSSIAN}({entries})"

    def sample(self, n, rng):
        z = rng.standard_normal((n, self.q)) @ self._cholesky.T
        return stats.norm.cdf(z)

    def to_dict(self):
        return {'kind': self.kind, 'params': {'correlation': self.correlation.tolist()}}


def copula_from_dict(data):
    kind = data.get('kind')
    params = data.get('params') or {}
    if kind == INDEPENDENCE:
        return IndependenceCopula(params.get('q', 1))
    if kind == GAUSSIAN:
        if 'correlation' not in params:
            raise InvalidMeasure("a gaussian copula needs a correlation matrix")
        return GaussianCopula(params['correlation'])
    raise InvalidMeasure(f"unknown copula kind {kind!r}")


@dataclass(frozen=True, eq=False)
class CopulaMeasure:
    copula_id: str
    marginals: Tuple[QuantileGrid, ...]
    copula: Optional[object] = None

    def __post_init__(self):
        marginals = tuple(self.marginals)
        if not marginals:
            raise InvalidMeasure("a copula measure needs at least one marginal")
        quantile1d.check_grids(*marginals)
        if self.copula is not None:
            if self.copula.copula_id != self.copula_id:
                raise CopulaMismatch(f"copula {self.copula.copula_id} does not match tag {self.copula_id}")
            if self.copula.q != len(marginals):
                raise DimensionMismatch(f"copula of dimension {self.copula.q} for {len(marginals)} marginals")
        object.__setattr__(self, 'marginals', marginals)

    @property
    def q(self):
        return len(self.marginals)

    @property
    def m(self):
        return self.marginals[0].m

    def with_marginals(self, marginals):
        return CopulaMeasure(copula_id=self.copula_id, marginals=tuple(marginals), copula=self.copula)

    def __repr__(self):
        return f"CopulaMeasure({self.copula_id}, q={self.q}, m={self.m})"


class CopulaFamily(BarycenterFamily):
    name = 'copula'

    def check_members(self, *measures):
        for m in measures:
            if not isinstance(m, CopulaMeasure):
                raise CopulaMismatch(f"expected a CopulaMeasure, got {type(m).__name__}")
        tags = {m.copula_id for m in measures}
        if len(tags) > 1:
            raise CopulaMismatch(f"measures carry different copulas: {sorted(tags)}")
        dims = {m.q for m in measures}
        if len(dims) > 1:
            raise DimensionMismatch(f"measures have different dimensions: {sorted(dims)}")
        quantile1d.check_grids(*(g for m in measures for g in m.marginals))

    def weighted_step(self, mu, measures, weights, gamma):
        self.check_members(mu, *measures)
        check_step(gamma)
        marginals = [
            quantile1d.FAMILY.weighted_step(mu.marginals[i], [m.marginals[i] for m in measures], weights, gamma)
            for i in range(mu.q)
        ]
        return mu.with_marginals(marginals)

    def w2(self, mu, nu):
        self.check_members(mu, nu)
        return float(np.sqrt(sum(quantile1d.w2(a, b) ** 2 for a, b in zip(mu.marginals, nu.marginals))))

    def tangent(self, mu, m):
        self.check_members(mu, m)
        return np.concatenate([quantile1d.FAMILY.tangent(a, b) for a, b in zip(mu.marginals, m.marginals)])

    def exact_barycenter(self, population):
        require_finite(population, 'exact_barycenter')
        self.check_members(*population.measures)
        first = population.measures[0]
        marginals = [quantile1d.exact_barycenter(marginal_population(population, i)) for i in range(first.q)]
        return first.with_marginals(marginals)


FAMILY = CopulaFamily()


def marginal_population(population, index):
    """The population of i-th marginals, with the same weights."""
    require_finite(population, 'marginal_population')
    return FiniteSupport(population.weights, [m.marginals[index] for m in population.measures])


def sgd_step(mu, batch, gamma):
    return FAMILY.sgd_step(mu, batch, gamma)


def w2(a, b):
    return FAMILY.w2(a, b)


def exact_barycenter(population):
    return FAMILY.exact_barycenter(population)


def wasserstein_p(a, b, p):
    """(sum_i W_p^p(a_i, b_i))^(1/p), the common-copula W_p."""
    FAMILY.check_members(a, b)
    total = sum(np.mean(np.abs(x.values - y.values) ** p) for x, y in zip(a.marginals, b.marginals))
    return float(total ** (1.0 / p))


def population_cost(candidate, population, p):
    """sum_k w_k W_p^p(m_k, candidate)."""
    require_finite(population, 'population_cost')
    return float(sum(w * wasserstein_p(m, candidate, p) ** p for w, m in zip(population.weights, population.measures)))


def sample_points(measure, copula, n, rng):
    """n points of ``measure``: copula uniforms pushed through the marginal quantiles."""
    if copula.copula_id != measure.copula_id:
        raise CopulaMismatch(f"sampler {copula.copula_id} does not match measure copula {measure.copula_id}")
    if copula.q != measure.q:
        raise DimensionMismatch(f"sampler of dimension {copula.q} for a {measure.q}-dimensional measure")
    uniforms = copula.sample(n, rng)
    columns = [
        np.interp(uniforms[:, i], grid.levels, grid.values)
        for i, grid in enumerate(measure.marginals)
    ]
    return np.column_stack(columns)
