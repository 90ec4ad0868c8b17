"""Scatter-location families: measures L(A x + b) for a fixed zero-mean,
identity-covariance generator x, with A symmetric positive definite.

Only (b, Sigma = A^2) enters the optimal maps, so the generator is never
materialised. The Gaussian family is the standard example.
"""
import functools
import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .core import BarycenterFamily, check_step, defaults, require_finite
from .exceptions import CrossCheckFailed, DimensionMismatch, InvalidMeasure, MaxIterExceeded, NotSpd

logger = logging.getLogger(__name__)

SYMMETRY_TOLERANCE = 1e-12


def symmetrize(matrix):
    return 0.5 * (matrix + matrix.T)


def spd_power(matrix, power, floor=None, strict=True):
    """matrix ** power through a symmetric eigendecomposition.

    Eigenvalues below ``floor * largest eigenvalue`` raise NotSpd when
    ``strict``; otherwise they are clamped to that floor.
    """
    floor = defaults('SPD_FLOOR', floor)
    eigenvalues, eigenvectors = linalg.eigh(symmetrize(matrix))
    largest = eigenvalues[-1]
    if not largest > 0.0:
        raise NotSpd(f"matrix has no positive eigenvalue (largest {largest:.3e})")
    threshold = floor * largest
    if eigenvalues[0] < threshold:
        if strict:
            raise NotSpd(f"smallest eigenvalue {eigenvalues[0]:.3e} below floor {threshold:.3e}")
        logger.warning(f"Clamping eigenvalue {eigenvalues[0]:.3e} to floor {threshold:.3e}")
        eigenvalues = np.maximum(eigenvalues, threshold)
    return symmetrize((eigenvectors * eigenvalues ** power) @ eigenvectors.T)


def spd_sqrt(matrix, floor=None):
    """The unique SPD square root."""
    return spd_power(matrix, 0.5, floor=floor)


def check_spd(matrix, floor=None):
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] == 0:
        raise InvalidMeasure(f"covariance must be a nonempty square matrix, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise InvalidMeasure("covariance entries must be finite")
    norm = np.abs(matrix).max()
    if np.abs(matrix - matrix.T).max() > SYMMETRY_TOLERANCE * max(norm, 1.0):
        raise NotSpd("covariance is not symmetric")
    eigenvalues = linalg.eigvalsh(matrix)
    floor = defaults('SPD_FLOOR', floor)
    if not eigenvalues[-1] > 0.0 or eigenvalues[0] < floor * eigenvalues[-1]:
        raise NotSpd(f"covariance eigenvalues {eigenvalues[0]:.3e}..{eigenvalues[-1]:.3e} violate the SPD floor")
    return symmetrize(matrix)


@dataclass(frozen=True, eq=False)
class ScatterLocationMeasure:
    b: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        b = np.array(self.b, dtype=float).ravel()
        sigma = check_spd(self.sigma)
        if sigma.shape[0] != b.size:
            raise DimensionMismatch(f"mean has dimension {b.size}, covariance {sigma.shape}")
        if not np.all(np.isfinite(b)):
            raise InvalidMeasure("mean entries must be finite")
        b.setflags(write=False)
        sigma.setflags(write=False)
        object.__setattr__(self, 'b', b)
        object.__setattr__(self, 'sigma', sigma)

    @property
    def q(self):
        return self.b.size

    @functools.cached_property
    def scale(self):
        """A = Sigma^(1/2)."""
        return spd_sqrt(self.sigma)

    @functools.cached_property
    def inverse_scale(self):
        return spd_power(self.sigma, -0.5)

    def __repr__(self):
        return f"ScatterLocationMeasure(q={self.q}, b={np.round(self.b, 4).tolist()})"


def from_scale(scale, b):
    """Member L(A x + b) of the family, given A."""
    scale = check_spd(scale)
    return ScatterLocationMeasure(b=b, sigma=symmetrize(scale @ scale))


def from_gaussian_1d(mean, std):
    return ScatterLocationMeasure(b=[mean], sigma=[[std ** 2]])


@dataclass(frozen=True, eq=False)
class AffineMap:
    """T(x) = linear (x - source) + target."""
    linear: np.ndarray
    source: np.ndarray
    target: np.ndarray

    @property
    def shift(self):
        return self.target - self.linear @ self.source

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return (x - self.source) @ self.linear.T + self.target


def transport_matrix(mu, m):
    """A = A1^-1 (A1 Sigma2 A1)^(1/2) A1^-1 with A1 = Sigma1^(1/2)."""
    middle = spd_power(mu.scale @ m.sigma @ mu.scale, 0.5, strict=False)
    return symmetrize(mu.inverse_scale @ middle @ mu.inverse_scale)


class ScatterLocationFamily(BarycenterFamily):
    name = 'scatter-location'

    def check_members(self, *measures):
        for m in measures:
            if not isinstance(m, ScatterLocationMeasure):
                raise DimensionMismatch(f"expected a ScatterLocationMeasure, got {type(m).__name__}")
        dims = {m.q for m in measures}
        if len(dims) > 1:
            raise DimensionMismatch(f"measures have different dimensions: {sorted(dims)}")

    def optimal_map(self, m1, m2):
        self.check_members(m1, m2)
        return AffineMap(linear=transport_matrix(m1, m2), source=m1.b, target=m2.b)

    def weighted_step(self, mu, measures, weights, gamma):
        self.check_members(mu, *measures)
        check_step(gamma)
        weights = np.asarray(weights, dtype=float)
        b = (1.0 - gamma) * mu.b + gamma * (weights @ np.stack([m.b for m in measures]))
        inner = (1.0 - gamma) * mu.sigma
        for weight, m in zip(weights, measures):
            inner = inner + gamma * weight * spd_power(mu.scale @ m.sigma @ mu.scale, 0.5, strict=False)
        inner = symmetrize(inner)
        sigma = symmetrize(mu.inverse_scale @ inner @ inner @ mu.inverse_scale)
        return ScatterLocationMeasure(b=b, sigma=sigma)

    def geodesic(self, m1, m2, t):
        """((1 - t) I + t T_{m1}^{m2})(m1)."""
        return self.weighted_step(m1, [m2], [1.0], t)

    def w2(self, mu, nu):
        self.check_members(mu, nu)
        linear = transport_matrix(mu, nu) - np.eye(mu.q)
        mean_gap = float(np.sum((mu.b - nu.b) ** 2))
        value = max(mean_gap + float(np.trace(linear @ mu.sigma @ linear)), 0.0)
        bures = bures_w2_sq(mu, nu)
        if abs(value - bures) > defaults('W2_CROSS_CHECK_TOLERANCE') * max(1.0, value):
            message = f"W2 map cost {value:.12g} and Bures form {bures:.12g} disagree"
            logger.error(message)
            raise CrossCheckFailed(message)
        return float(np.sqrt(value))

    def tangent(self, mu, m):
        self.check_members(mu, m)
        linear = transport_matrix(mu, m) - np.eye(mu.q)
        return np.concatenate([(linear @ mu.scale).ravel(), m.b - mu.b])

    def exact_barycenter(self, population):
        return fixed_point_barycenter(population)


FAMILY = ScatterLocationFamily()


def bures_w2_sq(m1, m2):
    """||b1 - b2||^2 + tr(S1 + S2 - 2 (S1^(1/2) S2 S1^(1/2))^(1/2))."""
    cross = spd_power(m1.scale @ m2.sigma @ m1.scale, 0.5, strict=False)
    value = float(np.sum((m1.b - m2.b) ** 2) + np.trace(m1.sigma + m2.sigma - 2.0 * cross))
    return max(value, 0.0)


def optimal_map(m1, m2) -> AffineMap:
    return FAMILY.optimal_map(m1, m2)


def w2(m1, m2) -> float:
    return FAMILY.w2(m1, m2)


def sgd_step(mu, batch, gamma):
    return FAMILY.sgd_step(mu, batch, gamma)


def geodesic(m1, m2, t):
    return FAMILY.geodesic(m1, m2, t)


def karcher_residual(mu, population) -> float:
    """trace((M - I) Sigma (M - I)) + ||b - sum_i w_i b_i||^2 with M = sum_i w_i A_mu^{m_i}."""
    return FAMILY.karcher_residual(mu, population)


def fixed_point_barycenter(population, tol=None, max_iter=None, initial=None):
    """Iterate Sigma <- M Sigma M, M = sum_i w_i A_Sigma^{m_i}, until the Karcher
    residual drops below ``tol`` (default: configured factor times the trace
    of the weighted mean covariance). The mean is set directly to sum_i w_i b_i.

    Raises MaxIterExceeded carrying the best iterate when ``max_iter``
    iterations do not reach the tolerance.
    """
    require_finite(population, 'fixed_point_barycenter')
    FAMILY.check_members(*population.measures)
    weights = population.weights
    b = weights @ np.stack([m.b for m in population.measures])
    mean_sigma = symmetrize(np.einsum('i,ijk->jk', weights, np.stack([m.sigma for m in population.measures])))
    if tol is None:
        tol = defaults('FIXED_POINT_TOL') * float(np.trace(mean_sigma))
    max_iter = defaults('FIXED_POINT_MAX_ITER', max_iter)

    current = ScatterLocationMeasure(b=b, sigma=initial.sigma if initial is not None else mean_sigma)
    best, best_residual = current, np.inf
    for iteration in range(max_iter + 1):
        averaged = symmetrize(sum(w * transport_matrix(current, m) for w, m in zip(weights, population.measures)))
        gap = averaged - np.eye(current.q)
        residual = float(np.trace(gap @ current.sigma @ gap))
        if residual < best_residual:
            best, best_residual = current, residual
        if residual < tol:
            logger.debug(f"Fixed point reached after {iteration} iterations (residual {residual:.3e})")
            return current
        current = ScatterLocationMeasure(b=b, sigma=symmetrize(averaged @ current.sigma @ averaged))
    logger.warning(f"Fixed-point iteration stopped at residual {best_residual:.3e} > {tol:.3e}")
    raise MaxIterExceeded(best, best_residual, max_iter)
