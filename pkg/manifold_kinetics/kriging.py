# pylint: disable=line-too-long, missing-module-docstring

from __future__ import annotations

import logging
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import cholesky, qr, solve_triangular
from scipy.spatial.distance import pdist, squareform

from manifold_kinetics.exceptions import InvalidParameterError, SingularSystemError
from manifold_kinetics.interpolation import Interpolant, LocalInterpolant
from manifold_kinetics.point_cloud import ScaledMetric

log = logging.getLogger(__name__)  # get a module-level logger

JITTER = 1e-10
NEAR_SINGULAR = 1e-14  # smallest admissible ratio of squared Cholesky pivots
RANK_TOLERANCE = 1e-10


def _standardize(data: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    mean = data.mean(axis=0)
    spread = data.std(axis=0, ddof=1) if data.shape[0] > 1 else np.ones(data.shape[1])
    return mean, np.where(spread > 0, spread, 1.0)


def regression_basis(points: np.ndarray, order: int) -> np.ndarray:
    """ Polynomial regression matrix: [1], [1, x], or [1, x, x_k x_j (j ≥ k)] for order 0, 1, 2. """
    points = np.atleast_2d(points)
    columns = [np.ones((points.shape[0], 1))]
    if order >= 1:
        columns.append(points)
    if order >= 2:
        columns.extend(points[:, k:k + 1] * points[:, k:] for k in range(points.shape[1]))
    return np.hstack(columns)


def regression_gradient(point: np.ndarray, order: int) -> np.ndarray:
    """ Derivatives of the regression basis at one point, as a dimension × basis-size matrix. """
    dimension = point.size
    blocks = [np.zeros((dimension, 1))]
    if order >= 1:
        blocks.append(np.eye(dimension))
    if order >= 2:
        for k in range(dimension):
            block = np.zeros((dimension, dimension - k))
            for offset, j in enumerate(range(k, dimension)):
                block[k, offset] += point[j]
                block[j, offset] += point[k]
            blocks.append(block)
    return np.hstack(blocks)


class KrigingInterpolant(Interpolant):
    """
    Universal Kriging with a polynomial trend of order 0, 1 or 2 and the Gaussian correlation exp(−θ‖h‖²).
    Nodes and values are standardized (mean, standard deviation) before fitting and θ acts on standardized
    distances. No nugget is used, so the predictor interpolates the nodes unless jitter had to be added.
    """
    scheme = "kriging"

    def __init__(self, nodes: np.ndarray, values: np.ndarray, order: int = 2, theta: float = 1.0,
                 metric: Optional[ScaledMetric] = None):
        # pylint: disable=too-many-locals
        super().__init__(nodes, values, metric)
        if order not in (0, 1, 2):
            raise InvalidParameterError(f"the regression order must be 0, 1 or 2, got {order}")
        if not theta > 0:
            raise InvalidParameterError(f"the correlation parameter must be positive, got {theta}")
        self.theta = float(theta)
        self.node_mean, self.node_scale = _standardize(self.scaled_nodes)
        self.value_mean, self.value_scale = _standardize(self.values)
        self.standard_nodes = (self.scaled_nodes - self.node_mean) / self.node_scale
        standard_values = (self.values - self.value_mean) / self.value_scale

        basis = regression_basis(self.standard_nodes, order)
        while order > 0 and np.linalg.matrix_rank(basis, tol=RANK_TOLERANCE * max(1.0, np.abs(basis).max())) < basis.shape[1]:
            order -= 1
            basis = regression_basis(self.standard_nodes, order)
            self.flags["order_lowered"] = order
        if "order_lowered" in self.flags:
            log.debug("regression basis rank-deficient on %d nodes; order lowered to %d", self.size, order)
        self.order = order

        correlation = np.exp(-self.theta * squareform(pdist(self.standard_nodes, "sqeuclidean")))
        try:
            factor = cholesky(correlation, lower=True)
            pivots = np.square(np.diag(factor))
            near_singular = pivots.min() < NEAR_SINGULAR * pivots.max()
        except np.linalg.LinAlgError:
            near_singular = True
        if near_singular:
            self.flags["jitter"] = JITTER
            try:
                factor = cholesky(correlation + JITTER * np.eye(self.size), lower=True)
            except np.linalg.LinAlgError as exc:
                raise SingularSystemError(self.scheme, self.size) from exc

        decorrelated_basis = solve_triangular(factor, basis, lower=True)
        decorrelated_values = solve_triangular(factor, standard_values, lower=True)
        orthogonal, triangular = qr(decorrelated_basis, mode="economic")
        self.beta = solve_triangular(triangular, orthogonal.T @ decorrelated_values, lower=False)
        residual = decorrelated_values - decorrelated_basis @ self.beta
        self.gamma = solve_triangular(factor.T, residual, lower=False)

    @classmethod
    def fit(cls, nodes: np.ndarray, values: np.ndarray, *, order: int = 2, theta: float = 1.0, nn: Optional[int] = None,
            metric: Optional[ScaledMetric] = None) -> Interpolant:
        """ A global predictor when `nn` is None, otherwise one rebuilt over the nn nearest nodes of each query. """
        if nn is None:
            return cls(nodes, values, order, theta, metric)
        return LocalInterpolant(nodes, values, nn, lambda local_nodes, local_values: cls(local_nodes, local_values, order, theta), metric, cls.scheme)

    def _correlations(self, standard: np.ndarray) -> np.ndarray:
        return np.exp(-self.theta * np.sum(np.square(self.standard_nodes - standard), axis=1))

    def _evaluate(self, scaled: np.ndarray) -> np.ndarray:
        standard = (scaled - self.node_mean) / self.node_scale
        prediction = regression_basis(standard, self.order)[0] @ self.beta + self._correlations(standard) @ self.gamma
        return self.value_mean + self.value_scale * prediction

    def _jacobian(self, scaled: np.ndarray) -> np.ndarray:
        standard = (scaled - self.node_mean) / self.node_scale
        correlations = self._correlations(standard)
        correlation_gradient = -2.0 * self.theta * (standard - self.standard_nodes) * correlations[:, None]
        gradient = (regression_gradient(standard, self.order) @ self.beta).T + self.gamma.T @ correlation_gradient
        return self.value_scale[:, None] * gradient / self.node_scale[None, :]


def kriging_fit(nodes: np.ndarray, values: np.ndarray, order: int = 2, theta: float = 1.0, nn: Optional[int] = None,
                metric: Optional[ScaledMetric] = None) -> Interpolant:
    return KrigingInterpolant.fit(nodes, values, order=order, theta=theta, nn=nn, metric=metric)


def kriging_eval(interpolant: Interpolant, points: np.ndarray) -> np.ndarray:
    return interpolant.evaluate(points)


def kriging_jacobian(interpolant: Interpolant, point: np.ndarray) -> np.ndarray:
    return interpolant.jacobian(point)
