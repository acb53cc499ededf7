# pylint: disable=line-too-long, missing-module-docstring

from __future__ import annotations

import logging
from typing import Optional, Sequence

import numpy as np

from manifold_kinetics.dmap import DiffusionEmbedding
from manifold_kinetics.exceptions import InvalidParameterError, OutsideSupportError
from manifold_kinetics.interpolation import Interpolant
from manifold_kinetics.point_cloud import PointCloud

log = logging.getLogger(__name__)  # get a module-level logger

TINY = np.finfo(float).tiny


class NystromRestriction(Interpolant):
    """
    Out-of-sample diffusion coordinates ψ_α(y) = λ_α⁻¹ Σ_i k(y_i, y) φ_{i,α}, k being the row-normalized heat
    kernel exp(−(d/ε)²) of the embedding under the cloud's metric. Restriction only: no inverse map exists.
    """
    scheme = "nystrom"

    def __init__(self, embedding: DiffusionEmbedding, cloud: PointCloud, indices: Optional[Sequence[int]] = None):
        if embedding.size != cloud.size:
            raise InvalidParameterError(f"the embedding has {embedding.size} rows for a cloud of {cloud.size} points")
        indices = tuple(embedding.selected if indices is None else indices)
        if not indices or any(index < 1 or index > embedding.count for index in indices):
            raise InvalidParameterError(f"eigenvector indices {indices} are not within 1..{embedding.count}")
        columns = [index - 1 for index in indices]
        super().__init__(cloud.points, embedding.eigenvectors[:, columns], cloud.metric)
        self.indices = indices
        self.eigenvalues = embedding.eigenvalues[columns]
        if np.any(self.eigenvalues == 0):
            raise InvalidParameterError("a zero eigenvalue cannot be extended")
        self.epsilon = embedding.epsilon

    def _weights(self, scaled: np.ndarray) -> np.ndarray:
        weights = np.exp(-np.sum(np.square(self.scaled_nodes - scaled), axis=1) / self.epsilon ** 2)
        if weights.sum() < TINY:
            raise OutsideSupportError(scaled / self.metric.diag)
        return weights

    def _evaluate(self, scaled: np.ndarray) -> np.ndarray:
        weights = self._weights(scaled)
        return weights @ self.values / (weights.sum() * self.eigenvalues)

    def _jacobian(self, scaled: np.ndarray) -> np.ndarray:
        weights = self._weights(scaled)
        total = weights.sum()
        gradients = (2.0 / self.epsilon ** 2) * weights[:, None] * (self.scaled_nodes - scaled)
        jacobian = self.values.T @ gradients / total - np.outer(weights @ self.values, gradients.sum(axis=0)) / total ** 2
        return jacobian / self.eigenvalues[:, None]


def nystrom_restrict(y: np.ndarray, embedding: DiffusionEmbedding, cloud: PointCloud) -> np.ndarray:
    """
    Extend the selected diffusion coordinates to a state (or to the rows of a matrix of states).
    :raises:
        OutsideSupportError: Every kernel weight underflows at the query.
    """
    return NystromRestriction(embedding, cloud).evaluate(y)


def nystrom_jacobian(y: np.ndarray, embedding: DiffusionEmbedding, cloud: PointCloud) -> np.ndarray:
    """ m×n matrix ∂ψ/∂y; the r_ββ² factors of the metric enter through the rescaled inputs. """
    return NystromRestriction(embedding, cloud).jacobian(y)
