# pylint: disable=line-too-long, missing-module-docstring

from __future__ import annotations

import logging
from typing import List, Optional

import numpy as np
from scipy.spatial.distance import pdist, squareform

from manifold_kinetics.exceptions import InvalidParameterError
from manifold_kinetics.interpolation import Interpolant, LocalInterpolant
from manifold_kinetics.point_cloud import ScaledMetric

log = logging.getLogger(__name__)  # get a module-level logger

TINY = np.finfo(float).tiny


class LaplacianPyramid(Interpolant):
    """
    Multiscale extension by Laplacian pyramids.
    Level l smooths the current training residual d_l with the row-normalized kernel exp(−‖x_i − x‖²/σ_l),
    σ_l = σ₀/2^l, and passes d_{l+1} = d_l − K_l d_l on. Levels are added until the largest absolute training
    residual drops below `err` or the level `max_level` has been processed.
    """
    scheme = "lp"

    def __init__(self, nodes: np.ndarray, values: np.ndarray, sigma0: float = 1.0, max_level: int = 10,
                 err: float = 1e-6, metric: Optional[ScaledMetric] = None):
        super().__init__(nodes, values, metric)
        if not (sigma0 > 0 and err > 0) or max_level < 0:
            raise InvalidParameterError(f"invalid pyramid parameters σ₀ = {sigma0}, err = {err}, max level = {max_level}")
        self.sigma0 = float(sigma0)
        self.max_level = int(max_level)
        self.err = float(err)
        self.sigmas: List[float] = []
        self.details: List[np.ndarray] = []
        self.training_errors: List[float] = []  # max |residual| after each level
        self.skipped: List[int] = []

        squared = squareform(pdist(self.scaled_nodes, "sqeuclidean"))
        off_diagonal = ~np.eye(self.size, dtype=bool)
        residual = self.values.copy()
        for level in range(self.max_level + 1):
            sigma = self.sigma0 / 2 ** level
            kernel = np.exp(-squared / sigma)
            if self.size > 1 and kernel[off_diagonal].max() < TINY:
                self.skipped.append(level)
                log.warning("pyramid level %d skipped: every off-diagonal kernel weight underflows at σ = %.3e", level, sigma)
                break
            smooth = kernel @ residual / kernel.sum(axis=1)[:, None]
            self.sigmas.append(sigma)
            self.details.append(residual)
            residual = residual - smooth
            self.training_errors.append(float(np.max(np.abs(residual))))
            if self.training_errors[-1] < self.err:
                break
        log.debug("pyramid over %d nodes: %d levels, training error %.3e", self.size, len(self.sigmas), self.training_errors[-1] if self.training_errors else np.nan)

    @classmethod
    def fit(cls, nodes: np.ndarray, values: np.ndarray, *, sigma0: float = 1.0, max_level: int = 10, err: float = 1e-6,
            nn: Optional[int] = None, metric: Optional[ScaledMetric] = None) -> Interpolant:
        """ A global pyramid when `nn` is None, otherwise one rebuilt over the nn nearest nodes of each query. """
        if nn is None:
            return cls(nodes, values, sigma0, max_level, err, metric)
        return LocalInterpolant(nodes, values, nn,
                                lambda local_nodes, local_values: cls(local_nodes, local_values, sigma0, max_level, err),
                                metric, cls.scheme)

    @property
    def levels(self) -> int:
        return len(self.sigmas)

    def truncated(self, level: int) -> LaplacianPyramid:
        """ A copy keeping levels 0..level only. """
        if level < 0:
            raise InvalidParameterError(f"the finest level must be nonnegative, got {level}")
        copy = object.__new__(LaplacianPyramid)
        copy.__dict__.update(self.__dict__)
        copy.sigmas = self.sigmas[:level + 1]
        copy.details = self.details[:level + 1]
        copy.training_errors = self.training_errors[:level + 1]
        return copy

    def _weights(self, scaled: np.ndarray, sigma: float) -> np.ndarray:
        return np.exp(-np.sum(np.square(self.scaled_nodes - scaled), axis=1) / sigma)

    def _evaluate(self, scaled: np.ndarray) -> np.ndarray:
        total = np.zeros(self.outputs)
        for sigma, detail in zip(self.sigmas, self.details):
            weights = self._weights(scaled, sigma)
            weight = weights.sum()
            if weight < TINY:
                continue
            total += weights @ detail / weight
        return total

    def _jacobian(self, scaled: np.ndarray) -> np.ndarray:
        jacobian = np.zeros((self.outputs, self.dimension))
        for sigma, detail in zip(self.sigmas, self.details):
            weights = self._weights(scaled, sigma)
            weight = weights.sum()
            if weight < TINY:
                continue
            gradients = (2.0 / sigma) * weights[:, None] * (self.scaled_nodes - scaled)
            jacobian += detail.T @ gradients / weight - np.outer(weights @ detail, gradients.sum(axis=0)) / weight ** 2
        return jacobian


def lp_fit(samples: np.ndarray, values: np.ndarray, sigma0: float = 1.0, err: float = 1e-6, max_level: int = 10,
           nn: Optional[int] = None, metric: Optional[ScaledMetric] = None) -> Interpolant:
    return LaplacianPyramid.fit(samples, values, sigma0=sigma0, max_level=max_level, err=err, nn=nn, metric=metric)


def lp_eval(pyramid: Interpolant, points: np.ndarray, level: Optional[int] = None) -> np.ndarray:
    """ Pyramid values, optionally using only the levels up to `level` (global pyramids only). """
    if level is None:
        return pyramid.evaluate(points)
    if not isinstance(pyramid, LaplacianPyramid):
        raise InvalidParameterError("level truncation needs a global pyramid")
    return pyramid.truncated(level).evaluate(points)


def lp_jacobian(pyramid: Interpolant, point: np.ndarray, level: Optional[int] = None) -> np.ndarray:
    """ Σ_l ∂s^{(l)}/∂x with ∂w_i/∂x_β = 2σ_l⁻¹ r_ββ² w_i (x_iβ − x_β). """
    if level is None:
        return pyramid.jacobian(point)
    if not isinstance(pyramid, LaplacianPyramid):
        raise InvalidParameterError("level truncation needs a global pyramid")
    return pyramid.truncated(level).jacobian(point)
