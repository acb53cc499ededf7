# pylint: disable=line-too-long, missing-module-docstring

from __future__ import annotations

import logging
from typing import List, Optional

import numpy as np
from scipy.linalg import eigh
from scipy.spatial.distance import pdist, squareform

from manifold_kinetics.exceptions import InvalidParameterError
from manifold_kinetics.interpolation import Interpolant, LocalInterpolant
from manifold_kinetics.point_cloud import ScaledMetric

log = logging.getLogger(__name__)  # get a module-level logger

DEFAULT_MAX_LEVELS = 20


class GeometricHarmonics(Interpolant):
    """
    Multiscale geometric harmonics.
    Every step projects the current residual onto the eigenvectors of the symmetric kernel exp(−‖x_i − x_j‖²/ε_l)
    whose eigenvalues are at least δ times the largest one, extends those eigenvectors out of sample by the kernel
    sum divided by the eigenvalue, and halves ε for the next step. `residual_norms[k]` is the Euclidean norm of
    the training residual after k steps.
    """
    scheme = "gh"

    def __init__(self, nodes: np.ndarray, values: np.ndarray, epsilon0: Optional[float] = None, delta: float = 1e-3,
                 err: float = 1e-3, max_levels: int = DEFAULT_MAX_LEVELS, metric: Optional[ScaledMetric] = None):
        super().__init__(nodes, values, metric)
        if not 0 < delta < 1:
            raise InvalidParameterError(f"the spectral cutoff must lie in (0, 1), got {delta}")
        if not err > 0 or max_levels < 1:
            raise InvalidParameterError(f"invalid harmonics parameters err = {err}, max levels = {max_levels}")
        squared = squareform(pdist(self.scaled_nodes, "sqeuclidean"))
        if epsilon0 is None:
            positive = squared[np.triu_indices(self.size, 1)]
            positive = positive[positive > 0]
            epsilon0 = float(np.median(positive)) if positive.size else 1.0
        if not epsilon0 > 0:
            raise InvalidParameterError(f"the initial kernel scale must be positive, got {epsilon0}")
        self.epsilon0 = float(epsilon0)
        self.delta = float(delta)
        self.err = float(err)
        self.epsilons: List[float] = []
        self.amplitudes: List[np.ndarray] = []  # Φ diag(1/λ) Φᵀ r per step, one M×outputs block each
        self.residual_norms: List[float] = [float(np.linalg.norm(self.values))]

        residual = self.values.copy()
        epsilon = self.epsilon0
        for step in range(max_levels):
            if self.residual_norms[-1] < self.err:
                break
            kernel = np.exp(-squared / epsilon)
            largest = eigh(kernel, eigvals_only=True, subset_by_index=[self.size - 1, self.size - 1])[0]
            eigenvalues, eigenvectors = eigh(kernel, subset_by_value=[self.delta * largest, np.inf])
            projection = eigenvectors.T @ residual
            self.epsilons.append(epsilon)
            self.amplitudes.append(eigenvectors @ (projection / eigenvalues[:, None]))
            residual = residual - eigenvectors @ projection
            self.residual_norms.append(float(np.linalg.norm(residual)))
            log.debug("harmonics step %d: ε = %.3e, %d eigenvectors kept, residual %.3e", step, epsilon, eigenvalues.size, self.residual_norms[-1])
            epsilon /= 2.0
        self.converged = self.residual_norms[-1] < self.err
        if not self.converged:
            log.warning("geometric harmonics stopped at residual %.3e above the target %.3e", self.residual_norms[-1], self.err)
            self.flags["residual"] = self.residual_norms[-1]

    @classmethod
    def fit(cls, nodes: np.ndarray, values: np.ndarray, *, epsilon0: Optional[float] = None, delta: float = 1e-3,
            err: float = 1e-3, max_levels: int = DEFAULT_MAX_LEVELS, nn: Optional[int] = None,
            metric: Optional[ScaledMetric] = None) -> Interpolant:
        if nn is None:
            return cls(nodes, values, epsilon0, delta, err, max_levels, metric)
        return LocalInterpolant(nodes, values, nn,
                                lambda local_nodes, local_values: cls(local_nodes, local_values, epsilon0, delta, err, max_levels),
                                metric, cls.scheme)

    @property
    def steps(self) -> int:
        return len(self.epsilons)

    def _evaluate(self, scaled: np.ndarray) -> np.ndarray:
        squared = np.sum(np.square(self.scaled_nodes - scaled), axis=1)
        total = np.zeros(self.outputs)
        for epsilon, amplitude in zip(self.epsilons, self.amplitudes):
            total += np.exp(-squared / epsilon) @ amplitude
        return total


def gh_fit(samples: np.ndarray, values: np.ndarray, epsilon0: Optional[float] = None, delta: float = 1e-3,
           err: float = 1e-3, nn: Optional[int] = None, max_levels: int = DEFAULT_MAX_LEVELS,
           metric: Optional[ScaledMetric] = None) -> Interpolant:
    return GeometricHarmonics.fit(samples, values, epsilon0=epsilon0, delta=delta, err=err, max_levels=max_levels, nn=nn, metric=metric)


def gh_eval(harmonics: Interpolant, points: np.ndarray) -> np.ndarray:
    return harmonics.evaluate(points)
