# pylint: disable=line-too-long, missing-module-docstring

from __future__ import annotations

import logging
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import lu_factor, lu_solve, solve
from scipy.spatial.distance import pdist, squareform

from manifold_kinetics.exceptions import InvalidParameterError
from manifold_kinetics.interpolation import Interpolant, LocalInterpolant
from manifold_kinetics.point_cloud import ScaledMetric

log = logging.getLogger(__name__)  # get a module-level logger

CONDITION_LIMIT = 1e12
TIKHONOV = 1e-10  # relative to the trace of ΛᵀΛ


def solve_interpolation_system(matrix: np.ndarray, values: np.ndarray) -> Tuple[np.ndarray, bool]:
    """
    Solve Λ c = v by pivoted LU; when Λ is singular or its condition number exceeds 10¹² the Tikhonov problem
    (ΛᵀΛ + μI) c = Λᵀv with μ = 10⁻¹⁰·trace(ΛᵀΛ) is solved instead.
    :return: The coefficients and whether regularization was needed.
    """
    condition = np.linalg.cond(matrix)
    if np.isfinite(condition) and condition <= CONDITION_LIMIT:
        return lu_solve(lu_factor(matrix), values), False
    normal = matrix.T @ matrix
    shift = TIKHONOV * np.trace(normal)
    log.debug("interpolation matrix with condition number %.3e regularized by μ = %.3e", condition, shift)
    return solve(normal + shift * np.eye(matrix.shape[0]), matrix.T @ values, assume_a="pos"), True


class RbfInterpolant(Interpolant):
    """ Radial basis interpolation s(x) = Σ_j c_j ‖x − x_j‖^p with an odd power p and no polynomial tail. """
    scheme = "rbf"

    def __init__(self, nodes: np.ndarray, values: np.ndarray, p: int = 3, metric: Optional[ScaledMetric] = None):
        super().__init__(nodes, values, metric)
        if int(p) != p or p < 1 or p % 2 == 0:
            raise InvalidParameterError(f"the radial power must be an odd positive integer, got {p}")
        if self.size < 2:
            raise InvalidParameterError(f"radial basis interpolation needs at least two nodes, got {self.size}")
        self.p = int(p)
        matrix = squareform(pdist(self.scaled_nodes)) ** self.p
        self.coefficients, regularized = solve_interpolation_system(matrix, self.values)
        if regularized:
            self.flags["regularized"] = True

    @classmethod
    def fit(cls, nodes: np.ndarray, values: np.ndarray, *, p: int = 3, nn: Optional[int] = None,
            metric: Optional[ScaledMetric] = None) -> Interpolant:
        """ A global interpolant when `nn` is None, otherwise one rebuilt over the nn nearest nodes of each query. """
        if nn is None:
            return cls(nodes, values, p, metric)
        if nn < 2:
            raise InvalidParameterError(f"local radial basis interpolation needs nn ≥ 2, got {nn}")
        return LocalInterpolant(nodes, values, nn, lambda local_nodes, local_values: cls(local_nodes, local_values, p), metric, cls.scheme)

    def _evaluate(self, scaled: np.ndarray) -> np.ndarray:
        return np.linalg.norm(self.scaled_nodes - scaled, axis=1) ** self.p @ self.coefficients

    def _jacobian(self, scaled: np.ndarray) -> np.ndarray:
        differences = scaled - self.scaled_nodes
        radii = np.linalg.norm(differences, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            factors = np.where(radii > 0, self.p * radii ** (self.p - 2), 0.0)
        return self.coefficients.T @ (factors[:, None] * differences)


def rbf_fit(nodes: np.ndarray, values: np.ndarray, p: int = 3, nn: Optional[int] = None,
            metric: Optional[ScaledMetric] = None) -> Interpolant:
    return RbfInterpolant.fit(nodes, values, p=p, nn=nn, metric=metric)


def rbf_eval(interpolant: Interpolant, points: np.ndarray) -> np.ndarray:
    return interpolant.evaluate(points)


def rbf_jacobian(interpolant: Interpolant, point: np.ndarray) -> np.ndarray:
    """ ∂s/∂x_γ = Σ_j c_j p ‖R(x − x_j)‖^{p−2} r_γγ² (x_γ − x_jγ). """
    return interpolant.jacobian(point)
