# pylint: disable=line-too-long, missing-module-docstring

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, Optional, Sequence, Tuple, Any

import numpy as np
from scipy.linalg import eig, eigh
from scipy.sparse.csgraph import minimum_spanning_tree
from scipy.spatial.distance import pdist, squareform

from manifold_kinetics.artifacts import PathLike, read_csv, read_json, write_csv, write_json
from manifold_kinetics.exceptions import DegenerateCloudError, EigensolverError, InvalidParameterError, ConfigError
from manifold_kinetics.point_cloud import PointCloud, ScaledMetric
from manifold_kinetics.utilities import optional

log = logging.getLogger(__name__)  # get a module-level logger

MAX_POINTS = 20_000  # dense W and K beyond this size do not fit in memory on a desktop
MEMORY_WARNING_POINTS = 5_000
EIGEN_RESIDUAL = 1e-8  # relative residual accepted for ‖Kφ − λφ‖
LLR_RIDGE = 1e-8
DEFAULT_EIGENPAIRS = 20
DEFAULT_RESIDUAL_THRESHOLD = 0.3


class EpsilonRule(Enum):
    """ How the kernel scale is derived from the distance matrix. """
    CRITICAL = "critical"  # multiple of the longest minimum-spanning-tree edge
    MAX_MIN = "max-min"  # multiple of max_j min_{i≠j} d_ij


@dataclass(frozen=True, eq=False)
class DiffusionEmbedding:
    """
    Leading eigenpairs of the diffusion Markov matrix, the kernel scale they were computed with and the
    indices (1-based, the trivial vector being 1) of the coordinates selected as independent.
    """
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    epsilon: float
    selected: Tuple[int, ...] = ()
    t: int = 0
    residuals: Dict[int, float] = field(default_factory=dict)
    partial: bool = False

    def __post_init__(self):
        eigenvalues = np.asarray(self.eigenvalues, dtype=float).reshape(-1)
        eigenvectors = np.asarray(self.eigenvectors, dtype=float)
        if eigenvectors.ndim != 2 or eigenvectors.shape[1] != eigenvalues.size:
            raise InvalidParameterError("one eigenvector column per eigenvalue is required")
        selected = tuple(int(index) for index in self.selected)
        if len(set(selected)) != len(selected) or any(index < 2 or index > eigenvalues.size for index in selected):
            raise InvalidParameterError(f"selected indices {selected} must be distinct and within 2..{eigenvalues.size}")
        if self.t < 0 or not self.epsilon > 0:
            raise InvalidParameterError("diffusion time must be nonnegative and epsilon positive")
        object.__setattr__(self, "eigenvalues", eigenvalues)
        object.__setattr__(self, "eigenvectors", eigenvectors)
        object.__setattr__(self, "selected", selected)

    @property
    def count(self) -> int:
        return self.eigenvalues.size

    @property
    def size(self) -> int:
        return self.eigenvectors.shape[0]

    def vector(self, index: int) -> np.ndarray:
        return self.eigenvectors[:, index - 1]

    def value(self, index: int) -> float:
        return float(self.eigenvalues[index - 1])

    def selected_vectors(self) -> np.ndarray:
        return self.eigenvectors[:, [index - 1 for index in self.selected]]

    def selected_values(self) -> np.ndarray:
        return self.eigenvalues[[index - 1 for index in self.selected]]

    def with_selection(self, selection: CoordinateSelection) -> DiffusionEmbedding:
        return replace(self, selected=selection.indices, residuals=dict(selection.residuals), partial=selection.partial)

    # MARK: CSV and JSON sidecar artifacts

    def to_files(self, csv_path: PathLike, json_path: PathLike, *, metric: Optional[ScaledMetric] = None,
                 delta: Optional[float] = None, meta: Optional[Dict[str, Any]] = None) -> None:
        """
        Write the embedded coordinates (λ^t-weighted) as CSV and the spectral data as a JSON sidecar.
        :param csv_path: Destination of the coordinate table with columns index, psi<j> for the kept indices.
        :param json_path: Destination of the sidecar {epsilon, eigenvalues, selected, t, delta, metric, residuals}.
        :param metric: The metric of the cloud the embedding was computed on.
        :param delta: Truncation threshold, only used when t > 0.
        :param meta: Extra metadata (config hash, seed) embedded in both files.
        """
        coordinates, kept = _embed_with_indices(self, self.t, delta)
        columns = ["index"] + [f"psi{index}" for index in kept]
        write_csv(csv_path, columns, np.column_stack([np.arange(self.size), coordinates]), meta=meta)
        sidecar = {
            "epsilon": self.epsilon,
            "eigenvalues": self.eigenvalues.tolist(),
            "selected": list(kept),
            "t": self.t,
            "delta": delta,
            "partial": self.partial,
            "residuals": {str(index): value for index, value in sorted(self.residuals.items())},
            "metric": None if metric is None else metric.diag.tolist(),
        }
        sidecar.update(meta or {})
        write_json(json_path, sidecar)

    @classmethod
    def from_files(cls, csv_path: PathLike, json_path: PathLike) -> Tuple[DiffusionEmbedding, Dict[str, Any]]:
        """
        Rebuild a compact embedding from its artifacts: the constant vector followed by the stored coordinates,
        re-indexed 2..m+1, with eigenvectors recovered by dividing out λ^t.
        :return: The compact embedding and the raw sidecar document.
        :raises:
            ConfigError: The sidecar lacks a required key or the CSV columns disagree with it.
        """
        sidecar = read_json(json_path)
        artifact = read_csv(csv_path)
        for key in ("epsilon", "eigenvalues", "selected"):
            if key not in sidecar:
                raise ConfigError(f"{json_path}.{key}", "missing key")
        t = int(optional(sidecar, "t", 0))
        eigenvalues = np.asarray(sidecar["eigenvalues"], dtype=float)
        kept = [int(index) for index in sidecar["selected"]]
        columns = []
        for index in kept:
            name = f"psi{index}"
            if name not in artifact.columns:
                raise ConfigError(f"{csv_path}.{name}", "missing column")
            columns.append(artifact.column(name) / eigenvalues[index - 1] ** t)
        size = artifact.data.shape[0]
        vectors = np.column_stack([np.full(size, 1.0 / np.sqrt(max(size, 1)))] + columns)
        values = np.concatenate([[1.0], eigenvalues[[index - 1 for index in kept]]])
        embedding = cls(values, vectors, float(sidecar["epsilon"]), tuple(range(2, len(kept) + 2)))
        return embedding, sidecar


@dataclass(frozen=True)
class CoordinateSelection:
    """ Outcome of the independence test: accepted indices, residual per examined index, and a partial flag. """
    indices: Tuple[int, ...]
    residuals: Dict[int, float]
    partial: bool


# MARK: distances, kernel and Markov matrix

def pairwise_distances(cloud: PointCloud) -> np.ndarray:
    """
    Scaled Euclidean distance matrix d_ij = ‖R y_i − R y_j‖.
    :raises:
        NonFiniteStateError: A row of the cloud is not finite.
        InvalidParameterError: The cloud has fewer than two points or more than the dense-size cap.
    """
    cloud.check()
    if cloud.size < 2:
        raise InvalidParameterError(f"a distance matrix needs at least two points, the cloud has {cloud.size}")
    if cloud.size > MAX_POINTS:
        raise InvalidParameterError(f"{cloud.size} points exceed the dense limit of {MAX_POINTS}; subsample first")
    if cloud.size > MEMORY_WARNING_POINTS:
        log.warning("dense %d×%d kernel matrices need about %.1f GB", cloud.size, cloud.size, 3 * 8 * cloud.size ** 2 / 1e9)
    return squareform(pdist(cloud.scaled()))


def affinity_matrix(distances: np.ndarray, epsilon: float) -> np.ndarray:
    """ Heat kernel w_ij = exp(−(d_ij/ε)²). """
    if not epsilon > 0:
        raise InvalidParameterError(f"the kernel scale must be positive, got {epsilon}")
    return np.exp(-np.square(np.asarray(distances, dtype=float) / epsilon))


def markov_matrix(affinity: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Row normalization K = D⁻¹W.
    :return: K and the row sums D.
    """
    affinity = np.asarray(affinity, dtype=float)
    row_sums = affinity.sum(axis=1)
    if np.any(row_sums <= 0):
        raise InvalidParameterError("the affinity matrix has a row without weight")
    return affinity / row_sums[:, None], row_sums


def graph_laplacian(affinity: np.ndarray) -> np.ndarray:
    """ Normalized graph Laplacian L = D⁻¹W − I. """
    markov, _ = markov_matrix(affinity)
    return markov - np.eye(markov.shape[0])


def eigendecompose(markov: np.ndarray, count: int, *, row_sums: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Leading eigenpairs of a Markov matrix, sorted by descending |λ|.
    When the row sums D are known the symmetric conjugate D^{1/2} K D^{-1/2} = D^{-1/2} W D^{-1/2} is decomposed and
    the eigenvectors mapped back through D^{-1/2}; otherwise a general eigensolver is used and real parts are kept.
    Each returned eigenvector has unit Euclidean norm and its largest-magnitude entry positive.
    :param markov: Row-stochastic M×M matrix.
    :param count: Number k of eigenpairs, 1 ≤ k ≤ M.
    :param row_sums: The D returned by `markov_matrix`, enabling the symmetric path.
    :return: Eigenvalues (k,) and eigenvectors (M×k).
    :raises:
        InvalidParameterError: k is out of range.
        EigensolverError: A returned pair fails the residual check.
    """
    markov = np.asarray(markov, dtype=float)
    size = markov.shape[0]
    if not 1 <= count <= size:
        raise InvalidParameterError(f"between 1 and {size} eigenpairs can be computed, {count} requested")

    if row_sums is not None:
        root = np.sqrt(np.asarray(row_sums, dtype=float))
        symmetric = root[:, None] * markov / root[None, :]
        symmetric = 0.5 * (symmetric + symmetric.T)
        values, vectors = eigh(symmetric, subset_by_index=[size - count, size - 1])
        values, vectors = values[::-1], vectors[:, ::-1] / root[:, None]
    else:
        values, vectors = eig(markov)
        values, vectors = values.real, vectors.real

    order = np.argsort(-np.abs(values), kind="stable")[:count]
    values, vectors = values[order], vectors[:, order]
    vectors = vectors / np.linalg.norm(vectors, axis=0)
    peaks = np.argmax(np.abs(vectors), axis=0)
    vectors = vectors * np.where(vectors[peaks, np.arange(count)] < 0, -1.0, 1.0)

    residuals = np.linalg.norm(markov @ vectors - vectors * values, axis=0)
    for index, residual in enumerate(residuals):
        if residual > EIGEN_RESIDUAL:
            raise EigensolverError(index + 1, float(residual))
    log.debug("computed %d eigenpairs of a %d×%d Markov matrix; λ₂ = %s", count, size, size, values[1] if count > 1 else None)
    return values, vectors


# MARK: kernel scale and spectral diagnostics

def _check_distances(distances: np.ndarray) -> np.ndarray:
    distances = np.asarray(distances, dtype=float)
    if distances.ndim != 2 or distances.shape[0] != distances.shape[1] or distances.shape[0] < 2:
        raise InvalidParameterError("a square distance matrix over at least two points is required")
    return distances


def select_epsilon(distances: np.ndarray, multiplier: float = 2.0) -> float:
    """ ε = multiplier · max_j min_{i≠j} d_ij. """
    distances = _check_distances(distances)
    if not multiplier > 0:
        raise InvalidParameterError(f"the epsilon multiplier must be positive, got {multiplier}")
    nearest = np.min(distances + np.diag(np.full(distances.shape[0], np.inf)), axis=1)
    return float(multiplier * np.max(nearest))


def critical_diffusion_distance(distances: np.ndarray) -> float:
    """ Longest edge of a minimum spanning tree of the complete distance graph. """
    tree = minimum_spanning_tree(_check_distances(distances))
    return float(tree.data.max()) if tree.nnz else 0.0


def kernel_scale(distances: np.ndarray, *, rule: EpsilonRule = EpsilonRule.CRITICAL, multiplier: float = 2.0) -> float:
    """ Kernel scale from either the critical diffusion distance or the max-min rule. """
    if not multiplier > 0:
        raise InvalidParameterError(f"the epsilon multiplier must be positive, got {multiplier}")
    if rule is EpsilonRule.MAX_MIN:
        return select_epsilon(distances, multiplier)
    return multiplier * critical_diffusion_distance(distances)


def eigenvalue_prediction(spacing: float, length: float, epsilon: float, harmonic: int) -> float:
    """ Leading-order eigenvalue of harmonic k for evenly spread points: 1 − exp(−(d/ε)²)·(kπd/L)². """
    if min(spacing, length, epsilon, harmonic) <= 0:
        raise InvalidParameterError("spacing, length, epsilon and harmonic index must be positive")
    return 1.0 - np.exp(-(spacing / epsilon) ** 2) * (harmonic * np.pi * spacing / length) ** 2


def noise_cutoff(second_eigenvalue: float, accuracy: float) -> float:
    """ Eigenvalues below 1 − (1 − λ₂)/γ² describe scales finer than the data accuracy γ. """
    if not 0 < accuracy <= 1:
        raise InvalidParameterError(f"the accuracy fraction must lie in (0, 1], got {accuracy}")
    if not second_eigenvalue < 1:
        raise InvalidParameterError(f"λ₂ must be below 1, got {second_eigenvalue}")
    return 1.0 - (1.0 - second_eigenvalue) / accuracy ** 2


# MARK: coordinate selection and dimensionality

def _loo_residual(predictors: np.ndarray, target: np.ndarray, ridge: float = LLR_RIDGE) -> float:
    """
    Normalized leave-one-out residual of a Gaussian-weighted local linear regression of `target` on `predictors`.
    The bandwidth is a third of the median pairwise predictor distance.
    """
    size = predictors.shape[0]
    if size < 3:
        return 1.0
    squared = squareform(pdist(predictors, "sqeuclidean"))
    median = np.median(np.sqrt(squared[np.triu_indices(size, 1)]))
    bandwidth = median / 3.0 if median > 0 else 1.0
    weights = np.exp(-squared / bandwidth ** 2)
    np.fill_diagonal(weights, 0.0)

    design = np.hstack([np.ones((size, 1)), predictors])
    width = design.shape[1]
    normal = (weights @ (design[:, :, None] * design[:, None, :]).reshape(size, width * width)).reshape(size, width, width)
    normal += ridge * np.eye(width)
    rhs = weights @ (design * target[:, None])
    try:
        coefficients = np.linalg.solve(normal, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError:
        coefficients = np.stack([np.linalg.lstsq(normal[row], rhs[row], rcond=None)[0] for row in range(size)])
    prediction = np.einsum("ij,ij->i", design, coefficients)
    prediction[weights.sum(axis=1) <= 1e-12] = 0.0

    scale = np.linalg.norm(target)
    if scale == 0:
        return 0.0
    return float(min(1.0, np.linalg.norm(target - prediction) / scale))


def independent_coordinates(embedding: DiffusionEmbedding, count: int,
                            residual_threshold: float = DEFAULT_RESIDUAL_THRESHOLD) -> CoordinateSelection:
    """
    Pick eigenvectors that parameterize new directions, rejecting harmonics of earlier ones.
    Index 2 is always accepted; a later index j is accepted when the leave-one-out local linear fit of φ_j on the
    accepted vectors leaves a normalized residual above `residual_threshold`.
    :param embedding: The diffusion embedding to test.
    :param count: Number m of coordinates wanted.
    :param residual_threshold: Residual in [0, 1] above which a vector counts as independent.
    :return: Accepted indices (starting with 2), residuals of every examined index, and whether fewer than m were found.
    """
    if count < 1:
        raise InvalidParameterError(f"at least one coordinate must be requested, got {count}")
    if embedding.count < 2:
        raise InvalidParameterError("the embedding holds no nontrivial eigenvector")
    accepted = [2]
    residuals: Dict[int, float] = {}
    for index in range(3, embedding.count + 1):
        if len(accepted) >= count:
            break
        predictors = embedding.eigenvectors[:, [accepted_index - 1 for accepted_index in accepted]]
        residual = _loo_residual(predictors, embedding.vector(index))
        residuals[index] = residual
        log.debug("eigenvector %d: local linear residual %.4f", index, residual)
        if residual > residual_threshold:
            accepted.append(index)
    partial = len(accepted) < count
    if partial:
        log.warning("only %d of %d independent coordinates were found among %d eigenvectors", len(accepted), count, embedding.count)
    return CoordinateSelection(tuple(accepted), residuals, partial)


def edge_length_curve(distances: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    The sorted edge-length curve as (log rank, log length) pairs.
    Edges of equal length are collapsed onto their largest rank, so each pair counts all edges not longer than it.
    :raises:
        InvalidParameterError: Fewer than 50 points.
        DegenerateCloudError: All points coincide.
    """
    distances = _check_distances(distances)
    size = distances.shape[0]
    if size < 50:
        raise InvalidParameterError(f"a dimension estimate needs at least 50 points, got {size}")
    lengths = np.sort(distances[np.triu_indices(size, 1)])
    if lengths[-1] <= 0:
        raise DegenerateCloudError
    ranks = np.arange(1, lengths.size + 1, dtype=float)
    positive = lengths > 0
    lengths, ranks = lengths[positive], ranks[positive]
    last = np.append(lengths[1:] > lengths[:-1] * (1 + 1e-9), True)
    return np.log(ranks[last]), np.log(lengths[last])


def dimension_estimate(distances: np.ndarray) -> float:
    """
    Manifold dimension from the sorted edge-length curve: the number of edges within radius ℓ grows like ℓ^m, so m is
    the reciprocal slope of log(length) against log(rank), fitted over the middle third of the log-rank range.
    The window is cut on log(rank), not on the rank count, so it covers fewer and longer edges than the middle tercile
    of ranks; it falls back to the whole curve when fewer than two distinct lengths remain in it.
    """
    log_rank, log_length = edge_length_curve(distances)
    low, high = log_rank[0], log_rank[-1]
    third = (high - low) / 3.0
    window = (log_rank >= low + third) & (log_rank <= high - third)
    if np.count_nonzero(window) < 2:
        window = np.ones_like(log_rank, dtype=bool)
    slope = np.polyfit(log_rank[window], log_length[window], 1)[0]
    if slope <= 0:
        raise DegenerateCloudError
    return float(1.0 / slope)


# MARK: embedding

def _embed_with_indices(embedding: DiffusionEmbedding, t: int, delta: Optional[float]) -> Tuple[np.ndarray, Tuple[int, ...]]:
    if t < 0:
        raise InvalidParameterError(f"diffusion time must be nonnegative, got {t}")
    candidates: Sequence[int] = embedding.selected
    if t == 0:
        kept = tuple(candidates)
    else:
        if delta is None or not 0 < delta < 1:
            raise InvalidParameterError(f"the truncation threshold must lie in (0, 1), got {delta}")
        if not candidates:
            candidates = range(2, embedding.count + 1)
        kept = tuple(index for index in candidates if abs(embedding.value(index)) ** t > delta)
    if not kept:
        raise InvalidParameterError("no diffusion coordinate passes the truncation threshold")
    columns = [index - 1 for index in kept]
    return embedding.eigenvectors[:, columns] * embedding.eigenvalues[columns] ** t, kept


def embed(embedding: DiffusionEmbedding, t: int = 0, delta: Optional[float] = None) -> np.ndarray:
    """
    Truncated diffusion map: columns λ_j^t φ_j for the selected indices (t = 0), or for those with |λ_j|^t > δ.
    :return: An M×m coordinate matrix.
    """
    coordinates, _ = _embed_with_indices(embedding, t, delta)
    return coordinates


def diffusion_map(cloud: PointCloud, *, count: int = DEFAULT_EIGENPAIRS, coordinates: Optional[int] = None,
                  epsilon: Optional[float] = None, rule: EpsilonRule = EpsilonRule.CRITICAL, multiplier: float = 2.0,
                  residual_threshold: float = DEFAULT_RESIDUAL_THRESHOLD) -> DiffusionEmbedding:
    """
    Compute the diffusion embedding of a cloud and, when `coordinates` is given, select that many independent ones.
    :param cloud: The sampled points.
    :param count: Number of eigenpairs to compute (capped at the cloud size).
    :param coordinates: Number m of independent coordinates to select; None keeps the selection empty.
    :param epsilon: Explicit kernel scale; derived by `rule` and `multiplier` when None.
    """
    distances = pairwise_distances(cloud)
    if epsilon is None:
        epsilon = kernel_scale(distances, rule=rule, multiplier=multiplier)
    markov, row_sums = markov_matrix(affinity_matrix(distances, epsilon))
    values, vectors = eigendecompose(markov, min(count, cloud.size), row_sums=row_sums)
    embedding = DiffusionEmbedding(values, vectors, float(epsilon))
    log.info("diffusion map of %d points with ε = %.6g; λ₂..λ₅ = %s", cloud.size, epsilon, np.round(values[1:5], 6))
    if coordinates is not None:
        embedding = embedding.with_selection(independent_coordinates(embedding, coordinates, residual_threshold))
    return embedding
