# pylint: disable=line-too-long, missing-module-docstring

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from manifold_kinetics.exceptions import EmptyPolytopeError, InvalidParameterError, NumericalError
from manifold_kinetics.integrator import integrate
from manifold_kinetics.kinetics import ReactionNetwork, VectorField
from manifold_kinetics.point_cloud import PointCloud, ScaledMetric
from manifold_kinetics.utilities import parallel_map

log = logging.getLogger(__name__)  # get a module-level logger

MAX_ENUMERATION_DIMENSION = 20
VERTEX_TOLERANCE = 1e-10  # relative, for feasibility and duplicate detection


@dataclass(frozen=True, eq=False)
class Polytope:
    """ Admissible set {y : E y = b, y ≥ 0} of states sharing the elemental totals of a reference state. """
    equality_matrix: np.ndarray
    equality_rhs: np.ndarray

    def __post_init__(self):
        matrix = np.atleast_2d(np.asarray(self.equality_matrix, dtype=float))
        rhs = np.asarray(self.equality_rhs, dtype=float).reshape(-1)
        if matrix.shape[0] != rhs.size:
            raise InvalidParameterError(f"{matrix.shape[0]} equality rows but {rhs.size} right-hand sides")
        if np.linalg.matrix_rank(matrix) != matrix.shape[0]:
            raise InvalidParameterError("the equality rows are linearly dependent")
        object.__setattr__(self, "equality_matrix", matrix)
        object.__setattr__(self, "equality_rhs", rhs)

    @classmethod
    def from_network(cls, network: ReactionNetwork, reference_state: Sequence[float]) -> Polytope:
        """ The polytope of all compositions with the same elemental totals as `reference_state`. """
        return cls(network.constraint_matrix(), network.element_totals(np.asarray(reference_state, dtype=float)))

    @property
    def dimension(self) -> int:
        return self.equality_matrix.shape[1]

    @property
    def constraints(self) -> int:
        return self.equality_matrix.shape[0]

    def residual(self, states: np.ndarray) -> np.ndarray:
        """ Relative violation of the equalities, one value per state. """
        states = np.atleast_2d(np.asarray(states, dtype=float))
        scale = np.maximum(np.abs(self.equality_rhs), 1.0)
        return np.max(np.abs(states @ self.equality_matrix.T - self.equality_rhs) / scale, axis=1)

    def contains(self, states: np.ndarray, *, tolerance: float = 1e-9) -> np.ndarray:
        states = np.atleast_2d(np.asarray(states, dtype=float))
        return (self.residual(states) <= tolerance) & np.all(states >= -tolerance, axis=1)


@dataclass(frozen=True)
class SamplingPlan:
    """
    Parameters of the randomized data collection.
    `retention` is the minimum spacing between consecutive retained states of one trajectory; half of `d_min` when unset.
    """
    p: float = 1.5
    vertex_subset_size: Optional[int] = None
    tau_f: float = 0.0
    t_end: float = 1.0
    d_min: float = 0.0
    seed: int = 0
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    retention: Optional[float] = None

    def __post_init__(self):
        if not 1 <= self.p <= 2:
            raise InvalidParameterError(f"the weight exponent p must lie in [1, 2], got {self.p}")
        if not 0 <= self.tau_f < self.t_end:
            raise InvalidParameterError(f"the transient time {self.tau_f} must be nonnegative and below the horizon {self.t_end}")
        if self.d_min < 0 or (self.retention is not None and self.retention < 0):
            raise InvalidParameterError("subsampling distances must be nonnegative")
        if self.vertex_subset_size is not None and self.vertex_subset_size < 1:
            raise InvalidParameterError(f"the vertex subset needs at least one vertex, got {self.vertex_subset_size}")
        if not 0 <= self.seed < 2 ** 64:
            raise InvalidParameterError(f"the seed must be a 64-bit unsigned integer, got {self.seed}")

    @property
    def retention_distance(self) -> float:
        return self.d_min / 2.0 if self.retention is None else self.retention


def generator(seed: int, stream: int = 0) -> np.random.Generator:
    """ Counter-based random generator keyed by (seed, stream), independent of scheduling and platform. """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(stream)])))


# MARK: vertices

def enumerate_vertices(polytope: Polytope) -> np.ndarray:
    """
    All vertices of the polytope, found by pinning n − d coordinates to zero and solving for the rest.
    :return: A vertices × n matrix in enumeration order, duplicates removed.
    :raises:
        InvalidParameterError: d ≥ n or n above the enumeration limit.
        EmptyPolytopeError: No feasible vertex exists.
    """
    size, rank = polytope.dimension, polytope.constraints
    if rank >= size:
        raise InvalidParameterError(f"{rank} equalities leave no freedom in {size} dimensions")
    if size > MAX_ENUMERATION_DIMENSION:
        raise InvalidParameterError(f"combinatorial vertex enumeration is limited to {MAX_ENUMERATION_DIMENSION} coordinates, got {size}")

    scale = max(1.0, float(np.max(np.abs(polytope.equality_rhs))))
    vertices: List[np.ndarray] = []
    for support in itertools.combinations(range(size), rank):
        block = polytope.equality_matrix[:, support]
        if np.linalg.matrix_rank(block) < rank:
            continue
        values = np.linalg.solve(block, polytope.equality_rhs)
        if np.any(values < -VERTEX_TOLERANCE * scale):
            continue
        vertex = np.zeros(size)
        vertex[list(support)] = np.maximum(values, 0.0)
        if not any(np.max(np.abs(vertex - known)) <= VERTEX_TOLERANCE * scale for known in vertices):
            vertices.append(vertex)
    if not vertices:
        raise EmptyPolytopeError
    log.debug("enumerated %d vertices of a %d-dimensional polytope with %d equalities", len(vertices), size, rank)
    return np.array(vertices)


def select_vertex_subset(vertices: np.ndarray, fresh: Sequence[float], equilibrium: Sequence[float], count: int,
                         metric: Optional[ScaledMetric] = None) -> np.ndarray:
    """
    The `count` vertices closest to the middle of the mixing line between the fresh mixture and equilibrium.
    Ties are broken by index and the subset keeps the original vertex order.
    """
    vertices = np.atleast_2d(np.asarray(vertices, dtype=float))
    if not 1 <= count <= vertices.shape[0]:
        raise InvalidParameterError(f"cannot select {count} of {vertices.shape[0]} vertices")
    metric = metric if metric is not None else ScaledMetric.identity(vertices.shape[1])
    middle = 0.5 * (np.asarray(fresh, dtype=float) + np.asarray(equilibrium, dtype=float))
    distances = metric.distances(vertices, middle)[:, 0]
    chosen = np.sort(np.argsort(distances, kind="stable")[:count])
    return vertices[chosen]


# MARK: random initial conditions

def sample_weights(count: int, p: float, rng: np.random.Generator) -> np.ndarray:
    """
    Convex weights w̄_i = w̃_i / Σ w̃_j with w̃_i = (−ln z_i)^p and z_i uniform on (0, 1).
    For p = 1 the weights are Dirichlet(1, ..., 1) distributed; larger p pushes samples towards the facets.
    """
    if count < 1:
        raise InvalidParameterError(f"at least one weight is required, got {count}")
    if not 1 <= p <= 2:
        raise InvalidParameterError(f"the weight exponent p must lie in [1, 2], got {p}")
    uniform = rng.random(count)
    while np.any(uniform == 0.0):
        zeros = uniform == 0.0
        uniform[zeros] = rng.random(int(np.count_nonzero(zeros)))
    raw = (-np.log(uniform)) ** p
    return raw / raw.sum()


def random_initial_condition(vertex_subset: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """ Convex combination Σ w̄_i y_i of the subset vertices. """
    vertex_subset = np.atleast_2d(np.asarray(vertex_subset, dtype=float))
    weights = np.asarray(weights, dtype=float).reshape(-1)
    if weights.size != vertex_subset.shape[0]:
        raise InvalidParameterError(f"{weights.size} weights for {vertex_subset.shape[0]} vertices")
    return weights @ vertex_subset


# MARK: harvesting

def _retain(states: np.ndarray, spacing: float, metric: ScaledMetric) -> np.ndarray:
    """ Indices of states kept when each must lie at least `spacing` away from the previously kept one. """
    if not states.shape[0]:
        return np.zeros(0, dtype=int)
    scaled = metric.apply(states)
    kept = [0]
    for index in range(1, scaled.shape[0]):
        if np.linalg.norm(scaled[index] - scaled[kept[-1]]) >= spacing:
            kept.append(index)
    return np.array(kept, dtype=int)


def harvest_vertices(field: VectorField, plan: SamplingPlan) -> np.ndarray:
    """
    Vertices that seed the initial conditions of a reaction-network field: the polytope through the field's
    equilibrium, reduced to the plan's subset around the mixing line when a fresh mixture is known.
    """
    if field.network is None or field.equilibrium is None:
        raise InvalidParameterError(f"field '{field.name}' has no reaction network; pass the sampling vertices explicitly")
    vertices = enumerate_vertices(Polytope.from_network(field.network, field.equilibrium))
    if plan.vertex_subset_size is not None and field.fresh is not None and plan.vertex_subset_size < vertices.shape[0]:
        vertices = select_vertex_subset(vertices, field.fresh, field.equilibrium, plan.vertex_subset_size,
                                        ScaledMetric.from_samples(vertices))
    return vertices


def harvest(field: VectorField, plan: SamplingPlan, n_trajectories: int, *, vertices: Optional[np.ndarray] = None,
            metric: Optional[ScaledMetric] = None) -> PointCloud:
    """
    Integrate random initial conditions and collect the states reached after the transient time.
    :param field: The detailed vector field.
    :param plan: Weights exponent, times, spacing, tolerances and seed.
    :param n_trajectories: Number of initial conditions; trajectory i draws from the random stream (seed, i).
    :param vertices: Vertices whose convex combinations give the initial conditions, used as given; derived from the
                     field's reaction network (and reduced to the plan's subset) when None.
    :param metric: Metric for the within-trajectory spacing test (also attached to the cloud); identity when None.
    :return: The harvested cloud, with trajectory ids and times as provenance.
    """
    if n_trajectories < 0:
        raise InvalidParameterError(f"the trajectory count must be nonnegative, got {n_trajectories}")
    metric = metric if metric is not None else ScaledMetric.identity(field.dimension)
    if n_trajectories == 0:
        return PointCloud(np.empty((0, field.dimension)), metric, list(field.names), trajectory=np.empty(0), time=np.empty(0))
    vertices = harvest_vertices(field, plan) if vertices is None else np.atleast_2d(np.asarray(vertices, dtype=float))
    if vertices.shape[1] != field.dimension:
        raise InvalidParameterError(f"vertices have {vertices.shape[1]} coordinates, the field {field.dimension}")

    def run(index: int):
        rng = generator(plan.seed, index)
        initial = random_initial_condition(vertices, sample_weights(vertices.shape[0], plan.p, rng))
        try:
            trajectory = integrate(field, initial, (0.0, plan.t_end), rel_tol=plan.rel_tol, abs_tol=plan.abs_tol)
        except NumericalError as exc:
            log.warning("trajectory %d dropped: %s", index, exc)
            return None
        late = trajectory.times >= plan.tau_f
        times, states = trajectory.times[late], trajectory.states[late]
        kept = _retain(states, plan.retention_distance, metric)
        return times[kept], states[kept]

    results = parallel_map(run, range(n_trajectories))
    dropped = sum(result is None for result in results)
    if dropped:
        log.warning("%d of %d trajectories were dropped", dropped, n_trajectories)
    states, ids, times = [np.empty((0, field.dimension))], [np.empty(0)], [np.empty(0)]
    for index, result in enumerate(results):
        if result is not None:
            times.append(result[0])
            states.append(result[1])
            ids.append(np.full(result[0].size, float(index)))
    cloud = PointCloud(np.vstack(states), metric, list(field.names), trajectory=np.concatenate(ids), time=np.concatenate(times))
    log.info("harvested %d states from %d trajectories of '%s'", cloud.size, n_trajectories - dropped, field.name)
    return cloud


def subsample(cloud: PointCloud, d_min: float) -> PointCloud:
    """
    Greedy thinning in input order: a point is kept iff its metric distance to every kept point is at least d_min.
    """
    if d_min < 0:
        raise InvalidParameterError(f"the subsampling distance must be nonnegative, got {d_min}")
    if d_min == 0 or cloud.size == 0:
        return cloud
    scaled = cloud.scaled()
    kept = np.zeros(cloud.size, dtype=int)
    count = 0
    for index in range(cloud.size):
        if count == 0 or np.min(np.linalg.norm(scaled[kept[:count]] - scaled[index], axis=1)) >= d_min:
            kept[count] = index
            count += 1
    log.debug("subsampling with d_min = %.4g kept %d of %d points", d_min, count, cloud.size)
    return cloud.subset(kept[:count])
