# pylint: disable=line-too-long, missing-module-docstring

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Any

import numpy as np
from scipy.spatial.distance import cdist

from manifold_kinetics.artifacts import PathLike, read_csv, write_csv
from manifold_kinetics.exceptions import InvalidParameterError, NonFiniteStateError
from manifold_kinetics.utilities import format_number, optional

TRAJECTORY_COLUMN = "trajectory"
TIME_COLUMN = "time"
LABEL_PREFIX = "label:"


@dataclass(frozen=True, eq=False)
class ScaledMetric:
    """ Diagonal rescaling y' = R y applied before every Euclidean distance. """
    diag: np.ndarray

    def __post_init__(self):
        diag = np.asarray(self.diag, dtype=float).reshape(-1)
        if diag.size == 0 or not np.all(np.isfinite(diag)) or np.any(diag <= 0):
            raise InvalidParameterError("metric scale factors must be finite and positive")
        object.__setattr__(self, "diag", diag)

    @classmethod
    def identity(cls, dimension: int) -> ScaledMetric:
        return cls(np.ones(dimension))

    @classmethod
    def from_samples(cls, points: np.ndarray) -> ScaledMetric:
        """
        Build the metric r_ββ = 1/max(y_β) from a set of samples.
        Coordinates that never leave zero keep a unit scale factor.
        """
        peaks = np.max(np.abs(np.atleast_2d(points)), axis=0)
        return cls(np.where(peaks > 0, 1.0 / np.where(peaks > 0, peaks, 1.0), 1.0))

    @property
    def dimension(self) -> int:
        return self.diag.size

    @property
    def is_identity(self) -> bool:
        return bool(np.all(self.diag == 1.0))

    def apply(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=float) * self.diag

    def distances(self, first: np.ndarray, second: np.ndarray) -> np.ndarray:
        """ Matrix of scaled Euclidean distances between the rows of `first` and `second`. """
        return cdist(self.apply(np.atleast_2d(first)), self.apply(np.atleast_2d(second)))

    def distance(self, first: np.ndarray, second: np.ndarray) -> float:
        return float(np.linalg.norm(self.apply(np.asarray(first) - np.asarray(second))))


@dataclass(frozen=True, eq=False)
class PointCloud:
    """
    M samples in an n-dimensional ambient space together with the metric used to compare them.
    Optional provenance (trajectory id and time per sample) and ground-truth labels travel with the points.
    """
    points: np.ndarray
    metric: Optional[ScaledMetric] = None
    names: Optional[List[str]] = None
    labels: Dict[str, np.ndarray] = field(default_factory=dict)
    trajectory: Optional[np.ndarray] = None
    time: Optional[np.ndarray] = None

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        if points.ndim == 1:
            points = points.reshape(-1, 1)
        if points.ndim != 2 or points.shape[1] < 1:
            raise InvalidParameterError("points must form an M×n matrix with n ≥ 1")
        object.__setattr__(self, "points", points)
        metric = self.metric if self.metric is not None else ScaledMetric.identity(points.shape[1])
        if metric.dimension != points.shape[1]:
            raise InvalidParameterError(f"metric has {metric.dimension} scale factors for {points.shape[1]} coordinates")
        object.__setattr__(self, "metric", metric)
        names = list(self.names) if self.names is not None else [f"y{index + 1}" for index in range(points.shape[1])]
        if len(names) != points.shape[1]:
            raise InvalidParameterError("one coordinate name per column is required")
        object.__setattr__(self, "names", names)
        for key in ("trajectory", "time"):
            value = getattr(self, key)
            if value is not None:
                object.__setattr__(self, key, np.asarray(value, dtype=float).reshape(-1))
        object.__setattr__(self, "labels", {key: np.asarray(value, dtype=float).reshape(-1) for key, value in self.labels.items()})

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    def check(self) -> PointCloud:
        """
        Validate that every row is finite.
        :return: The cloud itself, to allow chaining.
        :raises:
            NonFiniteStateError: A row holds NaN or an infinite value; the first offending row is reported.
        """
        bad_rows = np.flatnonzero(~np.all(np.isfinite(self.points), axis=1))
        if bad_rows.size:
            raise NonFiniteStateError(int(bad_rows[0]))
        return self

    def scaled(self) -> np.ndarray:
        return self.metric.apply(self.points)

    def subset(self, indices: Sequence[int]) -> PointCloud:
        """ A new cloud made of the given rows, keeping labels and provenance aligned. """
        indices = np.asarray(indices, dtype=int)
        return PointCloud(self.points[indices], self.metric, self.names,
                          {key: value[indices] for key, value in self.labels.items()},
                          None if self.trajectory is None else self.trajectory[indices],
                          None if self.time is None else self.time[indices])

    def with_metric(self, metric: ScaledMetric) -> PointCloud:
        return PointCloud(self.points, metric, self.names, self.labels, self.trajectory, self.time)

    # MARK: CSV artifacts

    def to_csv(self, path: PathLike, *, meta: Optional[Dict[str, Any]] = None) -> None:
        """ Write the cloud with coordinate columns, then provenance and label columns when present. """
        columns = list(self.names)
        blocks = [self.points]
        if self.trajectory is not None and self.time is not None:
            columns += [TRAJECTORY_COLUMN, TIME_COLUMN]
            blocks += [self.trajectory.reshape(-1, 1), self.time.reshape(-1, 1)]
        for key in sorted(self.labels):
            columns.append(LABEL_PREFIX + key)
            blocks.append(self.labels[key].reshape(-1, 1))
        meta = dict(meta or {})
        if not self.metric.is_identity:
            meta["metric"] = " ".join(format_number(value) for value in self.metric.diag)
        write_csv(path, columns, np.hstack(blocks) if self.size else np.empty((0, len(columns))), meta=meta)

    @classmethod
    def from_csv(cls, path: PathLike) -> PointCloud:
        artifact = read_csv(path)
        coordinates = [name for name in artifact.columns
                       if name not in (TRAJECTORY_COLUMN, TIME_COLUMN) and not name.startswith(LABEL_PREFIX)]
        points = np.column_stack([artifact.column(name) for name in coordinates]) if coordinates else np.empty((0, 0))
        metric = optional(artifact.meta, "metric", mapping=lambda text: ScaledMetric(np.array([float(value) for value in text.split()])))
        labels = {name[len(LABEL_PREFIX):]: artifact.column(name) for name in artifact.columns if name.startswith(LABEL_PREFIX)}
        has_provenance = TRAJECTORY_COLUMN in artifact.columns and TIME_COLUMN in artifact.columns
        return cls(points.reshape(-1, len(coordinates)), metric, coordinates, labels,
                   artifact.column(TRAJECTORY_COLUMN) if has_provenance else None,
                   artifact.column(TIME_COLUMN) if has_provenance else None)
