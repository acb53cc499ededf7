# pylint: disable=line-too-long, missing-module-docstring

from __future__ import annotations

import logging
import threading
from abc import ABC, abstractmethod
from typing import Any, Callable, Dict, Optional

import numpy as np

from manifold_kinetics.exceptions import InvalidParameterError, UnsupportedSchemeError
from manifold_kinetics.point_cloud import ScaledMetric

log = logging.getLogger(__name__)  # get a module-level logger


def nearest_neighbors(nodes: np.ndarray, query: np.ndarray, count: int) -> np.ndarray:
    """
    Exact nearest neighbours by linear scan.
    :param nodes: N×d matrix of (already rescaled) points.
    :param query: A point of the same space.
    :param count: Number of neighbours, capped at N.
    :return: Indices ordered by increasing distance, ties in index order.
    """
    distances = np.linalg.norm(np.asarray(nodes, dtype=float) - np.asarray(query, dtype=float), axis=1)
    return np.argsort(distances, kind="stable")[:min(count, distances.size)]


class Interpolant(ABC):
    """
    A fitted map from points of an input space to value vectors.
    Inputs are rescaled by the metric before the scheme sees them; Jacobians are returned with respect to the
    unscaled inputs and therefore carry the metric's scale factors.
    """
    scheme = "interpolant"

    def __init__(self, nodes: np.ndarray, values: np.ndarray, metric: Optional[ScaledMetric] = None):
        nodes = np.asarray(nodes, dtype=float)
        nodes = nodes.reshape(-1, 1) if nodes.ndim == 1 else nodes
        values = np.asarray(values, dtype=float)
        values = values.reshape(-1, 1) if values.ndim == 1 else values
        if nodes.ndim != 2 or nodes.shape[0] == 0 or values.shape[0] != nodes.shape[0]:
            raise InvalidParameterError(f"{values.shape[0]} values for {nodes.shape[0]} nodes")
        if not (np.all(np.isfinite(nodes)) and np.all(np.isfinite(values))):
            raise InvalidParameterError("interpolation nodes and values must be finite")
        self.metric = metric if metric is not None else ScaledMetric.identity(nodes.shape[1])
        if self.metric.dimension != nodes.shape[1]:
            raise InvalidParameterError(f"metric has {self.metric.dimension} scale factors for {nodes.shape[1]} coordinates")
        self.nodes = nodes
        self.values = values
        self.scaled_nodes = self.metric.apply(nodes)
        self.flags: Dict[str, Any] = {}

    @property
    def size(self) -> int:
        return self.nodes.shape[0]

    @property
    def dimension(self) -> int:
        return self.nodes.shape[1]

    @property
    def outputs(self) -> int:
        return self.values.shape[1]

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """ Values at one point (returns a vector) or at the rows of a matrix (returns a matrix). """
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            return self._evaluate(self.metric.apply(points))
        return np.array([self._evaluate(row) for row in self.metric.apply(points)]).reshape(points.shape[0], self.outputs)

    def jacobian(self, point: np.ndarray) -> np.ndarray:
        """ outputs × dimension matrix of derivatives at one point. """
        point = np.asarray(point, dtype=float).reshape(-1)
        return self._jacobian(self.metric.apply(point)) * self.metric.diag[None, :]

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return self.evaluate(points)

    def describe(self) -> Dict[str, Any]:
        """ Scheme name, training size and regularization flags, for artifact metadata. """
        return {"scheme": self.scheme, "nodes": self.size, "flags": dict(self.flags)}

    @abstractmethod
    def _evaluate(self, scaled: np.ndarray) -> np.ndarray:
        pass

    def _jacobian(self, scaled: np.ndarray) -> np.ndarray:
        raise UnsupportedSchemeError(self.scheme, "a Jacobian")


class LocalInterpolant(Interpolant):
    """
    Rebuilds an interpolant over the `count` nearest nodes of every query. Neighbour indices are used in ascending
    order, so that a local fit over all nodes is identical to the global one.
    Flags raised by the per-query fits are counted: `flags["regularized"] == 3` means three local systems needed
    regularization so far.
    """

    def __init__(self, nodes: np.ndarray, values: np.ndarray, count: int,
                 builder: Callable[[np.ndarray, np.ndarray], Interpolant], metric: Optional[ScaledMetric] = None,
                 scheme: str = "local"):
        super().__init__(nodes, values, metric)
        if count < 1:
            raise InvalidParameterError(f"the neighbour count must be positive, got {count}")
        self.count = min(count, self.size)
        self.builder = builder
        self.scheme = scheme
        self._flags_lock = threading.Lock()

    def local_fit(self, scaled: np.ndarray) -> Interpolant:
        indices = np.sort(nearest_neighbors(self.scaled_nodes, scaled, self.count))
        fitted = self.builder(self.scaled_nodes[indices], self.values[indices])
        if fitted.flags:
            with self._flags_lock:
                for name in fitted.flags:
                    self.flags[name] = self.flags.get(name, 0) + 1
        return fitted

    def describe(self) -> Dict[str, Any]:
        return {**super().describe(), "neighbors": self.count}

    def _evaluate(self, scaled: np.ndarray) -> np.ndarray:
        return self.local_fit(scaled).evaluate(scaled)

    def _jacobian(self, scaled: np.ndarray) -> np.ndarray:
        return self.local_fit(scaled).jacobian(scaled)
