# pylint: disable=line-too-long, missing-module-docstring

import logging
from typing import Any, Callable, Dict, Optional

import numpy as np

from manifold_kinetics.exceptions import InvalidParameterError, UnknownNameError
from manifold_kinetics.point_cloud import PointCloud

log = logging.getLogger(__name__)  # get a module-level logger

CYLINDER_DEFAULTS = {"radius": 1.0, "length": 2.0, "fraction": 0.75}


def multiscale_target(x: np.ndarray) -> np.ndarray:
    """ sin(x) plus a fine oscillation whose amplitude grows along [0, 10π]. """
    x = np.asarray(x, dtype=float)
    return np.sin(x) + 0.5 * (x / (10.0 * np.pi)) ** 4 * np.sin(6.0 * x)


def _wrap(square: np.ndarray, radius: float, length: float, fraction: float) -> PointCloud:
    """ Bend points of the unit square around `fraction` of a cylinder; x is the angular, y the axial coordinate. """
    theta = 2.0 * np.pi * fraction * square[:, 0]
    z = length * square[:, 1]
    points = np.column_stack([radius * np.cos(theta), radius * np.sin(theta), z])
    return PointCloud(points, names=["x", "y", "z"], labels={"theta": theta, "z": z})


def _cylinder_uniform(rng: np.random.Generator, n: int = 2000, **shape: float) -> PointCloud:
    return _wrap(rng.random((n, 2)), **{**CYLINDER_DEFAULTS, **shape})


def _grid_cells(rows: int, cols: int) -> np.ndarray:
    if rows < 2 or cols < 2:
        raise InvalidParameterError(f"a grid needs at least 2×2 points, got {rows}×{cols}")
    i, j = np.meshgrid(np.arange(cols), np.arange(rows))
    return np.column_stack([i.ravel(), j.ravel()]).astype(float)


def _cylinder_grid(_: np.random.Generator, rows: int = 40, cols: int = 40, **shape: float) -> PointCloud:
    cells = _grid_cells(rows, cols)
    return _wrap((cells + 0.5) / [cols, rows], **{**CYLINDER_DEFAULTS, **shape})


def _cylinder_jittered(rng: np.random.Generator, rows: int = 40, cols: int = 40, **shape: float) -> PointCloud:
    """ One uniformly random point in each small square of a rows × cols partition of the unit square. """
    cells = _grid_cells(rows, cols)
    return _wrap((cells + rng.random(cells.shape)) / [cols, rows], **{**CYLINDER_DEFAULTS, **shape})


def _circle(rng: np.random.Generator, n: int = 350, harmonic: int = 3) -> PointCloud:
    angle = np.sort(2.0 * np.pi * rng.random(n))
    points = np.column_stack([np.cos(angle), np.sin(angle)])
    return PointCloud(points, names=["x", "y"], labels={"angle": angle, "target": np.cos(harmonic * angle)})


def _segment(_: np.random.Generator, n: int = 500, length: float = 1.0) -> PointCloud:
    x = np.linspace(0.0, length, n)
    return PointCloud(x.reshape(-1, 1), names=["x"], labels={"x": x})


def _square_grid(_: np.random.Generator, rows: int = 40, cols: int = 40) -> PointCloud:
    cells = _grid_cells(rows, cols)
    points = cells / [cols - 1, rows - 1]
    return PointCloud(points, names=["x", "y"], labels={"x": points[:, 0], "y": points[:, 1]})


SYNTHETIC_KINDS: Dict[str, Callable[..., PointCloud]] = {
    "cylinder-uniform": _cylinder_uniform,
    "cylinder-grid": _cylinder_grid,
    "cylinder-jittered": _cylinder_jittered,
    "circle": _circle,
    "segment": _segment,
    "square-grid": _square_grid,
}


def synthetic_cloud(kind: str, parameters: Optional[Dict[str, Any]] = None, rng: Optional[np.random.Generator] = None) -> PointCloud:
    """
    One of the benchmark clouds, with its generating coordinates attached as labels.
    :param kind: cylinder-uniform (n, radius, length, fraction), cylinder-grid and cylinder-jittered (rows, cols,
                 radius, length, fraction), circle (n, harmonic), segment (n, length) or square-grid (rows, cols).
    :param parameters: Overrides of the kind's defaults.
    :param rng: Random source for the random kinds; a fresh default generator when None.
    :raises:
        UnknownNameError: The kind is not known.
        InvalidParameterError: A parameter is not accepted by the kind or is out of range.
    """
    if kind not in SYNTHETIC_KINDS:
        raise UnknownNameError("synthetic kind", kind)
    parameters = dict(parameters or {})
    for key in ("n", "rows", "cols", "harmonic"):
        if key in parameters:
            parameters[key] = int(parameters[key])
    if parameters.get("n", 2) < 1:
        raise InvalidParameterError(f"the point count must be positive, got {parameters['n']}")
    try:
        cloud = SYNTHETIC_KINDS[kind](rng if rng is not None else np.random.default_rng(), **parameters)
    except TypeError as exc:
        raise InvalidParameterError(f"synthetic kind '{kind}' does not accept parameters {sorted(parameters)}") from exc
    log.debug("generated %s cloud of %d points", kind, cloud.size)
    return cloud
