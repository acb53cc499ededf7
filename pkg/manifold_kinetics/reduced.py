# pylint: disable=line-too-long, missing-module-docstring

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import trapezoid
from scipy.interpolate import RegularGridInterpolator

from manifold_kinetics.artifacts import PathLike, read_csv, read_json, write_csv, write_json
from manifold_kinetics.exceptions import ConfigError, EmptyOverlapError, InvalidParameterError, MaskedCellError, \
    NumericalError, OutsideSupportError, RankDeficientJacobianError, TableDomainError, UnknownNameError
from manifold_kinetics.integrator import Trajectory, integrate
from manifold_kinetics.kinetics import VectorField
from manifold_kinetics.operators import OperatorPair
from manifold_kinetics.utilities import parallel_map, timestamp

log = logging.getLogger(__name__)  # get a module-level logger

RightHandSide = Union[VectorField, Callable[[np.ndarray], np.ndarray]]

TABLE_FORMAT_VERSION = 1
CONDITION_LIMIT = 1e10
MASKED_WARNING_FRACTION = 0.5
BOUNDS_TOLERANCE = 1e-12  # relative to the axis length


class Formulation(Enum):
    """ How du/dt is obtained from the detailed right-hand side. """
    CHAIN_RULE = "chain-rule"  # du/dt = ∂ψ/∂y · f(Θ(u))
    PROJECTION = "projection"  # du/dt = (JᵀJ)⁻¹Jᵀ f(Θ(u)), J = ∂Θ/∂u

    @classmethod
    def parse(cls, value: Union[Formulation, str]) -> Formulation:
        if isinstance(value, Formulation):
            return value
        aliases = {"chain": cls.CHAIN_RULE, "chain-rule": cls.CHAIN_RULE, "projection": cls.PROJECTION}
        if str(value).lower() not in aliases:
            raise UnknownNameError("formulation", value)
        return aliases[str(value).lower()]


# MARK: reduced right-hand sides

def reduced_rhs_chainrule(u: np.ndarray, pair: OperatorPair, rhs: RightHandSide) -> np.ndarray:
    """
    du/dt = (∂ψ/∂y)(y) · f(y) at the lifted state y = Θ(u).
    :raises:
        OutsideSupportError: The lifted state is outside the restriction kernel's support.
        UnsupportedSchemeError: The restriction scheme has no Jacobian.
    """
    state = pair.lift(np.asarray(u, dtype=float))
    return pair.restriction_jacobian(state) @ np.asarray(rhs(state), dtype=float)


def reduced_rhs_projection(u: np.ndarray, pair: OperatorPair, rhs: RightHandSide) -> np.ndarray:
    """
    Least-squares projection of f(Θ(u)) onto the columns of the lifting Jacobian.
    :raises:
        RankDeficientJacobianError: The lifting Jacobian has a condition number above 10¹⁰.
    """
    u = np.asarray(u, dtype=float)
    jacobian = pair.lifting_jacobian(u)
    condition = np.linalg.cond(jacobian)
    if not np.isfinite(condition) or condition > CONDITION_LIMIT:
        raise RankDeficientJacobianError(u.tolist(), float(condition))
    velocity = np.asarray(rhs(pair.lift(u)), dtype=float)
    return np.linalg.lstsq(jacobian, velocity, rcond=None)[0]


def direct_rhs(pair: OperatorPair, rhs: RightHandSide,
               formulation: Union[Formulation, str] = Formulation.CHAIN_RULE) -> Callable[[np.ndarray], np.ndarray]:
    """ The reduced right-hand side u ↦ du/dt evaluated through the operators, without tabulation. """
    if Formulation.parse(formulation) is Formulation.PROJECTION:
        return lambda u: reduced_rhs_projection(u, pair, rhs)
    return lambda u: reduced_rhs_chainrule(u, pair, rhs)


# MARK: grid tables

@dataclass(frozen=True)
class GridSpec:
    """ A uniform Cartesian grid over one or two reduced coordinates: per-axis bounds and node counts. """
    lower: Tuple[float, ...]
    upper: Tuple[float, ...]
    counts: Tuple[int, ...]

    def __post_init__(self):
        lower = tuple(float(value) for value in self.lower)
        upper = tuple(float(value) for value in self.upper)
        counts = tuple(int(value) for value in self.counts)
        if not len(lower) == len(upper) == len(counts) or len(counts) not in (1, 2):
            raise InvalidParameterError(f"grids span one or two reduced coordinates, got bounds {lower}, {upper} and counts {counts}")
        if any(count < 2 for count in counts):
            raise InvalidParameterError(f"every axis needs at least two nodes, got {counts}")
        if any(not (np.isfinite(low) and np.isfinite(high) and low < high) for low, high in zip(lower, upper)):
            raise InvalidParameterError(f"grid bounds {lower} must lie below {upper}")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def fit(cls, coordinates: np.ndarray, counts: Sequence[int], padding: float = 0.05) -> GridSpec:
        """ The bounding box of the embedded samples, widened on each side by `padding` times its extent. """
        coordinates = np.asarray(coordinates, dtype=float)
        coordinates = coordinates.reshape(-1, 1) if coordinates.ndim == 1 else coordinates
        if coordinates.shape[0] == 0:
            raise InvalidParameterError("a grid cannot be fitted to an empty set of coordinates")
        low, high = coordinates.min(axis=0), coordinates.max(axis=0)
        margin = padding * np.where(high > low, high - low, 1.0)
        return cls(tuple(low - margin), tuple(high + margin), tuple(counts))

    @property
    def dimension(self) -> int:
        return len(self.counts)

    @property
    def spacing(self) -> np.ndarray:
        return (np.array(self.upper) - np.array(self.lower)) / (np.array(self.counts) - 1)

    @property
    def cell_diagonal(self) -> float:
        return float(np.linalg.norm(self.spacing))

    def axes(self) -> List[np.ndarray]:
        return [np.linspace(low, high, count) for low, high, count in zip(self.lower, self.upper, self.counts)]

    def indices(self) -> np.ndarray:
        """ Integer node indices, last axis varying fastest. """
        return np.stack(np.meshgrid(*[np.arange(count) for count in self.counts], indexing="ij"), axis=-1).reshape(-1, self.dimension)

    def nodes(self) -> np.ndarray:
        """ Node coordinates in the order of `indices`. """
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1).reshape(-1, self.dimension)

    def to_dict(self) -> Dict[str, Any]:
        return {"lower": list(self.lower), "upper": list(self.upper), "counts": list(self.counts)}


@dataclass(frozen=True, eq=False)
class ReducedTable:
    """
    du/dt tabulated on a grid. `values` has shape counts + (m,); `mask` is True where the node holds a valid value.
    Masked nodes store zeros.
    """
    grid: GridSpec
    values: np.ndarray
    mask: np.ndarray
    provenance: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        shape = self.grid.counts
        values = np.asarray(self.values, dtype=float).reshape(shape + (-1,))
        mask = np.asarray(self.mask, dtype=bool).reshape(shape)
        if not np.all(np.isfinite(values[mask])):
            raise InvalidParameterError("table values must be finite at every valid node")
        values = np.where(mask[..., None], values, 0.0)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "_interpolator", RegularGridInterpolator(self.grid.axes(), values, method="linear"))

    @property
    def outputs(self) -> int:
        return self.values.shape[-1]

    @property
    def masked_fraction(self) -> float:
        return float(1.0 - self.mask.mean())

    def evaluate(self, u: np.ndarray) -> np.ndarray:
        """
        Multilinear interpolation inside the enclosing cell.
        :raises:
            TableDomainError: u lies outside the grid rectangle.
            MaskedCellError: a corner carrying weight in the interpolation is masked.
        """
        u = np.asarray(u, dtype=float).reshape(-1)
        if u.size != self.grid.dimension or not np.all(np.isfinite(u)):
            raise TableDomainError(u.tolist())
        lower, upper = np.array(self.grid.lower), np.array(self.grid.upper)
        tolerance = BOUNDS_TOLERANCE * (upper - lower)
        if np.any(u < lower - tolerance) or np.any(u > upper + tolerance):
            raise TableDomainError(u.tolist())
        u = np.clip(u, lower, upper)

        position = (u - lower) / self.grid.spacing
        cell = np.clip(np.floor(position).astype(int), 0, np.array(self.grid.counts) - 2)
        fraction = position - cell
        ranges = [[offset for offset in (0, 1) if (offset == 0 and share < 1) or (offset == 1 and share > 0)]
                  for share in fraction]
        corners = np.stack(np.meshgrid(*ranges, indexing="ij"), axis=-1).reshape(-1, self.grid.dimension) + cell
        if not np.all(self.mask[tuple(corners.T)]):
            raise MaskedCellError(u.tolist())
        return self._interpolator(u[None, :])[0]  # pylint: disable=no-member

    # MARK: JSON header and CSV body

    def to_files(self, json_path: PathLike, csv_path: PathLike, *, meta: Optional[Dict[str, Any]] = None) -> None:
        """ Write the grid and provenance as a JSON header and one CSV row per node (indices, du/dt, mask). """
        header = {"format_version": TABLE_FORMAT_VERSION, "grid": self.grid.to_dict(), "provenance": self.provenance}
        header.update(meta or {})
        write_json(json_path, header)
        index_columns = ["i", "j"][:self.grid.dimension]
        columns = index_columns + [f"du{index + 1}" for index in range(self.outputs)] + ["mask"]
        body = np.column_stack([self.grid.indices(), self.values.reshape(-1, self.outputs), self.mask.reshape(-1, 1)])
        write_csv(csv_path, columns, body, meta={"format_version": TABLE_FORMAT_VERSION, **(meta or {})})

    @classmethod
    def from_files(cls, json_path: PathLike, csv_path: PathLike) -> Tuple[ReducedTable, Dict[str, Any]]:
        """
        :return: The table and the raw JSON header.
        :raises:
            ConfigError: The format version is unknown, or a header key or CSV column is missing.
        """
        header = read_json(json_path)
        if header.get("format_version") != TABLE_FORMAT_VERSION:
            raise ConfigError(f"{json_path}.format_version", f"expected {TABLE_FORMAT_VERSION}, found {header.get('format_version')}")
        if "grid" not in header:
            raise ConfigError(f"{json_path}.grid", "missing key")
        try:
            grid = GridSpec(tuple(header["grid"]["lower"]), tuple(header["grid"]["upper"]), tuple(header["grid"]["counts"]))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"{json_path}.grid", "lower, upper and counts are required", exc) from exc
        artifact = read_csv(csv_path)
        if "mask" not in artifact.columns:
            raise ConfigError(f"{csv_path}.mask", "missing column")
        outputs = [name for name in artifact.columns if name.startswith("du")]
        index_columns = ["i", "j"][:grid.dimension]
        values = np.zeros(grid.counts + (len(outputs),))
        mask = np.zeros(grid.counts, dtype=bool)
        indices = tuple(artifact.column(name).astype(int) for name in index_columns)
        values[indices] = np.column_stack([artifact.column(name) for name in outputs])
        mask[indices] = artifact.column("mask") > 0.5
        return cls(grid, values, mask, dict(header.get("provenance") or {})), header


def tabulate(grid: GridSpec, pair: OperatorPair, rhs: RightHandSide,
             formulation: Union[Formulation, str] = Formulation.CHAIN_RULE, *,
             provenance: Optional[Dict[str, Any]] = None) -> ReducedTable:
    """
    Evaluate the reduced right-hand side at every grid node, in parallel.
    Nodes where lifting, the Jacobian or the projection fail (or yield non-finite values) are masked.
    :param grid: The grid over the reduced coordinates.
    :param pair: Restriction and lifting operators.
    :param rhs: The detailed right-hand side.
    :param formulation: Chain rule or orthogonal projection.
    :param provenance: Extra provenance stored with the table, next to the operator metadata.
    """
    formulation = Formulation.parse(formulation)
    if grid.dimension != pair.reduced_dimension:
        raise InvalidParameterError(f"a {grid.dimension}-D grid cannot tabulate {pair.reduced_dimension} reduced coordinates")
    function = direct_rhs(pair, rhs, formulation)

    def node_value(u: np.ndarray) -> Optional[np.ndarray]:
        try:
            value = np.asarray(function(u), dtype=float)
        except NumericalError as exc:
            log.debug("grid node %s masked: %s", u, exc)
            return None
        return value if np.all(np.isfinite(value)) else None

    results = parallel_map(node_value, list(grid.nodes()))
    mask = np.array([value is not None for value in results])
    values = np.array([value if value is not None else np.zeros(pair.reduced_dimension) for value in results])
    if mask.mean() < 1.0 - MASKED_WARNING_FRACTION:
        log.warning("%d of %d grid nodes are masked; the grid probably exceeds the manifold chart", int((~mask).sum()), mask.size)
    operators = dict(pair.metadata)
    if "flags" in operators:
        operators["flags"] = {role: dict(flags) for role, flags in operators["flags"].items()}
    provenance = {**(provenance or {}), "operators": operators, "formulation": formulation.value,
                  "field": getattr(rhs, "name", None), "parameters": dict(getattr(rhs, "parameters", {}) or {})}
    log.info("tabulated %s on a %s grid, %d nodes masked", formulation.value, "×".join(map(str, grid.counts)), int((~mask).sum()))
    return ReducedTable(grid, values, mask, provenance)


def table_eval(table: ReducedTable, u: np.ndarray) -> np.ndarray:
    return table.evaluate(u)


# MARK: reduced simulation

def simulate_reduced(source: Union[ReducedTable, Callable[[np.ndarray], np.ndarray]], u0: Sequence[float],
                     t_span: Tuple[float, float], *, rel_tol: float = 1e-6, abs_tol: float = 1e-9,
                     t_eval: Optional[Sequence[float]] = None, max_step: float = np.inf) -> Trajectory:
    """
    Integrate the reduced system from u0, either from a table or from a direct right-hand side.
    The run stops with status "domain-exit" once the trajectory leaves the table (or the operators' support).
    :raises:
        TableDomainError, MaskedCellError, OutsideSupportError: u0 itself is outside the domain.
    """
    u0 = np.asarray(u0, dtype=float).reshape(-1)
    if isinstance(source, ReducedTable):
        function, stop_on = source.evaluate, (TableDomainError, MaskedCellError)
    else:
        function, stop_on = source, (OutsideSupportError,)
    function(u0)
    return integrate(function, u0, t_span, rel_tol=rel_tol, abs_tol=abs_tol, t_eval=t_eval, max_step=max_step, stop_on=stop_on)


# MARK: comparison

def deviation_series(first: Trajectory, second: Trajectory) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Both trajectories sampled on the union of their time points inside the common time range.
    :return: Times and the two state matrices.
    :raises:
        EmptyOverlapError: The time ranges do not overlap.
    """
    start = max(first.times[0], second.times[0])
    end = min(first.times[-1], second.times[-1])
    if not end > start:
        raise EmptyOverlapError
    times = np.union1d(first.times, second.times)
    times = times[(times >= start) & (times <= end)]
    return times, first.interpolate(times), second.interpolate(times)


def mean_deviation(times: np.ndarray, values: np.ndarray) -> float:
    """ Time average (1/t̄)∫ values dt by the trapezoidal rule. """
    return float(trapezoid(values, times) / (times[-1] - times[0]))


@dataclass(frozen=True, eq=False)
class ComparisonReport:
    """ Mean deviations between a detailed and a reduced run, and their time series. """
    reduced_deviation: float  # ‖δψ‖
    species_deviation: np.ndarray  # |δy_α| per ambient coordinate
    horizon: float
    times: np.ndarray
    reduced_series: np.ndarray
    species_series: np.ndarray
    names: Tuple[str, ...]
    detailed_seconds: Optional[float] = None
    reduced_seconds: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mean_reduced_deviation": self.reduced_deviation,
            "mean_species_deviation": {name: float(value) for name, value in zip(self.names, self.species_deviation)},
            "horizon": self.horizon,
            "detailed_seconds": self.detailed_seconds,
            "reduced_seconds": self.reduced_seconds,
            "speedup": self.detailed_seconds / self.reduced_seconds if self.detailed_seconds and self.reduced_seconds else None,
            "created": timestamp(),
        }

    def to_files(self, json_path: PathLike, csv_path: PathLike, *, meta: Optional[Dict[str, Any]] = None) -> None:
        document = self.to_dict()
        document.update(meta or {})
        write_json(json_path, document)
        write_csv(csv_path, ["t", "dpsi"] + [f"dy_{name}" for name in self.names],
                  np.column_stack([self.times, self.reduced_series, self.species_series]), meta=meta)


def compare(detailed: Trajectory, reduced: Trajectory, pair: OperatorPair, *, names: Optional[Sequence[str]] = None,
            detailed_seconds: Optional[float] = None, reduced_seconds: Optional[float] = None) -> ComparisonReport:
    """
    Mean deviations between a detailed trajectory and a reduced one over their common time range.
    The detailed states are restricted to ψ^det and the reduced states lifted to y^red on the union time grid; the
    deviations are averaged with the trapezoidal rule and divided by the horizon.
    :raises:
        EmptyOverlapError: The time ranges do not overlap.
    """
    times, detailed_states, reduced_states = deviation_series(detailed, reduced)
    restricted = pair.restrict(detailed_states)
    lifted = pair.lift(reduced_states)
    reduced_series = np.linalg.norm(restricted - reduced_states, axis=1)
    species_series = np.abs(detailed_states - lifted)
    names = tuple(names) if names is not None else tuple(f"y{index + 1}" for index in range(detailed.dimension))
    report = ComparisonReport(mean_deviation(times, reduced_series),
                              np.array([mean_deviation(times, column) for column in species_series.T]),
                              float(times[-1] - times[0]), times, reduced_series, species_series, names,
                              detailed_seconds, reduced_seconds)
    log.info("mean reduced deviation %.6g over a horizon of %.6g", report.reduced_deviation, report.horizon)
    return report
