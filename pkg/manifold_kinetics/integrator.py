# pylint: disable=line-too-long, missing-module-docstring

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence, Tuple, Type, Union, Any

import numpy as np

from manifold_kinetics.artifacts import PathLike, read_csv, write_csv
from manifold_kinetics.exceptions import IntegrationError, InvalidParameterError, StepUnderflowError
from manifold_kinetics.kinetics import VectorField

log = logging.getLogger(__name__)  # get a module-level logger

COMPLETED = "completed"
DOMAIN_EXIT = "domain-exit"

NEGATIVE_WARNING = 1e-6
SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
ALPHA = 0.17  # PI controller: 1/5 − 0.75·BETA
BETA = 0.04
MAX_STEPS = 1_000_000

# Dormand–Prince 5(4) tableau
C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
A = [np.array([]),
     np.array([1 / 5]),
     np.array([3 / 40, 9 / 40]),
     np.array([44 / 45, -56 / 15, 32 / 9]),
     np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
     np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656])]
B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
E = np.array([-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])  # 5th minus embedded 4th order weights
# continuous extension: y(t + θh) = y + h·K^T P [θ, θ², θ³, θ⁴]
P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423]])

RightHandSide = Union[VectorField, Callable[[np.ndarray], np.ndarray]]


@dataclass(frozen=True, eq=False)
class Trajectory:
    """ States at strictly increasing times, with the tolerances that produced them and how the run ended. """
    times: np.ndarray
    states: np.ndarray
    rel_tol: float = 0.0
    abs_tol: float = 0.0
    status: str = COMPLETED

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).reshape(-1)
        states = np.asarray(self.states, dtype=float).reshape(times.size, -1)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)

    @property
    def dimension(self) -> int:
        return self.states.shape[1]

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def interpolate(self, times: np.ndarray) -> np.ndarray:
        """ Piecewise-linear states at the requested times (inside the trajectory's span). """
        times = np.asarray(times, dtype=float)
        return np.column_stack([np.interp(times, self.times, self.states[:, column]) for column in range(self.dimension)])

    def to_csv(self, path: PathLike, names: Sequence[str], *, meta: Optional[Dict[str, Any]] = None) -> None:
        meta = dict(meta or {})
        meta.update({"status": self.status, "rel_tol": self.rel_tol, "abs_tol": self.abs_tol})
        write_csv(path, ["t"] + list(names), np.column_stack([self.times, self.states]), meta=meta)

    @classmethod
    def from_csv(cls, path: PathLike) -> Tuple[Trajectory, Sequence[str], Dict[str, str]]:
        artifact = read_csv(path)
        trajectory = cls(artifact.data[:, 0], artifact.data[:, 1:], float(artifact.meta.get("rel_tol", 0.0)),
                         float(artifact.meta.get("abs_tol", 0.0)), artifact.meta.get("status", COMPLETED))
        return trajectory, artifact.columns[1:], artifact.meta


def _rms(values: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.square(values)))) if values.size else 0.0


def _initial_step(rhs: Callable, state: np.ndarray, slope: np.ndarray, rel_tol: float, abs_tol: float) -> float:
    scale = abs_tol + np.abs(state) * rel_tol
    d0, d1 = _rms(state / scale), _rms(slope / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    d2 = _rms((rhs(state + h0 * slope) - slope) / scale) / h0
    h1 = max(1e-6, h0 * 1e-3) if max(d1, d2) <= 1e-15 else (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1)


def integrate(field: RightHandSide, y0: Sequence[float], t_span: Tuple[float, float], *,
              rel_tol: float = 1e-6, abs_tol: float = 1e-9, t_eval: Optional[Sequence[float]] = None,
              max_step: float = np.inf, first_step: Optional[float] = None, nonnegative: Optional[bool] = None,
              stop_on: Tuple[Type[Exception], ...] = (), max_steps: int = MAX_STEPS) -> Trajectory:
    """
    Integrate y' = f(y) with the Dormand–Prince 5(4) pair, a PI step-size controller and 4th order dense output.
    :param field: A VectorField or a plain callable y ↦ f(y).
    :param y0: Initial state.
    :param t_span: (t0, t1) with t1 > t0.
    :param rel_tol: Relative tolerance of the local error test.
    :param abs_tol: Absolute tolerance of the local error test.
    :param t_eval: Instants at which to report the solution through the continuous extension; every accepted
                   step is reported when None.
    :param max_step: Upper bound on the step size.
    :param first_step: Initial step; estimated from the problem when None.
    :param nonnegative: Clamp negative components after each step (warning below −1e-6); defaults to the
                        field's own flag.
    :param stop_on: Exceptions raised by f that end the run early with status "domain-exit".
    :param max_steps: Bound on the number of attempted steps.
    :return: The trajectory.
    :raises:
        InvalidParameterError: Nonpositive tolerances or a degenerate span.
        StepUnderflowError: The step size collapsed; the problem is too stiff for an explicit method.
        IntegrationError: Non-finite derivatives or too many steps.
    """
    # pylint: disable=too-many-locals, too-many-branches, too-many-statements
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not (rel_tol > 0 and abs_tol > 0):
        raise InvalidParameterError("integration tolerances must be positive")
    if not t1 > t0:
        raise InvalidParameterError(f"the integration span ({t0}, {t1}) is degenerate")
    if not max_step > 0:
        raise InvalidParameterError("the maximum step must be positive")
    rhs = field.rhs if isinstance(field, VectorField) else field
    clamp = field.nonnegative if nonnegative is None and isinstance(field, VectorField) else bool(nonnegative)
    requested = None if t_eval is None else np.sort(np.asarray(t_eval, dtype=float))
    if requested is not None and (requested.size == 0 or requested[0] < t0 or requested[-1] > t1):
        raise InvalidParameterError("requested output instants must lie inside the integration span")

    t = t0
    y = np.asarray(y0, dtype=float).copy()
    times, states = [t0], [y.copy()]
    dense_times, dense_states = [], []
    if requested is not None:
        while len(dense_times) < requested.size and requested[len(dense_times)] <= t0:
            dense_times.append(requested[len(dense_times)])
            dense_states.append(y.copy())

    def result(status: str) -> Trajectory:
        if requested is None:
            return Trajectory(np.array(times), np.array(states), rel_tol, abs_tol, status)
        return Trajectory(np.array(dense_times), np.array(dense_states).reshape(len(dense_times), -1), rel_tol, abs_tol, status)

    try:
        slope = np.asarray(rhs(y), dtype=float)
        if not np.all(np.isfinite(slope)):
            raise IntegrationError(f"the derivative at t = {t0} is not finite")
        h = first_step if first_step is not None else _initial_step(rhs, y, slope, rel_tol, abs_tol)
    except stop_on as exc:
        log.info("integration stopped at t = %.6g: %s", t, exc)
        return result(DOMAIN_EXIT)
    h = min(h, max_step, t1 - t0)

    stages = np.empty((7, y.size))
    previous_error = 1e-4
    rejected = False
    for _ in range(max_steps):
        if t >= t1:
            break
        if h < 10 * np.finfo(float).eps * max(abs(t), abs(t1)):
            raise StepUnderflowError(t, h)
        last = t + 1.01 * h >= t1
        if last:
            h = t1 - t

        try:
            stages[0] = slope
            for index in range(1, 6):
                stages[index] = rhs(y + h * (A[index] @ stages[:index]))
            candidate = y + h * (B @ stages[:6])
            candidate_slope = np.asarray(rhs(candidate), dtype=float)
        except stop_on as exc:
            log.info("integration stopped at t = %.6g: %s", t, exc)
            return result(DOMAIN_EXIT)
        stages[6] = candidate_slope

        scale = abs_tol + rel_tol * np.maximum(np.abs(y), np.abs(candidate))
        error = _rms(h * (E @ stages) / scale)
        if not np.isfinite(error) or not np.all(np.isfinite(candidate_slope)):
            h *= MIN_FACTOR
            rejected = True
            continue

        if error > 1.0:
            h *= max(MIN_FACTOR, SAFETY * error ** -0.2)
            rejected = True
            continue

        t_next = t1 if last else t + h
        if requested is not None:
            coefficients = stages.T @ P
            while len(dense_times) < requested.size and requested[len(dense_times)] <= t_next:
                theta = (requested[len(dense_times)] - t) / h
                sample = y + h * coefficients @ (theta ** np.arange(1, 5))
                dense_times.append(requested[len(dense_times)])
                dense_states.append(np.maximum(sample, 0.0) if clamp else sample)

        if clamp and np.any(candidate < 0):
            if np.min(candidate) < -NEGATIVE_WARNING:
                log.warning("clamped component %d = %.3e to zero at t = %.6g", int(np.argmin(candidate)), float(np.min(candidate)), t_next)
            candidate = np.maximum(candidate, 0.0)
            try:
                candidate_slope = np.asarray(rhs(candidate), dtype=float)
            except stop_on as exc:
                log.info("integration stopped at t = %.6g: %s", t_next, exc)
                return result(DOMAIN_EXIT)

        factor = MAX_FACTOR if error == 0 else SAFETY * error ** -ALPHA * previous_error ** BETA
        factor = min(MAX_FACTOR, max(MIN_FACTOR, factor))
        if rejected:
            factor = min(1.0, factor)
        t, y, slope = t_next, candidate, candidate_slope
        times.append(t)
        states.append(y.copy())
        previous_error = max(error, 1e-4)
        rejected = False
        h = min(h * factor, max_step)
    else:
        if t < t1:
            raise IntegrationError(f"no convergence within {max_steps} steps, reached t = {t:.6g}")

    log.debug("integrated to t = %.6g in %d accepted steps", t, len(times) - 1)
    return result(COMPLETED)
