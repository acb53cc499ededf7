# pylint: disable=line-too-long, missing-module-docstring, missing-class-docstring

from typing import Any, Optional, Sequence

from dacite import DaciteError
from orjson import JSONDecodeError


class ManifoldKineticsError(Exception):  # base class to simplify bulk error handling
    pass


class UsageError(ManifoldKineticsError):  # the caller supplied something unusable; the CLI maps these to exit code 2
    pass


class NumericalError(ManifoldKineticsError):  # a computation failed on valid input; the CLI maps these to exit code 1
    pass


def _format_vector(values: Optional[Sequence[float]]) -> str:
    return "(" + ", ".join(f"{float(value):.6g}" for value in values) + ")" if values is not None else "(?)"


# MARK: usage errors

class InvalidParameterError(UsageError, ValueError):  # an argument is outside its admissible range
    def __init__(self, message: str):
        self.message = message
        super().__init__(message)

    def __str__(self):
        return f"InvalidParameterError: {self.message}"


class NonFiniteStateError(UsageError):  # a state vector holds NaN or infinite entries
    def __init__(self, row: int):
        self.row = row
        super().__init__()

    def __str__(self):
        return f"NonFiniteStateError: row {self.row} holds a non-finite value"


class DegenerateCloudError(UsageError):  # the cloud has no spatial extent (e.g. all points equal)
    pass

    def __str__(self):
        return "DegenerateCloudError: all pairwise distances vanish"


class EmptyPolytopeError(UsageError):  # no vertex satisfies the equalities together with nonnegativity
    pass

    def __str__(self):
        return "EmptyPolytopeError: the admissible polytope is empty"


class UnknownNameError(UsageError):  # a model, synthetic kind, preset or scheme name is not recognised
    def __init__(self, kind: str, name: Any):
        self.kind = kind
        self.name = name
        super().__init__()

    def __str__(self):
        return f"UnknownNameError: unknown {self.kind} '{self.name}'"


class UnsupportedSchemeError(UsageError):  # a scheme was requested for a role it cannot play
    def __init__(self, scheme: str, role: str):
        self.scheme = scheme
        self.role = role
        super().__init__()

    def __str__(self):
        return f"UnsupportedSchemeError: '{self.scheme}' cannot provide {self.role}"


class MechanismJSONError(UsageError):  # the mechanism document is not valid JSON
    def __init__(self, error: JSONDecodeError):
        self.upstream_error = error
        self.line = getattr(error, "lineno", None)
        self.column = getattr(error, "colno", None)
        super().__init__()

    def __str__(self):
        return f"MechanismJSONError: malformed JSON at line {self.line}, column {self.column}"


class MechanismDataclassError(UsageError):  # the mechanism document does not follow the schema
    def __init__(self, error: DaciteError):
        self.upstream_error = error
        super().__init__()

    def __str__(self):
        return f"MechanismDataclassError: {self.upstream_error}"


class MechanismValidationError(UsageError):  # species data of the mechanism is inconsistent
    def __init__(self, message: str):
        self.message = message
        super().__init__()

    def __str__(self):
        return f"MechanismValidationError: {self.message}"


class UnknownSpeciesError(UsageError):  # a reaction refers to a species that was not declared
    def __init__(self, species: str, reaction: str):
        self.species = species
        self.reaction = reaction
        super().__init__()

    def __str__(self):
        return f"UnknownSpeciesError: reaction '{self.reaction}' uses undeclared species '{self.species}'"


class ElementImbalanceError(UsageError):  # a reaction creates or destroys atoms of an element
    def __init__(self, reaction: str, element: str):
        self.reaction = reaction
        self.element = element
        super().__init__()

    def __str__(self):
        return f"ElementImbalanceError: reaction '{self.reaction}' does not conserve element '{self.element}'"


class ConfigError(UsageError):  # a configuration document is missing keys, has wrong types, or mismatches the schema
    def __init__(self, path: str, message: str, error: Optional[Exception] = None):
        self.path = path
        self.message = message
        self.upstream_error = error
        super().__init__()

    def __str__(self):
        return f"ConfigError: {self.path}: {self.message}"


class ProvenanceMismatchError(UsageError):  # artifacts produced by different configurations were combined
    def __init__(self, expected: str, found: str, artifact: str):
        self.expected = expected
        self.found = found
        self.artifact = artifact
        super().__init__()

    def __str__(self):
        return f"ProvenanceMismatchError: {self.artifact} carries config hash {self.found}, expected {self.expected}"


# MARK: numerical errors

class EigensolverError(NumericalError):  # an eigenpair failed its residual check
    def __init__(self, index: int, residual: float):
        self.index = index
        self.residual = residual
        super().__init__()

    def __str__(self):
        return f"EigensolverError: eigenpair {self.index} has residual norm {self.residual:.3e}"


class NegativeConcentrationError(NumericalError):  # a concentration is negative beyond the clamping tolerance
    def __init__(self, index: int, value: float):
        self.index = index
        self.value = value
        super().__init__()

    def __str__(self):
        return f"NegativeConcentrationError: species {self.index} has concentration {self.value:.3e}"


class IntegrationError(NumericalError):  # the ODE integrator could not complete the requested span
    def __init__(self, message: str):
        self.message = message
        super().__init__()

    def __str__(self):
        return f"IntegrationError: {self.message}"


class StepUnderflowError(IntegrationError):  # the step size collapsed below floating-point resolution
    def __init__(self, time: float, step: float):
        self.time = time
        self.step = step
        super().__init__(f"step size {step:.3e} underflowed at t = {time:.6g}; the problem is too stiff for the "
                         f"explicit integrator, loosen the tolerances or shorten the horizon")

    def __str__(self):
        return f"StepUnderflowError: {self.message}"


class OutsideSupportError(NumericalError):  # all kernel weights underflow for a query point
    def __init__(self, point: Optional[Sequence[float]] = None):
        self.point = point
        super().__init__()

    def __str__(self):
        return f"OutsideSupportError: query {_format_vector(self.point)} is outside kernel support"


class RankDeficientJacobianError(NumericalError):  # the lifting Jacobian has no full column rank
    def __init__(self, point: Sequence[float], condition: float):
        self.point = point
        self.condition = condition
        super().__init__()

    def __str__(self):
        return f"RankDeficientJacobianError: lifting Jacobian at node {_format_vector(self.point)} has condition number {self.condition:.3e}"


class SingularSystemError(NumericalError):  # an interpolation system stays singular after regularization
    def __init__(self, scheme: str, size: int):
        self.scheme = scheme
        self.size = size
        super().__init__()

    def __str__(self):
        return f"SingularSystemError: the {self.size}×{self.size} {self.scheme} system is singular"


class TableDomainError(NumericalError):  # a table query lies outside the tabulated rectangle
    def __init__(self, point: Sequence[float]):
        self.point = point
        super().__init__()

    def __str__(self):
        return f"TableDomainError: {_format_vector(self.point)} is outside the table bounds"


class MaskedCellError(NumericalError):  # a table query falls into a cell with an invalid node
    def __init__(self, point: Sequence[float]):
        self.point = point
        super().__init__()

    def __str__(self):
        return f"MaskedCellError: the cell enclosing {_format_vector(self.point)} holds a masked node"


class EmptyOverlapError(NumericalError):  # two trajectories share no time interval
    pass

    def __str__(self):
        return "EmptyOverlapError: the trajectories do not overlap in time"
