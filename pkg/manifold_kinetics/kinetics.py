# pylint: disable=line-too-long, missing-module-docstring

# Mechanism documents follow this JSON schema:
#
#   {"species": [{"name": "H2", "mw": 2.016, "composition": {"H": 2}}, ...],
#    "temperature": 1000.0,
#    "reactions": [{"reactants": {"H2": 1}, "products": {"H": 2},
#                   "arrhenius": {"A": 1.0, "b": 0.0, "Ea": 0.0},
#                   "reverse_arrhenius": {"A": 1.0}}, ...],
#    "metadata": {...}}
#
# Only isothermal mass action is supported: the temperature is a fixed scalar and every Arrhenius factor collapses to
# a constant. States are carried as mass-weighted concentrations y_α = W̄_α c_α, so that the polytope totals
# Σ_α c_αβ y_α / W̄_α are first integrals for any molecular weights; with unit weights y is the plain concentration.

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import dacite
import numpy as np
import orjson as json
from dacite import Config, DaciteError
from scipy.constants import R as GAS_CONSTANT

from manifold_kinetics.exceptions import ElementImbalanceError, InvalidParameterError, MechanismDataclassError, \
    MechanismJSONError, MechanismValidationError, NegativeConcentrationError, UnknownNameError, UnknownSpeciesError

log = logging.getLogger(__name__)  # get a module-level logger

CLAMP_TOLERANCE = 1e-12  # negative concentrations above this are treated as zero
FIELD_CLAMP_TOLERANCE = 1e-6  # looser bound used inside vector fields, where integrator stages may undershoot
BALANCE_TOLERANCE = 1e-9


# MARK: mechanism document dataclass definitions

@dataclass
class _ArrheniusEntry:
    A: float  # noqa, pylint: disable=invalid-name
    b: float = 0.0
    Ea: float = 0.0  # noqa, pylint: disable=invalid-name


@dataclass
class _SpeciesEntry:
    name: str
    mw: float
    composition: Dict[str, float]


@dataclass
class _ReactionEntry:
    reactants: Dict[str, int]
    products: Dict[str, int]
    arrhenius: _ArrheniusEntry
    reverse_arrhenius: Optional[_ArrheniusEntry] = None
    name: Optional[str] = None


@dataclass
class _MechanismDocument:
    species: List[_SpeciesEntry]
    temperature: float
    reactions: List[_ReactionEntry]
    metadata: Dict[str, Any] = field(default_factory=dict)


# MARK: public network types

@dataclass(frozen=True)
class Arrhenius:
    """ Modified Arrhenius law k(T) = A·T^b·exp(−Ea/(R_u T)), Ea in J/mol. """
    A: float  # noqa, pylint: disable=invalid-name
    b: float = 0.0
    Ea: float = 0.0  # noqa, pylint: disable=invalid-name

    def rate_constant(self, temperature: float) -> float:
        return self.A * temperature ** self.b * np.exp(-self.Ea / (GAS_CONSTANT * temperature))


@dataclass(frozen=True)
class Species:
    name: str
    mw: float
    composition: Dict[str, float]


@dataclass(frozen=True)
class Reaction:
    name: str
    reactants: Dict[str, int]
    products: Dict[str, int]
    forward: Arrhenius
    reverse: Optional[Arrhenius] = None


@dataclass(frozen=True, eq=False)
class ReactionNetwork:
    """
    Species, elementary reactions and a fixed temperature. The stoichiometric matrices (reactions × species), the
    elemental composition (species × elements) and the rate constants are derived once at construction.
    """
    species: Tuple[Species, ...]
    reactions: Tuple[Reaction, ...]
    temperature: float
    metadata: Dict[str, Any] = field(default_factory=dict)
    elements: Tuple[str, ...] = field(init=False)
    reactant_matrix: np.ndarray = field(init=False)
    product_matrix: np.ndarray = field(init=False)
    composition: np.ndarray = field(init=False)
    molecular_weights: np.ndarray = field(init=False)
    forward_constants: np.ndarray = field(init=False)
    reverse_constants: np.ndarray = field(init=False)

    def __post_init__(self):
        names = self.species_names
        elements = tuple(sorted({element for species in self.species for element in species.composition}))
        reactants = np.array([[reaction.reactants.get(name, 0) for name in names] for reaction in self.reactions], dtype=float).reshape(-1, len(names))
        products = np.array([[reaction.products.get(name, 0) for name in names] for reaction in self.reactions], dtype=float).reshape(-1, len(names))
        object.__setattr__(self, "elements", elements)
        object.__setattr__(self, "reactant_matrix", reactants)
        object.__setattr__(self, "product_matrix", products)
        object.__setattr__(self, "composition", np.array([[species.composition.get(element, 0.0) for element in elements] for species in self.species], dtype=float).reshape(len(names), -1))
        object.__setattr__(self, "molecular_weights", np.array([species.mw for species in self.species], dtype=float))
        object.__setattr__(self, "forward_constants", np.array([reaction.forward.rate_constant(self.temperature) for reaction in self.reactions]))
        object.__setattr__(self, "reverse_constants", np.array([0.0 if reaction.reverse is None else reaction.reverse.rate_constant(self.temperature) for reaction in self.reactions]))

    @property
    def species_names(self) -> List[str]:
        return [species.name for species in self.species]

    @property
    def stoichiometry(self) -> np.ndarray:
        """ Net stoichiometric vectors γ_s = β_s − α_s as a reactions × species matrix. """
        return self.product_matrix - self.reactant_matrix

    def constraint_matrix(self) -> np.ndarray:
        """ Elements × species matrix c_αβ / W̄_α of the admissible polytope. """
        return self.composition.T / self.molecular_weights[None, :]

    def element_totals(self, states: np.ndarray) -> np.ndarray:
        """ Elemental totals Σ_α c_αβ y_α / W̄_α for one state or a stack of states. """
        return np.asarray(states, dtype=float) @ self.constraint_matrix().T


@dataclass(frozen=True, eq=False)
class VectorField:
    """
    A detailed right-hand side y ↦ f(y) with optional knowledge about its slow manifold and reference states.
    `slow_manifold` maps states (rows) to their signed offset from the analytic slow manifold, when one is known.
    """
    name: str
    dimension: int
    rhs: Callable[[np.ndarray], np.ndarray]
    names: Tuple[str, ...]
    parameters: Dict[str, float] = field(default_factory=dict)
    slow_manifold: Optional[Callable[[np.ndarray], np.ndarray]] = None
    network: Optional[ReactionNetwork] = None
    equilibrium: Optional[np.ndarray] = None
    fresh: Optional[np.ndarray] = None
    nonnegative: bool = False

    def __call__(self, state: np.ndarray) -> np.ndarray:
        return self.rhs(np.asarray(state, dtype=float))


# MARK: parsing

def _equation(reaction: _ReactionEntry) -> str:
    def side(terms: Dict[str, int]) -> str:
        return " + ".join(f"{coefficient} {name}" if coefficient != 1 else name for name, coefficient in terms.items())

    arrow = " <=> " if reaction.reverse_arrhenius is not None else " => "
    return side(reaction.reactants) + arrow + side(reaction.products)


def _network_from_dict(data: Any) -> ReactionNetwork:
    if not isinstance(data, dict):
        raise MechanismValidationError("the mechanism document must be a JSON object")
    try:
        document: _MechanismDocument = dacite.from_dict(data_class=_MechanismDocument, data=data,
                                                        config=Config(cast=[float], strict=True))
    except DaciteError as exc:
        raise MechanismDataclassError(exc) from exc

    if not document.temperature > 0:
        raise MechanismValidationError(f"temperature must be positive, got {document.temperature}")
    names = [entry.name for entry in document.species]
    if len(set(names)) != len(names):
        duplicates = sorted({name for name in names if names.count(name) > 1})
        raise MechanismValidationError(f"species names must be unique, repeated: {', '.join(duplicates)}")
    for entry in document.species:
        if not entry.mw > 0:
            raise MechanismValidationError(f"species '{entry.name}' has a non-positive molecular weight {entry.mw}")
        if any(count < 0 for count in entry.composition.values()):
            raise MechanismValidationError(f"species '{entry.name}' has a negative elemental count")

    compositions = {entry.name: entry.composition for entry in document.species}
    elements = sorted({element for entry in document.species for element in entry.composition})
    reactions = []
    for index, entry in enumerate(document.reactions):
        name = entry.name or _equation(entry)
        for species, coefficient in list(entry.reactants.items()) + list(entry.products.items()):
            if species not in compositions:
                raise UnknownSpeciesError(species, name)
            if coefficient < 0:
                raise MechanismValidationError(f"reaction '{name}' has a negative coefficient for '{species}'")
        for element in elements:
            change = sum(coefficient * compositions[species].get(element, 0.0) for species, coefficient in entry.products.items()) \
                - sum(coefficient * compositions[species].get(element, 0.0) for species, coefficient in entry.reactants.items())
            if abs(change) > BALANCE_TOLERANCE:
                raise ElementImbalanceError(name, element)
        if entry.arrhenius.A < 0 or (entry.reverse_arrhenius is not None and entry.reverse_arrhenius.A < 0):
            raise MechanismValidationError(f"reaction '{name}' has a negative pre-exponential factor")
        reverse = None if entry.reverse_arrhenius is None else Arrhenius(**vars(entry.reverse_arrhenius))
        reactions.append(Reaction(name, dict(entry.reactants), dict(entry.products), Arrhenius(**vars(entry.arrhenius)), reverse))
        log.debug("reaction %d parsed: %s", index + 1, name)

    species = tuple(Species(entry.name, entry.mw, dict(entry.composition)) for entry in document.species)
    return ReactionNetwork(species, tuple(reactions), document.temperature, dict(document.metadata))


def parse_mechanism(document: Union[str, bytes, Dict[str, Any]]) -> ReactionNetwork:
    """
    Parse and validate a mechanism document.
    :param document: JSON text (or an already decoded dictionary) in the mechanism schema.
    :return: The validated network.
    :raises:
        MechanismJSONError: The text is not valid JSON; the error carries line and column.
        MechanismDataclassError: Keys are missing, unexpected or of the wrong type.
        UnknownSpeciesError: A reaction uses an undeclared species.
        ElementImbalanceError: A reaction does not conserve an element.
        MechanismValidationError: Duplicate species, non-positive weights or temperature, negative coefficients.
    """
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise MechanismJSONError(exc) from exc
    network = _network_from_dict(document)
    log.info("parsed mechanism with %d species, %d elements and %d reactions", len(network.species), len(network.elements), len(network.reactions))
    return network


# MARK: rates and vector fields

def rates(network: ReactionNetwork, concentrations: np.ndarray, *, tolerance: float = CLAMP_TOLERANCE) -> np.ndarray:
    """
    Mass-action rates Ω_s = k_f Π c_p^{α_sp} − k_r Π c_p^{β_sp}.
    :param network: The reaction network.
    :param concentrations: Molar concentrations, one per species.
    :param tolerance: Negative values down to −tolerance are clamped to zero.
    :return: One net rate per reaction.
    :raises:
        NegativeConcentrationError: A concentration lies below −tolerance.
    """
    concentrations = np.asarray(concentrations, dtype=float)
    negative = np.flatnonzero(concentrations < -tolerance)
    if negative.size:
        raise NegativeConcentrationError(int(negative[0]), float(concentrations[negative[0]]))
    clamped = np.maximum(concentrations, 0.0)
    forward = network.forward_constants * np.prod(clamped[None, :] ** network.reactant_matrix, axis=1)
    reverse = network.reverse_constants * np.prod(clamped[None, :] ** network.product_matrix, axis=1)
    return forward - reverse


def vector_field(network: ReactionNetwork, *, name: str = "mechanism", equilibrium: Optional[np.ndarray] = None,
                 fresh: Optional[np.ndarray] = None) -> VectorField:
    """ The detailed right-hand side f(y) = W̄ ⊙ Σ_s γ_s Ω_s(y / W̄) of a network. """
    weights = network.molecular_weights
    stoichiometry = network.stoichiometry

    def rhs(state: np.ndarray) -> np.ndarray:
        return weights * (stoichiometry.T @ rates(network, state / weights, tolerance=FIELD_CLAMP_TOLERANCE))

    return VectorField(name, len(network.species), rhs, tuple(network.species_names), network=network,
                       equilibrium=equilibrium, fresh=fresh, nonnegative=True)


# MARK: built-in models

def _davis_skodje(gamma: float = 10.0) -> VectorField:
    if not gamma > 1:
        raise InvalidParameterError(f"davis-skodje needs γ > 1, got {gamma}")

    def rhs(state: np.ndarray) -> np.ndarray:
        y1, y2 = state
        return np.array([-y1, -gamma * y2 + ((gamma - 1.0) * y1 + gamma * y1 ** 2) / (1.0 + y1) ** 2])

    def offset(states: np.ndarray) -> np.ndarray:
        states = np.atleast_2d(states)
        return states[:, 1] - states[:, 0] / (1.0 + states[:, 0])

    return VectorField("davis-skodje", 2, rhs, ("y1", "y2"), {"gamma": gamma}, slow_manifold=offset, equilibrium=np.zeros(2))


def _linear_2d(a: float = 1.0, b: float = 10.0) -> VectorField:
    if not (a > 0 and b > 0):
        raise InvalidParameterError(f"linear-2d needs positive rates, got a={a}, b={b}")
    diagonal = np.array([-a, -b])
    slow = 0 if a <= b else 1

    def offset(states: np.ndarray) -> np.ndarray:
        return np.atleast_2d(states)[:, 1 - slow]

    return VectorField("linear-2d", 2, lambda state: diagonal * state, ("y1", "y2"), {"a": a, "b": b},
                       slow_manifold=offset, equilibrium=np.zeros(2))


TOY_EQUILIBRIUM = {"H2": 0.1, "O2": 0.05, "OH": 0.02, "H2O": 0.9}
TOY_FORWARD = ((("H2", 1), ("O2", 1)), (("OH", 2),), 1.0), \
              ((("H2", 1), ("OH", 2)), (("H2O", 2),), 50.0), \
              ((("H2", 2), ("O2", 1)), (("H2O", 2),), 0.5)


def toy_h2_document() -> Dict[str, Any]:
    """
    Mechanism document of the toy hydrogen skeleton: 4 species, 2 elements, 3 reversible reactions with unit molecular
    weights. Reverse constants follow from detailed balance at the fixed equilibrium state TOY_EQUILIBRIUM.
    """
    species = [{"name": "H2", "mw": 1.0, "composition": {"H": 2}},
               {"name": "O2", "mw": 1.0, "composition": {"O": 2}},
               {"name": "OH", "mw": 1.0, "composition": {"H": 1, "O": 1}},
               {"name": "H2O", "mw": 1.0, "composition": {"H": 2, "O": 1}}]
    reactions = []
    for reactants, products, constant in TOY_FORWARD:
        forward = np.prod([TOY_EQUILIBRIUM[name] ** coefficient for name, coefficient in reactants])
        backward = np.prod([TOY_EQUILIBRIUM[name] ** coefficient for name, coefficient in products])
        reactions.append({"reactants": dict(reactants), "products": dict(products),
                          "arrhenius": {"A": constant}, "reverse_arrhenius": {"A": constant * forward / backward}})
    return {"species": species, "temperature": 1000.0, "reactions": reactions,
            "metadata": {"description": "isothermal hydrogen-oxygen skeleton", "enthalpy": None, "pressure": None}}


def _toy_h2_skeleton() -> VectorField:
    network = parse_mechanism(toy_h2_document())
    names = network.species_names
    equilibrium = np.array([TOY_EQUILIBRIUM[name] for name in names])
    hydrogen, oxygen = network.element_totals(equilibrium)[[network.elements.index("H"), network.elements.index("O")]]
    fresh = np.zeros(len(names))
    fresh[names.index("H2")] = hydrogen / 2.0
    fresh[names.index("O2")] = oxygen / 2.0
    return vector_field(network, name="toy-h2-skeleton", equilibrium=equilibrium, fresh=fresh)


BUILTIN_MODELS: Dict[str, Callable[..., VectorField]] = {
    "davis-skodje": _davis_skodje,
    "linear-2d": _linear_2d,
    "toy-h2-skeleton": _toy_h2_skeleton,
}


def builtin_model(name: str, **parameters: float) -> VectorField:
    """
    One of the built-in detailed models.
    :param name: davis-skodje (parameter gamma), linear-2d (parameters a, b) or toy-h2-skeleton.
    :raises:
        UnknownNameError: The name is not a built-in model.
        InvalidParameterError: A parameter is unknown to the model or out of range.
    """
    if name not in BUILTIN_MODELS:
        raise UnknownNameError("model", name)
    try:
        return BUILTIN_MODELS[name](**parameters)
    except TypeError as exc:
        raise InvalidParameterError(f"model '{name}' does not accept parameters {sorted(parameters)}") from exc
