# pylint: disable=line-too-long, missing-module-docstring

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Dict, Optional, Type, Union

import numpy as np
from dacite import Config, DaciteError, from_dict

from manifold_kinetics.dmap import DiffusionEmbedding
from manifold_kinetics.exceptions import ConfigError, InvalidParameterError, UnknownNameError, UnsupportedSchemeError
from manifold_kinetics.geometric_harmonics import GeometricHarmonics
from manifold_kinetics.interpolation import Interpolant
from manifold_kinetics.kriging import KrigingInterpolant, regression_basis
from manifold_kinetics.laplacian_pyramids import LaplacianPyramid
from manifold_kinetics.nystrom import NystromRestriction
from manifold_kinetics.point_cloud import PointCloud, ScaledMetric
from manifold_kinetics.rbf import RbfInterpolant
from manifold_kinetics.utilities import checksum

log = logging.getLogger(__name__)  # get a module-level logger


class Scheme(Enum):
    """ Extension families usable as restriction (ambient → reduced) or lifting (reduced → ambient). """
    NYSTROM = "nystrom"  # restriction only
    RBF = "rbf"
    KRIGING = "kriging"
    LP = "lp"
    GH = "gh"

    @classmethod
    def parse(cls, value: Union[Scheme, str]) -> Scheme:
        if isinstance(value, Scheme):
            return value
        try:
            return cls(str(value).lower())
        except ValueError as exc:
            raise UnknownNameError("scheme", value) from exc


# MARK: scheme configurations

def _check_neighbors(nn: Optional[int], minimum: int):
    if nn is not None and nn < minimum:
        raise InvalidParameterError(f"the neighbour count must be at least {minimum}, got {nn}")


@dataclass(frozen=True)
class RbfConfig:
    p: int = 3
    nn: Optional[int] = 50  # None fits all samples at once

    def __post_init__(self):
        if self.p < 1 or self.p % 2 == 0:
            raise InvalidParameterError(f"the radial power must be an odd positive integer, got {self.p}")
        _check_neighbors(self.nn, 2)


@dataclass(frozen=True)
class KrigingConfig:
    order: int = 2
    theta: float = 1e-3
    nn: Optional[int] = 8

    def __post_init__(self):
        if self.order not in (0, 1, 2):
            raise InvalidParameterError(f"the regression order must be 0, 1 or 2, got {self.order}")
        if not self.theta > 0:
            raise InvalidParameterError(f"the correlation parameter must be positive, got {self.theta}")
        _check_neighbors(self.nn, 1)


@dataclass(frozen=True)
class LpConfig:
    sigma0: float = 0.5
    max_level: int = 20
    err: float = 1e-6
    nn: Optional[int] = 80

    def __post_init__(self):
        if not (self.sigma0 > 0 and self.err > 0) or self.max_level < 0:
            raise InvalidParameterError(f"invalid pyramid parameters σ₀ = {self.sigma0}, err = {self.err}, max level = {self.max_level}")
        _check_neighbors(self.nn, 1)


@dataclass(frozen=True)
class GhConfig:
    epsilon0: Optional[float] = None  # median squared distance of the fit samples when None
    delta: float = 1e-3
    err: float = 1e-3
    nn: Optional[int] = None
    max_levels: int = 20

    def __post_init__(self):
        if self.epsilon0 is not None and not self.epsilon0 > 0:
            raise InvalidParameterError(f"the initial kernel scale must be positive, got {self.epsilon0}")
        if not (0 < self.delta < 1 and self.err > 0) or self.max_levels < 1:
            raise InvalidParameterError(f"invalid harmonics parameters δ = {self.delta}, err = {self.err}, max levels = {self.max_levels}")
        _check_neighbors(self.nn, 1)


@dataclass(frozen=True)
class NystromConfig:
    pass


SchemeConfig = Union[RbfConfig, KrigingConfig, LpConfig, GhConfig, NystromConfig]

CONFIG_TYPES: Dict[Scheme, Type] = {
    Scheme.NYSTROM: NystromConfig,
    Scheme.RBF: RbfConfig,
    Scheme.KRIGING: KrigingConfig,
    Scheme.LP: LpConfig,
    Scheme.GH: GhConfig,
}


def scheme_config(scheme: Union[Scheme, str], parameters: Optional[Dict[str, Any]] = None, *, path: str = "operators") -> SchemeConfig:
    """
    Build the configuration of a scheme from a JSON-style dictionary.
    :param scheme: The scheme the parameters belong to.
    :param parameters: Keyword values of the configuration, defaults being used for absent keys.
    :param path: Dotted location of the parameters in the enclosing document, used in error messages.
    :raises:
        ConfigError: A key is unknown or a value has the wrong type.
    """
    scheme = Scheme.parse(scheme)
    try:
        return from_dict(CONFIG_TYPES[scheme], parameters or {}, config=Config(cast=[float], strict=True))
    except DaciteError as exc:
        raise ConfigError(f"{path}.{getattr(exc, 'field_path', None) or scheme.value}", str(exc), exc) from exc


def fit_interpolant(scheme: Union[Scheme, str], config: SchemeConfig, nodes: np.ndarray, values: np.ndarray,
                    metric: Optional[ScaledMetric] = None) -> Interpolant:
    """ Fit one of the interpolating schemes to node/value pairs. Nyström is built from an embedding instead. """
    scheme = Scheme.parse(scheme)
    if not isinstance(config, CONFIG_TYPES[scheme]):
        raise InvalidParameterError(f"a {type(config).__name__} cannot configure the '{scheme.value}' scheme")
    if scheme is Scheme.RBF:
        return RbfInterpolant.fit(nodes, values, p=config.p, nn=config.nn, metric=metric)
    if scheme is Scheme.KRIGING:
        nodes = np.asarray(nodes, dtype=float)
        dimension = 1 if nodes.ndim == 1 else nodes.shape[1]
        basis_size = regression_basis(np.zeros((1, dimension)), config.order).shape[1]
        if config.nn is not None and config.nn < basis_size:
            raise InvalidParameterError(f"order-{config.order} Kriging in {dimension}-D needs nn ≥ {basis_size}, got {config.nn}")
        return KrigingInterpolant.fit(nodes, values, order=config.order, theta=config.theta, nn=config.nn, metric=metric)
    if scheme is Scheme.LP:
        return LaplacianPyramid.fit(nodes, values, sigma0=config.sigma0, max_level=config.max_level, err=config.err, nn=config.nn, metric=metric)
    if scheme is Scheme.GH:
        return GeometricHarmonics.fit(nodes, values, epsilon0=config.epsilon0, delta=config.delta, err=config.err,
                                      max_levels=config.max_levels, nn=config.nn, metric=metric)
    raise UnsupportedSchemeError(scheme.value, "a fit to node values")


# MARK: operator pairs

@dataclass(frozen=True, eq=False)
class OperatorPair:
    """
    Restriction ψ: y ↦ u and lifting Θ: u ↦ y trained on the same cloud and embedding.
    Jacobians are available where the underlying scheme provides them.
    """
    restriction: Interpolant
    lifting: Interpolant
    restriction_scheme: Scheme
    lifting_scheme: Scheme
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def reduced_dimension(self) -> int:
        return self.restriction.outputs

    @property
    def ambient_dimension(self) -> int:
        return self.lifting.outputs

    def restrict(self, y: np.ndarray) -> np.ndarray:
        return self.restriction.evaluate(y)

    def restriction_jacobian(self, y: np.ndarray) -> np.ndarray:
        """ m×n matrix ∂ψ/∂y. """
        return self.restriction.jacobian(y)

    def lift(self, u: np.ndarray) -> np.ndarray:
        return self.lifting.evaluate(u)

    def lifting_jacobian(self, u: np.ndarray) -> np.ndarray:
        """ n×m matrix ∂Θ/∂u. """
        return self.lifting.jacobian(u)


def make_operator_pair(restriction: Union[Scheme, str], lifting: Union[Scheme, str], cloud: PointCloud,
                       embedding: DiffusionEmbedding, *, restriction_config: Optional[SchemeConfig] = None,
                       lifting_config: Optional[SchemeConfig] = None) -> OperatorPair:
    """
    Train a restriction and a lifting operator on a cloud and its embedding.
    Restriction maps the cloud points (under the cloud's metric) to the selected eigenvector entries; lifting maps
    those entries back to the points under the plain reduced-space distance.
    :param restriction: Restriction scheme.
    :param lifting: Lifting scheme; Nyström is not accepted here.
    :param cloud: Training samples.
    :param embedding: Diffusion embedding of `cloud` with its independent coordinates selected.
    :param restriction_config: Parameters of the restriction scheme, its defaults when None.
    :param lifting_config: Parameters of the lifting scheme, its defaults when None.
    :raises:
        UnsupportedSchemeError: Nyström was requested for lifting.
        InvalidParameterError: The embedding does not match the cloud or selects no coordinate.
    """
    restriction_scheme, lifting_scheme = Scheme.parse(restriction), Scheme.parse(lifting)
    if lifting_scheme is Scheme.NYSTROM:
        raise UnsupportedSchemeError(lifting_scheme.value, "a lifting operator")
    if embedding.size != cloud.size:
        raise InvalidParameterError(f"the embedding has {embedding.size} rows for a cloud of {cloud.size} points")
    if not embedding.selected:
        raise InvalidParameterError("the embedding selects no reduced coordinate")
    restriction_config = restriction_config if restriction_config is not None else CONFIG_TYPES[restriction_scheme]()
    lifting_config = lifting_config if lifting_config is not None else CONFIG_TYPES[lifting_scheme]()
    reduced = embedding.selected_vectors()

    if restriction_scheme is Scheme.NYSTROM:
        restriction_operator: Interpolant = NystromRestriction(embedding, cloud)
    else:
        restriction_operator = fit_interpolant(restriction_scheme, restriction_config, cloud.points, reduced, cloud.metric)
    lifting_operator = fit_interpolant(lifting_scheme, lifting_config, reduced, cloud.points)

    metadata = {
        "restriction": {"scheme": restriction_scheme.value, "config": asdict(restriction_config)},
        "lifting": {"scheme": lifting_scheme.value, "config": asdict(lifting_config)},
        "training_checksum": checksum(cloud.points, reduced),
        "epsilon": embedding.epsilon,
        "selected": list(embedding.selected),
        # the operators' own dicts: local fits keep adding their flags as queries arrive
        "flags": {"restriction": restriction_operator.flags, "lifting": lifting_operator.flags},
    }
    log.info("operator pair %s restriction / %s lifting trained on %d samples", restriction_scheme.value, lifting_scheme.value, cloud.size)
    return OperatorPair(restriction_operator, lifting_operator, restriction_scheme, lifting_scheme, metadata)
