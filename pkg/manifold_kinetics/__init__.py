from manifold_kinetics.dmap import DiffusionEmbedding, EpsilonRule, diffusion_map
from manifold_kinetics.exceptions import ManifoldKineticsError, NumericalError, UsageError
from manifold_kinetics.integrator import Trajectory, integrate
from manifold_kinetics.kinetics import ReactionNetwork, VectorField, builtin_model, parse_mechanism
from manifold_kinetics.operators import OperatorPair, Scheme, make_operator_pair
from manifold_kinetics.point_cloud import PointCloud, ScaledMetric
from manifold_kinetics.presets import Preset, method_preset
from manifold_kinetics.reduced import ComparisonReport, Formulation, GridSpec, ReducedTable, compare, simulate_reduced, tabulate
from manifold_kinetics.sampling import Polytope, SamplingPlan, harvest


__all__ = [
    "ComparisonReport",
    "DiffusionEmbedding",
    "EpsilonRule",
    "Formulation",
    "GridSpec",
    "ManifoldKineticsError",
    "NumericalError",
    "OperatorPair",
    "PointCloud",
    "Polytope",
    "Preset",
    "ReactionNetwork",
    "ReducedTable",
    "SamplingPlan",
    "ScaledMetric",
    "Scheme",
    "Trajectory",
    "UsageError",
    "VectorField",
    "builtin_model",
    "compare",
    "diffusion_map",
    "harvest",
    "integrate",
    "make_operator_pair",
    "method_preset",
    "parse_mechanism",
    "simulate_reduced",
    "tabulate",
]
