# pylint: disable=line-too-long, missing-module-docstring

# Every stage reads the cloud/embedding/table artifacts of the previous stages from --out and writes its own there.
# Artifacts carry the hash of the configuration sections their stage depends on; `compare` refuses artifacts whose
# hash disagrees with the current configuration unless --force is given.

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from dacite import Config, DaciteError, from_dict

from manifold_kinetics.artifacts import read_json, write_json
from manifold_kinetics.dmap import DiffusionEmbedding, EpsilonRule, diffusion_map
from manifold_kinetics.exceptions import ConfigError, InvalidParameterError, ManifoldKineticsError, NumericalError, \
    ProvenanceMismatchError, UsageError
from manifold_kinetics.integrator import Trajectory, integrate
from manifold_kinetics.kinetics import VectorField, builtin_model, parse_mechanism, vector_field
from manifold_kinetics.operators import OperatorPair, make_operator_pair, scheme_config
from manifold_kinetics.point_cloud import PointCloud, ScaledMetric
from manifold_kinetics.presets import method_preset
from manifold_kinetics.reduced import Formulation, GridSpec, ReducedTable, compare, direct_rhs, simulate_reduced, tabulate
from manifold_kinetics.sampling import SamplingPlan, generator, harvest, subsample
from manifold_kinetics.synthetic import synthetic_cloud
from manifold_kinetics.utilities import Stopwatch, config_hash

log = logging.getLogger(__name__)  # get a module-level logger

SCHEMA_VERSION = 1
EXIT_SUCCESS, EXIT_NUMERICAL, EXIT_USAGE = 0, 1, 2

CLOUD_FILE = "cloud.csv"
EMBEDDING_FILES = ("embedding.csv", "embedding.json")
TABLE_FILES = ("table.json", "table.csv")
REDUCED_FILE = "reduced.csv"
DETAILED_FILE = "detailed.csv"
REPORT_FILES = ("report.json", "deviation.csv")
TIMING_FILE = "timing.json"  # wall-clock seconds, kept out of the byte-reproducible CSV files

# harvest boxes of the analytic models, which have no reaction polytope
DEFAULT_VERTICES = {
    "davis-skodje": [[0.5, 0.0], [2.0, 0.0], [0.5, 1.5], [2.0, 1.5]],
    "linear-2d": [[-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0], [1.0, 1.0]],
}

# configuration sections each stage depends on
STAGE_SECTIONS = {
    "sample": ("sampling",),
    "embed": ("sampling", "embedding"),
    "tabulate": ("sampling", "embedding", "operators", "grid"),
    "simulate": ("sampling", "embedding", "operators", "grid", "simulation"),
}
PATH_KEYS = ("out", "mechanism")


# MARK: pipeline configuration

@dataclass(frozen=True)
class SamplingSection:
    model: Optional[str] = None
    parameters: Dict[str, float] = field(default_factory=dict)
    mechanism: Optional[str] = None  # path of a mechanism JSON document
    reference_state: Optional[List[float]] = None  # polytope reference of a mechanism, also its equilibrium guess
    synthetic: Optional[str] = None
    synthetic_parameters: Dict[str, float] = field(default_factory=dict)
    vertices: Optional[List[List[float]]] = None
    n_trajectories: int = 100
    p: float = 1.5
    vertex_subset_size: Optional[int] = None
    tau_f: float = 0.3
    t_end: float = 5.0
    d_min: float = 0.0
    retention: Optional[float] = None
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10


@dataclass(frozen=True)
class EmbeddingSection:
    count: int = 20
    coordinates: int = 2
    epsilon: Optional[float] = None
    epsilon_rule: str = EpsilonRule.CRITICAL.value
    multiplier: float = 2.0
    residual_threshold: float = 0.3
    rescale: bool = False  # scale every coordinate by 1/max before measuring distances


@dataclass(frozen=True)
class SchemeSection:
    scheme: str
    parameters: Dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class OperatorsSection:
    preset: Optional[int] = 2
    lifting: Optional[SchemeSection] = None  # explicit schemes take precedence over the preset
    restriction: Optional[SchemeSection] = None
    formulation: Optional[str] = None


@dataclass(frozen=True)
class GridSection:
    counts: List[int] = field(default_factory=lambda: [60, 60])
    lower: Optional[List[float]] = None  # fitted to the embedded samples when absent
    upper: Optional[List[float]] = None
    padding: float = 0.05


@dataclass(frozen=True)
class SimulationSection:
    y0: Optional[List[float]] = None  # detailed start; the first cloud point when absent
    u0: Optional[List[float]] = None  # reduced start; the restriction of y0 when absent
    t_end: float = 1.0
    samples: int = 201
    source: str = "table"  # or "direct"
    rel_tol: float = 1e-6
    abs_tol: float = 1e-9


@dataclass(frozen=True)
class PipelineConfig:
    schema_version: int
    seed: int = 0
    out: str = "."
    sampling: SamplingSection = field(default_factory=SamplingSection)
    embedding: EmbeddingSection = field(default_factory=EmbeddingSection)
    operators: OperatorsSection = field(default_factory=OperatorsSection)
    grid: GridSection = field(default_factory=GridSection)
    simulation: SimulationSection = field(default_factory=SimulationSection)


def load_config(path: Optional[str]) -> PipelineConfig:
    """
    Read a pipeline configuration; defaults only when no path is given.
    :raises:
        ConfigError: The file is missing or malformed, a key is missing, unknown or mistyped, or the schema version differs.
    """
    if path is None:
        return PipelineConfig(schema_version=SCHEMA_VERSION)
    data = read_json(path)
    if not isinstance(data, dict):
        raise ConfigError(path, "the configuration must be a JSON object")
    if "schema_version" not in data:
        raise ConfigError("schema_version", "missing key")
    try:
        config = from_dict(PipelineConfig, data, config=Config(cast=[float], strict=True))
    except DaciteError as exc:
        raise ConfigError(getattr(exc, "field_path", None) or ",".join(sorted(getattr(exc, "keys", []))) or path, str(exc), exc) from exc
    if config.schema_version != SCHEMA_VERSION:
        raise ConfigError("schema_version", f"expected {SCHEMA_VERSION}, found {config.schema_version}")
    return config


def stage_hash(config: PipelineConfig, stage: str) -> str:
    """ Hash of the schema version, seed and the sections a stage depends on, input and output paths excluded. """
    document: Dict[str, Any] = {"schema_version": config.schema_version, "seed": config.seed}
    for section in STAGE_SECTIONS[stage]:
        document[section] = {key: value for key, value in asdict(getattr(config, section)).items() if key not in PATH_KEYS}
    return config_hash(document)


def _parse_vector(text: str) -> List[float]:
    try:
        return [float(value) for value in text.split(",")]
    except ValueError as exc:
        raise InvalidParameterError(f"'{text}' is not a comma-separated list of numbers") from exc


def _parse_grid(text: str) -> List[int]:
    try:
        counts = [int(value) for value in text.lower().split("x")]
    except ValueError as exc:
        raise InvalidParameterError(f"'{text}' is not a grid size like 60x60") from exc
    if not 1 <= len(counts) <= 2:
        raise InvalidParameterError(f"'{text}' is not a grid size like 60x60")
    return counts


def apply_overrides(config: PipelineConfig, arguments: argparse.Namespace) -> PipelineConfig:
    """ Flags win over the configuration file. """
    # pylint: disable=too-many-branches
    sampling, embedding, operators = config.sampling, config.embedding, config.operators
    grid, simulation = config.grid, config.simulation
    if getattr(arguments, "model", None) is not None:
        sampling = replace(sampling, model=arguments.model, synthetic=None)
    if getattr(arguments, "synthetic", None) is not None:
        sampling = replace(sampling, synthetic=arguments.synthetic, model=None)
    if getattr(arguments, "gamma", None) is not None:
        sampling = replace(sampling, parameters={**sampling.parameters, "gamma": arguments.gamma})
    if getattr(arguments, "n_traj", None) is not None:
        sampling = replace(sampling, n_trajectories=arguments.n_traj)
    if getattr(arguments, "n", None) is not None:
        sampling = replace(sampling, synthetic_parameters={**sampling.synthetic_parameters, "n": float(arguments.n)})
    if getattr(arguments, "epsilon_rule", None) is not None:
        embedding = replace(embedding, epsilon_rule=arguments.epsilon_rule)
    if getattr(arguments, "multiplier", None) is not None:
        embedding = replace(embedding, multiplier=arguments.multiplier)
    if getattr(arguments, "preset", None) is not None:
        operators = replace(operators, preset=arguments.preset, lifting=None, restriction=None)
    if getattr(arguments, "formulation", None) is not None:
        operators = replace(operators, formulation=Formulation.parse(arguments.formulation).value)
    if getattr(arguments, "grid", None) is not None:
        grid = replace(grid, counts=_parse_grid(arguments.grid), lower=None, upper=None)
    if getattr(arguments, "u0", None) is not None:
        simulation = replace(simulation, u0=_parse_vector(arguments.u0))
    if getattr(arguments, "t_end", None) is not None:
        simulation = replace(simulation, t_end=arguments.t_end)
    config = replace(config, sampling=sampling, embedding=embedding, operators=operators, grid=grid, simulation=simulation)
    if arguments.seed is not None:
        config = replace(config, seed=arguments.seed)
    if arguments.out is not None:
        config = replace(config, out=arguments.out)
    return config


# MARK: stage helpers

def _path(config: PipelineConfig, name: str) -> Path:
    return Path(config.out) / name


def _meta(config: PipelineConfig, stage: str) -> Dict[str, Any]:
    return {"config_hash": stage_hash(config, stage), "seed": config.seed, "stage": stage}


def resolve_field(sampling: SamplingSection) -> VectorField:
    """ The detailed model named by the sampling section: a mechanism file or a built-in model. """
    if sampling.mechanism is not None:
        path = Path(sampling.mechanism)
        if not path.is_file():
            raise ConfigError(str(path), "file does not exist")
        network = parse_mechanism(path.read_bytes())
        reference = None if sampling.reference_state is None else np.array(sampling.reference_state, dtype=float)
        return vector_field(network, name=path.stem, equilibrium=reference)
    if sampling.model is None:
        raise InvalidParameterError("this stage needs a detailed model: set sampling.model or sampling.mechanism")
    return builtin_model(sampling.model, **sampling.parameters)


def _plan(config: PipelineConfig) -> SamplingPlan:
    sampling = config.sampling
    return SamplingPlan(p=sampling.p, vertex_subset_size=sampling.vertex_subset_size, tau_f=sampling.tau_f, t_end=sampling.t_end,
                        d_min=sampling.d_min, seed=config.seed, rel_tol=sampling.rel_tol, abs_tol=sampling.abs_tol,
                        retention=sampling.retention)


def _load_training(config: PipelineConfig) -> Tuple[PointCloud, DiffusionEmbedding]:
    cloud = PointCloud.from_csv(_path(config, CLOUD_FILE))
    embedding, sidecar = DiffusionEmbedding.from_files(*(_path(config, name) for name in EMBEDDING_FILES))
    if sidecar.get("metric") is not None:
        cloud = cloud.with_metric(ScaledMetric(np.array(sidecar["metric"], dtype=float)))
    return cloud, embedding


def build_operators(config: PipelineConfig, cloud: PointCloud, embedding: DiffusionEmbedding) -> Tuple[OperatorPair, Formulation]:
    """ Operators from explicit scheme sections when both are given, from the preset otherwise. """
    operators = config.operators
    if operators.lifting is not None and operators.restriction is not None:
        lifting_config = scheme_config(operators.lifting.scheme, operators.lifting.parameters, path="operators.lifting.parameters")
        restriction_config = scheme_config(operators.restriction.scheme, operators.restriction.parameters, path="operators.restriction.parameters")
        pair = make_operator_pair(operators.restriction.scheme, operators.lifting.scheme, cloud, embedding,
                                  restriction_config=restriction_config, lifting_config=lifting_config)
        formulation = Formulation.CHAIN_RULE
    else:
        if operators.preset is None:
            raise ConfigError("operators", "either a preset or both lifting and restriction schemes are required")
        preset = method_preset(operators.preset)
        pair = make_operator_pair(preset.restriction, preset.lifting, cloud, embedding,
                                  restriction_config=preset.restriction_config, lifting_config=preset.lifting_config)
        pair.metadata["preset"] = preset.number
        formulation = preset.formulation
    if operators.formulation is not None:
        formulation = Formulation.parse(operators.formulation)
    return pair, formulation


def _grid(config: PipelineConfig, embedding: DiffusionEmbedding) -> GridSpec:
    section = config.grid
    if section.lower is not None and section.upper is not None:
        return GridSpec(tuple(section.lower), tuple(section.upper), tuple(section.counts))
    return GridSpec.fit(embedding.selected_vectors(), section.counts, section.padding)


def _check_provenance(path: Path, found: Optional[str], expected: str, force: bool):
    if found == expected:
        return
    if not force:
        raise ProvenanceMismatchError(expected, str(found), str(path))
    log.warning("%s carries config hash %s, expected %s; continuing because of --force", path, found, expected)


# MARK: subcommands

def cmd_sample(config: PipelineConfig, _: argparse.Namespace) -> None:
    """ Harvest a cloud from a detailed model, or generate a synthetic one, and write cloud.csv. """
    sampling = config.sampling
    if sampling.synthetic is not None:
        cloud = synthetic_cloud(sampling.synthetic, sampling.synthetic_parameters, rng=generator(config.seed, 0))
    else:
        model = resolve_field(sampling)
        vertices = sampling.vertices if sampling.vertices is not None else DEFAULT_VERTICES.get(model.name)
        cloud = harvest(model, _plan(config), sampling.n_trajectories, vertices=None if vertices is None else np.array(vertices, dtype=float))
        if sampling.d_min > 0:
            cloud = subsample(cloud, sampling.d_min)
    cloud.to_csv(_path(config, CLOUD_FILE), meta=_meta(config, "sample"))
    log.info("wrote %d samples to %s", cloud.size, _path(config, CLOUD_FILE))


def cmd_embed(config: PipelineConfig, _: argparse.Namespace) -> None:
    """ Diffusion map of cloud.csv with independent coordinates selected. """
    section = config.embedding
    cloud = PointCloud.from_csv(_path(config, CLOUD_FILE))
    if section.rescale:
        cloud = cloud.with_metric(ScaledMetric.from_samples(cloud.points))
    try:
        rule = EpsilonRule(section.epsilon_rule)
    except ValueError as exc:
        raise ConfigError("embedding.epsilon_rule", f"unknown rule '{section.epsilon_rule}'", exc) from exc
    embedding = diffusion_map(cloud, count=section.count, coordinates=section.coordinates, epsilon=section.epsilon,
                              rule=rule, multiplier=section.multiplier, residual_threshold=section.residual_threshold)
    meta = {**_meta(config, "embed"), "epsilon_rule": rule.value, "multiplier": section.multiplier}
    embedding.to_files(*(_path(config, name) for name in EMBEDDING_FILES), metric=cloud.metric, meta=meta)


def cmd_tabulate(config: PipelineConfig, _: argparse.Namespace) -> None:
    """ Tabulate the reduced right-hand side over the grid and write table.json and table.csv. """
    cloud, embedding = _load_training(config)
    pair, formulation = build_operators(config, cloud, embedding)
    table = tabulate(_grid(config, embedding), pair, resolve_field(config.sampling), formulation)
    table.to_files(*(_path(config, name) for name in TABLE_FILES), meta=_meta(config, "tabulate"))


def cmd_simulate(config: PipelineConfig, _: argparse.Namespace) -> None:
    """ Integrate the detailed and the reduced system from matching initial states; write detailed.csv and reduced.csv. """
    section = config.simulation
    cloud, embedding = _load_training(config)
    pair, formulation = build_operators(config, cloud, embedding)
    model = resolve_field(config.sampling)
    if section.y0 is not None:
        y0 = np.array(section.y0, dtype=float)
    elif section.u0 is not None:
        y0 = pair.lift(np.array(section.u0, dtype=float))
    else:
        y0 = cloud.points[0]
    u0 = np.array(section.u0, dtype=float) if section.u0 is not None else pair.restrict(y0)
    times = np.linspace(0.0, section.t_end, max(section.samples, 2))

    if section.source == "table":
        source, _ = ReducedTable.from_files(*(_path(config, name) for name in TABLE_FILES))
    elif section.source == "direct":
        source = direct_rhs(pair, model, formulation)
    else:
        raise ConfigError("simulation.source", f"expected 'table' or 'direct', found '{section.source}'")
    with Stopwatch() as detailed_clock:
        detailed = integrate(model, y0, (0.0, section.t_end), rel_tol=section.rel_tol, abs_tol=section.abs_tol, t_eval=times)
    with Stopwatch() as reduced_clock:
        reduced = simulate_reduced(source, u0, (0.0, section.t_end), rel_tol=section.rel_tol, abs_tol=section.abs_tol, t_eval=times)
    if reduced.status != "completed":
        log.warning("the reduced trajectory left its domain at t = %.6g", reduced.times[-1])
    meta = _meta(config, "simulate")
    detailed.to_csv(_path(config, DETAILED_FILE), model.names, meta=meta)
    reduced.to_csv(_path(config, REDUCED_FILE), [f"u{index + 1}" for index in range(reduced.dimension)], meta={**meta, "source": section.source})
    write_json(_path(config, TIMING_FILE), {"detailed_seconds": detailed_clock.seconds, "reduced_seconds": reduced_clock.seconds, **meta})


def cmd_compare(config: PipelineConfig, arguments: argparse.Namespace) -> None:
    """ Mean deviations between detailed.csv and reduced.csv; write report.json and deviation.csv. """
    force = bool(getattr(arguments, "force", False))
    detailed, names, detailed_meta = Trajectory.from_csv(_path(config, DETAILED_FILE))
    reduced, _, reduced_meta = Trajectory.from_csv(_path(config, REDUCED_FILE))
    expected = stage_hash(config, "simulate")
    _check_provenance(_path(config, DETAILED_FILE), detailed_meta.get("config_hash"), expected, force)
    _check_provenance(_path(config, REDUCED_FILE), reduced_meta.get("config_hash"), expected, force)
    cloud, embedding = _load_training(config)
    embedding_meta = read_json(_path(config, EMBEDDING_FILES[1]))
    _check_provenance(_path(config, EMBEDDING_FILES[1]), embedding_meta.get("config_hash"), stage_hash(config, "embed"), force)
    pair, _ = build_operators(config, cloud, embedding)
    timing = read_json(_path(config, TIMING_FILE)) if _path(config, TIMING_FILE).is_file() else {}
    report = compare(detailed, reduced, pair, names=names, detailed_seconds=timing.get("detailed_seconds"),
                     reduced_seconds=timing.get("reduced_seconds"))
    report.to_files(*(_path(config, name) for name in REPORT_FILES), meta={"config_hash": expected, "seed": config.seed})


COMMANDS = {"sample": cmd_sample, "embed": cmd_embed, "tabulate": cmd_tabulate, "simulate": cmd_simulate, "compare": cmd_compare}


# MARK: entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser("manifold-kinetics", description="Diffusion-map reduction of stiff kinetics, one pipeline stage per call.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="pipeline configuration (JSON)")
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("--out", help="artifact directory (default: .)")
    common.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG")
    operators = argparse.ArgumentParser(add_help=False)
    operators.add_argument("--preset", type=int, choices=range(1, 13), metavar="1..12", help="lifting/restriction preset")
    operators.add_argument("--formulation", choices=["chain", "chain-rule", "projection"], help="reduced right-hand side")
    operators.add_argument("--grid", metavar="RxC", help="table size, e.g. 60x60")
    commands = parser.add_subparsers(dest="command", required=True)

    sample = commands.add_parser("sample", parents=[common], help="harvest or generate a point cloud")
    sample.add_argument("--model", help="built-in model: davis-skodje, linear-2d, toy-h2-skeleton")
    sample.add_argument("--synthetic", help="synthetic cloud: cylinder-uniform, cylinder-grid, cylinder-jittered, circle, segment, square-grid")
    sample.add_argument("--gamma", type=float, help="davis-skodje stiffness")
    sample.add_argument("--n-traj", type=int, dest="n_traj", help="number of trajectories")
    sample.add_argument("--n", type=int, help="number of synthetic points")

    embed = commands.add_parser("embed", parents=[common], help="compute the diffusion map of the cloud")
    embed.add_argument("--epsilon-rule", dest="epsilon_rule", choices=[rule.value for rule in EpsilonRule])
    embed.add_argument("--multiplier", type=float)

    commands.add_parser("tabulate", parents=[common, operators], help="tabulate the reduced right-hand side")
    simulate = commands.add_parser("simulate", parents=[common, operators], help="integrate detailed and reduced systems")
    simulate.add_argument("--u0", help="reduced initial state, e.g. 0,0")
    simulate.add_argument("--t-end", type=float, dest="t_end", help="simulation horizon")
    compare_parser = commands.add_parser("compare", parents=[common, operators], help="deviation between detailed and reduced runs")
    compare_parser.add_argument("--force", action="store_true", help="accept artifacts with mismatched provenance")
    compare_parser.add_argument("--t-end", type=float, dest="t_end", help="simulation horizon used by the compared runs")
    compare_parser.add_argument("--u0", help="reduced initial state used by the compared runs")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run one pipeline stage.
    :return: 0 on success, 1 on a numerical failure, 2 on a usage or configuration error.
    """
    arguments = build_parser().parse_args(argv)
    level = logging.DEBUG if arguments.verbose >= 2 else logging.INFO if arguments.verbose == 1 else logging.WARNING
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        config = apply_overrides(load_config(arguments.config), arguments)
        COMMANDS[arguments.command](config, arguments)
    except UsageError as exc:
        log.error("%s", exc)
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        log.error("%s", exc)
        print(exc, file=sys.stderr)
        return EXIT_NUMERICAL
    except ManifoldKineticsError as exc:
        print(exc, file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_SUCCESS
