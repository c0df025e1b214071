"""
ddinfer - Run Configuration

JSON run configurations and their validation. A configuration names a
geometry file, the materials (data file and/or generator, metric modulus),
annealing parameters, the quantity of interest, an optional oracle, the
output directory and an optional parameter study. Relative paths resolve
against the configuration file's directory.

Example:
    {
      "name": "three-bar-gauss",
      "seed": 20240611,
      "geometry": "geometry/three_bar.json",
      "materials": [{"id": "default", "modulus": 10000, "data": "data/three_bar_gauss.csv",
                     "generator": {"type": "sliding_gaussian", "s": 5e-4, "size": 1000}}],
      "annealing": {"population": 10000, "trials": 20, "quenches": 100, "initial_step": 1.0},
      "qoi": {"type": "displacement", "node": "c", "direction": [0, -1]},
      "oracle": {"type": "gaussian", "s": 5e-4, "likelihood_weights": "unit"},
      "output": {"directory": "output/three-bar-gauss"}
    }
"""

import json
import logging
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from src.app_config import config
from src.errors import ConfigError

logger = logging.getLogger(__name__)

GENERATOR_TYPES = ('sliding_gaussian', 'weibull_bimodal')
QOI_TYPES = ('displacement', 'reaction', 'eccentricity')
ORACLE_TYPES = ('gaussian', 'weibull')
INIT_MODES = ('projection', 'min-dist')
BASIS_TYPES = ('pca', 'exact')
STUDY_PARAMETERS = ('data_size', 'population', 'quenches', 'n_checks', 'tol', 'use_tree', 'displacement')


@dataclass
class GeneratorSpec:
    """Synthetic data generator of one material."""
    type: str
    size: int
    s: float = 0.0  # sliding Gaussian width
    weight: float = 1.0  # sliding Gaussian member weight
    sigma0: float = 0.0  # Weibull scale
    p: float = 0.0  # Weibull shape
    noise: float = 0.0  # Weibull stress noise
    strain_range: Optional[List[float]] = None  # default: margin x elastic strains


@dataclass
class MaterialSpec:
    """Material data source and metric modulus."""
    id: str
    modulus: float
    data: Optional[Path] = None
    generator: Optional[GeneratorSpec] = None
    beta: Optional[float] = None  # overrides the nearest-neighbour estimate


@dataclass
class AnnealingSpec:
    """Population annealing inputs."""
    population: int
    trials: int
    quenches: int
    initial_step: float = config.INITIAL_STEP
    target_acceptance: float = config.TARGET_ACCEPTANCE
    tol: float = config.TOL
    n_checks: Optional[int] = config.N_CHECKS
    init: str = 'projection'
    init_solutions: Optional[int] = None
    use_tree: bool = True
    refresh_energies: bool = True
    basis: str = 'pca'


@dataclass
class QoISpec:
    """Quantity of interest."""
    type: str
    node: str
    direction: Optional[List[float]] = None


@dataclass
class OracleSpec:
    """Reference distribution."""
    type: str
    s: float = 0.0
    likelihood_weights: str = 'unit'
    sigma0: float = 0.0
    p: float = 0.0


@dataclass
class OutputSpec:
    directory: Path = field(default_factory=lambda: Path(config.OUTPUT_DIRECTORY))
    bins: int = config.HISTOGRAM_BINS
    bin_width: Optional[float] = None


@dataclass
class StudySpec:
    """Parameter sweep; each cell is repeated `repeats` times."""
    parameter: str
    values: List[Union[float, bool, None]]
    repeats: int = 1
    trials: Optional[List[int]] = None  # crossed with the quench counts


@dataclass
class RunConfig:
    """Validated run configuration."""
    name: str
    path: Path
    geometry: Path
    materials: List[MaterialSpec]
    annealing: AnnealingSpec
    qoi: QoISpec
    seed: Optional[int] = None
    threads: int = 1
    oracle: Optional[OracleSpec] = None
    output: OutputSpec = field(default_factory=OutputSpec)
    study: Optional[StudySpec] = None
    prescribed_scale: Optional[float] = None


def _build(cls, data: Any, section: str):
    """Instantiate a spec dataclass, turning unknown or missing keys into ConfigError."""
    if not isinstance(data, dict):
        raise ConfigError(f"Section '{section}' must be an object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"Unknown keys in '{section}': {unknown}")
    try:
        return cls(**data)
    except TypeError as e:
        raise ConfigError(f"Invalid section '{section}': {e}")


def _resolve(base: Path, value: Optional[str]) -> Optional[Path]:
    if value is None:
        return None
    path = Path(value)
    return path if path.is_absolute() else (base / path)


def resolve_config_path(name_or_path: Union[str, Path]) -> Path:
    """A config file path, or the name of a shipped preset."""
    path = Path(name_or_path)
    if path.exists():
        return path
    preset = Path(config.get_scenario_path(str(name_or_path)))
    if preset.exists():
        return preset
    raise ConfigError(f"No config file or preset named '{name_or_path}'")


def parse_run_config(data: Dict[str, Any], path: Path) -> RunConfig:
    """Build a RunConfig from a parsed document located at `path`."""
    base = path.parent
    data = dict(data)
    data.setdefault('name', None)
    try:
        geometry = _resolve(base, data.pop('geometry'))
        material_data = data.pop('materials')
        annealing = _build(AnnealingSpec, data.pop('annealing'), 'annealing')
        qoi = _build(QoISpec, data.pop('qoi'), 'qoi')
    except KeyError as e:
        raise ConfigError(f"Config {path} is missing section {e}")

    materials = []
    for i, record in enumerate(material_data):
        record = dict(record)
        generator = record.pop('generator', None)
        spec = _build(MaterialSpec, record, f"materials[{i}]")
        spec.data = _resolve(base, spec.data)
        if generator is not None:
            spec.generator = _build(GeneratorSpec, generator, f"materials[{i}].generator")
        materials.append(spec)

    oracle = data.pop('oracle', None)
    output = data.pop('output', None)
    study = data.pop('study', None)
    cfg = _build(RunConfig, {**data, 'path': path, 'geometry': geometry, 'materials': materials,
                             'annealing': annealing, 'qoi': qoi}, 'run')
    if cfg.name is None:
        cfg.name = path.stem
    if oracle is not None:
        cfg.oracle = _build(OracleSpec, oracle, 'oracle')
    if output is not None:
        cfg.output = _build(OutputSpec, output, 'output')
    cfg.output.directory = _resolve(base, str(cfg.output.directory))
    if study is not None:
        cfg.study = _build(StudySpec, study, 'study')
    return cfg


def validate_run_config(cfg: RunConfig) -> List[str]:
    """Collect every problem of a configuration; empty list if valid."""
    errors = []
    if not cfg.geometry.exists():
        errors.append(f"Geometry file not found: {cfg.geometry}")
    if not cfg.materials:
        errors.append("No materials defined")
    ids = [m.id for m in cfg.materials]
    if len(set(ids)) != len(ids):
        errors.append(f"Duplicate material ids {ids}")
    for m in cfg.materials:
        if not m.modulus > 0:
            errors.append(f"Material '{m.id}': modulus must be positive")
        if m.beta is not None and not m.beta > 0:
            errors.append(f"Material '{m.id}': beta must be positive")
        if m.generator is None and (m.data is None or not m.data.exists()):
            errors.append(f"Material '{m.id}': data file {m.data} missing and no generator given")
        gen = m.generator
        if gen is not None:
            if gen.type not in GENERATOR_TYPES:
                errors.append(f"Material '{m.id}': unknown generator '{gen.type}'")
            if gen.size < 1:
                errors.append(f"Material '{m.id}': generator size must be at least 1")
            if gen.type == 'weibull_bimodal' and not (gen.sigma0 > 0 and gen.p > 0):
                errors.append(f"Material '{m.id}': Weibull generator needs sigma0 > 0 and p > 0")
            if gen.strain_range is not None and (len(gen.strain_range) != 2
                                                 or gen.strain_range[1] <= gen.strain_range[0]):
                errors.append(f"Material '{m.id}': strain_range must be [min, max] with min < max")

    a = cfg.annealing
    if a.population < 1 or a.trials < 1 or a.quenches < 0:
        errors.append("annealing: population and trials must be >= 1, quenches >= 0")
    if not 0 < a.target_acceptance < 1:
        errors.append("annealing: target_acceptance must lie in (0, 1)")
    if not a.initial_step > 0:
        errors.append("annealing: initial_step must be positive")
    if not 0 < a.tol < 1:
        errors.append("annealing: tol must lie in (0, 1)")
    if a.n_checks is not None and a.n_checks < 1:
        errors.append("annealing: n_checks must be >= 1 or null")
    if a.init not in INIT_MODES:
        errors.append(f"annealing: init must be one of {INIT_MODES}")
    if a.basis not in BASIS_TYPES:
        errors.append(f"annealing: basis must be one of {BASIS_TYPES}")
    if cfg.qoi.type not in QOI_TYPES:
        errors.append(f"qoi: type must be one of {QOI_TYPES}")
    if cfg.qoi.type == 'displacement' and not cfg.qoi.direction:
        errors.append("qoi: displacement needs a direction")
    if cfg.oracle is not None:
        if cfg.oracle.type not in ORACLE_TYPES:
            errors.append(f"oracle: type must be one of {ORACLE_TYPES}")
        elif cfg.oracle.type == 'gaussian' and not cfg.oracle.s > 0:
            errors.append("oracle: gaussian needs s > 0")
        elif cfg.oracle.type == 'weibull' and not (cfg.oracle.sigma0 > 0 and cfg.oracle.p > 0):
            errors.append("oracle: weibull needs sigma0 > 0 and p > 0")
        if cfg.oracle.likelihood_weights not in ('unit', 'volume'):
            errors.append("oracle: likelihood_weights must be 'unit' or 'volume'")
    if cfg.study is not None:
        if cfg.study.parameter not in STUDY_PARAMETERS:
            errors.append(f"study: parameter must be one of {STUDY_PARAMETERS}")
        if not cfg.study.values:
            errors.append("study: values must not be empty")
        elif cfg.study.parameter == 'tol' and not all(isinstance(v, (int, float)) and 0 < v < 1
                                                      for v in cfg.study.values):
            errors.append("study: tol values must lie in (0, 1)")
        elif cfg.study.parameter == 'use_tree' and not all(isinstance(v, bool) for v in cfg.study.values):
            errors.append("study: use_tree values must be true or false")
        if cfg.study.repeats < 1:
            errors.append("study: repeats must be >= 1")
    if cfg.threads < 1:
        errors.append("threads must be >= 1")
    return errors


def load_run_config(name_or_path: Union[str, Path]) -> RunConfig:
    """
    Load and validate a run configuration.

    Args:
        name_or_path: Config file path or preset name (e.g. "three-bar-gauss")

    Raises:
        ConfigError: Unreadable file, unknown keys or invalid values
    """
    path = resolve_config_path(name_or_path)
    try:
        with open(path) as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config {path} is not valid JSON: {e}")
    if not isinstance(data, dict):
        raise ConfigError(f"Config {path} must contain an object")
    cfg = parse_run_config(data, path)
    errors = validate_run_config(cfg)
    if errors:
        for error in errors:
            logger.error(f"  ERROR: {error}")
        raise ConfigError(f"Invalid config {path}: " + "; ".join(errors))
    logger.info(f"✓ Loaded run config '{cfg.name}' from {path}")
    return cfg
