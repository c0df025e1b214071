"""
ddinfer - Scenario Assembly

Turns a validated RunConfig into the objects the inference engine works on
(truss, constraint set, metric, materials, quantity of interest, reference
distribution) and runs population annealing on them.

Classes:
    Scenario: Everything a run needs except the annealing parameters
    Reference: Oracle distribution of the quantity of interest
    RunOutcome: Final population, samples and timings of one run
"""

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np

from src.annealing import EnergyModel, PAParams, Population, PopulationAnnealer, QuenchRecord, Schedule
from src.app_config import config
from src.errors import ConfigError, DataSetError
from src.inference import QoI, gaussian_oracle, ks_statistic, weibull_oracle
from src.material_data import (LocalDataSet, Material, MaterialAssignment, beta_estimate, load,
                               sample_sliding_gaussian, sample_weibull_bimodal)
from src.phase_space import Metric, split_strain_stress
from src.rng_streams import substream
from src.run_config import MaterialSpec, QoISpec, RunConfig
from src.truss import ConstraintSet, TrussModel, assemble, elastic_solution, exact_basis, load_geometry

logger = logging.getLogger(__name__)


@dataclass
class Structure:
    """Assembled truss, metric and quantity of interest."""
    name: str
    truss: TrussModel
    E: ConstraintSet
    metric: Metric
    moduli: Dict[str, float]
    qoi: QoI


@dataclass
class Scenario(Structure):
    """Structure plus the material data of every bar."""
    materials: Dict[str, Material] = field(default_factory=dict)
    assignment: Optional[MaterialAssignment] = None


@dataclass
class Reference:
    """
    Oracle distribution of the quantity of interest.

    Attributes:
        kind: "gaussian" or "weibull"
        mean, std: Moments of the reference
        target: CDF callable, or a reference sample for nonlinear QoIs
        modes: (value, mass) pairs of a discrete mixture
        source: The GaussianPosterior or WeibullMixture itself
    """
    kind: str
    mean: float
    std: float
    target: Union[Callable[[np.ndarray], np.ndarray], np.ndarray]
    modes: Optional[List[Tuple[float, float]]] = None
    source: Any = field(default=None, repr=False)

    def ks(self, samples: np.ndarray) -> float:
        return ks_statistic(samples, self.target)


@dataclass
class RunOutcome:
    """Result of one annealing run."""
    samples: np.ndarray
    population: Population
    history: List[QuenchRecord]
    target_betas: Dict[str, float]
    runtime: float
    eval_seconds: float
    eval_count: int
    ml_estimate: float
    seed: Optional[int]


# ----------------------------------------------------------------------------
# Building blocks
# ----------------------------------------------------------------------------

def scenario_truss(cfg: RunConfig, magnitude: Optional[float] = None) -> TrussModel:
    """Geometry of a run, with the prescribed displacement rescaled if requested."""
    truss = load_geometry(cfg.geometry)
    magnitude = cfg.prescribed_scale if magnitude is None else magnitude
    if magnitude is not None:
        truss = truss.with_prescribed_magnitude(magnitude)
        logger.info(f"Prescribed displacement magnitude set to {magnitude:g}")
    return truss


def default_strain_range(E: ConstraintSet, metric: Metric, members: np.ndarray,
                         margin: float = config.STRAIN_RANGE_MARGIN) -> Tuple[float, float]:
    """Symmetric range of `margin` times the largest elastic strain among `members`."""
    state, _ = elastic_solution(E, metric)
    eps, _ = split_strain_stress(state, E.dim)
    largest = float(np.max(np.abs(eps[members]))) if len(members) else 0.0
    if largest == 0:
        raise DataSetError("Elastic strains vanish; give the generator an explicit strain_range")
    return -margin * largest, margin * largest


def generate_dataset(spec: MaterialSpec, E: ConstraintSet, metric: Metric, members: np.ndarray,
                     rng: np.random.Generator, size: Optional[int] = None) -> LocalDataSet:
    """Sample a material's data set from its generator spec."""
    gen = spec.generator
    if gen is None:
        raise ConfigError(f"Material '{spec.id}' has no generator")
    M = gen.size if size is None else int(size)
    strain_range = gen.strain_range or default_strain_range(E, metric, members)
    if gen.type == 'sliding_gaussian':
        dataset = sample_sliding_gaussian(spec.modulus, gen.s, strain_range, M, rng, gen.weight, spec.id)
    elif gen.type == 'weibull_bimodal':
        dataset = sample_weibull_bimodal(spec.modulus, gen.sigma0, gen.p, gen.noise, strain_range, M, rng, spec.id)
    else:
        raise ConfigError(f"Unknown generator '{gen.type}'")
    logger.info(f"✓ Generated {M} {gen.type} points for '{spec.id}' "
                f"over strains [{strain_range[0]:.4g}, {strain_range[1]:.4g}]")
    return dataset


def prepare_materials(cfg: RunConfig, truss: TrussModel, E: ConstraintSet, metric: Metric,
                      seed: Optional[int], data_size: Optional[int] = None,
                      regenerate: bool = False) -> Dict[str, Material]:
    """
    Data sets with their final inverse temperatures.

    Existing data files are read unless a size override or `regenerate`
    asks for fresh samples; generated data is drawn from the 'data'
    substream of the seed. beta comes from the config override, the file
    header, or the nearest-neighbour estimate, in that order.
    """
    used = set(truss.materials)
    materials = {}
    for index, spec in enumerate(cfg.materials):
        if spec.id not in used:
            logger.warning(f"Material '{spec.id}' is not used by any bar")
            continue
        members = np.array([e for e, mat in enumerate(truss.materials) if mat == spec.id])
        fresh = regenerate or data_size is not None or spec.data is None or not spec.data.exists()
        if fresh:
            dataset = generate_dataset(spec, E, metric, members, substream(seed, 'data', index), data_size)
        else:
            dataset = replace(load(spec.data), material_id=spec.id)
        if spec.beta is not None:
            dataset = dataset.with_beta(spec.beta)
        elif dataset.beta is None:
            dataset = dataset.with_beta(beta_estimate(dataset, spec.modulus))
        logger.info(f"Material '{spec.id}': M={dataset.size}, beta_f={dataset.beta:.6g}")
        materials[spec.id] = Material(spec.id, spec.modulus, dataset)
    return materials


def build_qoi(spec: QoISpec, truss: TrussModel, E: ConstraintSet) -> QoI:
    if spec.type == 'displacement':
        return QoI.displacement(truss, E, spec.node, spec.direction)
    if spec.type == 'reaction':
        return QoI.reaction(truss, E, spec.node, spec.direction)
    if spec.type == 'eccentricity':
        return QoI.eccentricity(truss, E, spec.node)
    raise ConfigError(f"Unknown QoI type '{spec.type}'")


def build_structure(cfg: RunConfig, magnitude: Optional[float] = None) -> Structure:
    """Geometry, constraint set, metric and QoI of a configuration, without data."""
    truss = scenario_truss(cfg, magnitude)
    E = assemble(truss)
    moduli = {spec.id: float(spec.modulus) for spec in cfg.materials}
    metric = truss.metric(moduli)
    return Structure(cfg.name, truss, E, metric, moduli, build_qoi(cfg.qoi, truss, E))


def build_scenario(cfg: RunConfig, seed: Optional[int] = None, data_size: Optional[int] = None,
                   magnitude: Optional[float] = None, regenerate: bool = False) -> Scenario:
    """Assemble geometry, metric, materials and QoI of a configuration."""
    structure = build_structure(cfg, magnitude)
    materials = prepare_materials(cfg, structure.truss, structure.E, structure.metric, seed, data_size, regenerate)
    assignment = MaterialAssignment.from_members(structure.truss.materials, list(materials))
    return Scenario(**vars(structure), materials=materials, assignment=assignment)


def build_reference(cfg: RunConfig, scenario: Structure, seed: Optional[int] = None) -> Optional[Reference]:
    """Oracle distribution of the scenario's QoI, or None without an oracle section."""
    spec = cfg.oracle
    if spec is None:
        return None
    qoi = scenario.qoi
    if spec.type == 'gaussian':
        posterior = gaussian_oracle(scenario.E, scenario.metric, spec.s, spec.likelihood_weights)
        if qoi.is_linear:
            mean, variance = posterior.marginal(qoi)
            return Reference('gaussian', mean, float(np.sqrt(variance)), posterior.cdf(qoi), source=posterior)
        sample = qoi(posterior.sample(config.REFERENCE_SAMPLES, substream(seed, 'oracle')))
        return Reference('gaussian', float(np.mean(sample)), float(np.std(sample)), sample, source=posterior)
    if spec.type == 'weibull':
        mixture = weibull_oracle(scenario.truss, scenario.moduli, spec.sigma0, spec.p, qoi=qoi)
        return Reference('weibull', mixture.mean, mixture.std, mixture.cdf, modes=mixture.modes(), source=mixture)
    raise ConfigError(f"Unknown oracle type '{spec.type}'")


# ----------------------------------------------------------------------------
# Running
# ----------------------------------------------------------------------------

def annealing_params(cfg: RunConfig, seed: Optional[int], threads: Optional[int] = None,
                     overrides: Optional[Dict[str, Any]] = None) -> Tuple[PAParams, Any]:
    """PAParams plus the (possibly overridden) annealing section."""
    spec = replace(cfg.annealing, **(overrides or {}))
    params = PAParams(population=spec.population, trials=spec.trials, initial_step=spec.initial_step,
                      target_acceptance=spec.target_acceptance, tol=spec.tol, n_checks=spec.n_checks,
                      seed=seed, threads=threads or cfg.threads, use_tree=spec.use_tree,
                      refresh_energies=spec.refresh_energies)
    return params, spec


def anneal(cfg: RunConfig, scenario: Scenario, seed: Optional[int], threads: Optional[int] = None,
           overrides: Optional[Dict[str, Any]] = None) -> RunOutcome:
    """
    Run population annealing on a scenario.

    Args:
        cfg: Run configuration (annealing section)
        scenario: Assembled scenario
        seed: Root seed of all random substreams
        threads: Worker threads (default: config value)
        overrides: Replacement values for fields of the annealing section
    """
    params, spec = annealing_params(cfg, seed, threads, overrides)
    model = EnergyModel(scenario.materials, scenario.assignment, params.tol, params.n_checks,
                        params.use_tree, seed=seed)
    basis = exact_basis(scenario.E, scenario.metric) if spec.basis == 'exact' else None
    annealer = PopulationAnnealer(scenario.E, scenario.metric, model, params, basis)
    schedule = Schedule(spec.quenches, model.target_betas())

    start = time.perf_counter()
    pop = annealer.run(schedule, init_mode=spec.init, n_solutions=spec.init_solutions)
    runtime = time.perf_counter() - start

    eval_seconds, eval_count = model.eval_seconds, model.eval_count

    samples = scenario.qoi(pop.states)
    phi = model.potential(pop.states, schedule.targets)
    best = pop.member(int(np.argmin(phi)))
    ml_estimate = float(scenario.qoi(best.state)[0])
    logger.info(f"ML estimate {ml_estimate:.6g} from walker {best.id}")
    return RunOutcome(samples=samples, population=pop, history=list(annealer.history),
                      target_betas=schedule.targets, runtime=runtime, eval_seconds=eval_seconds,
                      eval_count=eval_count, ml_estimate=ml_estimate, seed=seed)
