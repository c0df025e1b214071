"""
ddinfer - Population Annealing

Samples the posterior over the constraint set E by population annealing:
the inverse temperature of every material is raised in N_Q equal steps to
its target; at each step the population is resampled in proportion to
exp(-delta_beta * e_p) and every walker performs N_T Metropolis random-walk
trials along an orthonormal basis of E0, adapting its step size towards a
target acceptance rate.

The energy of a state is e = Phi / beta_bar with the potential
Phi(z) = -sum_e log L_e(z_e) and beta_bar the member average of the current
material inverse temperatures; with one material this is the usual
e = -(1/beta) sum_e log L_e. The likelihood of a member is evaluated in the
unit-volume metric of its material, so all members of a material share one
search tree and one target inverse temperature.

Randomness is drawn from named substreams of the run seed keyed by member id
and quench, so results do not depend on the number of worker threads.

Classes:
    PAParams: Population size, trials, step control, search parameters, seed
    Schedule: Quench count and per-material inverse temperature targets
    EnergyModel: Materials, member assignment and search trees
    Population: Walker states, energies, step sizes and ids
    PopulationMember: View of one walker
    QuenchRecord: Progress record of one quench
    PopulationAnnealer: Runs the annealing loop
"""

import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.special import softmax

from src.ann_index import KMeansTree, NearestData, TreeParams, direct_log_likelihood
from src.app_config import config
from src.errors import ConfigError, ConvergenceError, DimensionError
from src.material_data import Material, MaterialAssignment
from src.phase_space import GlobalState, Metric, from_weighted, norm, to_weighted, weight_local
from src.rng_streams import substream
from src.truss import ConstraintSet, Projector, pca_basis

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PAParams:
    """Population annealing parameters."""
    population: int  # target population N_P*
    trials: int  # Metropolis trials per quench N_T
    initial_step: float = config.INITIAL_STEP
    target_acceptance: float = config.TARGET_ACCEPTANCE
    tol: float = config.TOL
    n_checks: Optional[int] = config.N_CHECKS
    seed: Optional[int] = None
    threads: int = 1
    use_tree: bool = True  # False evaluates likelihoods by direct summation
    refresh_energies: bool = True  # re-evaluate energies at the new beta after resampling
    reproject: bool = True  # remove round-off drift off E once per quench

    def __post_init__(self):
        if self.population < 1:
            raise ConfigError(f"Target population must be at least 1, got {self.population}")
        if self.trials < 1:
            raise ConfigError(f"Trials per quench must be at least 1, got {self.trials}")
        if not 0 < self.target_acceptance < 1:
            raise ConfigError(f"Target acceptance must lie in (0, 1), got {self.target_acceptance}")
        if not self.initial_step > 0:
            raise ConfigError(f"Initial step must be positive, got {self.initial_step}")
        if not 0 < self.tol < 1:
            raise ConfigError(f"TOL must lie in (0, 1), got {self.tol}")
        if self.n_checks is not None and self.n_checks < 1:
            raise ConfigError(f"n_checks must be at least 1 or unlimited, got {self.n_checks}")
        if self.threads < 1:
            raise ConfigError(f"Thread count must be at least 1, got {self.threads}")


@dataclass
class Schedule:
    """
    Linear quench schedule: after quench q (0-based) beta = (q + 1) * target / N_Q.

    Attributes:
        quenches: N_Q (0 runs no quench)
        targets: Final inverse temperature beta_f per material
        quench: Number of quenches completed
    """
    quenches: int
    targets: Dict[str, float]
    quench: int = 0

    def __post_init__(self):
        if self.quenches < 0:
            raise ConfigError(f"Quench count must be non-negative, got {self.quenches}")
        for material, beta in self.targets.items():
            if not beta > 0:
                raise ConfigError(f"Target beta of '{material}' must be positive, got {beta}")

    @property
    def increments(self) -> Dict[str, float]:
        return {mat: beta / self.quenches for mat, beta in self.targets.items()} if self.quenches else {}

    def betas_at(self, quench: int) -> Dict[str, float]:
        """Inverse temperatures after `quench` completed quenches."""
        if self.quenches == 0:
            return dict(self.targets)
        return {mat: quench * step for mat, step in self.increments.items()}

    @property
    def betas(self) -> Dict[str, float]:
        return self.betas_at(self.quench)

    @property
    def finished(self) -> bool:
        return self.quench >= self.quenches

    def advance(self) -> Dict[str, float]:
        self.quench += 1
        return self.betas


class EnergyModel:
    """
    Member likelihoods of a structure.

    Each material's data is indexed once in its unit-volume metric
    coordinates; member states are mapped to the same coordinates before
    the radius-limited likelihood sum.
    """

    def __init__(self, materials: Dict[str, Material], assignment: MaterialAssignment,
                 tol: float = config.TOL, n_checks: Optional[int] = config.N_CHECKS,
                 use_tree: bool = True, tree_params: Optional[TreeParams] = None,
                 seed: Optional[int] = None):
        missing = sorted(set(assignment.materials) - set(materials))
        if missing:
            raise ConfigError(f"Members use materials without data: {missing}")
        self.materials = {mat: materials[mat] for mat in assignment.materials}
        self.assignment = assignment
        self.groups = assignment.groups()
        self.tol = tol
        self.n_checks = n_checks
        self.use_tree = use_tree
        self.dim = next(iter(self.materials.values())).dataset.dim
        self._weighted = {mat: m.weighted_points for mat, m in self.materials.items()}
        self.trees: Dict[str, KMeansTree] = {}
        if use_tree:
            for mat, material in self.materials.items():
                rng = substream(seed, 'tree', len(self.trees))
                self.trees[mat] = KMeansTree.build(self._weighted[mat], material.dataset.confidences,
                                                   tree_params, rng)
        self._nearest: Dict[str, NearestData] = {}
        self._lock = threading.Lock()
        self.eval_seconds = 0.0
        self.eval_count = 0

    @property
    def n_members(self) -> int:
        return self.assignment.n_members

    def target_betas(self) -> Dict[str, float]:
        return {mat: m.beta for mat, m in self.materials.items()}

    def mean_beta(self, betas: Dict[str, float]) -> float:
        """beta_bar: average of the members' material inverse temperatures."""
        return float(sum(betas[mat] * len(members) for mat, members in self.groups.items()) / self.n_members)

    def member_points(self, states: np.ndarray, material: str) -> np.ndarray:
        """Local states of the material's members in its metric coordinates, (P, k, 2d)."""
        d = self.dim
        members = states.reshape(states.shape[0], -1, 2 * d)[:, self.groups[material]]
        return weight_local(members, self.materials[material].modulus)

    def log_likelihoods(self, states: np.ndarray, betas: Dict[str, float]) -> np.ndarray:
        """log L_e for every walker and member, shape (P, m)."""
        states = np.atleast_2d(states)
        if states.shape[1] != 2 * self.dim * self.n_members:
            raise DimensionError(f"States have length {states.shape[1]}, expected {2 * self.dim * self.n_members}")
        start = time.perf_counter()
        out = np.empty((states.shape[0], self.n_members))
        for mat, members in self.groups.items():
            queries = self.member_points(states, mat).reshape(-1, 2 * self.dim)
            beta = betas[mat]
            if self.use_tree:
                values = self.trees[mat].log_likelihood(queries, beta, self.tol, self.n_checks)
            else:
                values = direct_log_likelihood(self._weighted[mat], queries, beta,
                                               self.materials[mat].dataset.confidences, self.tol)
            out[:, members] = values.reshape(states.shape[0], len(members))
        with self._lock:
            self.eval_seconds += time.perf_counter() - start
            self.eval_count += states.shape[0]
        return out

    def potential(self, states: np.ndarray, betas: Dict[str, float]) -> np.ndarray:
        """Phi = -sum_e log L_e per walker."""
        return -np.sum(self.log_likelihoods(states, betas), axis=1)

    def energies(self, states: np.ndarray, betas: Dict[str, float]) -> np.ndarray:
        return self.potential(states, betas) / self.mean_beta(betas)

    def nearest(self, material: str) -> NearestData:
        with self._lock:
            if material not in self._nearest:
                self._nearest[material] = NearestData(self._weighted[material])
            return self._nearest[material]


def energy(z, model: EnergyModel, betas: Dict[str, float]) -> float:
    """Energy e = Phi(z) / beta_bar of one state."""
    flat = z.flat if isinstance(z, GlobalState) else np.asarray(z, dtype=float)
    return float(model.energies(flat[None, :], betas)[0])


def potential(z, model: EnergyModel, betas: Dict[str, float]) -> float:
    """Negative log thermalized likelihood Phi(z)."""
    flat = z.flat if isinstance(z, GlobalState) else np.asarray(z, dtype=float)
    return float(model.potential(flat[None, :], betas)[0])


# ----------------------------------------------------------------------------
# Population
# ----------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PopulationMember:
    """One walker."""
    id: int
    state: GlobalState
    energy: float
    step: float
    accepted: int


@dataclass
class Population:
    """
    Walkers stored as arrays.

    Attributes:
        states: Flat states (P, 2N)
        energies: e_p, +inf before the first evaluation
        steps: Step sizes s_p
        accepted: Accepted trials during the last quench
        ids: Walker ids keying their random substreams
        next_id: First unused id
    """
    states: np.ndarray
    energies: np.ndarray
    steps: np.ndarray
    accepted: np.ndarray
    ids: np.ndarray
    next_id: int
    dim: int = 1

    @classmethod
    def from_states(cls, states: np.ndarray, initial_step: float, dim: int = 1) -> 'Population':
        P = states.shape[0]
        return cls(states=np.array(states, dtype=float), energies=np.full(P, np.inf),
                   steps=np.full(P, float(initial_step)), accepted=np.zeros(P, dtype=int),
                   ids=np.arange(P), next_id=P, dim=dim)

    @property
    def size(self) -> int:
        return self.states.shape[0]

    def member(self, p: int) -> PopulationMember:
        return PopulationMember(int(self.ids[p]), GlobalState.from_flat(self.states[p], self.dim),
                                float(self.energies[p]), float(self.steps[p]), int(self.accepted[p]))

    def copy(self) -> 'Population':
        return Population(self.states.copy(), self.energies.copy(), self.steps.copy(),
                          self.accepted.copy(), self.ids.copy(), self.next_id, self.dim)


# ----------------------------------------------------------------------------
# Initialization
# ----------------------------------------------------------------------------

def random_data_tuples(model: EnergyModel, count: int, rng: np.random.Generator) -> np.ndarray:
    """Global points built from one uniformly drawn data point per member, (count, 2N)."""
    d = model.dim
    out = np.empty((count, model.n_members, 2 * d))
    for mat, members in model.groups.items():
        points = model.materials[mat].dataset.points
        picks = rng.integers(0, len(points), size=(count, len(members)))
        out[:, members] = points[picks]
    return out.reshape(count, -1)


def _nearest_tuples(states: np.ndarray, model: EnergyModel) -> Tuple[np.ndarray, np.ndarray]:
    """Nearest data point of every member; returns (data tuples, assignment indices)."""
    d = model.dim
    tuples = np.empty((states.shape[0], model.n_members, 2 * d))
    assignment = np.empty((states.shape[0], model.n_members), dtype=int)
    for mat, members in model.groups.items():
        queries = model.member_points(states, mat).reshape(-1, 2 * d)
        idx, _ = model.nearest(mat).query(queries)
        idx = idx.reshape(states.shape[0], len(members))
        assignment[:, members] = idx
        tuples[:, members] = model.materials[mat].dataset.points[idx]
    return tuples.reshape(states.shape[0], -1), assignment


def min_dist_batch(projector: Projector, model: EnergyModel, starts: np.ndarray,
                   max_iters: int = config.MIN_DIST_MAX_ITERS) -> Tuple[np.ndarray, np.ndarray]:
    """
    Distance-minimizing solver for a batch of starting states.

    Alternates nearest-data assignment per member and closest-point
    projection of the assigned data tuple onto E until the assignment
    no longer changes.

    Returns:
        (admissible states (K, 2N), converged flags (K,))
    """
    z = projector(np.atleast_2d(starts))
    previous = None
    converged = np.zeros(len(z), dtype=bool)
    active = np.arange(len(z))
    for iteration in range(max_iters):
        tuples, assignment = _nearest_tuples(z[active], model)
        z[active] = projector(tuples)
        if previous is not None:
            same = np.all(assignment == previous, axis=1)
            converged[active[same]] = True
            keep = ~same
            active, assignment = active[keep], assignment[keep]
        previous = assignment
        if active.size == 0:
            logger.debug(f"min-dist converged after {iteration + 1} iterations")
            break
    return z, converged


def min_dist_solve(E: ConstraintSet, model: EnergyModel, start, metric: Metric,
                   max_iters: int = config.MIN_DIST_MAX_ITERS,
                   trace: Optional[List[float]] = None) -> GlobalState:
    """
    Distance-minimizing data-driven solution from one starting state.

    Args:
        E: Constraint set
        model: Materials and their data
        start: Starting state (flat array or GlobalState)
        metric: Phase-space metric of the projection
        max_iters: Iteration cap
        trace: If given, receives norm(data tuple - state) of every iteration

    Raises:
        ConvergenceError: Assignment still changing after max_iters (carries the last iterate)
    """
    projector = Projector(E, metric)
    flat = start.flat if isinstance(start, GlobalState) else np.asarray(start, dtype=float)
    z = projector(flat)
    previous = None
    for iteration in range(max_iters):
        tuples, assignment = _nearest_tuples(z[None, :], model)
        z = projector(tuples[0])
        if trace is not None:
            trace.append(norm(tuples[0] - z, metric))
        if previous is not None and np.array_equal(assignment, previous):
            return GlobalState.from_flat(z, E.dim)
        previous = assignment
    raise ConvergenceError(f"min-dist solver did not converge in {max_iters} iterations",
                           last_iterate=GlobalState.from_flat(z, E.dim), iterations=max_iters)


def initialize(E: ConstraintSet, metric: Metric, model: EnergyModel, n_population: int,
               mode: str = 'projection', rng: Optional[np.random.Generator] = None,
               n_solutions: Optional[int] = None, initial_step: float = config.INITIAL_STEP,
               max_iters: int = config.MIN_DIST_MAX_ITERS) -> Population:
    """
    Initial population with all energies set to +inf.

    Args:
        mode: "projection" projects random data tuples onto E; "min-dist"
            runs the min-dist solver from n_solutions random starts and
            repeats the solutions up to the population size
    """
    if n_population < 1:
        raise ConfigError(f"Population size must be at least 1, got {n_population}")
    rng = np.random.default_rng() if rng is None else rng
    projector = Projector(E, metric)
    if mode == 'projection':
        states = projector(random_data_tuples(model, n_population, rng))
    elif mode == 'min-dist':
        K = min(n_solutions or n_population, n_population)
        solutions, converged = min_dist_batch(projector, model, random_data_tuples(model, K, rng), max_iters)
        if not converged.all():
            logger.warning(f"min-dist: {int((~converged).sum())} of {K} starts did not converge "
                           f"in {max_iters} iterations; using last iterates")
        states = solutions[np.arange(n_population) % K]
    else:
        raise ConfigError(f"Unknown initialization mode '{mode}'")
    logger.info(f"✓ Initialized {n_population} walkers by {mode}")
    return Population.from_states(states, initial_step, E.dim)


# ----------------------------------------------------------------------------
# Annealing steps
# ----------------------------------------------------------------------------

def resampling_weights(energies: np.ndarray, delta_beta: float, target: int) -> np.ndarray:
    """tau_p = N_P* exp(-delta_beta e_p) / sum_i exp(-delta_beta e_i); uniform if undefined."""
    energies = np.asarray(energies, dtype=float)
    finite = np.isfinite(energies)
    if not finite.any() or delta_beta == 0:
        return np.full(energies.size, target / energies.size)
    log_w = np.where(finite, -delta_beta * np.where(finite, energies, 0.0), -np.inf)
    return target * softmax(log_w)


def resample(pop: Population, delta_beta: float, target: int, rng: np.random.Generator) -> Population:
    """
    Stochastic-rounding resampling: member p gets floor(tau_p) + Bernoulli(frac(tau_p)) copies.

    The first copy keeps the member's id; further copies receive new ids.
    An empty result keeps the lowest-energy member.
    """
    if pop.size == 0:
        raise ValueError("Cannot resample an empty population")
    tau = resampling_weights(pop.energies, delta_beta, target)
    base = np.floor(tau)
    copies = (base + (rng.uniform(size=tau.size) < tau - base)).astype(int)
    if copies.sum() == 0:
        best = int(np.argmin(pop.energies))
        logger.warning(f"Resampling left no walkers; keeping walker {pop.ids[best]} with lowest energy")
        copies[best] = 1

    source = np.repeat(np.arange(pop.size), copies)
    first = np.ones(source.size, dtype=bool)
    first[1:] = source[1:] != source[:-1]
    ids = pop.ids[source].copy()
    n_new = int((~first).sum())
    ids[~first] = pop.next_id + np.arange(n_new)
    return Population(states=pop.states[source].copy(), energies=pop.energies[source].copy(),
                      steps=pop.steps[source].copy(), accepted=np.zeros(source.size, dtype=int),
                      ids=ids, next_id=pop.next_id + n_new, dim=pop.dim)


def random_move(z, step: float, basis: np.ndarray, rng: np.random.Generator, metric: Metric) -> GlobalState:
    """Trial state z^w + step * A_E g with g ~ N(0, I_N)."""
    flat = z.flat if isinstance(z, GlobalState) else np.asarray(z, dtype=float)
    zw = to_weighted(flat, metric)
    trial = zw + step * (basis @ rng.standard_normal(basis.shape[1]))
    return GlobalState.from_flat(from_weighted(trial, metric), metric.dim)


def mh_accept(e_current: float, e_trial: float, beta_bar: float, rng: np.random.Generator) -> bool:
    """Metropolis rule: accept with probability min(1, exp(-beta_bar (e_trial - e_current)))."""
    if e_trial <= e_current:
        return True
    return bool(rng.uniform() < np.exp(-beta_bar * (e_trial - e_current)))


def adapt_step(step: float, acceptance: float, target: float, floor: float = 0.0):
    """s' = s (1 + r - r*), not below floor. Works elementwise on arrays."""
    return np.maximum(step * (1.0 + acceptance - target), floor)


@dataclass
class QuenchRecord:
    """Progress of one quench."""
    quench: int
    betas: Dict[str, float]
    population: int
    mean_energy: float
    mean_acceptance: float
    mean_step: float
    elapsed: float

    def as_row(self) -> Dict[str, float]:
        row = {'quench': self.quench, 'population': self.population, 'mean_energy': self.mean_energy,
               'mean_acceptance': self.mean_acceptance, 'mean_step': self.mean_step, 'elapsed': self.elapsed}
        row.update({f"beta_{mat}": beta for mat, beta in self.betas.items()})
        return row

    def __str__(self) -> str:
        betas = ", ".join(f"{mat}={beta:.4g}" for mat, beta in self.betas.items())
        return (f"Quench {self.quench}: beta[{betas}] P={self.population} <e>={self.mean_energy:.5g} "
                f"acc={self.mean_acceptance:.3f} step={self.mean_step:.3g} t={self.elapsed:.1f}s")


class PopulationAnnealer:
    """
    Population annealing over a constraint set.

    Args:
        E: Constraint set
        metric: Phase-space metric (defines moves and projections)
        model: Energy model of the structure
        params: Annealing parameters
        basis: Orthonormal weighted basis of E0 (default: PCA construction)
    """

    def __init__(self, E: ConstraintSet, metric: Metric, model: EnergyModel, params: PAParams,
                 basis: Optional[np.ndarray] = None):
        self.E = E
        self.metric = metric
        self.model = model
        self.params = params
        self.projector = Projector(E, metric)
        if basis is None:
            basis = E.basis if E.basis is not None else pca_basis(
                E, metric, rng=substream(params.seed, 'pca'))
        if basis.shape != (2 * E.size, E.size):
            raise DimensionError(f"Basis must be {2 * E.size} x {E.size}, got {basis.shape}")
        self.basis = basis
        self.min_step = config.MIN_STEP_FRACTION * params.initial_step
        self.history: List[QuenchRecord] = []

    def initialize(self, mode: str = 'projection', n_solutions: Optional[int] = None) -> Population:
        return initialize(self.E, self.metric, self.model, self.params.population, mode,
                          substream(self.params.seed, 'init'), n_solutions, self.params.initial_step)

    def sweep(self, states: np.ndarray, energies: np.ndarray, steps: np.ndarray, ids: np.ndarray,
               betas: Dict[str, float], beta_bar: float, quench: int,
               trace: Optional[List[np.ndarray]] = None):
        """
        N_T Metropolis trials for a block of walkers at fixed beta; returns updated copies.

        If trace is given it receives the block's states after every trial.
        """
        k, N = len(ids), self.E.size
        T = self.params.trials
        noise = np.empty((k, T, N))
        uniforms = np.empty((k, T))
        for j, member_id in enumerate(ids):
            rng = substream(self.params.seed, 'moves', int(member_id), quench)
            noise[j] = rng.standard_normal((T, N))
            uniforms[j] = rng.uniform(size=T)

        zw = to_weighted(states, self.metric)
        energies = energies.copy()
        accepted = np.zeros(k, dtype=int)
        for t in range(T):
            trial_w = zw + steps[:, None] * (noise[:, t, :] @ self.basis.T)
            trial_e = self.model.energies(from_weighted(trial_w, self.metric), betas)
            with np.errstate(over='ignore', invalid='ignore'):
                ratio = np.exp(-beta_bar * (trial_e - energies))
            accept = (trial_e <= energies) | (uniforms[:, t] < ratio)
            zw[accept] = trial_w[accept]
            energies[accept] = trial_e[accept]
            accepted += accept
            if trace is not None:
                trace.append(from_weighted(zw, self.metric))
        return from_weighted(zw, self.metric), energies, accepted

    def quench(self, pop: Population, schedule: Schedule, executor: Optional[ThreadPoolExecutor] = None) -> Population:
        """One quench: raise beta, resample, N_T trials per walker, adapt steps."""
        start = time.perf_counter()
        old_bar = self.model.mean_beta(schedule.betas)
        betas = schedule.advance()
        q = schedule.quench
        beta_bar = self.model.mean_beta(betas)

        pop = resample(pop, beta_bar - old_bar, self.params.population,
                       substream(self.params.seed, 'resample', q))
        if self.params.refresh_energies:
            pop.energies = self.model.energies(pop.states, betas)

        chunk = config.MOVE_CHUNK_SIZE
        blocks = [slice(i, min(i + chunk, pop.size)) for i in range(0, pop.size, chunk)]
        tasks = [(pop.states[b], pop.energies[b], pop.steps[b], pop.ids[b], betas, beta_bar, q) for b in blocks]
        if executor is None:
            results = [self.sweep(*task) for task in tasks]
        else:
            results = list(executor.map(lambda task: self.sweep(*task), tasks))
        for b, (states, energies, accepted) in zip(blocks, results):
            pop.states[b] = states
            pop.energies[b] = energies
            pop.accepted[b] = accepted

        if self.params.reproject:
            pop.states = self.projector(pop.states)
        rates = pop.accepted / self.params.trials
        pop.steps = adapt_step(pop.steps, rates, self.params.target_acceptance, self.min_step)

        finite = np.isfinite(pop.energies)
        record = QuenchRecord(quench=q, betas=dict(betas), population=pop.size,
                              mean_energy=float(np.mean(pop.energies[finite])) if finite.any() else float('inf'),
                              mean_acceptance=float(np.mean(rates)), mean_step=float(np.mean(pop.steps)),
                              elapsed=time.perf_counter() - start)
        self.history.append(record)
        logger.info(str(record))
        return pop

    def run(self, schedule: Schedule, population: Optional[Population] = None,
            init_mode: str = 'projection', n_solutions: Optional[int] = None) -> Population:
        """Anneal until the schedule is finished; returns the final population."""
        pop = population.copy() if population is not None else self.initialize(init_mode, n_solutions)
        if schedule.finished:
            return pop
        logger.info("=" * 70)
        logger.info(f"Population annealing: N_Q={schedule.quenches}, N_T={self.params.trials}, "
                    f"N_P*={self.params.population}, targets={schedule.targets}")
        logger.info("=" * 70)
        start = time.perf_counter()
        if self.params.threads > 1:
            with ThreadPoolExecutor(max_workers=self.params.threads) as executor:
                while not schedule.finished:
                    pop = self.quench(pop, schedule, executor)
        else:
            while not schedule.finished:
                pop = self.quench(pop, schedule)
        logger.info(f"✓ Annealing finished in {time.perf_counter() - start:.1f}s with {pop.size} walkers")
        return pop


def run(E: ConstraintSet, model: EnergyModel, schedule: Schedule, params: PAParams, metric: Metric,
        population: Optional[Population] = None, basis: Optional[np.ndarray] = None) -> Population:
    """Run population annealing and return the final population."""
    return PopulationAnnealer(E, metric, model, params, basis).run(schedule, population)
