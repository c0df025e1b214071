"""
ddinfer - Posterior Inference and Oracles

Turns final populations into quantity-of-interest samples, expectations,
histograms and Kolmogorov-Smirnov errors, and provides the two reference
solutions used to judge them:

- GaussianPosterior: exact posterior of (u, v) for sliding-Gaussian
  material likelihoods, where the log-likelihood is quadratic on E.
- WeibullMixture: discrete distribution of an outcome over all failure
  patterns of brittle tension bars with Weibull strength.

Classes:
    QoI: Scalar functional of admissible states
    GaussianPosterior: Mean and covariance of the Airy/displacement coordinates
    MixtureComponent / WeibullMixture: Failure-pattern enumeration result

Functions:
    expectation, recover_dofs, gaussian_oracle, weibull_oracle,
    histogram, ks_statistic, cluster_masses, summarize
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg, stats

from src.app_config import config
from src.errors import InadmissibleStateError, MechanismError, DimensionError
from src.material_data import weibull_failure_probability
from src.phase_space import GlobalState, Metric, join_strain_stress, split_strain_stress
from src.truss import ConstraintSet, TrussModel, assemble, stiffness_solve

logger = logging.getLogger(__name__)

StateBatch = Union[GlobalState, np.ndarray]


def _as_batch(states: StateBatch) -> np.ndarray:
    if isinstance(states, GlobalState):
        return states.flat[None, :]
    return np.atleast_2d(np.asarray(states, dtype=float))


# ----------------------------------------------------------------------------
# Quantities of interest
# ----------------------------------------------------------------------------

def displacement_operator(truss: TrussModel, E: ConstraintSet) -> Tuple[np.ndarray, np.ndarray]:
    """
    Linear map from strains to the nodal displacement field.

    Returns:
        (D, d0) with D of shape (n_nodes*dim, N) and d0 of shape (n_nodes*dim,)
        such that the flattened field equals D @ eps + d0 for admissible eps
    """
    n_nodes, dim = len(truss.nodes), truss.dim
    scatter = np.zeros((n_nodes * dim, E.n_free))
    free = truss.dof_map.ravel()
    rows = np.flatnonzero(free >= 0)
    scatter[rows, free[rows]] = 1.0
    pinv = np.linalg.pinv(E.B) if E.n_free else np.zeros((0, E.size))
    D = scatter @ pinv
    d0 = truss.nodal_displacements().ravel() - D @ E.g
    return D, d0


@dataclass(frozen=True, eq=False)
class QoI:
    """
    Named scalar quantity of interest.

    Linear QoIs are f(z) = h . z + c on flat states; others carry a
    vectorized function of a state batch.
    """
    name: str
    weights: Optional[np.ndarray] = None
    offset: float = 0.0
    func: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)

    def __post_init__(self):
        if (self.weights is None) == (self.func is None):
            raise ValueError(f"QoI '{self.name}' needs exactly one of weights or func")

    @property
    def is_linear(self) -> bool:
        return self.weights is not None

    def __call__(self, states: StateBatch) -> np.ndarray:
        batch = _as_batch(states)
        if self.is_linear:
            if batch.shape[1] != self.weights.size:
                raise DimensionError(f"QoI '{self.name}' expects states of length {self.weights.size}")
            return batch @ self.weights + self.offset
        return np.asarray(self.func(batch), dtype=float)

    @classmethod
    def linear(cls, name: str, strain_weights: np.ndarray, stress_weights: np.ndarray,
               offset: float = 0.0, dim: int = 1) -> 'QoI':
        return cls(name, join_strain_stress(np.asarray(strain_weights, dtype=float),
                                            np.asarray(stress_weights, dtype=float), dim), float(offset))

    @classmethod
    def displacement(cls, truss: TrussModel, E: ConstraintSet, node: str,
                     direction: Sequence[float], name: Optional[str] = None) -> 'QoI':
        """Displacement of a node along a (normalized) direction."""
        D, d0 = displacement_operator(truss, E)
        i = truss.node_index[truss.node(node).id]
        direction = np.asarray(direction, dtype=float)
        direction = direction / np.linalg.norm(direction)
        rows = slice(i * truss.dim, (i + 1) * truss.dim)
        return cls.linear(name or f"u_{node}", direction @ D[rows], np.zeros(E.size),
                          float(direction @ d0[rows]), E.dim)

    @classmethod
    def reaction(cls, truss: TrussModel, E: ConstraintSet, node: str,
                 direction: Optional[Sequence[float]] = None, name: Optional[str] = None) -> 'QoI':
        """
        Force applied to a node by its supports, along a direction.

        R = -sum_e sig_e A_e d_(node->other end) - f_node; the default
        direction is that of the node's prescribed displacement.
        """
        target = truss.node(node)
        i = truss.node_index[target.id]
        if direction is None:
            if not np.any(target.displacement):
                raise ValueError(f"Node '{node}' has no prescribed displacement to define a direction")
            direction = target.displacement
        direction = np.asarray(direction, dtype=float)
        direction = direction / np.linalg.norm(direction)
        stress_weights = np.zeros(truss.n_members)
        for e, (a, b) in enumerate(truss.end_nodes):
            if a == i:
                stress_weights[e] -= truss.areas[e] * (truss.directions[e] @ direction)
            elif b == i:
                stress_weights[e] += truss.areas[e] * (truss.directions[e] @ direction)
        return cls.linear(name or f"P_{node}", np.zeros(E.size), stress_weights,
                          -float(target.load @ direction), E.dim)

    @classmethod
    def eccentricity(cls, truss: TrussModel, E: ConstraintSet, node: str,
                     name: Optional[str] = None) -> 'QoI':
        """In-plane displacement magnitude sqrt(u_x^2 + u_y^2) of a node."""
        ux = cls.displacement(truss, E, node, np.eye(truss.dim)[0])
        uy = cls.displacement(truss, E, node, np.eye(truss.dim)[1])

        def evaluate(batch: np.ndarray) -> np.ndarray:
            return np.hypot(ux(batch), uy(batch))

        return cls(name or f"u_e_{node}", func=evaluate)


def expectation(states: StateBatch, f: QoI) -> float:
    """Population mean (1/N_P) sum_p f(z_p)."""
    states = getattr(states, "states", states)
    values = f(states)
    if values.size == 0:
        raise ValueError("Cannot take the expectation over an empty population")
    return float(np.mean(values))


def summarize(values: np.ndarray) -> Dict[str, float]:
    values = np.asarray(values, dtype=float)
    return {'n': int(values.size), 'mean': float(np.mean(values)), 'std': float(np.std(values)),
            'min': float(np.min(values)), 'max': float(np.max(values))}


def recover_dofs(z: StateBatch, E: ConstraintSet, tol: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Coordinates (u, v) of an admissible state: eps = B u + g, sig = sigma0 + W^-1 A v.

    Raises:
        InadmissibleStateError: Reconstruction residual above tol (relative to the state size)
    """
    tol = config.ADMISSIBILITY_TOL if tol is None else tol
    flat = _as_batch(z)[0]
    eps, sig = split_strain_stress(flat, E.dim)
    if E.n_free:
        u = linalg.lstsq(E.B, eps - E.g)[0]
    else:
        u = np.zeros(0)
    if E.n_airy:
        v = linalg.lstsq(E.self_stresses, sig - E.sigma0)[0]
    else:
        v = np.zeros(0)
    eps_res = np.linalg.norm(E.B @ u + E.g - eps) / max(1.0, np.linalg.norm(eps))
    sig_res = np.linalg.norm(E.self_stresses @ v + E.sigma0 - sig) / max(1.0, np.linalg.norm(sig))
    if eps_res > tol or sig_res > tol:
        raise InadmissibleStateError(f"State is not admissible: strain residual {eps_res:.3g}, "
                                     f"stress residual {sig_res:.3g}")
    return u, v


# ----------------------------------------------------------------------------
# Gaussian oracle
# ----------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GaussianPosterior:
    """
    Gaussian posterior of x = (u, v) on E.

    Attributes:
        mean: Stacked means (u_bar, v_bar)
        precision: Precision matrix of x
        jacobian: dz/dx, flat state columns of B (strains) and W^-1 A (stresses)
        origin: z0, the state at x = 0
        n_free: Length of u
    """
    mean: np.ndarray
    precision: np.ndarray
    jacobian: np.ndarray
    origin: np.ndarray
    n_free: int

    @property
    def mean_u(self) -> np.ndarray:
        return self.mean[:self.n_free]

    @property
    def mean_v(self) -> np.ndarray:
        return self.mean[self.n_free:]

    @property
    def covariance(self) -> np.ndarray:
        return linalg.cho_solve(linalg.cho_factor(self.precision), np.eye(len(self.mean)))

    @property
    def mean_state(self) -> np.ndarray:
        return self.origin + self.jacobian @ self.mean

    def marginal(self, f: QoI) -> Tuple[float, float]:
        """Mean and variance of a linear QoI."""
        if not f.is_linear:
            raise ValueError(f"QoI '{f.name}' is not linear; use sample() instead")
        grad = self.jacobian.T @ f.weights
        mean = float(f.weights @ self.origin + f.offset + grad @ self.mean)
        variance = float(grad @ self.covariance @ grad)
        return mean, variance

    def cdf(self, f: QoI) -> Callable[[np.ndarray], np.ndarray]:
        mean, variance = self.marginal(f)
        return stats.norm(loc=mean, scale=np.sqrt(variance)).cdf

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """Flat admissible states drawn from the posterior, (count, 2N)."""
        x = rng.multivariate_normal(self.mean, self.covariance, size=count, method='cholesky')
        return self.origin + x @ self.jacobian.T

    def reference(self, f: QoI, count: int, rng: np.random.Generator):
        """Analytic CDF for linear QoIs, Monte Carlo sample otherwise."""
        if f.is_linear:
            return self.cdf(f)
        return f(self.sample(count, rng))


def gaussian_oracle(E: ConstraintSet, metric: Metric, s: float,
                    likelihood_weights: Union[str, np.ndarray] = 'volume') -> GaussianPosterior:
    """
    Exact posterior for sliding-Gaussian member likelihoods.

    Member e contributes exp(-omega_e / (2 s^2) |sig_e - C_e eps_e|^2_{C_e^-1}).
    With omega = w (``'volume'``) the precision is block diagonal with the
    stiffness B^T W C B / s^2 and compliance A^T W^-1 C^-1 A / s^2 blocks;
    ``'unit'`` (omega = 1) matches data sampled per unit volume and shared
    by all members of a material.

    Raises:
        MechanismError: Singular precision matrix
    """
    if not s > 0:
        raise ValueError(f"Width s must be positive, got {s}")
    N, n = E.size, E.n_free
    if isinstance(likelihood_weights, str):
        if likelihood_weights == 'volume':
            omega = E.expanded_weights
        elif likelihood_weights == 'unit':
            omega = np.ones(N)
        else:
            raise ValueError(f"Unknown likelihood weighting '{likelihood_weights}'")
    else:
        omega = np.repeat(np.asarray(likelihood_weights, dtype=float), E.dim)

    C = metric.block_moduli(1.0)
    C_inv_sqrt = metric.block_moduli(-0.5)
    R = C_inv_sqrt @ np.hstack([-C @ E.B, E.self_stresses])
    r0 = C_inv_sqrt @ (E.sigma0 - C @ E.g)
    normal = R.T @ (omega[:, None] * R)
    try:
        factor = linalg.cho_factor(normal)
    except linalg.LinAlgError:
        rank = np.linalg.matrix_rank(normal)
        raise MechanismError("Posterior precision is singular", rank, normal.shape[0])
    mean = -linalg.cho_solve(factor, R.T @ (omega * r0))

    jacobian = np.hstack([join_strain_stress(E.B.T, np.zeros((n, N)), E.dim).T,
                          join_strain_stress(np.zeros((E.n_airy, N)), E.self_stresses.T, E.dim).T])
    posterior = GaussianPosterior(mean=mean, precision=normal / s ** 2, jacobian=jacobian,
                                  origin=E.z0, n_free=n)
    logger.debug(f"Gaussian oracle: u_bar={posterior.mean_u}, v_bar={posterior.mean_v}")
    return posterior


# ----------------------------------------------------------------------------
# Weibull oracle
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class MixtureComponent:
    """One failure pattern."""
    failed: Tuple[str, ...]
    value: float
    weight: float


@dataclass
class WeibullMixture:
    """Discrete outcome distribution over failure patterns."""
    components: List[MixtureComponent]

    @property
    def values(self) -> np.ndarray:
        return np.array([c.value for c in self.components])

    @property
    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.components])

    @property
    def mean(self) -> float:
        return float(self.weights @ self.values)

    @property
    def std(self) -> float:
        return float(np.sqrt(self.weights @ (self.values - self.mean) ** 2))

    def cdf(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.sum(self.weights * (self.values <= x[..., None]), axis=-1)

    def modes(self, rel_tol: float = 1e-9) -> List[Tuple[float, float]]:
        """(value, mass) pairs with coincident values merged, sorted by value."""
        merged: List[List[float]] = []
        scale = max(1.0, float(np.max(np.abs(self.values))))
        for value, weight in sorted(zip(self.values, self.weights)):
            if merged and abs(value - merged[-1][0]) <= rel_tol * scale:
                merged[-1][1] += weight
            else:
                merged.append([value, weight])
        return [(v, w) for v, w in merged]

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        return rng.choice(self.values, size=count, p=self.weights)


def weibull_oracle(truss: TrussModel, modulus: Union[float, Dict[str, float]], sigma0: float, p: float,
                   qoi: Optional[QoI] = None, delta: Optional[float] = None,
                   node: Optional[str] = None) -> WeibullMixture:
    """
    Enumerate failure patterns of the bars in tension.

    Bars are classified by the intact linear-elastic solution. For every
    subset of tension bars the structure is re-solved with those bars at
    zero stiffness; the pattern's weight is the product over tension bars
    of W(C eps_e) (failed) or 1 - W(C eps_e) (intact) at the pattern's
    strains, and weights are renormalized.

    Args:
        truss: Displacement-controlled truss
        modulus: Elastic modulus, scalar or per material id
        sigma0, p: Weibull scale and shape
        qoi: Outcome per pattern (default: reaction at `node`)
        delta: Optional prescribed displacement magnitude overriding the geometry's
        node: Driven node for the default reaction QoI
    """
    if sigma0 <= 0 or p <= 0:
        raise ValueError(f"Invalid Weibull parameters sigma0={sigma0}, p={p}")
    E = assemble(truss)
    if isinstance(modulus, dict):
        moduli = np.array([modulus[mat] for mat in truss.materials], dtype=float)
    else:
        moduli = np.full(truss.n_members, float(modulus))
    if qoi is None:
        if node is None:
            driven = [nd.id for nd in truss.nodes if np.any(nd.displacement)]
            if len(driven) != 1:
                raise ValueError("Specify the driven node for the reaction")
            node = driven[0]
        qoi = QoI.reaction(truss, E, node)
    if delta is not None:
        truss = truss.with_prescribed_magnitude(delta)
        E = assemble(truss)

    _, eps_intact = stiffness_solve(E, moduli)
    tension = np.flatnonzero(moduli * eps_intact > 0)
    logger.debug(f"Weibull oracle: tension bars {[truss.bars[e].id for e in tension]}")

    components = []
    for pattern in itertools.product((False, True), repeat=len(tension)):
        failed = tension[list(pattern)] if pattern else np.zeros(0, dtype=int)
        c = moduli.copy()
        c[failed] = 0.0
        _, eps = stiffness_solve(E, c)
        probability = weibull_failure_probability(moduli[tension] * eps[tension], sigma0, p)
        weight = float(np.prod(np.where(pattern, probability, 1.0 - probability))) if pattern else 1.0
        value = float(qoi(join_strain_stress(eps, c * eps, E.dim))[0])
        components.append(MixtureComponent(tuple(truss.bars[e].id for e in failed), value, weight))

    total = sum(comp.weight for comp in components)
    if total <= 0:
        raise ValueError("All failure patterns have zero probability")
    components = [MixtureComponent(comp.failed, comp.value, comp.weight / total) for comp in components]
    return WeibullMixture(components)


# ----------------------------------------------------------------------------
# Diagnostics
# ----------------------------------------------------------------------------

def histogram(samples: np.ndarray, bins: Optional[int] = None, bin_width: Optional[float] = None,
              value_range: Optional[Tuple[float, float]] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Normalized histogram.

    Returns:
        (bin centers, frequencies summing to 1)
    """
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size == 0:
        raise ValueError("Cannot build a histogram of an empty sample")
    if bin_width is not None:
        lo, hi = value_range or (samples.min(), samples.max())
        count = max(1, int(np.ceil((hi - lo) / bin_width)))
        edges = lo + bin_width * np.arange(count + 1)
        if edges[-1] < hi:
            edges = np.append(edges, edges[-1] + bin_width)
        counts, edges = np.histogram(samples, bins=edges)
    else:
        counts, edges = np.histogram(samples, bins=bins or config.HISTOGRAM_BINS, range=value_range)
    centers = 0.5 * (edges[:-1] + edges[1:])
    return centers, counts / samples.size


def ks_statistic(samples: np.ndarray, reference) -> float:
    """
    Kolmogorov-Smirnov distance between the empirical CDF of samples and a reference.

    Args:
        samples: Sample values
        reference: Callable CDF or a second sample
    """
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size == 0:
        raise ValueError("KS statistic needs a nonempty sample")
    if callable(reference):
        return float(stats.kstest(samples, reference).statistic)
    return float(stats.ks_2samp(samples, np.asarray(reference, dtype=float).ravel()).statistic)


def cluster_masses(samples: np.ndarray, centers: Sequence[float]) -> np.ndarray:
    """Fraction of samples nearest to each center."""
    samples = np.asarray(samples, dtype=float).ravel()
    centers = np.asarray(centers, dtype=float)
    nearest = np.argmin(np.abs(samples[:, None] - centers[None, :]), axis=1)
    return np.bincount(nearest, minlength=centers.size) / samples.size
