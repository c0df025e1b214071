"""
ddinfer - Phase Space

Local and global phase-space points, the energy-weighted norm and the
weighted-coordinate map used by every other module.

A global state of m members with d strain components each is stored as a
flat array of length 2N (N = m*d) in member-major order: for every member
its d strains followed by its d stresses. Batches of states are arrays of
shape (P, 2N).

Classes:
    Metric: Per-member weights w_e and modulus matrices C_e
    LocalState: One member's (strain, stress) pair
    GlobalState: All members' local states
"""

import logging
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from src.errors import DimensionError, MetricError

logger = logging.getLogger(__name__)

ArrayLike = Union[np.ndarray, Sequence[float]]


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


def _spd_power(moduli: np.ndarray, power: float) -> np.ndarray:
    """Matrix power of a stack of SPD matrices via symmetric eigendecomposition."""
    eigvals, eigvecs = np.linalg.eigh(moduli)
    scaled = eigvecs * eigvals[:, None, :] ** power
    return np.einsum('mij,mkj->mik', scaled, eigvecs)


@dataclass(frozen=True, eq=False)
class Metric:
    """
    Phase-space metric: ||z||^2 = sum_e w_e (C_e eps_e . eps_e + C_e^-1 sig_e . sig_e).

    Attributes:
        weights: Positive member weights w_e, shape (m,)
        moduli: SPD member modulus matrices C_e, shape (m, d, d)
    """
    weights: np.ndarray
    moduli: np.ndarray
    sqrt_moduli: np.ndarray = field(init=False, repr=False)
    inv_sqrt_moduli: np.ndarray = field(init=False, repr=False)
    inv_moduli: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        weights = np.atleast_1d(np.asarray(self.weights, dtype=float))
        moduli = np.asarray(self.moduli, dtype=float)
        if moduli.ndim == 1:
            moduli = moduli[:, None, None]
        if weights.ndim != 1 or moduli.ndim != 3 or moduli.shape[1] != moduli.shape[2]:
            raise DimensionError(f"Metric needs weights (m,) and moduli (m, d, d), got "
                                 f"{weights.shape} and {moduli.shape}")
        if moduli.shape[0] != weights.shape[0]:
            raise DimensionError(f"{weights.shape[0]} weights but {moduli.shape[0]} moduli")
        if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
            raise MetricError("All member weights must be finite and positive")
        if not np.allclose(moduli, np.swapaxes(moduli, 1, 2), rtol=1e-12, atol=0.0):
            raise MetricError("Modulus matrices must be symmetric")
        if np.any(np.linalg.eigvalsh(moduli) <= 0):
            raise MetricError("Modulus matrices must be positive definite")

        object.__setattr__(self, 'weights', _frozen(weights))
        object.__setattr__(self, 'moduli', _frozen(moduli))
        object.__setattr__(self, 'sqrt_moduli', _frozen(_spd_power(moduli, 0.5)))
        object.__setattr__(self, 'inv_sqrt_moduli', _frozen(_spd_power(moduli, -0.5)))
        object.__setattr__(self, 'inv_moduli', _frozen(np.linalg.inv(moduli)))

    @classmethod
    def uniform(cls, n_members: int, dim: int = 1, weight: float = 1.0,
                modulus: float = 1.0) -> 'Metric':
        """Metric with equal weights and isotropic moduli modulus * I."""
        moduli = np.broadcast_to(modulus * np.eye(dim), (n_members, dim, dim))
        return cls(np.full(n_members, weight), moduli.copy())

    @property
    def n_members(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.moduli.shape[1]

    @property
    def size(self) -> int:
        """N = m * d, half the phase-space dimension."""
        return self.n_members * self.dim

    def block_moduli(self, power: float = 1.0) -> np.ndarray:
        """Block-diagonal N x N matrix of C_e, C_e^(1/2), C_e^(-1/2) or C_e^-1."""
        stacks = {1.0: self.moduli, 0.5: self.sqrt_moduli,
                  -0.5: self.inv_sqrt_moduli, -1.0: self.inv_moduli}
        if power not in stacks:
            raise ValueError(f"Unsupported modulus power {power}")
        stack = stacks[power]
        m, d = self.n_members, self.dim
        out = np.zeros((m * d, m * d))
        for e in range(m):
            out[e * d:(e + 1) * d, e * d:(e + 1) * d] = stack[e]
        return out

    def expanded_weights(self) -> np.ndarray:
        """w_e repeated d times, aligned with strain or stress vectors of length N."""
        return np.repeat(self.weights, self.dim)


@dataclass(frozen=True, eq=False)
class LocalState:
    """Strain and stress of a single member."""
    strain: np.ndarray
    stress: np.ndarray

    def __post_init__(self):
        strain = np.atleast_1d(np.asarray(self.strain, dtype=float))
        stress = np.atleast_1d(np.asarray(self.stress, dtype=float))
        if strain.shape != stress.shape or strain.ndim != 1:
            raise DimensionError(f"Strain {strain.shape} and stress {stress.shape} must be equal-length vectors")
        if not (np.all(np.isfinite(strain)) and np.all(np.isfinite(stress))):
            raise ValueError("Local state entries must be finite")
        object.__setattr__(self, 'strain', _frozen(strain))
        object.__setattr__(self, 'stress', _frozen(stress))

    @property
    def values(self) -> np.ndarray:
        return np.concatenate([self.strain, self.stress])


@dataclass(frozen=True, eq=False)
class GlobalState:
    """
    Point z = (eps, sig) of the global phase space.

    Attributes:
        values: Array of shape (m, 2d); row e holds (eps_e, sig_e)
    """
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[1] % 2:
            raise DimensionError(f"Global state values must have shape (m, 2d), got {values.shape}")
        object.__setattr__(self, 'values', _frozen(values))

    @classmethod
    def from_parts(cls, strain: ArrayLike, stress: ArrayLike, dim: int = 1) -> 'GlobalState':
        strain = np.asarray(strain, dtype=float).reshape(-1, dim)
        stress = np.asarray(stress, dtype=float).reshape(-1, dim)
        if strain.shape != stress.shape:
            raise DimensionError(f"Strain {strain.shape} and stress {stress.shape} disagree")
        return cls(np.hstack([strain, stress]))

    @classmethod
    def from_flat(cls, flat: ArrayLike, dim: int = 1) -> 'GlobalState':
        flat = np.asarray(flat, dtype=float)
        if flat.ndim != 1 or flat.size % (2 * dim):
            raise DimensionError(f"Flat state of length {flat.size} does not split into members of size {2 * dim}")
        return cls(flat.reshape(-1, 2 * dim))

    @classmethod
    def from_locals(cls, states: Sequence[LocalState]) -> 'GlobalState':
        return cls(np.vstack([s.values for s in states]))

    @property
    def n_members(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1] // 2

    @property
    def flat(self) -> np.ndarray:
        return self.values.ravel()

    @property
    def strain(self) -> np.ndarray:
        """Strains as an N-vector."""
        return self.values[:, :self.dim].ravel()

    @property
    def stress(self) -> np.ndarray:
        """Stresses as an N-vector."""
        return self.values[:, self.dim:].ravel()

    def local(self, member: int) -> LocalState:
        return LocalState(self.values[member, :self.dim], self.values[member, self.dim:])


def _as_members(z: Union[GlobalState, np.ndarray], metric: Metric) -> np.ndarray:
    """Reshape a state or batch of flat states to (..., m, 2d), checking sizes."""
    array = z.values if isinstance(z, GlobalState) else np.asarray(z, dtype=float)
    m, d = metric.n_members, metric.dim
    if isinstance(z, GlobalState):
        if array.shape != (m, 2 * d):
            raise DimensionError(f"State has shape {array.shape}, metric expects ({m}, {2 * d})")
        return array
    if array.shape[-1] != 2 * m * d:
        raise DimensionError(f"State length {array.shape[-1]} does not match metric size {2 * m * d}")
    return array.reshape(array.shape[:-1] + (m, 2 * d))


def split_strain_stress(flat: np.ndarray, dim: int = 1):
    """Split flat states (..., 2N) into strain and stress arrays (..., N)."""
    members = flat.reshape(flat.shape[:-1] + (-1, 2 * dim))
    lead = flat.shape[:-1]
    return members[..., :dim].reshape(lead + (-1,)), members[..., dim:].reshape(lead + (-1,))


def join_strain_stress(strain: np.ndarray, stress: np.ndarray, dim: int = 1) -> np.ndarray:
    """Inverse of split_strain_stress."""
    lead = strain.shape[:-1]
    eps = strain.reshape(lead + (-1, dim))
    sig = stress.reshape(lead + (-1, dim))
    return np.concatenate([eps, sig], axis=-1).reshape(lead + (-1,))


def to_weighted(z: Union[GlobalState, np.ndarray], metric: Metric) -> np.ndarray:
    """
    Map states to weighted coordinates whose Euclidean norm is the metric norm.

    Strains are scaled by sqrt(w_e) C_e^(1/2), stresses by sqrt(w_e) C_e^(-1/2).

    Args:
        z: GlobalState, flat state (2N,) or batch (P, 2N)
        metric: Phase-space metric

    Returns:
        Flat weighted coordinates with the leading shape of the input
    """
    members = _as_members(z, metric)
    d = metric.dim
    root_w = np.sqrt(metric.weights)[:, None]
    eps = np.einsum('mij,...mj->...mi', metric.sqrt_moduli, members[..., :d]) * root_w
    sig = np.einsum('mij,...mj->...mi', metric.inv_sqrt_moduli, members[..., d:]) * root_w
    out = np.concatenate([eps, sig], axis=-1)
    lead = () if isinstance(z, GlobalState) else members.shape[:-2]
    return out.reshape(lead + (-1,))


def from_weighted(zw: np.ndarray, metric: Metric) -> np.ndarray:
    """Inverse of to_weighted; returns flat states with the input's leading shape."""
    zw = np.asarray(zw, dtype=float)
    members = _as_members(zw, metric)
    d = metric.dim
    inv_root_w = 1.0 / np.sqrt(metric.weights)[:, None]
    eps = np.einsum('mij,...mj->...mi', metric.inv_sqrt_moduli, members[..., :d]) * inv_root_w
    sig = np.einsum('mij,...mj->...mi', metric.sqrt_moduli, members[..., d:]) * inv_root_w
    return np.concatenate([eps, sig], axis=-1).reshape(zw.shape)


def norm(z: Union[GlobalState, np.ndarray], metric: Metric) -> Union[float, np.ndarray]:
    """Energy norm sqrt(sum_e w_e (C_e eps_e . eps_e + C_e^-1 sig_e . sig_e))."""
    result = np.linalg.norm(to_weighted(z, metric), axis=-1)
    return float(result) if np.ndim(result) == 0 else result


def weight_local(points: np.ndarray, modulus: np.ndarray, weight: float = 1.0) -> np.ndarray:
    """
    Weighted coordinates of local points (..., 2d) for one member or material.

    Args:
        points: Local (strain, stress) rows
        modulus: d x d SPD modulus (or scalar for d = 1)
        weight: Member weight; 1.0 gives the per-volume material metric

    Returns:
        Array of the same shape as points
    """
    points = np.asarray(points, dtype=float)
    modulus = np.atleast_2d(np.asarray(modulus, dtype=float))
    d = modulus.shape[0]
    if points.shape[-1] != 2 * d:
        raise DimensionError(f"Local points have {points.shape[-1]} columns, modulus implies {2 * d}")
    root = _spd_power(modulus[None], 0.5)[0]
    inv_root = _spd_power(modulus[None], -0.5)[0]
    scale = np.sqrt(weight)
    return np.concatenate([points[..., :d] @ root.T * scale,
                           points[..., d:] @ inv_root.T * scale], axis=-1)
