"""
ddinfer - Material Data Sets

Empirical local data sets {(eps_i, sig_i), c_i}, the two synthetic material
models used for benchmarking (sliding Gaussian and Weibull brittle failure),
the nearest-neighbour estimate of the final inverse temperature, and the
plain-text data file format.

Data files are CSV with optional '#' header lines carrying metadata:

    # material_id=steel
    # beta=2.47e+05
    strain_0,stress_0,confidence
    0.0012,12.03,1
    ...

Classes:
    LocalDataSet: Immutable point cloud of one material
    Material: Data set plus the modulus defining its metric
    MaterialAssignment: Map from truss members to materials
    DataSetValidation: Collected problems found while reading a data file
"""

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from sklearn.neighbors import NearestNeighbors

from src.errors import DataSetError, DimensionError
from src.phase_space import weight_local

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class LocalDataSet:
    """
    Point cloud y_i = (eps_i, sig_i) with confidences c_i of one material.

    Attributes:
        points: Array (M, 2d) of strains followed by stresses
        confidences: Array (M,) with entries in [0, 1]
        material_id: Material the data belongs to
        beta: Cached final inverse temperature, None until estimated
    """
    points: np.ndarray
    confidences: Optional[np.ndarray] = None
    material_id: str = 'default'
    beta: Optional[float] = None

    def __post_init__(self):
        points = np.atleast_2d(np.array(self.points, dtype=float))
        if points.shape[0] < 1 or points.shape[1] == 0:
            raise DataSetError("Data set must contain at least one point")
        if points.shape[1] % 2:
            raise DimensionError(f"Data points need an even number of columns, got {points.shape[1]}")
        if self.confidences is None:
            confidences = np.ones(points.shape[0])
        else:
            confidences = np.array(self.confidences, dtype=float).ravel()
        if confidences.shape != (points.shape[0],):
            raise DimensionError(f"{points.shape[0]} points but {confidences.size} confidences")
        if not np.all(np.isfinite(points)):
            raise DataSetError("Data points must be finite")
        if np.any((confidences < 0) | (confidences > 1)) or not np.all(np.isfinite(confidences)):
            raise DataSetError("Confidences must lie in [0, 1]")
        if self.beta is not None and not self.beta > 0:
            raise DataSetError(f"Inverse temperature must be positive, got {self.beta}")
        points.setflags(write=False)
        confidences.setflags(write=False)
        object.__setattr__(self, 'points', points)
        object.__setattr__(self, 'confidences', confidences)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1] // 2

    @property
    def strains(self) -> np.ndarray:
        return self.points[:, :self.dim]

    @property
    def stresses(self) -> np.ndarray:
        return self.points[:, self.dim:]

    def with_beta(self, beta: float) -> 'LocalDataSet':
        return replace(self, beta=float(beta))


@dataclass(frozen=True, eq=False)
class Material:
    """Data set together with the modulus C of its (unit-volume) metric."""
    id: str
    modulus: np.ndarray
    dataset: LocalDataSet

    def __post_init__(self):
        modulus = np.atleast_2d(np.asarray(self.modulus, dtype=float))
        if modulus.shape != (self.dataset.dim, self.dataset.dim):
            raise DimensionError(f"Material '{self.id}' modulus {modulus.shape} does not match "
                                 f"data dimension {self.dataset.dim}")
        object.__setattr__(self, 'modulus', modulus)

    @property
    def weighted_points(self) -> np.ndarray:
        """Data in material metric coordinates (C^(1/2) eps, C^(-1/2) sig)."""
        return weight_local(self.dataset.points, self.modulus)

    @property
    def beta(self) -> float:
        if self.dataset.beta is None:
            raise DataSetError(f"Material '{self.id}' has no inverse temperature; run beta_estimate first")
        return self.dataset.beta


@dataclass(frozen=True)
class MaterialAssignment:
    """Material id of every member; members sharing a material share its data."""
    member_materials: Tuple[str, ...]

    @classmethod
    def from_members(cls, member_materials: Sequence[str], available: Sequence[str]) -> 'MaterialAssignment':
        missing = sorted(set(member_materials) - set(available))
        if missing:
            raise DataSetError(f"No data set for materials {missing}")
        return cls(tuple(member_materials))

    @property
    def n_members(self) -> int:
        return len(self.member_materials)

    @property
    def materials(self) -> List[str]:
        """Distinct material ids in order of first use."""
        return list(dict.fromkeys(self.member_materials))

    def members_of(self, material_id: str) -> np.ndarray:
        return np.array([e for e, mat in enumerate(self.member_materials) if mat == material_id], dtype=int)

    def groups(self) -> Dict[str, np.ndarray]:
        return {mat: self.members_of(mat) for mat in self.materials}


@dataclass
class DataSetValidation:
    """Result of reading and checking a data file."""
    is_valid: bool
    errors: List[str] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)
    stats: Dict[str, Any] = field(default_factory=dict)

    def __str__(self) -> str:
        if self.is_valid:
            msg = "✓ Data set validation passed"
            if self.warnings:
                msg += f" with {len(self.warnings)} warning(s)"
        else:
            msg = f"✗ Data set validation failed with {len(self.errors)} error(s)"
        return msg

    def log_details(self, log_level: int = logging.INFO):
        logger.log(log_level, str(self))
        for error in self.errors:
            logger.error(f"  ERROR: {error}")
        for warning in self.warnings:
            logger.warning(f"  WARNING: {warning}")


# ----------------------------------------------------------------------------
# Inverse temperature
# ----------------------------------------------------------------------------

def beta_estimate(dataset: LocalDataSet, modulus: Union[float, np.ndarray], weight: float = 1.0) -> float:
    """
    Final inverse temperature from the mean squared nearest-neighbour distance.

    1/beta = (1/M) sum_i min_{j != i} |y_i - y_j|^2 in the weighted local metric.

    Raises:
        DataSetError: Fewer than two points, or all points coincide
    """
    if dataset.size < 2:
        raise DataSetError(f"beta estimate needs at least 2 points, data set has {dataset.size}")
    weighted = weight_local(dataset.points, modulus, weight)
    distances, _ = NearestNeighbors(n_neighbors=1).fit(weighted).kneighbors()
    mean_sq = float(np.mean(distances[:, 0] ** 2))
    if mean_sq <= 0:
        raise DataSetError(f"Data set '{dataset.material_id}' has only duplicate points; beta undefined")
    beta = 1.0 / mean_sq
    logger.debug(f"beta estimate for '{dataset.material_id}' (M={dataset.size}): {beta:.6g}")
    return beta


# ----------------------------------------------------------------------------
# Generators
# ----------------------------------------------------------------------------

def _check_generator_args(M: int, strain_range: Sequence[float]) -> Tuple[float, float]:
    if int(M) < 1:
        raise DataSetError(f"Number of data points must be at least 1, got {M}")
    lo, hi = (float(x) for x in strain_range)
    if not hi > lo:
        raise DataSetError(f"Strain range [{lo}, {hi}] is empty")
    return lo, hi


def sample_sliding_gaussian(modulus: float, s: float, strain_range: Sequence[float], M: int,
                            rng: np.random.Generator, weight: float = 1.0,
                            material_id: str = 'default') -> LocalDataSet:
    """
    Sample the sliding Gaussian likelihood exp(-w/(2 s^2) |sig - C eps|^2_{C^-1}).

    Strains are uniform over strain_range; stresses are C eps plus Gaussian
    noise of standard deviation s sqrt(C / w).

    Args:
        modulus: Scalar modulus C
        s: Width parameter (0 gives points exactly on sig = C eps)
        strain_range: (min, max) strain
        M: Number of points
        rng: Random generator
        weight: Member weight w (1.0 for per-volume data)
        material_id: Id stored with the data set
    """
    lo, hi = _check_generator_args(M, strain_range)
    if s < 0 or modulus <= 0 or weight <= 0:
        raise DataSetError(f"Invalid sliding Gaussian parameters s={s}, C={modulus}, w={weight}")
    strains = rng.uniform(lo, hi, size=int(M))
    noise = s * np.sqrt(modulus / weight) * rng.standard_normal(int(M))
    stresses = modulus * strains + noise
    return LocalDataSet(np.column_stack([strains, stresses]), material_id=material_id)


def weibull_failure_probability(stress: Union[float, np.ndarray], sigma0: float, p: float) -> np.ndarray:
    """W(sig) = 1 - exp(-(sig/sigma0)^p) for tensile sig, 0 otherwise."""
    tension = np.maximum(np.asarray(stress, dtype=float), 0.0)
    return -np.expm1(-(tension / sigma0) ** p)


def sample_weibull_bimodal(modulus: float, sigma0: float, p: float, noise_s: float,
                           strain_range: Sequence[float], M: int, rng: np.random.Generator,
                           material_id: str = 'default') -> LocalDataSet:
    """
    Sample brittle bars with Weibull strength.

    A point at tensile strain eps lies on the failed branch sig = 0 with
    probability W(C eps) and on the elastic branch sig = C eps otherwise;
    compressive points are always elastic. Gaussian noise of standard
    deviation noise_s is added to the stress.
    """
    lo, hi = _check_generator_args(M, strain_range)
    if sigma0 <= 0 or p <= 0 or noise_s < 0 or modulus <= 0:
        raise DataSetError(f"Invalid Weibull parameters sigma0={sigma0}, p={p}, noise={noise_s}, C={modulus}")
    strains = rng.uniform(lo, hi, size=int(M))
    failed = rng.uniform(size=int(M)) < weibull_failure_probability(modulus * strains, sigma0, p)
    stresses = np.where(failed, 0.0, modulus * strains) + noise_s * rng.standard_normal(int(M))
    logger.debug(f"Weibull data '{material_id}': {int(failed.sum())} of {int(M)} points failed")
    return LocalDataSet(np.column_stack([strains, stresses]), material_id=material_id)


# ----------------------------------------------------------------------------
# Files
# ----------------------------------------------------------------------------

def _read_header(path: Path) -> Dict[str, str]:
    meta = {}
    with open(path, 'r') as f:
        for line in f:
            if not line.startswith('#'):
                break
            key, sep, value = line[1:].strip().partition('=')
            if sep:
                meta[key.strip()] = value.strip()
    return meta


def validate_frame(frame: pd.DataFrame) -> DataSetValidation:
    """Check columns and values of a data table read from file."""
    result = DataSetValidation(is_valid=True)
    strain_cols = [c for c in frame.columns if str(c).startswith('strain_')]
    stress_cols = [c for c in frame.columns if str(c).startswith('stress_')]
    result.stats = {'rows': len(frame), 'dim': len(strain_cols)}

    if len(frame) == 0:
        result.errors.append("File contains no data rows")
    if not strain_cols or len(strain_cols) != len(stress_cols):
        result.errors.append(f"Inconsistent dimension: {len(strain_cols)} strain and "
                             f"{len(stress_cols)} stress columns")
    expected = [f"strain_{k}" for k in range(len(strain_cols))] + [f"stress_{k}" for k in range(len(stress_cols))]
    if strain_cols + stress_cols != expected:
        result.errors.append(f"Unexpected column layout {list(frame.columns)}")
    unknown = [c for c in frame.columns if c not in strain_cols + stress_cols + ['confidence']]
    if unknown:
        result.errors.append(f"Unknown columns {unknown}")

    numeric = frame.apply(pd.to_numeric, errors='coerce')
    bad_rows = numeric.index[numeric.isna().any(axis=1) | ~np.isfinite(numeric.to_numpy(dtype=float)).all(axis=1)]
    if len(bad_rows):
        result.errors.append(f"Malformed or non-finite values in rows {list(bad_rows[:10] + 1)}")
    if 'confidence' in frame.columns:
        conf = numeric['confidence']
        outside = numeric.index[(conf < 0) | (conf > 1)]
        if len(outside):
            result.errors.append(f"Confidence outside [0, 1] in rows {list(outside[:10] + 1)}")
    else:
        result.warnings.append("No confidence column; using c = 1")

    result.is_valid = not result.errors
    return result


def load(path: Union[str, Path]) -> LocalDataSet:
    """
    Read a data file.

    Raises:
        DataSetError: Missing or empty file, malformed rows, inconsistent
            dimension or confidences outside [0, 1]
    """
    path = Path(path)
    if not path.exists():
        raise DataSetError(f"Data file not found: {path}")
    meta = _read_header(path)
    try:
        frame = pd.read_csv(path, comment='#', dtype=str, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise DataSetError(f"Data file {path} is empty")
    except pd.errors.ParserError as e:
        raise DataSetError(f"Data file {path} is malformed: {e}")

    validation = validate_frame(frame)
    if not validation.is_valid:
        validation.log_details(logging.DEBUG)
        raise DataSetError(f"Invalid data file {path}: " + "; ".join(validation.errors))
    for warning in validation.warnings:
        logger.warning(f"{path.name}: {warning}")

    numeric = frame.apply(pd.to_numeric).to_numpy(dtype=float)
    d = validation.stats['dim']
    confidences = numeric[:, 2 * d] if 'confidence' in frame.columns else None
    beta = float(meta['beta']) if 'beta' in meta else None
    dataset = LocalDataSet(numeric[:, :2 * d], confidences,
                           material_id=meta.get('material_id', path.stem), beta=beta)
    logger.info(f"Loaded {dataset.size} points for material '{dataset.material_id}' from {path.name}")
    return dataset


def save(dataset: LocalDataSet, path: Union[str, Path]) -> Path:
    """Write a data file; floats are written with 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    d = dataset.dim
    columns = {f"strain_{k}": dataset.strains[:, k] for k in range(d)}
    columns.update({f"stress_{k}": dataset.stresses[:, k] for k in range(d)})
    columns['confidence'] = dataset.confidences
    frame = pd.DataFrame(columns)
    with open(path, 'w') as f:
        f.write(f"# material_id={dataset.material_id}\n")
        if dataset.beta is not None:
            f.write(f"# beta={dataset.beta!r}\n")
        frame.to_csv(f, index=False, float_format='%.17g')
    logger.debug(f"Saved {dataset.size} points to {path}")
    return path
