"""
ddinfer - Truss Model and Constraint Set

Builds pin-jointed truss models from geometry files, assembles the
compatibility and equilibrium operators, and provides the affine constraint
set E = {(eps, sig): eps = B u + g, B^T W sig = f} together with its
projections and orthonormal bases.

Geometry files are JSON documents:

    {
      "dimension": 2,
      "nodes": [{"id": "c", "coords": [0, 0], "fixed": [false, false], "load": [0, -100]}, ...],
      "bars": [{"id": "left", "nodes": ["s1", "c"], "area": 1.0, "material": "steel"}, ...],
      "prescribed": [{"node": "c", "displacement": [0.016, -0.008]}]
    }

or carry a "parametric" block ({"type": "three_bar", ...} or
{"type": "space_frame", ...}) instead of explicit records. A prescribed
displacement fixes every component of its node.

Classes:
    Node: Joint with coordinates, fixed-dof mask, load and prescribed displacement
    Bar: Two-node member with area and material id
    TrussModel: Validated geometry with derived lengths, directions and dof numbering
    ConstraintSet: Assembled B, W, f, g, particular solution and Airy basis
    Projector: Closest-point projection onto E for a given metric

Functions:
    load_geometry / parse_geometry: Read geometry files
    three_bar / space_frame: Parametric geometries
    assemble, airy_basis, project, pca_basis, exact_basis,
    admissibility_residual, elastic_solution
"""

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from scipy import linalg

from src.app_config import config
from src.errors import DimensionError, GeometryError, MechanismError, ConvergenceError
from src.phase_space import (GlobalState, Metric, from_weighted, join_strain_stress,
                             split_strain_stress, to_weighted)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Node:
    """Truss joint."""
    id: str
    coords: np.ndarray
    fixed: Tuple[bool, ...]
    load: np.ndarray
    displacement: np.ndarray  # prescribed values on fixed dofs

    @property
    def dim(self) -> int:
        return len(self.coords)


@dataclass(frozen=True)
class Bar:
    """Truss member between node_a and node_b."""
    id: str
    node_a: str
    node_b: str
    area: float
    material: str


class TrussModel:
    """
    Validated truss geometry.

    Free dofs are numbered node by node in file order, component by
    component. Derived per bar: length L_e, unit direction d_e (from node_a
    to node_b) and weight w_e = A_e L_e.
    """

    def __init__(self, nodes: List[Node], bars: List[Bar]):
        if not nodes:
            raise GeometryError("Truss has no nodes")
        if not bars:
            raise GeometryError("Truss has no bars")
        self.nodes = list(nodes)
        self.bars = list(bars)
        self.dim = nodes[0].dim

        self.node_index: Dict[str, int] = {}
        for i, node in enumerate(self.nodes):
            if node.id in self.node_index:
                raise GeometryError(f"Duplicate node id '{node.id}'")
            if node.dim != self.dim or len(node.fixed) != self.dim or len(node.load) != self.dim:
                raise GeometryError(f"Node '{node.id}' does not have {self.dim} components")
            self.node_index[node.id] = i

        bar_ids = set()
        for bar in self.bars:
            if bar.id in bar_ids:
                raise GeometryError(f"Duplicate bar id '{bar.id}'")
            bar_ids.add(bar.id)
            for end in (bar.node_a, bar.node_b):
                if end not in self.node_index:
                    raise GeometryError(f"Bar '{bar.id}' references unknown node '{end}'")
            if not bar.area > 0:
                raise GeometryError(f"Bar '{bar.id}' has non-positive area {bar.area}")

        coords = self.coordinates
        a = np.array([self.node_index[b.node_a] for b in self.bars])
        b = np.array([self.node_index[b.node_b] for b in self.bars])
        delta = coords[b] - coords[a]
        self.lengths = np.linalg.norm(delta, axis=1)
        zero = np.flatnonzero(self.lengths <= 0)
        if zero.size:
            raise GeometryError(f"Zero-length bars: {[self.bars[i].id for i in zero]}")
        self.directions = delta / self.lengths[:, None]
        self.areas = np.array([bar.area for bar in self.bars], dtype=float)
        self.end_nodes = np.stack([a, b], axis=1)

        # dof numbering
        self.dof_map = -np.ones((len(self.nodes), self.dim), dtype=int)
        count = 0
        for i, node in enumerate(self.nodes):
            for k in range(self.dim):
                if not node.fixed[k]:
                    self.dof_map[i, k] = count
                    count += 1
        self.n_free = count

    @property
    def n_members(self) -> int:
        return len(self.bars)

    @property
    def coordinates(self) -> np.ndarray:
        return np.array([node.coords for node in self.nodes], dtype=float)

    @property
    def weights(self) -> np.ndarray:
        return self.areas * self.lengths

    @property
    def materials(self) -> List[str]:
        return [bar.material for bar in self.bars]

    def node(self, node_id: str) -> Node:
        try:
            return self.nodes[self.node_index[node_id]]
        except KeyError:
            raise GeometryError(f"Unknown node '{node_id}'")

    def load_vector(self) -> np.ndarray:
        """Applied forces on the free dofs, f."""
        f = np.zeros(self.n_free)
        for i, node in enumerate(self.nodes):
            for k in range(self.dim):
                if self.dof_map[i, k] >= 0:
                    f[self.dof_map[i, k]] = node.load[k]
        return f

    def nodal_displacements(self, u: Optional[np.ndarray] = None) -> np.ndarray:
        """Full (n_nodes, dim) displacement field from free dofs u plus prescribed values."""
        field_ = np.array([node.displacement for node in self.nodes], dtype=float)
        if u is not None:
            free = self.dof_map >= 0
            field_[free] = np.asarray(u)[self.dof_map[free]]
        return field_

    def member_strains(self, displacements: np.ndarray) -> np.ndarray:
        """Axial strains (u_b - u_a) . d_e / L_e of a nodal displacement field."""
        du = displacements[self.end_nodes[:, 1]] - displacements[self.end_nodes[:, 0]]
        return np.einsum('ek,ek->e', du, self.directions) / self.lengths

    def metric(self, moduli: Dict[str, float]) -> Metric:
        """Phase-space metric with w_e = A_e L_e and C_e from a material-id map."""
        missing = sorted(set(self.materials) - set(moduli))
        if missing:
            raise GeometryError(f"No modulus given for materials {missing}")
        return Metric(self.weights, np.array([moduli[mat] for mat in self.materials], dtype=float))

    def with_prescribed_magnitude(self, magnitude: float) -> 'TrussModel':
        """Copy with prescribed displacements rescaled so the largest component equals magnitude."""
        current = max((float(np.max(np.abs(node.displacement))) for node in self.nodes), default=0.0)
        if current == 0:
            raise GeometryError("Truss has no nonzero prescribed displacement to rescale")
        factor = magnitude / current
        nodes = [replace(node, displacement=node.displacement * factor) for node in self.nodes]
        return TrussModel(nodes, self.bars)


# ----------------------------------------------------------------------------
# Geometry files
# ----------------------------------------------------------------------------

def _make_node(node_id: str, coords, fixed=None, load=None, displacement=None) -> Node:
    coords = np.asarray(coords, dtype=float)
    dim = coords.size
    fixed = tuple(bool(x) for x in (fixed if fixed is not None else [False] * dim))
    load = np.asarray(load if load is not None else np.zeros(dim), dtype=float)
    disp = np.asarray(displacement if displacement is not None else np.zeros(dim), dtype=float)
    if disp.shape != (dim,) or load.shape != (dim,):
        raise GeometryError(f"Node '{node_id}' load/displacement must have {dim} components")
    if displacement is not None:
        fixed = (True,) * dim
    return Node(str(node_id), coords, fixed, load, disp)


def parse_geometry(data: dict) -> TrussModel:
    """
    Build a TrussModel from a parsed geometry document.

    Raises:
        GeometryError: Missing fields, duplicate ids or dangling references
    """
    if 'parametric' in data:
        params = dict(data['parametric'])
        kind = params.pop('type', None)
        builders = {'three_bar': three_bar, 'space_frame': space_frame}
        if kind not in builders:
            raise GeometryError(f"Unknown parametric geometry '{kind}'")
        try:
            return builders[kind](**params)
        except TypeError as e:
            raise GeometryError(f"Invalid parameters for '{kind}': {e}")

    try:
        prescribed = {}
        for record in data.get('prescribed', []):
            node_id = str(record['node'])
            if node_id in prescribed:
                raise GeometryError(f"Node '{node_id}' has more than one prescribed displacement")
            prescribed[node_id] = record['displacement']

        nodes = []
        for record in data['nodes']:
            node_id = str(record['id'])
            nodes.append(_make_node(node_id, record['coords'], record.get('fixed'),
                                    record.get('load'), prescribed.pop(node_id, None)))
        if prescribed:
            raise GeometryError(f"Prescribed displacement on unknown nodes {sorted(prescribed)}")

        bars = []
        for record in data['bars']:
            end_a, end_b = record['nodes']
            bars.append(Bar(str(record['id']), str(end_a), str(end_b),
                            float(record.get('area', 1.0)), str(record.get('material', 'default'))))
    except KeyError as e:
        raise GeometryError(f"Geometry record is missing field {e}")
    except (TypeError, ValueError) as e:
        raise GeometryError(f"Malformed geometry record: {e}")

    expected_dim = data.get('dimension')
    model = TrussModel(nodes, bars)
    if expected_dim is not None and model.dim != int(expected_dim):
        raise GeometryError(f"Geometry declares dimension {expected_dim} but nodes have {model.dim}")
    return model


def load_geometry(path: Union[str, Path]) -> TrussModel:
    """Read a JSON geometry file."""
    path = Path(path)
    try:
        with open(path, 'r') as f:
            data = json.load(f)
    except FileNotFoundError:
        raise GeometryError(f"Geometry file not found: {path}")
    except json.JSONDecodeError as e:
        raise GeometryError(f"Geometry file {path} is not valid JSON: {e}")
    model = parse_geometry(data)
    logger.info(f"Loaded geometry {path.name}: {len(model.nodes)} nodes, "
                f"{model.n_members} bars, {model.n_free} free dofs")
    return model


def three_bar(load: float = 100.0, area: float = 1.0, material: str = 'default',
              drive: Optional[List[float]] = None, magnitude: Optional[float] = None) -> TrussModel:
    """
    Three bars joining a free node at (0, 0) to supports at (-1, 1), (0, 1), (1, 1).

    Args:
        load: Downward force at the free node (force control)
        area: Cross-sectional area of every bar
        material: Material id of every bar
        drive: Shape of a prescribed displacement of the free node
            (displacement control; the node then has no free dofs)
        magnitude: Largest component of the prescribed displacement
    """
    supports = [('left', (-1.0, 1.0)), ('middle', (0.0, 1.0)), ('right', (1.0, 1.0))]
    nodes = [_make_node(f"s_{name}", xy, fixed=[True, True]) for name, xy in supports]
    if drive is None:
        nodes.append(_make_node('c', (0.0, 0.0), load=[0.0, -load]))
    else:
        direction = np.asarray(drive, dtype=float)
        direction = direction / np.max(np.abs(direction))
        nodes.append(_make_node('c', (0.0, 0.0), displacement=direction * (magnitude or 0.0)))
    bars = [Bar(name, f"s_{name}", 'c', area, material) for name, _ in supports]
    return TrussModel(nodes, bars)


def space_frame(bays: int = 3, width: float = 1.0, height: float = 1.0, area: float = 0.1,
                load: float = 5.0, apex_height: Optional[float] = None,
                material: str = 'default') -> TrussModel:
    """
    Square braced tower with a loaded apex.

    Each bay has four verticals, a ring of four horizontals at its top,
    one face diagonal per face (all with the same sense of rotation) and
    one plan diagonal. The base ring is fixed; four bars join the top ring
    to an apex above its centre. Every top corner carries a downward load.
    For three bays: 43 bars, 39 free dofs.
    """
    corners = [(0.0, 0.0), (width, 0.0), (width, width), (0.0, width)]
    apex_height = 0.5 * height if apex_height is None else apex_height
    nodes = []
    for level in range(bays + 1):
        z = level * height
        for i, (x, y) in enumerate(corners):
            fixed = [level == 0] * 3
            node_load = [0.0, 0.0, -load] if level == bays else None
            nodes.append(_make_node(f"n{level}_{i}", (x, y, z), fixed=fixed, load=node_load))
    nodes.append(_make_node('apex', (0.5 * width, 0.5 * width, bays * height + apex_height)))

    bars = []
    for level in range(1, bays + 1):
        for i in range(4):
            j = (i + 1) % 4
            bars.append(Bar(f"v{level}_{i}", f"n{level - 1}_{i}", f"n{level}_{i}", area, material))
            bars.append(Bar(f"h{level}_{i}", f"n{level}_{i}", f"n{level}_{j}", area, material))
            bars.append(Bar(f"d{level}_{i}", f"n{level - 1}_{i}", f"n{level}_{j}", area, material))
        bars.append(Bar(f"p{level}", f"n{level}_0", f"n{level}_2", area, material))
    for i in range(4):
        bars.append(Bar(f"a{i}", f"n{bays}_{i}", 'apex', area, material))
    return TrussModel(nodes, bars)


# ----------------------------------------------------------------------------
# Constraint set
# ----------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ConstraintSet:
    """
    Affine constraint set E of admissible states.

    Attributes:
        B: Discrete gradient, N x n
        weights: Member weights w_e = A_e L_e, shape (m,)
        f: Applied forces on free dofs, shape (n,)
        g: Strains of the prescribed displacements, shape (N,)
        sigma0: Particular equilibrated stresses, B^T W sigma0 = f
        airy: Airy basis A (N x l) spanning Ker(B^T); W^-1 A spans the self-stresses
        range_basis: Orthonormal basis of Im(B), N x n
        dim: Member dimension d
        basis: Orthonormal weighted basis A_E (2N x N) of E0, once attached
    """
    B: np.ndarray
    weights: np.ndarray
    f: np.ndarray
    g: np.ndarray
    sigma0: np.ndarray
    airy: np.ndarray
    range_basis: np.ndarray
    dim: int = 1
    basis: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def n_free(self) -> int:
        return self.B.shape[1]

    @property
    def n_airy(self) -> int:
        return self.airy.shape[1]

    @property
    def size(self) -> int:
        """N, the dimension of E."""
        return self.B.shape[0]

    @property
    def expanded_weights(self) -> np.ndarray:
        return np.repeat(self.weights, self.dim)

    @property
    def self_stresses(self) -> np.ndarray:
        """W^-1 A: columns are self-equilibrated stress fields."""
        return self.airy / self.expanded_weights[:, None]

    @property
    def z0(self) -> np.ndarray:
        """Particular solution (eps0, sig0) = (g, sigma0) as a flat state."""
        return join_strain_stress(self.g, self.sigma0, self.dim)

    def state(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Flat admissible state eps = B u + g, sig = sigma0 + W^-1 A v."""
        eps = self.B @ np.asarray(u, dtype=float) + self.g
        sig = self.sigma0 + self.self_stresses @ np.asarray(v, dtype=float)
        return join_strain_stress(eps, sig, self.dim)

    def with_basis(self, basis: np.ndarray) -> 'ConstraintSet':
        if basis.shape != (2 * self.size, self.size):
            raise DimensionError(f"Basis must be {2 * self.size} x {self.size}, got {basis.shape}")
        return replace(self, basis=basis)


def discrete_gradient(truss: TrussModel) -> np.ndarray:
    """B with rows (u_b - u_a) . d_e / L_e over the free dofs."""
    B = np.zeros((truss.n_members, truss.n_free))
    for e, (a, b) in enumerate(truss.end_nodes):
        for k in range(truss.dim):
            coeff = truss.directions[e, k] / truss.lengths[e]
            if truss.dof_map[b, k] >= 0:
                B[e, truss.dof_map[b, k]] += coeff
            if truss.dof_map[a, k] >= 0:
                B[e, truss.dof_map[a, k]] -= coeff
    return B


def airy_basis(B: np.ndarray, weights: np.ndarray, rtol: Optional[float] = None) -> np.ndarray:
    """
    Airy basis A with B^T A = 0, so that sig = W^-1 A v is self-equilibrated.

    The self-stresses W^-1 A are an orthonormal basis of Ker(B^T W) from an
    SVD with tolerance rtol times the largest singular value.

    Args:
        B: Discrete gradient (N x n)
        weights: Weights w aligned with the rows of B
        rtol: Relative singular-value cutoff

    Returns:
        A of shape (N, l), l = N - rank(B)
    """
    rtol = config.NULLSPACE_RTOL if rtol is None else rtol
    weights = np.asarray(weights, dtype=float)
    N = B.shape[0]
    if B.shape[1] == 0:
        self_stresses = np.eye(N)
    else:
        self_stresses = linalg.null_space(B.T * weights[None, :], rcond=rtol)
    return weights[:, None] * self_stresses


def assemble(truss: TrussModel, rtol: Optional[float] = None) -> ConstraintSet:
    """
    Assemble the constraint set of a truss.

    Raises:
        MechanismError: rank(B) < n
    """
    rtol = config.NULLSPACE_RTOL if rtol is None else rtol
    B = discrete_gradient(truss)
    n = truss.n_free
    if n > 0:
        singular = linalg.svdvals(B)
        rank = int(np.sum(singular > rtol * singular[0])) if singular[0] > 0 else 0
        if rank < n:
            raise MechanismError(f"Truss is a mechanism: rank(B) = {rank} < {n} free dofs", rank, n)
        range_basis = linalg.orth(B, rcond=rtol)
    else:
        range_basis = np.zeros((truss.n_members, 0))

    weights = truss.weights
    f = truss.load_vector()
    g = truss.member_strains(truss.nodal_displacements())
    if n > 0:
        sigma0 = linalg.lstsq(B.T * weights[None, :], f)[0]
    else:
        sigma0 = np.zeros(truss.n_members)
    airy = airy_basis(B, weights, rtol)

    logger.info(f"✓ Assembled constraint set: N={truss.n_members}, n={n}, l={airy.shape[1]}")
    return ConstraintSet(B=B, weights=weights, f=f, g=g, sigma0=sigma0,
                         airy=airy, range_basis=range_basis, dim=1)


class Projector:
    """
    Closest-point projection onto E in the metric norm.

    Strain and stress parts decouple. With K = B^T W C B:
        u = K^-1 B^T W C (eps* - g),          eps = B u + g
        K eta = f - B^T W sig*,               sig = sig* + C B eta
    which equals the orthogonal projection z0^w + A_E A_E^T (y^w - z0^w)
    in weighted coordinates for any orthonormal basis A_E of E0.
    """

    def __init__(self, E: ConstraintSet, metric: Metric):
        if metric.size != E.size:
            raise DimensionError(f"Metric size {metric.size} does not match constraint set size {E.size}")
        self.E = E
        self.metric = metric
        self.C = metric.block_moduli(1.0)
        self.WC = E.expanded_weights[:, None] * self.C
        self.CB = self.C @ E.B
        if E.n_free > 0:
            stiffness = E.B.T @ self.WC @ E.B
            self._factor = linalg.cho_factor(stiffness)
        else:
            self._factor = None

    def __call__(self, y: Union[GlobalState, np.ndarray]) -> np.ndarray:
        """Project one flat state or a batch (P, 2N); returns flat arrays."""
        flat = y.flat if isinstance(y, GlobalState) else np.asarray(y, dtype=float)
        eps_star, sig_star = split_strain_stress(flat, self.E.dim)
        E = self.E
        if self._factor is None:
            eps = np.broadcast_to(E.g, eps_star.shape).copy()
            sig = sig_star.copy()
        else:
            rhs_u = (eps_star - E.g) @ (E.B.T @ self.WC).T
            u = linalg.cho_solve(self._factor, rhs_u.T).T
            eps = u @ E.B.T + E.g
            rhs_eta = E.f - sig_star @ (E.B.T * E.expanded_weights[None, :]).T
            eta = linalg.cho_solve(self._factor, rhs_eta.T).T
            sig = sig_star + eta @ self.CB.T
        return join_strain_stress(eps, sig, E.dim)


def project(y: Union[GlobalState, np.ndarray], E: ConstraintSet, metric: Metric) -> np.ndarray:
    """Closest point of E to y in the metric norm (flat state or batch)."""
    return Projector(E, metric)(y)


def pca_basis(E: ConstraintSet, metric: Metric, K: Optional[int] = None,
              rng: Optional[np.random.Generator] = None, rtol: float = 1e-8,
              max_retries: Optional[int] = None) -> np.ndarray:
    """
    Orthonormal weighted basis of E0 from a principal component analysis.

    K random global points are projected onto E, mapped to weighted
    coordinates and centred at z0; the eigenvectors of the N largest
    eigenvalues of their second-moment matrix span E0.

    Raises:
        ConvergenceError: Fewer than N significant eigenvalues after all retries
    """
    N = E.size
    K = config.PCA_SAMPLE_FACTOR * N if K is None else K
    if K <= N:
        raise ValueError(f"PCA needs more than N={N} sample points, got K={K}")
    rng = np.random.default_rng() if rng is None else rng
    max_retries = config.PCA_MAX_RETRIES if max_retries is None else max_retries
    projector = Projector(E, metric)
    z0w = to_weighted(E.z0, metric)

    for attempt in range(max_retries + 1):
        samples = z0w + rng.standard_normal((K, 2 * N))
        projected = to_weighted(projector(from_weighted(samples, metric)), metric) - z0w
        moment = projected.T @ projected / K
        eigvals, eigvecs = linalg.eigh(moment)
        order = np.argsort(eigvals)[::-1]
        eigvals, eigvecs = eigvals[order], eigvecs[:, order]
        if eigvals[N - 1] > rtol * eigvals[0]:
            logger.debug(f"PCA basis from K={K} samples (attempt {attempt + 1})")
            return eigvecs[:, :N]
        logger.warning(f"PCA with K={K} found fewer than {N} significant directions, retrying")
        K *= 2
    raise ConvergenceError(f"PCA basis degenerate after {max_retries + 1} attempts", last_iterate=eigvecs[:, :N])


def exact_basis(E: ConstraintSet, metric: Metric) -> np.ndarray:
    """
    Orthonormal weighted basis of E0 built from B (strains) and W^-1 A (stresses).

    Raises:
        MechanismError: The strain and stress directions do not span N dimensions
    """
    N, n = E.size, E.n_free
    strain_cols = join_strain_stress(E.B.T, np.zeros((n, N)), E.dim)
    stress_cols = join_strain_stress(np.zeros((E.n_airy, N)), E.self_stresses.T, E.dim)
    blocks = []
    for cols in (strain_cols, stress_cols):
        if cols.shape[0]:
            blocks.append(linalg.orth(to_weighted(cols, metric).T))
    basis = np.hstack(blocks) if blocks else np.zeros((2 * N, 0))
    if basis.shape[1] != N:
        raise MechanismError(f"Constraint directions span {basis.shape[1]} of {N} dimensions",
                             basis.shape[1], N)
    return basis


def admissibility_residual(z: Union[GlobalState, np.ndarray], E: ConstraintSet):
    """
    Equilibrium residual |B^T W sig - f| and compatibility residual |(I - Q Q^T)(eps - g)|.

    Returns:
        Tuple of floats for one state, tuple of arrays for a batch
    """
    flat = z.flat if isinstance(z, GlobalState) else np.asarray(z, dtype=float)
    if flat.shape[-1] != 2 * E.size:
        raise DimensionError(f"State length {flat.shape[-1]} does not match constraint set size {2 * E.size}")
    eps, sig = split_strain_stress(flat, E.dim)
    equilibrium = np.linalg.norm(sig @ (E.B.T * E.expanded_weights[None, :]).T - E.f, axis=-1)
    r = eps - E.g
    Q = E.range_basis
    compatibility = np.linalg.norm(r - (r @ Q) @ Q.T, axis=-1)
    if flat.ndim == 1:
        return float(equilibrium), float(compatibility)
    return equilibrium, compatibility


def stiffness_solve(E: ConstraintSet, member_moduli: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Linear-elastic solution for scalar member moduli (zero allowed for failed bars).

    Solves B^T W C B u = f - B^T W C g in the least-squares sense, so zero
    stiffness members and resulting mechanisms are tolerated.

    Returns:
        (u, eps) with eps = B u + g
    """
    c = np.repeat(np.asarray(member_moduli, dtype=float), E.dim)
    if E.n_free == 0:
        return np.zeros(0), E.g.copy()
    wc = E.expanded_weights * c
    K = E.B.T @ (wc[:, None] * E.B)
    rhs = E.f - E.B.T @ (wc * E.g)
    u = linalg.lstsq(K, rhs)[0]
    return u, E.B @ u + E.g


def elastic_solution(E: ConstraintSet, metric: Metric) -> Tuple[np.ndarray, np.ndarray]:
    """
    Linear-elastic reference solution sig = C eps for the metric moduli.

    Returns:
        (flat admissible state, free-dof displacements u)
    """
    C = metric.block_moduli(1.0)
    if E.n_free == 0:
        eps = E.g.copy()
        u = np.zeros(0)
    else:
        WC = E.expanded_weights[:, None] * C
        K = E.B.T @ WC @ E.B
        u = linalg.cho_solve(linalg.cho_factor(K), E.f - E.B.T @ WC @ E.g)
        eps = E.B @ u + E.g
    return join_strain_stress(eps, C @ eps, E.dim), u
