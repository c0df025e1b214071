"""
ddinfer - Hierarchical k-means Search Tree

Radius-limited evaluation of the thermalized likelihood

    log L(q) = log( (1/M) sum_{i in S} c_i exp(-beta |y_i - q|^2) ),
    S = {i : |y_i - q|^2 <= r_TOL^2},  r_TOL^2 = -log(TOL)/beta,

over data points stored in weighted local coordinates. Points outside the
radius contribute less than TOL/M each and are dropped. An empty S gives
the floor value log(TOL/M), which direct evaluation also respects.

With unlimited N_checks the search is exact and all queries of a batch
descend the tree together. With finite N_checks every query runs a greedy
descent followed by at most N_checks further leaf visits taken in
best-first order from a priority queue.

Classes:
    TreeNode: Node with centroid, radius bound and children or point ids
    TreeParams: Branching factor, leaf size and k-means iteration cap
    KMeansTree: The search tree over one material's data
    NearestData: Exact nearest-neighbour lookup used by the min-dist solver
"""

import heapq
import itertools
import logging
import warnings
from collections import deque
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.special import logsumexp
from sklearn.cluster import KMeans
from sklearn.exceptions import ConvergenceWarning
from sklearn.neighbors import NearestNeighbors

from src.app_config import config
from src.errors import DataSetError, DimensionError
from src.rng_streams import child_seed

logger = logging.getLogger(__name__)

# relative slack of the ball-ball pruning test
_PRUNE_SLACK = 1e-12


class TreeNode:
    """Node of the k-means tree."""

    def __init__(self, level: int = 0):
        self.level = level
        self.children: List['TreeNode'] = []
        self.ids: Optional[np.ndarray] = None
        self.center: Optional[np.ndarray] = None
        self.radius: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.ids is not None


@dataclass(frozen=True)
class TreeParams:
    """Tree construction parameters."""
    branching_factor: int = config.BRANCHING_FACTOR
    leaf_size: int = config.LEAF_SIZE
    max_iter: int = config.KMEANS_MAX_ITER

    def __post_init__(self):
        if self.branching_factor < 2 or self.leaf_size < 1 or self.max_iter < 1:
            raise ValueError(f"Invalid tree parameters {self}")


def squared_distances(queries: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Pairwise |q - y|^2 as a (n_queries, n_points) array."""
    diff = queries[:, None, :] - points[None, :, :]
    return np.einsum('qpk,qpk->qp', diff, diff)


def radius_for(beta: float, tol: float) -> float:
    """r_TOL = sqrt(-log(TOL)/beta)."""
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    if not 0 < tol < 1:
        raise ValueError(f"TOL must lie in (0, 1), got {tol}")
    return float(np.sqrt(-np.log(tol) / beta))


class KMeansTree:
    """
    Hierarchical k-means tree over weighted local data points.

    Every point lies in exactly one leaf; every node's radius bounds the
    distance from its centroid to each point below it.
    """

    def __init__(self, points: np.ndarray, confidences: Optional[np.ndarray] = None,
                 params: Optional[TreeParams] = None):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[0] < 1:
            raise DataSetError("Cannot build a search tree over an empty data set")
        self.points = points
        self.confidences = np.ones(len(points)) if confidences is None else np.asarray(confidences, dtype=float)
        if self.confidences.shape != (len(points),):
            raise DimensionError(f"{len(points)} points but {self.confidences.size} confidences")
        self.params = params or TreeParams()
        self.root = TreeNode(level=0)
        self.leaves: List[TreeNode] = []
        self.n_nodes = 0

    @classmethod
    def build(cls, points: np.ndarray, confidences: Optional[np.ndarray] = None,
              params: Optional[TreeParams] = None,
              rng: Optional[np.random.Generator] = None) -> 'KMeansTree':
        """Build the tree breadth first; identical for identical rng seeds."""
        tree = cls(points, confidences, params)
        tree._fit(np.random.default_rng() if rng is None else rng)
        return tree

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def depth(self) -> int:
        return max(leaf.level for leaf in self.leaves)

    def _split(self, X: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        K = min(self.params.branching_factor, len(X))
        km = KMeans(n_clusters=K, n_init=1, max_iter=self.params.max_iter,
                    random_state=child_seed(rng))
        with warnings.catch_warnings():
            # duplicate points leave fewer distinct clusters than requested
            warnings.simplefilter('ignore', ConvergenceWarning)
            return km.fit_predict(X)

    def _fit(self, rng: np.random.Generator):
        X = self.points
        self.root = TreeNode(level=0)
        self.leaves = []
        self.n_nodes = 0
        queue = deque([(self.root, np.arange(len(X)))])

        while queue:
            node, ids = queue.popleft()
            self.n_nodes += 1
            X_node = X[ids]
            node.center = X_node.mean(axis=0)
            node.radius = float(np.sqrt(np.max(np.sum((X_node - node.center) ** 2, axis=1))))

            if len(ids) <= self.params.leaf_size:
                node.ids = ids
                self.leaves.append(node)
                continue

            labels = self._split(X_node, rng)
            groups = [ids[labels == k] for k in np.unique(labels)]
            if len(groups) < 2:
                node.ids = ids
                self.leaves.append(node)
                continue
            for group in groups:
                child = TreeNode(level=node.level + 1)
                node.children.append(child)
                queue.append((child, group))

        logger.debug(f"Built k-means tree over {self.size} points: {self.n_nodes} nodes, "
                     f"{len(self.leaves)} leaves, depth {self.depth}")

    def audit(self) -> List[str]:
        """Check the tree invariants; returns a list of violations (empty if valid)."""
        problems = []
        counts = np.zeros(self.size, dtype=int)
        stack = [self.root]
        while stack:
            node = stack.pop()
            below = self._ids_below(node)
            if below.size:
                reach = np.sqrt(np.max(np.sum((self.points[below] - node.center) ** 2, axis=1)))
                if reach > node.radius * (1 + 1e-12) + 1e-300:
                    problems.append(f"node at level {node.level} has radius {node.radius} < {reach}")
            if node.is_leaf:
                counts[node.ids] += 1
                if node.children:
                    problems.append(f"leaf at level {node.level} has children")
            else:
                stack.extend(node.children)
        if np.any(counts != 1):
            problems.append(f"{int(np.sum(counts != 1))} points are not in exactly one leaf")
        return problems

    def _ids_below(self, node: TreeNode) -> np.ndarray:
        if node.is_leaf:
            return node.ids
        return np.concatenate([self._ids_below(child) for child in node.children])

    # ------------------------------------------------------------------
    # Search
    # ------------------------------------------------------------------

    def _prunable(self, dist_center: np.ndarray, node: TreeNode, r: float) -> np.ndarray:
        return dist_center > (r + node.radius) * (1 + _PRUNE_SLACK)

    def radius_search(self, q: np.ndarray, r: float,
                      n_checks: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
        """
        Points within distance r of q.

        Args:
            q: Query point in weighted local coordinates
            r: Search radius (>= 0)
            n_checks: Leaf visits allowed after the greedy descent; None is exact

        Returns:
            (indices, squared distances), indices sorted ascending
        """
        if r < 0:
            raise ValueError(f"Search radius must be non-negative, got {r}")
        q = np.asarray(q, dtype=float)
        if n_checks is None:
            qi, ids, d2 = self._batch_radius(q[None, :], r)
        else:
            ids, d2 = self._checked_search(q, r, n_checks)
        order = np.argsort(ids, kind='stable')
        return ids[order], d2[order]

    def _batch_radius(self, Q: np.ndarray, r: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Exact radius search for all queries; returns (query idx, point idx, squared dist)."""
        r2 = r * r
        out_q, out_i, out_d = [], [], []
        stack = [(self.root, np.arange(len(Q)))]
        while stack:
            node, qidx = stack.pop()
            dc = np.sqrt(np.sum((Q[qidx] - node.center) ** 2, axis=1))
            qidx = qidx[~self._prunable(dc, node, r)]
            if qidx.size == 0:
                continue
            if node.is_leaf:
                d2 = squared_distances(Q[qidx], self.points[node.ids])
                hit_q, hit_p = np.nonzero(d2 <= r2)
                out_q.append(qidx[hit_q])
                out_i.append(node.ids[hit_p])
                out_d.append(d2[hit_q, hit_p])
            else:
                stack.extend((child, qidx) for child in node.children)
        if not out_q:
            empty = np.zeros(0, dtype=int)
            return empty, empty, np.zeros(0)
        return np.concatenate(out_q), np.concatenate(out_i), np.concatenate(out_d)

    def _checked_search(self, q: np.ndarray, r: float, n_checks: int) -> Tuple[np.ndarray, np.ndarray]:
        """Greedy descent plus at most n_checks best-first leaf visits."""
        if n_checks < 0:
            raise ValueError(f"n_checks must be non-negative, got {n_checks}")
        r2 = r * r
        counter = itertools.count()
        heap = []
        found_i, found_d = [], []

        def lower_bound(node: TreeNode) -> float:
            return max(0.0, float(np.linalg.norm(q - node.center)) - node.radius)

        def descend(node: TreeNode):
            while not node.is_leaf:
                bounds = [(float(np.sum((q - child.center) ** 2)), child) for child in node.children]
                best = min(range(len(bounds)), key=lambda k: bounds[k][0])
                for k, (_, child) in enumerate(bounds):
                    if k != best:
                        heapq.heappush(heap, (lower_bound(child), next(counter), child))
                node = bounds[best][1]
            d2 = np.sum((self.points[node.ids] - q) ** 2, axis=1)
            hit = d2 <= r2
            found_i.append(node.ids[hit])
            found_d.append(d2[hit])

        descend(self.root)
        visits = 0
        while heap and visits < n_checks:
            bound, _, node = heapq.heappop(heap)
            if bound > r * (1 + _PRUNE_SLACK):
                break
            descend(node)
            visits += 1
        return np.concatenate(found_i), np.concatenate(found_d)

    def log_likelihood(self, queries: np.ndarray, beta: float, tol: float = config.TOL,
                       n_checks: Optional[int] = None) -> np.ndarray:
        """
        Radius-limited log-likelihood for a batch of queries (n_queries, D).

        Returns:
            Array (n_queries,), floor log(TOL/M) where the radius set is empty
        """
        Q = np.atleast_2d(np.asarray(queries, dtype=float))
        r = radius_for(beta, tol)
        if n_checks is None:
            qi, ids, d2 = self._batch_radius(Q, r)
        else:
            parts = [self._checked_search(q, r, n_checks) for q in Q]
            qi = np.repeat(np.arange(len(Q)), [len(p[0]) for p in parts])
            ids = np.concatenate([p[0] for p in parts]) if parts else np.zeros(0, dtype=int)
            d2 = np.concatenate([p[1] for p in parts]) if parts else np.zeros(0)
        return _grouped_log_mean(qi, ids, d2, self.confidences, beta, len(Q), self.size, tol)

    def measure_recall(self, queries: np.ndarray, r: float, n_checks: Optional[int]) -> float:
        """Mean fraction of the exact radius set found with n_checks (1.0 for empty sets)."""
        recalls = []
        for q in np.atleast_2d(queries):
            exact, _ = self.radius_search(q, r, None)
            if exact.size == 0:
                recalls.append(1.0)
                continue
            approx, _ = self.radius_search(q, r, n_checks)
            recalls.append(np.intersect1d(exact, approx).size / exact.size)
        return float(np.mean(recalls))


def _grouped_log_mean(qi: np.ndarray, ids: np.ndarray, d2: np.ndarray, confidences: np.ndarray,
                      beta: float, n_queries: int, M: int, tol: float) -> np.ndarray:
    """log((1/M) sum_S c_i exp(-beta d2)) per query, floored where S is empty."""
    floor = np.log(tol / M)
    result = np.full(n_queries, floor)
    c = confidences[ids]
    keep = c > 0
    qi, terms = qi[keep], np.log(c[keep]) - beta * d2[keep]
    if terms.size == 0:
        return result
    peak = np.full(n_queries, -np.inf)
    np.maximum.at(peak, qi, terms)
    sums = np.bincount(qi, weights=np.exp(terms - peak[qi]), minlength=n_queries)
    hit = sums > 0
    result[hit] = peak[hit] + np.log(sums[hit]) - np.log(M)
    return result


def direct_log_likelihood(points: np.ndarray, queries: np.ndarray, beta: float,
                          confidences: Optional[np.ndarray] = None, tol: float = config.TOL,
                          chunk_elements: int = config.DIRECT_CHUNK_ELEMENTS, floor: bool = True) -> np.ndarray:
    """
    Log-likelihood summed over all data points.

    With floor (the energy model's setting) the result is clamped below at
    log(TOL/M), the value the tree returns for an empty search ball, so the
    two modes differ by less than TOL in likelihood. Without it the full sum
    is returned unchanged.

    Args:
        points: Weighted data points (M, D)
        queries: Weighted query points (n_queries, D)
        beta: Inverse temperature
        confidences: c_i, default 1
        tol: Cutoff defining the floor
        chunk_elements: Maximum queries x points per block
        floor: Clamp at log(TOL/M)

    Returns:
        Array (n_queries,)
    """
    points = np.atleast_2d(points)
    Q = np.atleast_2d(np.asarray(queries, dtype=float))
    M = len(points)
    radius_for(beta, tol)
    c = np.ones(M) if confidences is None else np.asarray(confidences, dtype=float)
    step = max(1, chunk_elements // max(M, 1))
    out = np.empty(len(Q))
    for start in range(0, len(Q), step):
        block = Q[start:start + step]
        out[start:start + step] = logsumexp(-beta * squared_distances(block, points), b=c, axis=1) - np.log(M)
    return np.maximum(out, np.log(tol / M)) if floor else out


def log_likelihood(source, q: np.ndarray, beta: float, tol: float = config.TOL,
                   n_checks: Optional[int] = None, confidences: Optional[np.ndarray] = None) -> float:
    """
    Log-likelihood of a single weighted local point.

    Args:
        source: KMeansTree (radius search) or array of weighted points (direct sum)
        q: Query point
        beta, tol, n_checks: Search parameters
        confidences: c_i for direct mode

    Returns:
        Scalar log-likelihood
    """
    if isinstance(source, KMeansTree):
        return float(source.log_likelihood(np.asarray(q)[None, :], beta, tol, n_checks)[0])
    return float(direct_log_likelihood(source, np.asarray(q)[None, :], beta, confidences, tol)[0])


class NearestData:
    """Exact nearest data point in weighted coordinates."""

    def __init__(self, points: np.ndarray):
        self.points = np.atleast_2d(np.asarray(points, dtype=float))
        self._index = NearestNeighbors(n_neighbors=1).fit(self.points)

    def query(self, queries: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """(indices, squared distances) of the nearest point to each query."""
        distances, indices = self._index.kneighbors(np.atleast_2d(queries))
        return indices[:, 0], distances[:, 0] ** 2
