"""Phenotypical distance and the epsilon-cluster similarity measure.

The similarity of a population at level epsilon is k = alpha + 1, where
alpha is the clique number of the graph joining pairs of behaviors that
agree (within delta) on more than (1 - epsilon) * C cases. Equivalently, k
is the smallest set size that always contains a pair at distance >= eps * C.
Small k means high diversity.

Thresholds are compared exactly: an integer distance d is "far" iff
d >= eps * C as rationals, so the set and graph formulations coincide for
every epsilon, including non-integer eps * C.
"""

from __future__ import annotations

import itertools
import math
import sys
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .core import DedupProfile, ErrorMatrix, LossKind, exact_fraction

__all__ = [
    "DEFAULT_NODE_BUDGET",
    "SimilarityGraph",
    "SimilarityResult",
    "phenotypic_distance",
    "pairwise_distance_matrix",
    "far_distance_threshold",
    "build_similarity_graph",
    "graph_from_distances",
    "clique_number",
    "epsilon_cluster_similarity",
    "similarity_bruteforce",
    "covariance_mean",
]

# Exact results on sparse 1000-vertex similarity graphs take well under this
# many expansions; dense pathological instances hit the cap and fall back to
# the [best clique found, coloring bound] bracket.
DEFAULT_NODE_BUDGET = 10_000_000

_BRUTEFORCE_LIMIT = 20


def _check_epsilon(epsilon: Fraction) -> None:
    if not 0 < epsilon <= 1:
        raise ValueError(f"epsilon must be in (0, 1], got {epsilon}")


def _resolve_delta(kind: LossKind, delta) -> float:
    """Delta defaults to 0 for discrete losses; real losses need an explicit
    value (there is no sensible silent default for a tolerance)."""
    if delta is None:
        if kind is LossKind.REAL:
            raise ValueError("delta must be supplied for real-valued losses")
        return 0.0
    delta = float(delta)
    if delta < 0:
        raise ValueError(f"delta must be >= 0, got {delta}")
    if kind is LossKind.DISCRETE and delta != 0:
        raise ValueError("delta must be 0 for discrete losses")
    return delta


def phenotypic_distance(matrix: ErrorMatrix, i: int, j: int, delta=None) -> int:
    """Number of cases on which rows i and j differ (by more than delta)."""
    if i == j:
        raise ValueError("phenotypic distance is defined for distinct rows")
    delta = _resolve_delta(matrix.kind, delta)
    diff = np.abs(matrix.losses[i] - matrix.losses[j])
    return int(np.count_nonzero(diff > delta))


def pairwise_distance_matrix(matrix: ErrorMatrix, delta=None) -> np.ndarray:
    """Symmetric N x N table of pairwise phenotypic distances (int32)."""
    delta = _resolve_delta(matrix.kind, delta)
    losses = matrix.losses
    n = matrix.n_individuals
    out = np.zeros((n, n), dtype=np.int32)
    if delta == 0.0:
        for i in range(n):
            out[i] = np.count_nonzero(losses != losses[i], axis=1)
    else:
        for i in range(n):
            out[i] = np.count_nonzero(np.abs(losses - losses[i]) > delta, axis=1)
    return out


def far_distance_threshold(epsilon, n_cases: int) -> int:
    """Smallest integer distance counting as 'far': min {d : d >= eps * C}.

    Computed with exact rational arithmetic, so eps = 0.05 on C = 20 cases
    yields exactly 1 (not 2, as naive float rounding of 0.05 * 20 would give).
    """
    eps = exact_fraction(epsilon)
    _check_epsilon(eps)
    return math.ceil(eps * n_cases)


@dataclass(frozen=True)
class SimilarityGraph:
    """Graph over unique behaviors; edge = pair at distance < eps * C."""

    n_vertices: int
    adjacency: np.ndarray  # symmetric bool, no self-loops
    epsilon: float
    delta: float

    def __post_init__(self):
        adj = np.asarray(self.adjacency, dtype=bool)
        if adj.shape != (self.n_vertices, self.n_vertices):
            raise ValueError(f"adjacency shape {adj.shape} for {self.n_vertices} vertices")
        if adj.diagonal().any():
            raise ValueError("similarity graph must not contain self-loops")
        if not (adj == adj.T).all():
            raise ValueError("adjacency must be symmetric")
        adj = adj.copy()
        adj.flags.writeable = False
        object.__setattr__(self, "adjacency", adj)

    @property
    def n_edges(self) -> int:
        return int(np.count_nonzero(self.adjacency)) // 2


@dataclass(frozen=True)
class SimilarityResult:
    """Clique number bracket and the similarity value k = alpha + 1."""

    epsilon: float
    delta: float
    alpha_lower: int
    alpha_upper: int
    exact: bool
    search_nodes: int
    budget_exhausted: bool

    @property
    def k_lower(self) -> int:
        return self.alpha_lower + 1

    @property
    def k_upper(self) -> int:
        return self.alpha_upper + 1

    @property
    def k(self) -> int:
        """The similarity value; the conservative upper end when inexact."""
        return self.k_upper


def graph_from_distances(
    distances: np.ndarray, n_cases: int, epsilon, delta: float = 0.0
) -> SimilarityGraph:
    """Threshold a precomputed distance table into a similarity graph.

    Shared by the epsilon sweep so the O(N^2 C) distance pass runs once;
    equals building each graph independently from the matrix.
    """
    eps = exact_fraction(epsilon)
    threshold = far_distance_threshold(eps, n_cases)
    adjacency = distances < threshold
    np.fill_diagonal(adjacency, False)
    return SimilarityGraph(
        n_vertices=distances.shape[0],
        adjacency=adjacency,
        epsilon=float(eps),
        delta=delta,
    )


def build_similarity_graph(profile: DedupProfile, epsilon, delta=None) -> SimilarityGraph:
    """Pairwise-distance construction of the similarity graph (edge: the two
    behaviors agree within delta on more than (1 - eps) * C cases)."""
    delta = _resolve_delta(profile.unique.kind, delta)
    distances = pairwise_distance_matrix(profile.unique, delta)
    return graph_from_distances(distances, profile.n_cases, epsilon, delta)


# ---------------------------------------------------------------------------
# Exact maximum clique: branch and bound on bitsets with greedy-coloring
# pruning and degeneracy preordering.
# ---------------------------------------------------------------------------


class _BudgetExhausted(Exception):
    pass


def _adjacency_bitsets(adjacency: np.ndarray) -> list[int]:
    n = adjacency.shape[0]
    bits = []
    for i in range(n):
        packed = np.packbits(adjacency[i], bitorder="little").tobytes()
        bits.append(int.from_bytes(packed, "little"))
    return bits


def _degeneracy_order(adj: list[int], n: int) -> list[int]:
    """Vertex order by repeatedly removing a minimum-degree vertex (bucket queue)."""
    degree = [adj[v].bit_count() for v in range(n)]
    max_deg = max(degree, default=0)
    buckets: list[set[int]] = [set() for _ in range(max_deg + 1)]
    for v in range(n):
        buckets[degree[v]].add(v)
    removed = [False] * n
    order = []
    d = 0
    for _ in range(n):
        while d <= max_deg and not buckets[d]:
            d += 1
        v = buckets[d].pop()
        removed[v] = True
        order.append(v)
        nbrs = adj[v]
        while nbrs:
            low = nbrs & -nbrs
            u = low.bit_length() - 1
            nbrs ^= low
            if not removed[u]:
                buckets[degree[u]].discard(u)
                degree[u] -= 1
                buckets[degree[u]].add(u)
                if degree[u] < d:
                    d = degree[u]
    return order


def _reorder(adj: list[int], order: list[int]) -> list[int]:
    n = len(order)
    position = [0] * n
    for new, old in enumerate(order):
        position[old] = new
    new_adj = [0] * n
    for old in range(n):
        mask = adj[old]
        rel = 0
        while mask:
            low = mask & -mask
            rel |= 1 << position[low.bit_length() - 1]
            mask ^= low
        new_adj[position[old]] = rel
    return new_adj


def _color_sort(candidates: int, adj: list[int]) -> tuple[list[int], list[int]]:
    """Greedy coloring of the candidate set; returns vertices ordered by
    nondecreasing color and their color numbers (an upper bound on the
    largest clique inside the set that contains each vertex)."""
    order: list[int] = []
    colors: list[int] = []
    color = 0
    work = candidates
    while work:
        color += 1
        layer = work
        while layer:
            low = layer & -layer
            v = low.bit_length() - 1
            order.append(v)
            colors.append(color)
            work ^= low
            layer ^= low
            layer &= ~adj[v]
    return order, colors


class _CliqueSearch:
    __slots__ = ("adj", "budget", "nodes", "best_size")

    def __init__(self, adj: list[int], budget: int):
        self.adj = adj
        self.budget = budget
        self.nodes = 0
        self.best_size = 0

    def run(self, n: int) -> None:
        if n == 0:
            return
        self.best_size = 1  # any single vertex is a clique
        self._expand(0, (1 << n) - 1)

    def _expand(self, size: int, candidates: int) -> None:
        adj = self.adj
        order, colors = _color_sort(candidates, adj)
        live = candidates
        for idx in range(len(order) - 1, -1, -1):
            if size + colors[idx] <= self.best_size:
                return  # coloring bound prunes this and all earlier vertices
            v = order[idx]
            bit = 1 << v
            if not (live & bit):
                continue
            self.nodes += 1
            if self.nodes > self.budget:
                raise _BudgetExhausted
            rest = live & adj[v]
            if rest:
                self._expand(size + 1, rest)
            elif size + 1 > self.best_size:
                self.best_size = size + 1
            live ^= bit


def clique_number(graph: SimilarityGraph, node_budget: int = DEFAULT_NODE_BUDGET) -> SimilarityResult:
    """Exact clique number by branch and bound, or a sound bracket on budget.

    Vertices are preordered by degeneracy; each node is pruned with a greedy
    coloring bound. When the budget runs out the result brackets the true
    value: the best clique found below, the root coloring bound above.
    """
    if node_budget < 1:
        raise ValueError(f"node_budget must be >= 1, got {node_budget}")
    n = graph.n_vertices
    bits = _adjacency_bitsets(graph.adjacency)
    order = _degeneracy_order(bits, n)
    adj = _reorder(bits, order)

    _, root_colors = _color_sort((1 << n) - 1, adj)
    coloring_bound = max(root_colors, default=1)

    depth_guard = n + 512
    if sys.getrecursionlimit() < depth_guard:
        sys.setrecursionlimit(depth_guard)

    search = _CliqueSearch(adj, node_budget)
    try:
        search.run(n)
        alpha_lower = alpha_upper = max(search.best_size, 1)
        exhausted = False
    except _BudgetExhausted:
        alpha_lower = max(search.best_size, 1)
        alpha_upper = max(coloring_bound, alpha_lower)
        exhausted = True

    return SimilarityResult(
        epsilon=graph.epsilon,
        delta=graph.delta,
        alpha_lower=alpha_lower,
        alpha_upper=alpha_upper,
        exact=not exhausted,
        search_nodes=search.nodes,
        budget_exhausted=exhausted,
    )


def epsilon_cluster_similarity(
    profile: DedupProfile,
    epsilon,
    delta=None,
    node_budget: int = DEFAULT_NODE_BUDGET,
) -> SimilarityResult:
    """Similarity k = clique number of the similarity graph + 1."""
    graph = build_similarity_graph(profile, epsilon, delta)
    return clique_number(graph, node_budget)


def similarity_bruteforce(profile: DedupProfile, epsilon, delta=None) -> int:
    """Direct set-form evaluation: smallest k >= 2 such that every k-subset
    contains a pair at distance >= eps * C; N_unique + 1 when none exists.

    Exponential subset scan, independent of the clique solver; test oracle
    only (rejects N_unique > 20).
    """
    n = profile.n_unique
    if n > _BRUTEFORCE_LIMIT:
        raise ValueError(f"bruteforce oracle limited to {_BRUTEFORCE_LIMIT} rows, got {n}")
    delta = _resolve_delta(profile.unique.kind, delta)
    distances = pairwise_distance_matrix(profile.unique, delta)
    threshold = far_distance_threshold(epsilon, profile.n_cases)
    far = (distances >= threshold).tolist()
    for k in range(2, n + 1):
        satisfied = True
        for subset in itertools.combinations(range(n), k):
            if not any(far[a][b] for a, b in itertools.combinations(subset, 2)):
                satisfied = False
                break
        if satisfied:
            return k
    return n + 1


def covariance_mean(matrix: ErrorMatrix) -> float:
    """Mean of the N x N covariance matrix of the individuals' error vectors.

    Entry (i, j) is the sample covariance (divisor C - 1) of rows i and j
    across cases; the mean runs over all N^2 entries including variances.
    """
    if matrix.n_cases < 2:
        raise ValueError("covariance_mean requires at least 2 cases")
    cov = np.atleast_2d(np.cov(matrix.losses))
    return float(cov.mean())
