"""Density-based hierarchical clustering with explicit noise labels.

Chain: per-point core distances -> mutual reachability -> minimum spanning
tree (dense Prim) -> single-linkage hierarchy condensed at the minimum
cluster size -> excess-of-mass cluster selection. Points not captured by
any selected cluster are noise (label -1).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .reduce import Layout, pairwise_sq_distances


class ClusterError(ValueError):
    """Invalid clustering input or configuration."""


# Minimum cluster sizes that work well on the reference corpora flavors:
# long/medium news articles vs. short social posts.
PRESET_MIN_CLUSTER_SIZE = {
    "newsgroups": 10,
    "bbc-news": 10,
    "tweets": 8,
}


@dataclass
class ClusterConfig:
    min_cluster_size: int = 10
    min_samples: int | None = None  # None: same as min_cluster_size
    metric: str = "euclidean"

    def validate(self) -> None:
        if self.min_cluster_size < 2:
            raise ClusterError("min_cluster_size must be >= 2")
        if self.min_samples is not None and self.min_samples < 1:
            raise ClusterError("min_samples must be >= 1")
        if self.metric != "euclidean":
            raise ClusterError(f"unsupported metric: {self.metric!r}")

    @property
    def effective_min_samples(self) -> int:
        return self.min_cluster_size if self.min_samples is None else self.min_samples


@dataclass(frozen=True)
class CondensedTree:
    """Simplified hierarchy: only splits where both sides reach the minimum
    cluster size create nodes; smaller sides fall out as points.

    Record arrays are parallel. ``child`` values below ``n_points`` are
    points; the root cluster has id ``n_points``. ``lam`` is 1/distance at
    the split (inf for zero distance).
    """

    n_points: int
    min_cluster_size: int
    parent: np.ndarray
    child: np.ndarray
    lam: np.ndarray
    child_size: np.ndarray

    @property
    def root(self) -> int:
        return self.n_points


@dataclass(frozen=True)
class ClusterAssignment:
    """Labels (-1 = noise, 0..C-1 by decreasing size), per-cluster
    stability, and per-point membership strength (noise gets 0)."""

    labels: np.ndarray
    stabilities: tuple[float, ...]
    probabilities: np.ndarray

    @property
    def n_clusters(self) -> int:
        return len(self.stabilities)


def _points_array(X) -> np.ndarray:
    if isinstance(X, Layout):
        return np.asarray(X.points, dtype=np.float64)
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim != 2:
        raise ClusterError("points must form a 2-D array")
    return arr


def core_distances(X, min_samples: int) -> np.ndarray:
    """Distance to the min_samples-th nearest neighbor, self excluded."""
    x = _points_array(X)
    n = x.shape[0]
    if min_samples < 1:
        raise ClusterError("min_samples must be >= 1")
    if min_samples >= n:
        raise ClusterError(f"min_samples={min_samples} must be smaller than n={n}")
    out = np.empty(n, dtype=np.float64)
    chunk = max(1, int(2e7) // max(n, 1))
    for start in range(0, n, chunk):
        end = min(n, start + chunk)
        d2 = pairwise_sq_distances(x[start:end], x)
        d2[np.arange(end - start), np.arange(start, end)] = np.inf
        kth = np.partition(d2, min_samples - 1, axis=1)[:, min_samples - 1]
        out[start:end] = np.sqrt(kth)
    return out


def mutual_reachability(d_ab, core_a, core_b):
    """max(core_a, core_b, d_ab); works elementwise on arrays."""
    return np.maximum(np.maximum(core_a, core_b), d_ab)


def _prim(n: int, row_of: Callable[[int], np.ndarray]) -> np.ndarray:
    """Prim's algorithm over an implicit dense symmetric weight matrix.

    Ties prefer the lowest candidate index (argmin) and the earliest
    reached tree endpoint (strict improvement only).
    """
    edges = np.empty((max(n - 1, 0), 3), dtype=np.float64)
    if n <= 1:
        return edges
    in_tree = np.zeros(n, dtype=bool)
    best = np.full(n, np.inf)
    best_from = np.zeros(n, dtype=np.int64)
    in_tree[0] = True
    current = 0
    for step in range(n - 1):
        row = row_of(current).copy()
        row[in_tree] = np.inf
        improved = row < best
        best[improved] = row[improved]
        best_from[improved] = current
        v = int(np.argmin(best))
        edges[step, 0] = best_from[v]
        edges[step, 1] = v
        edges[step, 2] = best[v]
        in_tree[v] = True
        best[v] = np.inf
        current = v
    return edges


def build_mst(mutual_reachability_matrix: np.ndarray) -> np.ndarray:
    """Minimum spanning tree of a dense symmetric weight matrix.

    Returns an (n-1, 3) array of (endpoint, endpoint, weight) rows in
    insertion order.
    """
    m = np.asarray(mutual_reachability_matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ClusterError("weight matrix must be square")
    return _prim(m.shape[0], lambda i: m[i])


def mst_from_points(x: np.ndarray, core: np.ndarray) -> np.ndarray:
    """MST over mutual reachability computed row-by-row (no n*n matrix)."""

    def row_of(i: int) -> np.ndarray:
        diff = x - x[i]
        d = np.sqrt((diff * diff).sum(axis=1))
        return np.maximum(np.maximum(d, core), core[i])

    return _prim(x.shape[0], row_of)


class _UnionFind:
    def __init__(self, n: int):
        self.parent = np.full(2 * n - 1, -1, dtype=np.int64)
        self.size = np.ones(2 * n - 1, dtype=np.int64)
        self.next_label = n

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != -1:
            root = self.parent[root]
        while self.parent[x] != -1:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x: int, y: int) -> int:
        label = self.next_label
        self.next_label += 1
        self.parent[x] = label
        self.parent[y] = label
        self.size[label] = self.size[x] + self.size[y]
        return label


def _single_linkage(edges: np.ndarray, n: int):
    """Merge components in ascending edge order; internal node i (label
    n+i) records its two child labels, merge distance, and size."""
    order = np.argsort(edges[:, 2], kind="stable")
    left = np.empty(n - 1, dtype=np.int64)
    right = np.empty(n - 1, dtype=np.int64)
    dist = np.empty(n - 1, dtype=np.float64)
    size = np.empty(n - 1, dtype=np.int64)
    uf = _UnionFind(n)
    for step, e in enumerate(order):
        u = uf.find(int(edges[e, 0]))
        v = uf.find(int(edges[e, 1]))
        left[step] = u
        right[step] = v
        dist[step] = edges[e, 2]
        label = uf.union(u, v)
        size[step] = uf.size[label]
    return left, right, dist, size


def condense_tree(mst_edges: np.ndarray, min_cluster_size: int, n_points: int | None = None) -> CondensedTree:
    """Build the condensed hierarchy from MST edges."""
    edges = np.asarray(mst_edges, dtype=np.float64).reshape(-1, 3)
    n = edges.shape[0] + 1 if n_points is None else n_points
    if min_cluster_size < 2:
        raise ClusterError("min_cluster_size must be >= 2")
    empty = CondensedTree(
        n_points=n,
        min_cluster_size=min_cluster_size,
        parent=np.empty(0, dtype=np.int64),
        child=np.empty(0, dtype=np.int64),
        lam=np.empty(0, dtype=np.float64),
        child_size=np.empty(0, dtype=np.int64),
    )
    if n <= 1:
        return empty
    if edges.shape[0] != n - 1:
        raise ClusterError(f"expected {n - 1} MST edges for {n} points, got {edges.shape[0]}")

    left, right, dist, size = _single_linkage(edges, n)

    def node_size(label: int) -> int:
        return 1 if label < n else int(size[label - n])

    def subtree_points(label: int):
        queue = deque([label])
        while queue:
            node = queue.popleft()
            if node < n:
                yield node
            else:
                queue.append(int(left[node - n]))
                queue.append(int(right[node - n]))

    parents: list[int] = []
    children: list[int] = []
    lambdas: list[float] = []
    sizes: list[int] = []

    root_link = 2 * n - 2
    next_cluster = n + 1
    queue = deque([(root_link, n)])
    while queue:
        node, cond = queue.popleft()
        l = int(left[node - n])
        r = int(right[node - n])
        d = dist[node - n]
        lam = np.inf if d <= 0.0 else 1.0 / d
        ls, rs = node_size(l), node_size(r)

        if ls >= min_cluster_size and rs >= min_cluster_size:
            for child, child_sz in ((l, ls), (r, rs)):
                new_id = next_cluster
                next_cluster += 1
                parents.append(cond)
                children.append(new_id)
                lambdas.append(lam)
                sizes.append(child_sz)
                queue.append((child, new_id))
        else:
            for child, child_sz in ((l, ls), (r, rs)):
                if child_sz >= min_cluster_size:
                    # Survives the split: continues as the same cluster.
                    queue.append((child, cond))
                else:
                    for p in subtree_points(child):
                        parents.append(cond)
                        children.append(p)
                        lambdas.append(lam)
                        sizes.append(1)

    return CondensedTree(
        n_points=n,
        min_cluster_size=min_cluster_size,
        parent=np.asarray(parents, dtype=np.int64),
        child=np.asarray(children, dtype=np.int64),
        lam=np.asarray(lambdas, dtype=np.float64),
        child_size=np.asarray(sizes, dtype=np.int64),
    )


def cluster_stabilities(tree: CondensedTree) -> dict[int, float]:
    """Stability per condensed cluster: sum over members of the lambda
    span between the cluster's birth and the member's departure."""
    birth: dict[int, float] = {tree.root: 0.0}
    for child, lam in zip(tree.child, tree.lam):
        if child >= tree.n_points:
            birth[int(child)] = float(lam)
    stability = {c: 0.0 for c in birth}
    for parent, lam, child_sz in zip(tree.parent, tree.lam, tree.child_size):
        p = int(parent)
        b = birth[p]
        span = float(lam) - b
        if np.isinf(lam) and np.isinf(b):
            span = 0.0
        stability[p] += int(child_sz) * span
    return stability


def select_clusters(tree: CondensedTree) -> list[int]:
    """Excess-of-mass selection: a cluster is selected iff its stability
    exceeds the summed stability of its selected descendants; the result
    is an antichain."""
    if tree.parent.size == 0:
        return []
    stability = cluster_stabilities(tree)
    cluster_children: dict[int, list[int]] = {c: [] for c in stability}
    for parent, child in zip(tree.parent, tree.child):
        if child >= tree.n_points:
            cluster_children[int(parent)].append(int(child))

    selected: dict[int, bool] = {}
    propagated: dict[int, float] = {}
    for c in sorted(stability, reverse=True):
        child_sum = sum(propagated[cc] for cc in cluster_children[c])
        if stability[c] > child_sum:
            selected[c] = True
            propagated[c] = stability[c]
        else:
            selected[c] = False
            propagated[c] = child_sum

    final: list[int] = []
    stack = [tree.root]
    while stack:
        c = stack.pop()
        if selected[c]:
            final.append(c)
        else:
            stack.extend(sorted(cluster_children[c], reverse=True))
    return sorted(final)


def extract_clusters(tree: CondensedTree) -> ClusterAssignment:
    """Turn the condensed tree into labels, stabilities, probabilities."""
    n = tree.n_points
    labels = np.full(n, -1, dtype=np.int64)
    probabilities = np.zeros(n, dtype=np.float64)
    chosen = select_clusters(tree)
    if not chosen:
        return ClusterAssignment(labels=labels, stabilities=(), probabilities=probabilities)

    stability = cluster_stabilities(tree)
    cluster_children: dict[int, list[int]] = {c: [] for c in stability}
    for parent, child in zip(tree.parent, tree.child):
        if child >= n:
            cluster_children[int(parent)].append(int(child))

    # Map every condensed cluster to the selected ancestor covering it.
    cover: dict[int, int | None] = {}
    stack: list[tuple[int, int | None]] = [(tree.root, None)]
    chosen_set = set(chosen)
    while stack:
        c, owner = stack.pop()
        if c in chosen_set:
            owner = c
        cover[c] = owner
        for cc in cluster_children[c]:
            stack.append((cc, owner))

    members: dict[int, list[tuple[int, float]]] = {c: [] for c in chosen}
    for parent, child, lam in zip(tree.parent, tree.child, tree.lam):
        if child < n:
            owner = cover[int(parent)]
            if owner is not None:
                members[owner].append((int(child), float(lam)))

    # Degenerate tiny splits can leave a selected cluster under strength;
    # those go back to noise rather than violate the size floor.
    kept = [c for c in chosen if len(members[c]) >= tree.min_cluster_size]
    kept.sort(key=lambda c: (-len(members[c]), c))

    stabilities = []
    for label, c in enumerate(kept):
        stabilities.append(stability[c])
        lams = np.array([lam for _, lam in members[c]], dtype=np.float64)
        finite = lams[np.isfinite(lams)]
        max_lam = float(finite.max()) if finite.size else 0.0
        for (point, lam) in members[c]:
            labels[point] = label
            if max_lam <= 0.0:
                probabilities[point] = 1.0
            else:
                probabilities[point] = min(lam, max_lam) / max_lam
    return ClusterAssignment(
        labels=labels,
        stabilities=tuple(stabilities),
        probabilities=probabilities,
    )


def cluster_points(X, cfg: ClusterConfig) -> ClusterAssignment:
    """Full chain from points to a labeling."""
    cfg.validate()
    x = _points_array(X)
    n = x.shape[0]
    if n == 0:
        raise ClusterError("no points to cluster")
    if n == 1:
        return ClusterAssignment(
            labels=np.full(1, -1, dtype=np.int64),
            stabilities=(),
            probabilities=np.zeros(1, dtype=np.float64),
        )
    min_samples = min(cfg.effective_min_samples, n - 1)
    core = core_distances(x, min_samples)
    edges = mst_from_points(x, core)
    tree = condense_tree(edges, cfg.min_cluster_size, n_points=n)
    return extract_clusters(tree)
