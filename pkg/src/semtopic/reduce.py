"""Manifold dimensionality reduction, implemented natively.

Stage order: k-nearest-neighbor graph (exact below 20000 points, random
projection trees above) -> per-point bandwidth calibration -> fuzzy
symmetric neighborhood graph -> stochastic gradient layout against a
fitted low-dimensional similarity curve. Given a seed, the whole chain is
bitwise deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from . import _layout_sgd
from .embed import EmbeddingMatrix

EXACT_KNN_MAX = 20000
_FULL_SORT_MAX = 4096


class ReduceError(ValueError):
    """Invalid reduction input or configuration."""


class LayoutError(RuntimeError):
    """Layout optimization produced non-finite coordinates."""


@dataclass(frozen=True)
class NeighborGraph:
    """k nearest neighbors per point, rows sorted by ascending distance."""

    k: int
    indices: np.ndarray
    distances: np.ndarray
    exact: bool = True

    @property
    def n(self) -> int:
        return self.indices.shape[0]


@dataclass(frozen=True)
class SmoothedKnn:
    """Per-point calibration: nearest distance rho and bandwidth sigma.

    ``floored`` marks points whose sigma hit the lower bound instead of
    solving the neighbor-mass equation.
    """

    rho: np.ndarray
    sigma: np.ndarray
    floored: np.ndarray


@dataclass(frozen=True)
class FuzzyGraph:
    """Symmetric weighted neighbor graph stored as undirected pairs.

    heads[i] < tails[i] for every stored pair; weights lie in (0, 1] and
    zero-weight pairs are never stored.
    """

    n_points: int
    heads: np.ndarray
    tails: np.ndarray
    weights: np.ndarray

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.n_points, self.n_points), dtype=np.float64)
        dense[self.heads, self.tails] = self.weights
        dense[self.tails, self.heads] = self.weights
        return dense


@dataclass(frozen=True)
class Layout:
    """Low-dimensional coordinates plus the seed that produced them."""

    points: np.ndarray
    seed: int
    init: str

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass
class ReduceConfig:
    n_neighbors: int = 15
    min_dist: float = 0.1
    n_components: int = 5
    n_epochs: int | None = None  # None: 200 if n > 10000 else 500
    negative_sample_rate: int = 5
    spread: float = 1.0
    seed: int = 0

    def validate(self) -> None:
        if self.n_neighbors < 2:
            raise ReduceError("n_neighbors must be >= 2")
        if self.min_dist < 0:
            raise ReduceError("min_dist must be >= 0")
        if self.n_components < 1:
            raise ReduceError("n_components must be >= 1")
        if self.negative_sample_rate < 0:
            raise ReduceError("negative_sample_rate must be >= 0")
        if self.spread <= 0:
            raise ReduceError("spread must be > 0")

    def epochs_for(self, n: int) -> int:
        if self.n_epochs is not None:
            return self.n_epochs
        return 200 if n > 10000 else 500


def _as_array(X) -> np.ndarray:
    if isinstance(X, EmbeddingMatrix):
        return np.asarray(X.values, dtype=np.float64)
    if isinstance(X, Layout):
        return np.asarray(X.points, dtype=np.float64)
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim != 2:
        raise ReduceError("points must form a 2-D array")
    return arr


def pairwise_sq_distances(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances between row sets, clamped at zero."""
    sq_x = (x * x).sum(axis=1)
    sq_y = (y * y).sum(axis=1)
    d2 = sq_x[:, None] + sq_y[None, :] - 2.0 * (x @ y.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


def _exact_knn(x: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    n = x.shape[0]
    indices = np.empty((n, k), dtype=np.int64)
    distances = np.empty((n, k), dtype=np.float64)
    chunk = max(1, int(2e7) // max(n, 1))
    for start in range(0, n, chunk):
        end = min(n, start + chunk)
        d2 = pairwise_sq_distances(x[start:end], x)
        d2[np.arange(start, end) - start, np.arange(start, end)] = np.inf
        if n <= _FULL_SORT_MAX:
            # Stable full sort keeps the lower index first on exact ties.
            order = np.argsort(d2, axis=1, kind="stable")[:, :k]
        else:
            part = np.argpartition(d2, k - 1, axis=1)[:, :k]
            rows = np.arange(end - start)[:, None]
            inner = np.argsort(d2[rows, part], axis=1, kind="stable")
            order = part[rows, inner]
        indices[start:end] = order
        distances[start:end] = np.sqrt(d2[np.arange(end - start)[:, None], order])
    return indices, distances


def _rp_tree_leaves(x: np.ndarray, ids: np.ndarray, leaf_size: int, rng) -> list[np.ndarray]:
    if ids.shape[0] <= leaf_size:
        return [ids]
    a, b = rng.choice(ids.shape[0], size=2, replace=False)
    direction = x[ids[a]] - x[ids[b]]
    norm = np.linalg.norm(direction)
    if norm == 0.0:
        direction = rng.standard_normal(x.shape[1])
        norm = np.linalg.norm(direction)
    proj = x[ids] @ (direction / norm)
    cut = np.median(proj)
    left = ids[proj <= cut]
    right = ids[proj > cut]
    if left.size == 0 or right.size == 0:
        half = ids.shape[0] // 2
        order = np.argsort(proj, kind="stable")
        left, right = ids[order[:half]], ids[order[half:]]
    return _rp_tree_leaves(x, left, leaf_size, rng) + _rp_tree_leaves(x, right, leaf_size, rng)


def _approx_knn(x: np.ndarray, k: int, seed: int, n_trees: int = 8) -> tuple[np.ndarray, np.ndarray]:
    n = x.shape[0]
    rng = np.random.Generator(np.random.Philox(key=seed))
    leaf_size = max(2 * k, 32)
    candidates: list[set[int]] = [set() for _ in range(n)]
    ids = np.arange(n, dtype=np.int64)
    for _ in range(n_trees):
        for leaf in _rp_tree_leaves(x, ids, leaf_size, rng):
            members = leaf.tolist()
            for i in members:
                candidates[i].update(members)

    indices = np.empty((n, k), dtype=np.int64)
    distances = np.empty((n, k), dtype=np.float64)

    def refine(cand_lists):
        for i in range(n):
            cand = np.fromiter((c for c in cand_lists[i] if c != i), dtype=np.int64)
            diff = x[cand] - x[i]
            d2 = (diff * diff).sum(axis=1)
            order = np.argsort(d2, kind="stable")[:k]
            indices[i] = cand[order]
            distances[i] = np.sqrt(d2[order])

    refine(candidates)
    # One neighbor-of-neighbor expansion pass sharpens recall considerably.
    expanded = [set(indices[i].tolist()) for i in range(n)]
    for i in range(n):
        for j in indices[i]:
            expanded[i].update(indices[j].tolist())
            expanded[j].add(i)
    refine(expanded)
    return indices, distances


def knn_graph(X, k: int, exact: bool | None = None, seed: int = 0) -> NeighborGraph:
    """Exact (or RP-tree approximate) k nearest neighbors by Euclidean
    distance, ties broken toward the lower index, self excluded."""
    x = _as_array(X)
    n = x.shape[0]
    if k < 1:
        raise ReduceError("k must be >= 1")
    if k >= n:
        raise ReduceError(f"k={k} must be smaller than the number of points n={n}")
    if exact is None:
        exact = n <= EXACT_KNN_MAX
    if exact:
        indices, distances = _exact_knn(x, k)
    else:
        indices, distances = _approx_knn(x, k, seed)
    return NeighborGraph(k=k, indices=indices, distances=distances, exact=exact)


def smooth_knn(
    graph: NeighborGraph,
    n_iter: int = 64,
    floor_scale: float = 1e-3,
) -> SmoothedKnn:
    """Calibrate per-point bandwidths.

    rho is the distance to the nearest neighbor. sigma solves
    sum_j exp(-max(0, d_ij - rho)/sigma) = log2(k) by bisection; when the
    equation has no solution above the floor (1e-3 of the mean row
    distance), sigma is floored and the point flagged.
    """
    d = graph.distances
    n, k = d.shape
    rho = d[:, 0].copy()
    adjusted = np.maximum(d - rho[:, None], 0.0)
    target = np.log2(k)

    lo = np.zeros(n)
    hi = np.full(n, np.inf)
    mid = np.ones(n)
    with np.errstate(divide="ignore", over="ignore", under="ignore"):
        for _ in range(n_iter):
            psum = np.exp(-adjusted / mid[:, None]).sum(axis=1)
            too_high = psum > target
            hi = np.where(too_high, mid, hi)
            lo = np.where(too_high, lo, mid)
            mid = np.where(np.isinf(hi), mid * 2.0, (lo + hi) / 2.0)

    floor = floor_scale * d.mean(axis=1)
    floored = mid < floor
    sigma = np.maximum(mid, floor)
    # Degenerate all-duplicate rows have zero mean distance; keep sigma
    # positive so downstream ratios stay well-defined.
    zero_sigma = sigma <= 0.0
    sigma = np.maximum(sigma, 1e-12)
    floored = floored | zero_sigma
    return SmoothedKnn(rho=rho, sigma=sigma, floored=floored)


def fuzzy_union(graph: NeighborGraph, rho: np.ndarray, sigma: np.ndarray) -> FuzzyGraph:
    """Directed membership strengths combined with the probabilistic
    t-conorm: w = a + a' - a*a', stored once per unordered pair."""
    n, k = graph.distances.shape
    rows = np.repeat(np.arange(n, dtype=np.int64), k)
    cols = graph.indices.ravel()
    adjusted = np.maximum(graph.distances - rho[:, None], 0.0)
    with np.errstate(divide="ignore", over="ignore", under="ignore"):
        vals = np.exp(-(adjusted / sigma[:, None])).ravel()

    a = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    w = a + a.T - a.multiply(a.T)
    upper = sp.triu(w, k=1).tocoo()
    keep = upper.data > 0.0
    heads = upper.row[keep].astype(np.int64)
    tails = upper.col[keep].astype(np.int64)
    weights = np.minimum(upper.data[keep], 1.0)
    order = np.lexsort((tails, heads))
    return FuzzyGraph(
        n_points=n, heads=heads[order], tails=tails[order], weights=weights[order]
    )


def fit_ab(min_dist: float, spread: float = 1.0) -> tuple[float, float]:
    """Least-squares fit of 1/(1 + a*x^(2b)) to the piecewise target curve
    (1 up to min_dist, exponential decay with the given spread beyond),
    sampled at 300 points on (0, 3*spread]."""
    xs = np.linspace(0.0, 3.0 * spread, 301)[1:]
    ys = np.where(xs <= min_dist, 1.0, np.exp(-(xs - min_dist) / spread))

    def residuals(a, b):
        return 1.0 / (1.0 + a * xs ** (2.0 * b)) - ys

    # Coarse grid seeds the refinement away from bad local minima.
    best = (np.inf, 1.0, 1.0)
    for a in np.geomspace(1e-2, 1e2, 40):
        for b in np.linspace(0.1, 2.5, 40):
            sse = float((residuals(a, b) ** 2).sum())
            if sse < best[0]:
                best = (sse, a, b)
    a, b = best[1], best[2]

    # Levenberg-Marquardt refinement until the parameter step stalls.
    lam = 1e-3
    log_xs = np.log(xs)
    for _ in range(200):
        powered = xs ** (2.0 * b)
        f = 1.0 / (1.0 + a * powered)
        r = f - ys
        f2 = f * f
        ja = -powered * f2
        jb = -2.0 * a * powered * log_xs * f2
        jac = np.stack([ja, jb], axis=1)
        g = jac.T @ r
        h = jac.T @ jac
        try:
            step = np.linalg.solve(h + lam * np.diag(np.diag(h)), -g)
        except np.linalg.LinAlgError:
            break
        new_a, new_b = a + step[0], b + step[1]
        if new_a <= 0 or new_b <= 0:
            lam *= 10.0
            continue
        if (residuals(new_a, new_b) ** 2).sum() < (r**2).sum():
            a, b = float(new_a), float(new_b)
            lam = max(lam / 10.0, 1e-12)
        else:
            lam *= 10.0
        if np.linalg.norm(step) < 1e-6:
            break
    return a, b


def _adjacency(fg: FuzzyGraph) -> sp.csr_matrix:
    n = fg.n_points
    rows = np.concatenate([fg.heads, fg.tails])
    cols = np.concatenate([fg.tails, fg.heads])
    vals = np.concatenate([fg.weights, fg.weights])
    return sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


def _spectral_init(fg: FuzzyGraph, dim: int, rng) -> np.ndarray | None:
    """Leading non-trivial eigenvectors of the normalized adjacency via
    block power iteration (100 sweeps); None when degenerate."""
    n = fg.n_points
    if n < dim + 2:
        return None
    w = _adjacency(fg)
    deg = np.asarray(w.sum(axis=1)).ravel()
    with np.errstate(divide="ignore"):
        dinv = np.where(deg > 0, 1.0 / np.sqrt(deg), 0.0)
    dmat = sp.diags(dinv)
    m = dmat @ w @ dmat

    y = rng.standard_normal((n, dim + 1))
    for _ in range(100):
        # Shifted operator keeps the top of the spectrum positive.
        y = 0.5 * (m @ y + y)
        y, _ = np.linalg.qr(y)
    eigvals = ((m @ y) * y).sum(axis=0)
    order = np.argsort(-eigvals, kind="stable")
    coords = y[:, order[1 : dim + 1]]
    if not np.all(np.isfinite(coords)):
        return None
    span = np.abs(coords).max()
    if span < 1e-12:
        return None
    return coords * (10.0 / span)


def optimize_layout(fg: FuzzyGraph, cfg: ReduceConfig) -> Layout:
    """Optimize low-dimensional coordinates against the fuzzy graph.

    Initialization is spectral (with +-1e-4 uniform jitter), falling back
    to uniform random in [-10, 10] if the spectral solve degenerates. The
    learning rate decays linearly from 1 to 0 over the epochs. All
    randomness derives from cfg.seed through counter-based generators, so
    identical inputs give bitwise-identical layouts.
    """
    cfg.validate()
    n = fg.n_points
    dim = cfg.n_components
    if n == 0:
        raise ReduceError("empty graph")
    if n == 1:
        return Layout(points=np.zeros((1, dim), dtype=np.float32), seed=cfg.seed, init="origin")

    rng = np.random.Generator(np.random.Philox(key=cfg.seed))
    init_kind = "spectral"
    coords = _spectral_init(fg, dim, rng)
    if coords is None:
        init_kind = "random"
        coords = rng.uniform(-10.0, 10.0, size=(n, dim))
    else:
        coords = coords + rng.uniform(-1e-4, 1e-4, size=(n, dim))
    coords = np.ascontiguousarray(coords, dtype=np.float32)

    a, b = fit_ab(cfg.min_dist, cfg.spread)
    epochs = cfg.epochs_for(n)
    heads = np.ascontiguousarray(fg.heads, dtype=np.int64)
    tails = np.ascontiguousarray(fg.tails, dtype=np.int64)
    weights = np.ascontiguousarray(fg.weights, dtype=np.float64)

    for epoch in range(epochs):
        alpha = 1.0 - epoch / epochs
        _layout_sgd.sgd_epoch(
            coords, heads, tails, weights, a, b, alpha,
            cfg.negative_sample_rate, cfg.seed, epoch,
        )
        if not np.all(np.isfinite(coords)):
            raise LayoutError(f"non-finite coordinates detected at epoch {epoch}")
    return Layout(points=coords, seed=cfg.seed, init=init_kind)


def reduce_embeddings(X, cfg: ReduceConfig) -> Layout:
    """Full reduction chain: knn -> smoothing -> fuzzy union -> layout."""
    cfg.validate()
    x = _as_array(X)
    n = x.shape[0]
    if n == 0:
        raise ReduceError("no points to reduce")
    if n == 1:
        return Layout(
            points=np.zeros((1, cfg.n_components), dtype=np.float32),
            seed=cfg.seed,
            init="origin",
        )
    k = min(cfg.n_neighbors, n - 1)
    graph = knn_graph(x, k, seed=cfg.seed)
    smoothed = smooth_knn(graph)
    fg = fuzzy_union(graph, smoothed.rho, smoothed.sigma)
    return optimize_layout(fg, cfg)
