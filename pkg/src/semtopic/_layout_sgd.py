"""Numba kernels for the stochastic layout optimizer.

All randomness is counter-based: every draw is a SplitMix64-style hash of
(seed, epoch, edge, draw), so a run is bitwise reproducible regardless of
how epochs are batched, and edges can be processed in a fixed serial order
without carrying generator state.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_INV_2_53 = 1.0 / 9007199254740992.0


@njit(cache=True, inline="always")
def _mix(z):
    z = (z + _GOLDEN) & np.uint64(0xFFFFFFFFFFFFFFFF)
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


@njit(cache=True, inline="always")
def _rand_u64(seed, epoch, item, draw):
    h = _mix(np.uint64(seed))
    h = _mix(h ^ np.uint64(epoch))
    h = _mix(h ^ np.uint64(item))
    h = _mix(h ^ np.uint64(draw))
    return h


@njit(cache=True, inline="always")
def _uniform(seed, epoch, item, draw):
    return float(_rand_u64(seed, epoch, item, draw) >> np.uint64(11)) * _INV_2_53


@njit(cache=True, inline="always")
def _randint(seed, epoch, item, draw, n):
    return int(_rand_u64(seed, epoch, item, draw) % np.uint64(n))


@njit(cache=True, inline="always")
def _clip4(value):
    if value > 4.0:
        return 4.0
    if value < -4.0:
        return -4.0
    return value


@njit(cache=True)
def _repulse(coords, p, t, a, b, alpha, dim):
    dist_sq = 0.0
    for d in range(dim):
        diff = coords[p, d] - coords[t, d]
        dist_sq += diff * diff
    if dist_sq > 0.0:
        coef = 2.0 * b / ((0.001 + dist_sq) * (a * dist_sq**b + 1.0))
        for d in range(dim):
            grad = _clip4(coef * (coords[p, d] - coords[t, d]))
            coords[p, d] += alpha * grad
    else:
        # Coincident with the negative sample: push with the max gradient.
        for d in range(dim):
            coords[p, d] += alpha * 4.0


@njit(cache=True)
def sgd_epoch(coords, heads, tails, weights, a, b, alpha, negative_sample_rate, seed, epoch):
    """One optimization epoch over the undirected edge list, in index order.

    An edge is visited with probability equal to its membership weight.
    Attraction follows the gradient of log(1/(1 + a*r^(2b))) and moves both
    endpoints; each endpoint then takes ``negative_sample_rate`` uniformly
    random repulsive updates. Per-component gradients are clipped to
    [-4, 4] before scaling by the learning rate ``alpha``.
    """
    n, dim = coords.shape
    for e in range(heads.shape[0]):
        if _uniform(seed, epoch, e, 0) >= weights[e]:
            continue
        i = heads[e]
        j = tails[e]

        dist_sq = 0.0
        for d in range(dim):
            diff = coords[i, d] - coords[j, d]
            dist_sq += diff * diff
        if dist_sq > 0.0:
            coef = -2.0 * a * b * dist_sq ** (b - 1.0) / (a * dist_sq**b + 1.0)
            for d in range(dim):
                grad = _clip4(coef * (coords[i, d] - coords[j, d]))
                coords[i, d] += alpha * grad
                coords[j, d] -= alpha * grad

        draw = 1
        for _ in range(negative_sample_rate):
            t = _randint(seed, epoch, e, draw, n)
            draw += 1
            if t != i:
                _repulse(coords, i, t, a, b, alpha, dim)
        for _ in range(negative_sample_rate):
            t = _randint(seed, epoch, e, draw, n)
            draw += 1
            if t != j:
                _repulse(coords, j, t, a, b, alpha, dim)
