"""Exhaustive computations over all 2^n sign vectors.

Vertex v of the cube is the sign vector whose bitmask is v (bit i set means
xi_{i+1} = +1). X is evaluated at every vertex by a Gray-code walk, and
Hamming distances to a fiber X^{-1}(x) are computed by relaxing the cube's
edges one coordinate direction at a time.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

import numpy as np

from .core import WeightSequence, binomial_ball
from .errors import ResourceLimitError

EXHAUSTIVE_LIMIT = 26
_GRAY_BLOCK = 1 << 18


@dataclass(frozen=True)
class ResilienceProfile:
    """Distribution of R_x over the whole cube, as counts per distance."""

    target: int
    n: int
    counts: dict[int, int] = field(default_factory=dict)

    @property
    def achievable(self) -> bool:
        return bool(self.counts)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def at_most(self, k: int) -> int:
        return sum(c for d, c in self.counts.items() if d <= k)

    def prob_at_most(self, k: int) -> Fraction:
        return Fraction(self.at_most(k), 2**self.n)

    def as_list(self) -> list[int]:
        return [self.counts.get(d, 0) for d in range(self.n + 1)]


def _check_size(n: int, limit: int) -> None:
    if n > limit:
        raise ResourceLimitError(f"exhaustive computation over 2^{n} vertices exceeds limit 2^{limit}")


def _gray_block(weights: np.ndarray, total: int, start: int, stop: int, out: np.ndarray) -> None:
    j = np.arange(start, stop, dtype=np.int64)
    gray = j ^ (j >> 1)
    first = int(gray[0])
    # X at the block's first vertex, evaluated directly
    x0 = -total + 2 * sum(int(weights[i]) for i in range(weights.size) if (first >> i) & 1)
    if stop - start == 1:
        out[first] = x0
        return
    step = j[1:]
    bit = np.frexp((step & -step).astype(np.float64))[1] - 1
    turned_on = (gray[1:] >> bit) & 1
    delta = weights[bit] * 2
    delta = np.where(turned_on == 1, delta, -delta)
    walk = np.empty(stop - start, dtype=out.dtype)
    walk[0] = x0
    np.cumsum(delta, out=walk[1:])
    walk[1:] += x0
    out[gray] = walk


def vertex_sums(a: WeightSequence, limit: int = EXHAUSTIVE_LIMIT, threads: int = 1) -> np.ndarray:
    """X at every vertex; entry v is X of the sign vector with bitmask v."""
    _check_size(a.n, limit)
    size = 1 << a.n
    dtype = np.int64 if a.fits_int64 else object
    weights = np.array(a.weights, dtype=dtype)
    out = np.empty(size, dtype=dtype)
    total = a.total_sum()
    blocks = [(s, min(s + _GRAY_BLOCK, size)) for s in range(0, size, _GRAY_BLOCK)]
    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(threads) as pool:
            list(pool.map(lambda b: _gray_block(weights, total, b[0], b[1], out), blocks))
    else:
        for s, e in blocks:
            _gray_block(weights, total, s, e, out)
    return out


def support(sums: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Atoms of X and the size of each fiber."""
    return np.unique(sums, return_counts=True)


def fiber_distances(sums: np.ndarray, x: int, n: int) -> np.ndarray:
    """Hamming distance from every vertex to the fiber {X = x}.

    Unreachable vertices (empty fiber) get n + 1. One relaxation pass per
    coordinate: after pass i, each vertex holds the distance to the nearest
    fiber point that agrees with it outside the first i + 1 coordinates.
    """
    far = n + 1
    dist = np.where(sums == x, 0, far).astype(np.int8)
    for i in range(n):
        cube = dist.reshape(-1, 2, 1 << i)
        low, high = cube[:, 0, :], cube[:, 1, :]
        np.minimum(low, high + 1, out=low)
        np.minimum(high, low + 1, out=high)
    return dist


def fiber_distances_bfs(sums: np.ndarray, x: int, n: int) -> np.ndarray:
    """Level-by-level multi-source BFS; slower cross-check of fiber_distances."""
    far = n + 1
    dist = np.full(sums.shape[0], far, dtype=np.int8)
    frontier = sums == x
    dist[frontier] = 0
    visited = frontier.copy()
    level = 0
    while frontier.any():
        level += 1
        reached = np.zeros_like(frontier)
        for i in range(n):
            f = frontier.reshape(-1, 2, 1 << i)
            r = reached.reshape(-1, 2, 1 << i)
            r[:, 0, :] |= f[:, 1, :]
            r[:, 1, :] |= f[:, 0, :]
        frontier = reached & ~visited
        visited |= frontier
        dist[frontier] = level
    return dist


def _profile_from_distances(dist: np.ndarray, x: int, n: int) -> ResilienceProfile:
    tally = np.bincount(dist, minlength=n + 2)
    if tally[n + 1] == dist.size:
        return ResilienceProfile(x, n, {})
    return ResilienceProfile(x, n, {d: int(c) for d, c in enumerate(tally[: n + 1]) if c})


def hypercube_profile(a: WeightSequence, x: int, limit: int = EXHAUSTIVE_LIMIT,
                      threads: int = 1, sums: np.ndarray | None = None) -> ResilienceProfile:
    """Exact counts of sign vectors at each resilience value for target x.

    An unachievable x gives an empty profile rather than an error.
    """
    _check_size(a.n, limit)
    if sums is None:
        sums = vertex_sums(a, limit, threads)
    return _profile_from_distances(fiber_distances(sums, x, a.n), x, a.n)


def atom_profiles(a: WeightSequence, limit: int = EXHAUSTIVE_LIMIT,
                  sums: np.ndarray | None = None) -> Iterable[ResilienceProfile]:
    """Profiles for every atom of X, in increasing order of the atom."""
    if sums is None:
        sums = vertex_sums(a, limit)
    for x in np.unique(sums).tolist():
        yield _profile_from_distances(fiber_distances(sums, x, a.n), x, a.n)


@dataclass(frozen=True)
class QkResult:
    value: Fraction
    argmax: int
    ties: int
    volume: int
    k: int


def qk_exact(a: WeightSequence, k: int, candidates: Iterable[int] | None = None,
             limit: int = EXHAUSTIVE_LIMIT, threads: int = 1,
             sums: np.ndarray | None = None) -> QkResult:
    """max_x Pr[R_x <= k] over the candidate targets, exactly.

    Ball volumes of x and -x agree (xi -> -xi is a cube isometry), so only
    |x| is evaluated. Candidates whose fiber size times the Hamming-ball
    volume cannot reach the running best are skipped. Ties report the
    smallest maximizer and how many maximizers there are.
    """
    _check_size(a.n, limit)
    if sums is None:
        sums = vertex_sums(a, limit, threads)
    atoms, sizes = support(sums)
    fiber = dict(zip(atoms.tolist(), sizes.tolist()))
    if candidates is None:
        targets = sorted(fiber)
    else:
        targets = sorted(set(int(c) for c in candidates))
    if not targets:
        raise ValueError("no candidate targets")
    ball = binomial_ball(a.n, k)
    magnitudes = sorted({abs(t) for t in targets}, key=lambda t: (-fiber.get(t, 0), t))

    volumes: dict[int, int] = {}

    def volume(t: int) -> int:
        if fiber.get(t, 0) == 0:
            return 0
        if k >= a.n:
            return 1 << a.n
        return int(np.count_nonzero(fiber_distances(sums, t, a.n) <= k))

    best = -1
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            for t, vol in zip(magnitudes, pool.map(volume, magnitudes)):
                volumes[t] = vol
                best = max(best, vol)
    else:
        for t in magnitudes:
            if fiber.get(t, 0) * ball < best:
                continue
            volumes[t] = volume(t)
            best = max(best, volumes[t])

    winners = [t for t in targets if volumes.get(abs(t), -1) == best]
    return QkResult(Fraction(best, 1 << a.n), winners[0], len(winners), best, k)


def ball_volume_bound(a_n: int, k: int, fiber_size: int) -> int:
    """|X^{-1}(x)| times the volume of a radius-k Hamming ball."""
    return fiber_size * binomial_ball(a_n, k)

