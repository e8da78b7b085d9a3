"""Order-h additive bases of [n] with small sum of squares.

A set B is an order-h basis of [n] when every 1 <= x <= n is a sum of at most
h distinct elements of B. ``build_basis`` follows the layered recursion
B = [m] U (m * B') with B' an order-(h-1) basis of [floor(n/m)] and
m = ceil(n^(2*3^(h-1) / (3^h - 1))), computed in exact integer arithmetic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable

import numpy as np

from .errors import ResourceLimitError, UsageError

BRUTEFORCE_LIMIT = 24
_FAR = 1 << 14


def iroot_ceil(value: int, q: int) -> int:
    """Smallest integer r >= 0 with r**q >= value."""
    if value <= 0:
        return 0
    if q == 1:
        return value
    # integer Newton iteration from above converges to floor(value^(1/q))
    r = 1 << -(-value.bit_length() // q)
    while True:
        nxt = ((q - 1) * r + value // r ** (q - 1)) // q
        if nxt >= r:
            break
        r = nxt
    return r if r**q >= value else r + 1


def layer_exponent(h: int) -> Fraction:
    """2*3^(h-1)/(3^h - 1), the exponent giving the layer size m."""
    return Fraction(2 * 3 ** (h - 1), 3**h - 1)


def square_exponent(h: int) -> Fraction:
    """2 + 2/(3^h - 1), the growth exponent of the sum of squares."""
    return 2 + Fraction(2, 3**h - 1)


def ceil_power(n: int, exponent: Fraction) -> int:
    """ceil(n ** exponent) for a nonnegative rational exponent, exactly."""
    return iroot_ceil(n**exponent.numerator, exponent.denominator)


def layer_size(h: int, n: int) -> int:
    return ceil_power(n, layer_exponent(h))


def square_bound_ceil(h: int, n: int) -> int:
    """ceil(10^h * n^(2 + 2/(3^h - 1)))."""
    e = square_exponent(h)
    return iroot_ceil(10 ** (h * e.denominator) * n**e.numerator, e.denominator)


@dataclass(frozen=True)
class AdditiveBasis:
    elements: tuple[int, ...]
    order: int
    range: int

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(sorted(set(int(b) for b in self.elements))))

    @property
    def sum_of_squares(self) -> int:
        return sum(b * b for b in self.elements)

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def verify(self) -> bool:
        return verify_basis(self.elements, self.order, self.range)

    def represent(self, x: int) -> tuple[int, ...]:
        """Fewest distinct elements summing to x (at most ``order`` of them)."""
        return representation(self.elements, self.range, x)


def _min_counts(elements: Iterable[int], n: int) -> np.ndarray:
    best = np.full(n + 1, _FAR, dtype=np.int32)
    best[0] = 0
    for b in elements:
        if b > n:
            continue
        step = best[: n + 1 - b] + 1
        np.minimum(best[b:], step, out=best[b:])
    return best


def verify_basis(elements: Iterable[int], h: int, n: int) -> bool:
    """True iff each x in [n] is a sum of at most h distinct elements."""
    elems = sorted(set(int(b) for b in elements))
    if any(b <= 0 for b in elems):
        return False
    if n < 1:
        return True
    return int(_min_counts(elems, n)[1:].max()) <= h


@lru_cache(maxsize=16)
def _representation_table(elements: tuple[int, ...], n: int) -> np.ndarray:
    """table[i][v]: fewest of elements[i:] summing to v."""
    table = np.full((len(elements) + 1, n + 1), _FAR, dtype=np.int32)
    table[len(elements), 0] = 0
    for i in range(len(elements) - 1, -1, -1):
        table[i] = table[i + 1]
        b = elements[i]
        if b <= n:
            np.minimum(table[i, b:], table[i + 1, : n + 1 - b] + 1, out=table[i, b:])
    return table


def representation(elements: Iterable[int], n: int, x: int) -> tuple[int, ...]:
    elems = tuple(sorted(set(elements)))
    if not 0 <= x <= n:
        raise UsageError(f"{x} outside [0, {n}]")
    table = _representation_table(elems, n)
    need = int(table[0, x])
    if need >= _FAR:
        raise UsageError(f"{x} is not a sum of distinct basis elements")
    picked = []
    for i, b in enumerate(elems):
        if need == 0:
            break
        if b <= x and table[i + 1, x - b] == need - 1:
            picked.append(b)
            x -= b
            need -= 1
    return tuple(picked)


def build_basis(h: int, n: int) -> AdditiveBasis:
    """Order-h basis of [n] from the layered recursion.

    Whenever the layer size m reaches n the whole interval [n] is returned;
    it is always a valid basis and keeps the square-sum bound.
    """
    if h < 1 or n < 1:
        raise UsageError("need h >= 1 and n >= 1")
    return AdditiveBasis(_build(h, n), h, n)


@lru_cache(maxsize=None)
def _build(h: int, n: int) -> tuple[int, ...]:
    if h == 1:
        return tuple(range(1, n + 1))
    m = layer_size(h, n)
    if m >= n:
        return tuple(range(1, n + 1))
    inner = _build(h - 1, n // m)
    return tuple(sorted(set(range(1, m + 1)) | {m * b for b in inner}))


def optimal_basis_bruteforce(h: int, n: int) -> AdditiveBasis:
    """A minimum sum-of-squares order-h basis of [n] by branch and bound.

    Elements are decided in increasing order; a value left uncovered when
    the search moves past it can never be covered later. Among optima the
    lexicographically smallest element tuple is returned.
    """
    if n > BRUTEFORCE_LIMIT:
        raise ResourceLimitError(f"brute force is capped at n <= {BRUTEFORCE_LIMIT}")
    if h < 1 or n < 1:
        raise UsageError("need h >= 1 and n >= 1")

    incumbent = build_basis(h, n)
    best_cost = incumbent.sum_of_squares
    best_set = incumbent.elements

    def extend(counts: list[int], b: int) -> list[int]:
        out = counts[:]
        for v in range(n, b - 1, -1):
            c = counts[v - b] + 1
            if c < out[v]:
                out[v] = c
        return out

    def search(e: int, chosen: list[int], counts: list[int], cost: int) -> None:
        nonlocal best_cost, best_set
        if cost > best_cost:
            return
        if e > n:
            if all(c <= h for c in counts[1:]):
                cand = tuple(chosen)
                if cost < best_cost or (cost == best_cost and cand < best_set):
                    best_cost, best_set = cost, cand
            return
        # include e
        search(e + 1, chosen + [e], extend(counts, e), cost + e * e)
        # exclude e: e must already be reachable
        if counts[e] <= h:
            search(e + 1, chosen, counts, cost)

    start = [0] + [_FAR] * n
    search(1, [], start, 0)
    return AdditiveBasis(best_set, h, n)
