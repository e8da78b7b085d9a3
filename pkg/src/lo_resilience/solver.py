"""Exact resilience R_x(xi): the fewest sign flips that make X equal x.

Flipping the positions in S changes X by -2 * sum_{i in S} a_i xi_i, so
R_x(xi) is the smallest |S| whose signed values a_i xi_i sum to
D = (X(xi) - x) / 2. Two independent searches solve that problem here:

* ``resilience_dp`` -- a min-cardinality subset-sum table indexed by value;
* ``resilience_bounded`` -- iterative deepening over the flip count with a
  meet-in-the-middle split of each candidate flip set.

The hypercube route lives in :mod:`lo_resilience.hypercube`.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import IndexSet, SignVector, WeightSequence, _check_lengths, evaluate, signed_values
from .errors import ResourceLimitError, UsageError

INFINITE = math.inf
_UNREACHED = np.int16(30000)
DP_CELL_LIMIT = 200_000_000


@dataclass(frozen=True)
class ResilienceResult:
    value: int | float
    witness: IndexSet | None = None

    @property
    def infinite(self) -> bool:
        return self.value == INFINITE

    def __str__(self) -> str:
        return "inf" if self.infinite else str(self.value)


@dataclass(frozen=True)
class Exceeded:
    """R_x(xi) is larger than ``kmax`` (possibly infinite)."""

    kmax: int

    def __str__(self) -> str:
        return f">{self.kmax}"


def flip_deficit(a: WeightSequence, xi: SignVector, x: int) -> int | None:
    """D = (X - x)/2, or None when X - x is odd and no flip set can help."""
    diff = evaluate(a, xi) - x
    if diff % 2:
        return None
    return diff // 2


# ---------------------------------------------------------------- value DP


def _shift_min(row: np.ndarray, c: int) -> np.ndarray:
    """min(row[v], row[v - c] + 1) for every v, as a new array."""
    out = row.copy()
    width = row.shape[0]
    if c >= width or -c >= width:
        return out
    if c > 0:
        np.minimum(out[c:], row[: width - c] + 1, out=out[c:])
    else:
        np.minimum(out[: width + c], row[-c:] + 1, out=out[: width + c])
    return out


def min_flip_counts(values: Sequence[int]) -> tuple[np.ndarray, int]:
    """For every D in [-S, S]: fewest entries of ``values`` summing to D.

    Returns ``(row, S)`` with ``row[D + S]`` the count, or a value
    >= 30000 when D is not a subset sum.
    """
    span = sum(abs(c) for c in values)
    width = 2 * span + 1
    if width * 2 > 8 * DP_CELL_LIMIT:
        raise ResourceLimitError(f"flip-sum range {width} too wide for the value DP")
    row = np.full(width, _UNREACHED, dtype=np.int16)
    row[span] = 0
    for c in values:
        row = _shift_min(row, c)
    return row, span


def resilience_dp(a: WeightSequence, xi: SignVector, x: int) -> ResilienceResult:
    """Exact R_x(xi) with the lexicographically smallest minimum witness."""
    _check_lengths(a, xi)
    target = flip_deficit(a, xi, x)
    span = a.abs_sum
    if target is None or abs(target) > span:
        return ResilienceResult(INFINITE)
    values = signed_values(a, xi)
    width = 2 * span + 1
    if (a.n + 1) * width > DP_CELL_LIMIT:
        raise ResourceLimitError(
            f"value DP needs {(a.n + 1) * width} cells (limit {DP_CELL_LIMIT}); "
            "use resilience_bounded")

    # suffix[i][v + span]: fewest of values[i:] summing to v
    suffix = np.empty((a.n + 1, width), dtype=np.int16)
    suffix[a.n] = _UNREACHED
    suffix[a.n, span] = 0
    for i in range(a.n - 1, -1, -1):
        suffix[i] = _shift_min(suffix[i + 1], values[i])

    best = int(suffix[0, target + span])
    if best >= _UNREACHED:
        return ResilienceResult(INFINITE)

    chosen = []
    need, v = best, target
    for i in range(a.n):
        if need == 0:
            break
        rest = v - values[i]
        if -span <= rest <= span and suffix[i + 1, rest + span] == need - 1:
            chosen.append(i + 1)
            v, need = rest, need - 1
    return ResilienceResult(best, IndexSet(tuple(chosen)))


# ---------------------------------------------------- meet in the middle


class FlipSearch:
    """Bounded search for small flip sets over a fixed vector of signed values.

    Each distinct signed value keeps at most ``kmax`` copies (which copy is
    flipped never matters). A flip set of size l, listed in token order, is
    split into its first floor(l/2) tokens and the rest; the halves meet when
    the lower half ends strictly before the upper half starts.
    """

    def __init__(self, tokens: Sequence[tuple[int, int | None]], kmax: int):
        if kmax < 0:
            raise UsageError("kmax must be >= 0")
        self.kmax = kmax
        self.values = [v for v, _ in tokens]
        self.positions = [p for _, p in tokens]
        self.max_abs = max((abs(v) for v in self.values), default=0)
        self._lower: dict[int, dict[int, tuple[int, tuple[int, ...]]]] = {}
        self._upper: dict[int, dict[int, tuple[int, tuple[int, ...]]]] = {}

    @classmethod
    def from_signed_values(cls, values: Sequence[int], kmax: int) -> "FlipSearch":
        per_value: dict[int, list[int]] = {}
        for pos, v in enumerate(values):
            bucket = per_value.setdefault(v, [])
            if len(bucket) < kmax:
                bucket.append(pos)
        tokens = [(v, p) for v in sorted(per_value) for p in per_value[v]]
        return cls(tokens, kmax)

    @classmethod
    def from_sign_vector(cls, a: WeightSequence, xi: SignVector, kmax: int) -> "FlipSearch":
        _check_lengths(a, xi)
        if a.n <= 4096 or not a.fits_int64:
            return cls.from_signed_values(signed_values(a, xi), kmax)
        c = a.array * xi.signs().astype(np.int64)
        order = np.argsort(c, kind="stable")
        sorted_c = c[order]
        starts = np.flatnonzero(np.r_[True, sorted_c[1:] != sorted_c[:-1]])
        run_start = np.repeat(starts, np.diff(np.r_[starts, sorted_c.size]))
        keep = (np.arange(sorted_c.size) - run_start) < kmax
        return cls(list(zip(sorted_c[keep].tolist(), order[keep].tolist())), kmax)

    @classmethod
    def from_counts(cls, counts: Iterable[tuple[int, int]], kmax: int) -> "FlipSearch":
        """Tokens from (signed value, multiplicity) pairs, no positions."""
        tokens = []
        for v, m in sorted(counts):
            tokens.extend([(v, None)] * min(m, kmax))
        return cls(tokens, kmax)

    def _half(self, size: int, lower: bool):
        cache = self._lower if lower else self._upper
        if size in cache:
            return cache[size]
        table: dict[int, tuple[int, tuple[int, ...]]] = {}
        vals = self.values
        if size == 0:
            table[0] = (-1 if lower else len(vals), ())
            cache[size] = table
            return table
        for combo in itertools.combinations(range(len(vals)), size):
            s = 0
            for t in combo:
                s += vals[t]
            edge = combo[-1] if lower else combo[0]
            old = table.get(s)
            if old is None or (edge < old[0] if lower else edge > old[0]):
                table[s] = (edge, combo)
        cache[size] = table
        return table

    def search(self, target: int, kmax: int | None = None) -> tuple[int, tuple[int, ...]] | None:
        """Smallest l <= kmax with an l-token subset summing to ``target``."""
        kmax = self.kmax if kmax is None else min(kmax, self.kmax)
        if abs(target) > kmax * self.max_abs:
            return None
        for ell in range(kmax + 1):
            lo = ell // 2
            hi = ell - lo
            low = self._half(lo, True)
            up = self._half(hi, False)
            if len(low) <= len(up):
                for s, (edge, combo) in low.items():
                    hit = up.get(target - s)
                    if hit is not None and edge < hit[0]:
                        return ell, combo + hit[1]
            else:
                for s, (edge, combo) in up.items():
                    hit = low.get(target - s)
                    if hit is not None and hit[0] < edge:
                        return ell, hit[1] + combo
        return None

    def all_targets(self, kmax: int | None = None) -> tuple[np.ndarray, int]:
        """Fewest flips for every target at once, as ``(row, offset)``.

        ``row[D + offset]`` is the smallest l <= kmax reaching D, or >= 30000.
        Sums are kept as integer bitsets; the split point between the two
        halves ranges over every token position.
        """
        kmax = self.kmax if kmax is None else min(kmax, self.kmax)
        vals = self.values
        count = len(vals)
        offset = sum(abs(v) for v in vals)

        def shift(bits: int, v: int) -> int:
            return bits << v if v >= 0 else bits >> -v

        base = 1 << offset
        top_lo = kmax // 2
        top_hi = kmax - kmax // 2
        # prefix[s][j]: sums of s tokens drawn from positions < j
        prefix = [[0] * (count + 1) for _ in range(top_lo + 1)]
        prefix[0] = [base] * (count + 1)
        for s in range(1, top_lo + 1):
            for j in range(count):
                prefix[s][j + 1] = prefix[s][j] | shift(prefix[s - 1][j], vals[j])
        # suffix[s][j]: sums of s tokens drawn from positions >= j
        suffix = [[0] * (count + 1) for _ in range(max(top_hi, 1))]
        suffix[0] = [base] * (count + 1)
        for s in range(1, top_hi):
            for j in range(count - 1, -1, -1):
                suffix[s][j] = suffix[s][j + 1] | shift(suffix[s - 1][j + 1], vals[j])

        row = np.full(2 * offset + 1, _UNREACHED, dtype=np.int16)
        seen = 0
        for ell in range(kmax + 1):
            lo, hi = ell // 2, ell - ell // 2
            if hi == 0:
                reach = base
            else:
                reach = 0
                for j in range(count):
                    left = prefix[lo][j]
                    right = shift(suffix[hi - 1][j + 1], vals[j])
                    if left == 0 or right == 0:
                        continue
                    reach |= _minkowski(left, right, offset)
            fresh = reach & ~seen
            if fresh:
                seen |= fresh
                row[_bit_positions(fresh, row.size)] = ell
        return row, offset


def _bit_positions(bits: int, width: int) -> np.ndarray:
    raw = np.frombuffer(bits.to_bytes((width + 7) // 8, "little"), dtype=np.uint8)
    return np.flatnonzero(np.unpackbits(raw, bitorder="little", count=width))


def _minkowski(left: int, right: int, offset: int) -> int:
    """Bitset of {a + b} for a in left, b in right (both offset-encoded)."""
    if left.bit_count() > right.bit_count():
        left, right = right, left
    out = 0
    while left:
        low = left & -left
        s = low.bit_length() - 1 - offset
        out |= right << s if s >= 0 else right >> -s
        left ^= low
    return out


def resilience_bounded(a: WeightSequence, xi: SignVector, x: int,
                       kmax: int) -> ResilienceResult | Exceeded:
    """Exact R_x(xi) when it is at most ``kmax``; otherwise ``Exceeded``."""
    if kmax < 0:
        raise UsageError("kmax must be >= 0")
    _check_lengths(a, xi)
    target = flip_deficit(a, xi, x)
    if target is None:
        return Exceeded(kmax)
    if target == 0:
        return ResilienceResult(0, IndexSet())
    kmax = min(kmax, a.n)
    if abs(target) > kmax * max(abs(w) for w in a.weights):
        return Exceeded(kmax)
    search = FlipSearch.from_sign_vector(a, xi, kmax)
    hit = search.search(target)
    if hit is None:
        return Exceeded(kmax)
    ell, tokens = hit
    return ResilienceResult(ell, IndexSet(tuple(search.positions[t] + 1 for t in tokens)))


def resilience(a: WeightSequence, xi: SignVector, x: int) -> ResilienceResult:
    """R_x(xi) by the value DP when affordable, else by unbounded search."""
    if (a.n + 1) * (2 * a.abs_sum + 1) <= DP_CELL_LIMIT:
        return resilience_dp(a, xi, x)
    res = resilience_bounded(a, xi, x, a.n)
    return ResilienceResult(INFINITE) if isinstance(res, Exceeded) else res
