"""Weight sequences, sign vectors and the signed sum X = sum a_i xi_i.

Sign convention: bit i of a SignVector (0-based, least significant first) is
1 when xi_{i+1} = +1 and 0 when xi_{i+1} = -1. Index sets are 1-based.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import DimensionError, ParityUnfixableError, UsageError

INT64_SAFE = 2**62


@dataclass(frozen=True)
class WeightSequence:
    weights: tuple[int, ...]
    name: str | None = None
    params: Mapping[str, object] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        ws = tuple(self.weights)
        if not ws:
            raise UsageError("a weight sequence needs at least one entry")
        for w in ws:
            if isinstance(w, bool) or not isinstance(w, (int, np.integer)):
                raise UsageError(f"weights must be integers, got {w!r}")
            if w == 0:
                raise UsageError("weights must be nonzero")
        object.__setattr__(self, "weights", tuple(int(w) for w in ws))
        object.__setattr__(self, "params", dict(self.params))

    @classmethod
    def of(cls, *weights: int, name: str | None = None) -> "WeightSequence":
        return cls(tuple(weights), name=name)

    @classmethod
    def from_rationals(cls, values: Iterable[Fraction | int | str],
                       name: str | None = None) -> tuple["WeightSequence", int]:
        """Scale rational weights by the LCM of their denominators.

        Returns the integer sequence and the scale factor. Resilience is
        invariant under scaling both the weights and the target.
        """
        fracs = [Fraction(v) for v in values]
        scale = 1
        for f in fracs:
            scale = scale * f.denominator // math.gcd(scale, f.denominator)
        ints = tuple(int(f * scale) for f in fracs)
        return cls(ints, name=name, params={"scale": scale}), scale

    @property
    def n(self) -> int:
        return len(self.weights)

    def __len__(self) -> int:
        return len(self.weights)

    def __iter__(self) -> Iterator[int]:
        return iter(self.weights)

    def __getitem__(self, i):
        return self.weights[i]

    def total_sum(self) -> int:
        return sum(self.weights)

    def total_sum_of_squares(self) -> int:
        return sum(w * w for w in self.weights)

    @cached_property
    def abs_sum(self) -> int:
        return sum(abs(w) for w in self.weights)

    @property
    def fits_int64(self) -> bool:
        return self.abs_sum < INT64_SAFE

    @cached_property
    def array(self) -> np.ndarray:
        dtype = np.int64 if self.fits_int64 else object
        arr = np.array(self.weights, dtype=dtype)
        arr.flags.writeable = False
        return arr

    @cached_property
    def groups(self) -> tuple[tuple[int, np.ndarray], ...]:
        """Positions (0-based) grouped by equal weight value, sorted by value."""
        order: dict[int, list[int]] = {}
        for i, w in enumerate(self.weights):
            order.setdefault(w, []).append(i)
        return tuple((w, np.array(pos, dtype=np.int64)) for w, pos in sorted(order.items()))

    def scaled(self, c: int) -> "WeightSequence":
        if c == 0:
            raise UsageError("scale factor must be nonzero")
        return WeightSequence(tuple(c * w for w in self.weights), self.name, self.params)

    def with_params(self, **extra) -> "WeightSequence":
        return WeightSequence(self.weights, self.name, {**self.params, **extra})

    def __repr__(self) -> str:
        shown = ", ".join(map(str, self.weights[:12]))
        if self.n > 12:
            shown += f", ... ({self.n} entries)"
        label = f"{self.name}: " if self.name else ""
        return f"WeightSequence({label}{shown})"


@dataclass(frozen=True)
class SignVector:
    bits: int
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise UsageError("sign vectors have length >= 1")
        if self.bits < 0 or self.bits >> self.n:
            raise UsageError("bits out of range for the declared length")

    @classmethod
    def from_string(cls, text: str) -> "SignVector":
        text = text.strip()
        bits = 0
        for i, ch in enumerate(text):
            if ch == "+":
                bits |= 1 << i
            elif ch != "-":
                raise UsageError(f"sign string may only contain '+' and '-', got {ch!r} at {i + 1}")
        return cls(bits, len(text))

    @classmethod
    def from_signs(cls, signs: Iterable[int]) -> "SignVector":
        bits = 0
        n = 0
        for i, s in enumerate(signs):
            if s == 1:
                bits |= 1 << i
            elif s != -1:
                raise UsageError(f"signs must be +1 or -1, got {s!r}")
            n = i + 1
        return cls(bits, n)

    @classmethod
    def from_bytes(cls, data: bytes, n: int) -> "SignVector":
        bits = int.from_bytes(data, "little") & ((1 << n) - 1)
        return cls(bits, n)

    @classmethod
    def all_plus(cls, n: int) -> "SignVector":
        return cls((1 << n) - 1, n)

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "SignVector":
        return cls.from_bytes(rng.bytes((n + 7) // 8), n)

    def __len__(self) -> int:
        return self.n

    def sign(self, i: int) -> int:
        """Sign at 1-based position i."""
        return 1 if (self.bits >> (i - 1)) & 1 else -1

    def signs(self) -> np.ndarray:
        raw = np.frombuffer(self.bits.to_bytes((self.n + 7) // 8, "little"), dtype=np.uint8)
        plus = np.unpackbits(raw, bitorder="little", count=self.n)
        return plus.astype(np.int8) * 2 - 1

    def plus_count(self) -> int:
        return self.bits.bit_count()

    def flipped(self, flips: Iterable[int]) -> "SignVector":
        mask = 0
        for i in flips:
            if not 1 <= i <= self.n:
                raise DimensionError(f"flip index {i} outside [1, {self.n}]")
            mask ^= 1 << (i - 1)
        return SignVector(self.bits ^ mask, self.n)

    def to_string(self) -> str:
        return "".join("+" if (self.bits >> i) & 1 else "-" for i in range(self.n))

    def __str__(self) -> str:
        return self.to_string() if self.n <= 80 else f"<SignVector n={self.n}>"


@dataclass(frozen=True)
class IndexSet:
    indices: tuple[int, ...] = ()

    def __post_init__(self):
        idx = tuple(sorted(set(int(i) for i in self.indices)))
        if idx and idx[0] < 1:
            raise DimensionError(f"indices are 1-based, got {idx[0]}")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def of(cls, *indices: int) -> "IndexSet":
        return cls(tuple(indices))

    def check(self, n: int) -> "IndexSet":
        if self.indices and self.indices[-1] > n:
            raise DimensionError(f"index {self.indices[-1]} outside [1, {n}]")
        return self

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self) -> Iterator[int]:
        return iter(self.indices)

    def __contains__(self, i) -> bool:
        return i in self.indices

    def __or__(self, other: "IndexSet") -> "IndexSet":
        return IndexSet(self.indices + other.indices)


def _check_lengths(a: WeightSequence, xi: SignVector) -> None:
    if a.n != xi.n:
        raise DimensionError(f"weight sequence has {a.n} entries, sign vector {xi.n}")


def evaluate(a: WeightSequence, xi: SignVector) -> int:
    """Exact value of sum_i a_i xi_i."""
    _check_lengths(a, xi)
    if a.n <= 64 or not a.fits_int64:
        bits = xi.bits
        return sum(w if (bits >> i) & 1 else -w for i, w in enumerate(a.weights))
    plus = xi.signs() > 0
    return int(2 * a.array[plus].sum() - a.total_sum())


def evaluate_partial(a: WeightSequence, xi: SignVector, index_set: IndexSet | Iterable[int]) -> int:
    _check_lengths(a, xi)
    idx = index_set if isinstance(index_set, IndexSet) else IndexSet(tuple(index_set))
    idx.check(a.n)
    return sum(a.weights[i - 1] * xi.sign(i) for i in idx)


def signed_values(a: WeightSequence, xi: SignVector) -> list[int]:
    """The per-position contributions a_i xi_i."""
    _check_lengths(a, xi)
    bits = xi.bits
    return [w if (bits >> i) & 1 else -w for i, w in enumerate(a.weights)]


def apply_flips(xi: SignVector, flips: IndexSet | Iterable[int]) -> SignVector:
    return xi.flipped(flips)


def canonicalize(a: WeightSequence) -> WeightSequence:
    """Absolute values sorted ascending; the law of every R_x is unchanged."""
    return WeightSequence(tuple(sorted(abs(w) for w in a.weights)), a.name, a.params)


def parity_fix(a: WeightSequence) -> WeightSequence:
    """Make the total even by turning the last entry equal to 1 into a 2."""
    if a.total_sum() % 2 == 0:
        return a
    for i in range(a.n - 1, -1, -1):
        if a.weights[i] == 1:
            ws = list(a.weights)
            ws[i] = 2
            return WeightSequence(tuple(ws), a.name, {**a.params, "parity_fix_index": i + 1})
    raise ParityUnfixableError("total sum is odd and no entry equals 1")


def binomial_ball(n: int, k: int) -> int:
    """Number of sign vectors within Hamming distance k of a fixed one."""
    return sum(math.comb(n, j) for j in range(0, min(k, n) + 1))


def erdos_bound(n: int) -> Fraction:
    """C(n, floor(n/2)) / 2^n, the largest possible atom probability."""
    return Fraction(math.comb(n, n // 2), 2**n)


def as_weights(a: WeightSequence | Sequence[int]) -> WeightSequence:
    return a if isinstance(a, WeightSequence) else WeightSequence(tuple(a))
