"""Weight-sequence families and constructive flip certificates.

Generators return a WeightSequence whose ``params`` record everything a
certificate needs to find its layers again: basis contents, copy counts and
the 1-based index ranges of each block. All logarithms are base 2.

A certificate is an explicit flip set that drives X to 0. It is re-checked
with an exact evaluation before it is returned, so a certificate is always
a sound upper bound on R_0(xi).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .basis import AdditiveBasis, build_basis, representation
from .core import IndexSet, SignVector, WeightSequence, _check_lengths, evaluate, parity_fix
from .errors import ConstructionError, MisuseError, UsageError

GUARD = 1e-12
DEFAULT_EPSILON = Fraction(1, 10)
DEFAULT_L = 20


class Family(str, enum.Enum):
    ONES = "ones"
    ARITHMETIC = "arithmetic"
    POWERS2 = "powers2"
    PLANTED_LOG = "planted_log"
    LAYERED = "layered"
    PK_LOWER = "pk_lower"
    P1_SHARP = "p1_sharp"
    JANSON_SPENCER = "janson_spencer"


@dataclass(frozen=True)
class FamilySpec:
    """One family at one length.

    ``k`` is the basis order for pk_lower; ``g`` fixes the number of distinct
    tail values of p1_sharp directly (otherwise it comes from epsilon).
    """

    family: Family
    n: int
    k: int | None = None
    epsilon: Fraction | None = None
    g: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if self.n < 1:
            raise UsageError("n must be >= 1")
        if self.epsilon is not None:
            eps = Fraction(self.epsilon)
            if not 0 < eps < 1:
                raise UsageError("epsilon must lie in (0, 1)")
            object.__setattr__(self, "epsilon", eps)

    def with_n(self, n: int) -> "FamilySpec":
        return FamilySpec(self.family, n, self.k, self.epsilon, self.g)

    @property
    def eps(self) -> Fraction:
        return DEFAULT_EPSILON if self.epsilon is None else self.epsilon


def _ceil(v: float) -> int:
    return math.ceil(v - GUARD)


def _floor(v: float) -> int:
    return math.floor(v + GUARD)


# ------------------------------------------------------------ generators


def ones(n: int) -> WeightSequence:
    return WeightSequence((1,) * n, "ones")


def arithmetic(n: int) -> WeightSequence:
    return WeightSequence(tuple(range(1, n + 1)), "arithmetic")


def powers2(n: int) -> WeightSequence:
    return WeightSequence(tuple(1 << i for i in range(n)), "powers2")


def planted_log_k(n: int) -> int:
    """Smallest k with 2^k >= n and n - k odd."""
    k = max(0, (n - 1).bit_length())
    if (n - k) % 2 == 0:
        k += 1
    return k


def planted_log(n: int) -> WeightSequence:
    k = planted_log_k(n)
    if n - k < 1:
        raise ConstructionError(f"planted_log needs at least one unit entry (n={n}, k={k})")
    ws = (1,) * (n - k) + tuple(1 << i for i in range(k))
    return WeightSequence(ws, "planted_log", {"k": k, "L": [1, n - k], "I": [n - k + 1, n]})


def random_weights(n: int, seed: int, bound: int = 8) -> WeightSequence:
    """Nonzero integers drawn uniformly from [-bound, bound]."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    pool = np.array([v for v in range(-bound, bound + 1) if v])
    return WeightSequence(tuple(int(v) for v in rng.choice(pool, size=n)), "random",
                          {"seed": seed, "bound": bound})


def layered_parameters(n: int, epsilon: Fraction = DEFAULT_EPSILON) -> dict:
    if n < 16:
        raise ConstructionError(f"layered needs log log log n >= 1, i.e. n >= 16 (got {n})")
    lg = math.log2(n)
    llg = math.log2(lg)
    base = math.log(3 - float(epsilon))
    h = _ceil(math.log(lg) / base)
    h_prime = _ceil(math.log(llg) / base)
    r = _ceil(2 * math.log2(llg))
    u = _ceil(n / lg**2)
    range_j = _ceil(lg**2 / llg**2)
    return {
        "h": max(h, 1), "h_prime": max(h_prime, 1), "r": max(r, 1),
        "u": u, "range_J": range_j,
        "copies_I": _ceil(lg), "copies_J": _ceil(2 * math.log2(lg)),
    }


def assemble_layered(n: int, basis_i: AdditiveBasis, copies_i: int, basis_j: AdditiveBasis,
                     copies_j: int, r: int, extra: dict | None = None) -> WeightSequence:
    """Lay out blocks I, J, K, L and pad with ones.

    I holds ``copies_i`` copies of each element of ``basis_i``, J holds
    ``copies_j`` copies of u*b for b in ``basis_j`` (u = range of basis_i),
    K is m, 2m, ..., 2^(r-1) m with m = u * range of basis_j, and L is ones.
    Any small-scale miniature of the layered family can be built this way.
    """
    u = basis_i.range
    m = u * basis_j.range
    block_i = [b for b in basis_i.elements for _ in range(copies_i)]
    block_j = [u * b for b in basis_j.elements for _ in range(copies_j)]
    block_k = [m << j for j in range(r)]
    n_ones = n - len(block_i) - len(block_j) - r
    if n_ones < 1:
        raise ConstructionError(
            f"layered blocks need {n - n_ones} entries, leaving {n_ones} ones for n={n}")
    i_end = len(block_i)
    j_end = i_end + len(block_j)
    k_end = j_end + r
    params = {
        **(extra or {}),
        "h": basis_i.order, "h_prime": basis_j.order, "r": r, "u": u, "m": m,
        "range_J": basis_j.range, "copies_I": copies_i, "copies_J": copies_j,
        "basis_I": list(basis_i.elements), "basis_J": list(basis_j.elements),
        "I": [1, i_end], "J": [i_end + 1, j_end], "K": [j_end + 1, k_end], "L": [k_end + 1, n],
    }
    a = WeightSequence(tuple(block_i + block_j + block_k + [1] * n_ones), "layered", params)
    return parity_fix(a)


def layered(n: int, epsilon: Fraction = DEFAULT_EPSILON) -> WeightSequence:
    p = layered_parameters(n, epsilon)
    basis_i = build_basis(p["h"], p["u"])
    basis_j = build_basis(p["h_prime"], p["range_J"])
    return assemble_layered(n, basis_i, p["copies_I"], basis_j, p["copies_J"], p["r"],
                            {"epsilon": str(epsilon)})


def pk_lower(n: int, k: int, epsilon: Fraction = DEFAULT_EPSILON) -> WeightSequence:
    if k is None or k < 1:
        raise UsageError("pk_lower needs an order k >= 1")
    if n < 4:
        raise ConstructionError("pk_lower needs n >= 4")
    lg = math.log2(n)
    exponent = 1 / (2 + 2 / (3**k - 1))
    g = _floor((float(epsilon) * n / lg) ** exponent)
    if g < 1:
        raise ConstructionError(f"pk_lower basis range g = {g} < 1 at n={n}")
    basis = build_basis(k, g)
    copies = _ceil(2 * lg)
    block = [b for b in basis.elements for _ in range(copies)]
    n_ones = n - len(block)
    if n_ones < 1:
        raise ConstructionError(f"pk_lower needs {len(block)} basis copies, leaving {n_ones} ones")
    params = {"k": k, "g": g, "copies_I": copies, "basis_I": list(basis.elements),
              "epsilon": str(epsilon), "I": [1, len(block)], "L": [len(block) + 1, n]}
    return parity_fix(WeightSequence(tuple(block + [1] * n_ones), "pk_lower", params))


def p1_sharp_g(n: int, epsilon: Fraction = DEFAULT_EPSILON) -> int:
    """Integer nearest (epsilon n)^(1/3) making the total sum even (ties to smaller)."""
    target = (float(epsilon) * n) ** (1 / 3)
    base = max(1, round(target))
    candidates = [g for g in (base - 1, base, base + 1)
                  if g >= 1 and (n - g + g * (g + 1) // 2) % 2 == 0]
    return min(candidates, key=lambda g: (abs(g - target), g))


def p1_sharp(n: int, epsilon: Fraction = DEFAULT_EPSILON, g: int | None = None) -> WeightSequence:
    """n - g ones followed by 1, 2, ..., g.

    An explicit g is used as given, even when the total comes out odd.
    """
    if g is None:
        g = p1_sharp_g(n, epsilon)
    if g < 1 or n - g < 1:
        raise ConstructionError(f"p1_sharp needs 1 <= g < n (g={g}, n={n})")
    ws = (1,) * (n - g) + tuple(range(1, g + 1))
    return WeightSequence(ws, "p1_sharp", {"g": g, "epsilon": str(epsilon),
                                           "J": [1, n - g], "I": [n - g + 1, n]})


def janson_spencer(n: int) -> WeightSequence:
    """Harmonic layers round(sqrt(n)/i), small integers 2..n^0.3, then ones."""
    if n < 16:
        raise ConstructionError("janson_spencer needs n >= 16")
    lg = math.log2(n)
    top_i = _floor(n**0.2)
    top_j = _floor(n**0.3)
    root = math.isqrt(n)
    harmonic = []
    layers = []
    for i in range(1, top_i + 1):
        # round(sqrt(n)/i) exactly: compare 4 n with (2 v + 1)^2 i^2
        v = root // i
        while (2 * v + 1) ** 2 * i * i <= 4 * n:
            v += 1
        while v > 0 and (2 * v - 1) ** 2 * i * i > 4 * n:
            v -= 1
        copies = _ceil(1000 * math.log2(i + 1))
        layers.append([v, copies])
        harmonic.extend([v] * copies)
    small_copies = _ceil(10 * lg)
    small = [j for j in range(2, top_j + 1) for _ in range(small_copies)]
    n_ones = n - len(harmonic) - len(small)
    if n_ones < 1:
        raise ConstructionError(
            f"janson_spencer layers take {len(harmonic) + len(small)} entries, leaving {n_ones} ones")
    h_end = len(harmonic)
    s_end = h_end + len(small)
    params = {"harmonic_layers": layers, "small_max": top_j, "small_copies": small_copies,
              "H": [1, h_end], "S": [h_end + 1, s_end], "L": [s_end + 1, n]}
    return parity_fix(WeightSequence(tuple(harmonic + small + [1] * n_ones), "janson_spencer", params))


def generate(spec: FamilySpec) -> WeightSequence:
    f, n = spec.family, spec.n
    if f is Family.ONES:
        return ones(n)
    if f is Family.ARITHMETIC:
        return arithmetic(n)
    if f is Family.POWERS2:
        return powers2(n)
    if f is Family.PLANTED_LOG:
        return planted_log(n)
    if f is Family.LAYERED:
        return layered(n, spec.eps)
    if f is Family.PK_LOWER:
        return pk_lower(n, spec.k if spec.k is not None else 1, spec.eps)
    if f is Family.P1_SHARP:
        return p1_sharp(n, spec.eps, spec.g)
    if f is Family.JANSON_SPENCER:
        return janson_spencer(n)
    raise UsageError(f"unknown family {f}")


# ---------------------------------------------------------- certificates


class Strategy(str, enum.Enum):
    LAYERED = "layered"
    HARMONIC = "harmonic"
    EXACT = "exact"


@dataclass(frozen=True)
class FlipCertificate:
    flips: IndexSet
    achieved_target: int
    strategy: Strategy
    details: dict = field(default_factory=dict, compare=False)

    @property
    def size(self) -> int:
        return len(self.flips)

    ok = True


@dataclass(frozen=True)
class CertificateFailure:
    reason: str
    stage: str
    strategy: Strategy

    ok = False


def _require(a: WeightSequence, keys: tuple[str, ...], family: str) -> dict:
    missing = [k for k in keys if k not in a.params]
    if missing:
        raise MisuseError(f"sequence lacks {family} parameters: {', '.join(missing)}")
    return a.params


def _sign(v: int) -> int:
    return 1 if v > 0 else -1


def _finish(a: WeightSequence, xi: SignVector, flips: list[int], strategy: Strategy,
            details: dict) -> FlipCertificate:
    cert = IndexSet(tuple(flips))
    if len(cert) != len(flips):
        raise AssertionError("certificate flipped a position twice")
    if evaluate(a, xi.flipped(cert)) != 0:
        raise AssertionError("certificate does not reach X = 0")
    return FlipCertificate(cert, 0, strategy, details)


class _CopyFinder:
    """Locates an unused copy of a value with a given sign inside one block."""

    def __init__(self, signs: np.ndarray, first: int, elements, copies: int):
        self.signs = signs
        self.first = first - 1
        self.slot = {b: i for i, b in enumerate(elements)}
        self.copies = copies
        self.used: set[int] = set()

    def has(self, b: int, sign: int) -> bool:
        start = self.first + self.slot[b] * self.copies
        return bool((self.signs[start:start + self.copies] == sign).any())

    def plan(self, elements, order: int, span: int, value: int, sign: int) -> tuple[int, ...] | None:
        """Fewest elements summing to ``value``, preferring the default
        representation and otherwise using only elements with a copy of
        the requested sign."""
        rep = representation(elements, span, value)
        if all(self.has(b, sign) for b in rep):
            return rep
        usable = [b for b in elements if self.has(b, sign)]
        try:
            rep = representation(usable, span, value)
        except UsageError:
            return None
        return rep if len(rep) <= order else None

    def take(self, b: int, sign: int) -> int | None:
        start = self.first + self.slot[b] * self.copies
        for off in np.flatnonzero(self.signs[start:start + self.copies] == sign).tolist():
            pos = start + off + 1
            if pos not in self.used:
                self.used.add(pos)
                return pos
        return None


def layered_certificate(a: WeightSequence, xi: SignVector) -> FlipCertificate | CertificateFailure:
    """Three-stage flip procedure: powers of two in K, then J, then I.

    Fails (without raising) when |X outside K| > 2n, when K cannot reach
    |X| <= 2m, or when no representation uses only elements that have a
    copy of the needed sign.
    """
    p = _require(a, ("basis_I", "basis_J", "I", "J", "K", "m", "u", "r", "h", "h_prime",
                     "copies_I", "copies_J", "range_J"), "layered")
    _check_lengths(a, xi)
    x = evaluate(a, xi)
    details = {"bound": p["h"] + p["h_prime"] + p["r"]}
    if x == 0:
        return FlipCertificate(IndexSet(), 0, Strategy.LAYERED, details)
    signs = xi.signs()
    m, u, r = p["m"], p["u"], p["r"]
    k_first = p["K"][0]
    k_signs = signs[k_first - 1:k_first - 1 + r].astype(np.int64)
    x_k = sum(int(s) * (m << j) for j, s in enumerate(k_signs))
    x_rest = x - x_k
    if abs(x_rest) > 2 * a.n:
        return CertificateFailure(f"|X outside K| = {abs(x_rest)} exceeds 2n", "K", Strategy.LAYERED)

    # K: sum of +-m 2^j is m times an odd t with |t| < 2^r
    top = (1 << r) - 1
    want = -x_rest
    lo = want // m
    lo = lo if lo % 2 else lo - 1
    t = min((lo, lo + 2), key=lambda c: (abs(want - c * m), c))
    t = max(-top, min(top, t))
    plus_bits = (t + top) // 2
    flips = []
    for j in range(r):
        new = 1 if (plus_bits >> j) & 1 else -1
        if new != k_signs[j]:
            flips.append(k_first + j)
    x = x_rest + t * m
    k_flips = len(flips)
    if abs(x) > 2 * m:
        return CertificateFailure(f"K cannot bring |X| below 2m (|X| = {abs(x)})", "K",
                                  Strategy.LAYERED)

    # J: remove ceil(|X/2| / u) * u using copies of u*b with the sign of X
    if x:
        q = -(-abs(x) // (2 * u))
        finder = _CopyFinder(signs, p["J"][0], p["basis_J"], p["copies_J"])
        s = _sign(x)
        rep = finder.plan(tuple(p["basis_J"]), p["h_prime"], p["range_J"], q, s)
        if rep is None:
            return CertificateFailure(f"no signed J copies represent {q} (sign {s:+d})", "J",
                                      Strategy.LAYERED)
        flips.extend(finder.take(b, s) for b in rep)
        x -= 2 * s * u * q
    j_flips = len(flips) - k_flips

    # I: |X/2| < u is a sum of at most h basis elements
    if x:
        y = abs(x) // 2
        finder = _CopyFinder(signs, p["I"][0], p["basis_I"], p["copies_I"])
        s = _sign(x)
        rep = finder.plan(tuple(p["basis_I"]), p["h"], u, y, s)
        if rep is None:
            return CertificateFailure(f"no signed I copies represent {y} (sign {s:+d})", "I",
                                      Strategy.LAYERED)
        flips.extend(finder.take(b, s) for b in rep)
    details.update(k_flips=k_flips, j_flips=j_flips, i_flips=len(flips) - k_flips - j_flips)
    return _finish(a, xi, flips, Strategy.LAYERED, details)


def harmonic_certificate(a: WeightSequence, xi: SignVector,
                         L: float = DEFAULT_L) -> FlipCertificate | CertificateFailure:
    """Greedy descent through the harmonic layers.

    Starting from |X| <= L sigma, repeatedly flip a copy of the largest value
    v <= |X|/2 whose sign matches X. Flips of the top value form the prefix;
    every later flip shrinks |X| roughly from sqrt(n)/i to sqrt(n)/i^2.
    """
    p = _require(a, ("harmonic_layers", "H", "S", "L"), "janson_spencer")
    _check_lengths(a, xi)
    x = evaluate(a, xi)
    sigma = math.sqrt(a.total_sum_of_squares())
    top_value = max(v for v, _ in p["harmonic_layers"])
    threshold = L * sigma
    lg = math.log2(a.n)
    details = {
        "threshold": threshold,
        "bound": _ceil(threshold / (2 * top_value)) + 2 * _ceil(math.log2(lg)) + 1,
    }
    if x == 0:
        return FlipCertificate(IndexSet(), 0, Strategy.HARMONIC, details)
    if abs(x) > threshold:
        return CertificateFailure(f"|X| = {abs(x)} exceeds L sigma = {threshold:.1f}", "prefix",
                                  Strategy.HARMONIC)
    signs = xi.signs()
    positions = dict(a.groups)
    values = sorted(positions, reverse=True)
    pools: dict[tuple[int, int], list[int]] = {}

    def pool(v: int, s: int) -> list[int]:
        key = (v, s)
        if key not in pools:
            pos = positions[v]
            hits = pos[signs[pos] == s]
            pools[key] = (hits[::-1] + 1).tolist()
        return pools[key]

    flips = []
    prefix = 0
    while x:
        s = _sign(x)
        half = abs(x) // 2
        v = next((w for w in values if w <= half), None)
        if v is None:
            return CertificateFailure(f"no value fits |X/2| = {half}", "cascade", Strategy.HARMONIC)
        stack = pool(v, s)
        if not stack:
            stage = "prefix" if v == top_value else "cascade"
            return CertificateFailure(f"no copy of {v} with sign {s:+d}", stage, Strategy.HARMONIC)
        flips.append(stack.pop())
        if v == top_value:
            prefix += 1
        x -= 2 * s * v
    details.update(prefix_flips=prefix, cascade_flips=len(flips) - prefix)
    return _finish(a, xi, flips, Strategy.HARMONIC, details)


def exact_certificate(a: WeightSequence, xi: SignVector) -> FlipCertificate | CertificateFailure:
    """Optimal flip set from the value DP; fails only when 0 is unreachable."""
    from .solver import resilience

    res = resilience(a, xi, 0)
    if res.infinite:
        return CertificateFailure("X = 0 is not achievable", "exact", Strategy.EXACT)
    return _finish(a, xi, list(res.witness), Strategy.EXACT, {"bound": res.value})


def certify(a: WeightSequence, xi: SignVector, **kwargs) -> FlipCertificate | CertificateFailure:
    """Pick the certificate matching the family that produced ``a``."""
    if a.name == "layered":
        return layered_certificate(a, xi)
    if a.name == "janson_spencer":
        return harmonic_certificate(a, xi, **kwargs)
    return exact_certificate(a, xi)
