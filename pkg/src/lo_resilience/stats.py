"""Monte Carlo estimates of Pr[R_x <= k], scaling sweeps and normal approximation checks.

Randomness is counter based: block b of a run draws from Philox keyed by the
run seed with b in the high counter word, so the samples do not depend on how
blocks are spread over threads.

Uniform sign vectors are sampled through the number of + signs among the
positions sharing each weight value. Equal-weight positions are
exchangeable and R_x depends on xi only through those counts, so this has
the same law as drawing every sign.
"""
from __future__ import annotations

import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from statistics import NormalDist
from typing import Callable, Sequence

import numpy as np
from scipy import stats as sps

from .core import SignVector, WeightSequence, binomial_ball
from .errors import ConstructionError, UsageError
from .families import CertificateFailure, FamilySpec, certify, generate
from .hypercube import EXHAUSTIVE_LIMIT, hypercube_profile, support, vertex_sums
from .solver import FlipSearch

SAMPLE_BLOCK = 4096
Z95 = NormalDist().inv_cdf(0.975)
MASK64 = (1 << 64) - 1


class FitError(UsageError):
    """Too few usable rows for a log-log fit."""


def block_generator(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed & MASK64, counter=[0, 0, 0, block]))


def derive_seed(seed: int, *labels: int) -> int:
    state = np.random.SeedSequence([seed & MASK64, *labels]).generate_state(2, np.uint64)
    return int(state[0]) | int(state[1]) << 64


def _blocks(samples: int) -> list[tuple[int, int]]:
    return [(b, min(SAMPLE_BLOCK, samples - b * SAMPLE_BLOCK))
            for b in range(-(-samples // SAMPLE_BLOCK))]


def _map_blocks(fn: Callable, blocks: list, threads: int) -> list:
    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(fn, blocks))
    return [fn(b) for b in blocks]


def wilson_interval(hits: int, samples: int, z: float = Z95) -> tuple[float, float]:
    p = hits / samples
    denom = 1 + z * z / samples
    centre = (p + z * z / (2 * samples)) / denom
    half = z * math.sqrt(p * (1 - p) / samples + z * z / (4 * samples * samples)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def normal_cdf(t: float) -> float:
    return 0.5 * math.erfc(-t / math.sqrt(2))


def _frac_text(f: Fraction) -> str:
    return f"{f.numerator}/{f.denominator}"


@dataclass(frozen=True)
class EstimateReport:
    estimate: Fraction
    ci_low: Fraction
    ci_high: Fraction
    samples: int
    hits: int
    seed: int | None
    k: int
    x: int
    method: str

    def to_dict(self) -> dict:
        return {
            "estimate": float(self.estimate), "estimate_exact": _frac_text(self.estimate),
            "ci_low": float(self.ci_low), "ci_high": float(self.ci_high),
            "samples": self.samples, "hits": self.hits, "seed": self.seed,
            "k": self.k, "x": self.x, "method": self.method,
        }


# -------------------------------------------------------------- sampling


class _GroupSampler:
    """Draws per-value + counts and decides R_x <= k from them."""

    def __init__(self, a: WeightSequence, x: int, k: int):
        self.values = [int(w) for w, _ in a.groups]
        self.counts = np.array([len(p) for _, p in a.groups], dtype=np.int64)
        self.x, self.k = x, k
        self.reach = 2 * k * max(abs(w) for w in self.values)
        self.exact = a.fits_int64
        self.w = np.array(self.values, dtype=np.int64 if self.exact else object)
        self._memo: dict[tuple, bool] = {}

    def sums(self, plus: np.ndarray) -> np.ndarray:
        signed = 2 * plus - self.counts
        if self.exact:
            return signed @ self.w
        return np.array([sum(int(s) * v for s, v in zip(row, self.values)) for row in signed],
                        dtype=object)

    def within(self, plus_row: np.ndarray, total: int) -> bool:
        diff = total - self.x
        if diff == 0:
            return True
        if diff % 2 or abs(diff) > self.reach or self.k == 0:
            return False
        key = tuple(plus_row.tolist())
        hit = self._memo.get(key)
        if hit is None:
            pairs = []
            for v, c, p in zip(self.values, self.counts.tolist(), key):
                if p:
                    pairs.append((v, p))
                if c - p:
                    pairs.append((-v, c - p))
            hit = FlipSearch.from_counts(pairs, self.k).search(diff // 2) is not None
            if len(self._memo) < 1 << 16:
                self._memo[key] = hit
        return hit

    def block_hits(self, seed: int, block: int, size: int) -> int:
        rng = block_generator(seed, block)
        plus = rng.binomial(self.counts, 0.5, size=(size, self.counts.size))
        totals = self.sums(plus)
        diff = totals - self.x
        if self.k == 0:
            return int(np.count_nonzero(diff == 0))
        near = np.flatnonzero(abs(diff) <= self.reach)
        return sum(self.within(plus[i], int(totals[i])) for i in near.tolist())


def estimate_resilience_prob(a: WeightSequence, x: int, k: int, samples: int, seed: int,
                             threads: int = 1) -> EstimateReport:
    """Monte Carlo Pr[R_x <= k] with a 95% Wilson interval."""
    if samples < 1:
        raise UsageError("samples must be >= 1")
    if k < 0:
        raise UsageError("k must be >= 0")

    def run(block):
        b, size = block
        return _GroupSampler(a, x, k).block_hits(seed, b, size)

    hits = sum(_map_blocks(run, _blocks(samples), threads))
    est = Fraction(hits, samples)
    lo, hi = wilson_interval(hits, samples)
    low = min(Fraction(lo), est)
    high = max(Fraction(hi), est)
    return EstimateReport(est, low, high, samples, hits, seed, k, x, "monte_carlo")


def exact_resilience_prob(a: WeightSequence, x: int, k: int, limit: int = EXHAUSTIVE_LIMIT,
                          threads: int = 1) -> EstimateReport:
    prof = hypercube_profile(a, x, limit, threads)
    hits = prof.at_most(k)
    est = Fraction(hits, 2**a.n)
    return EstimateReport(est, est, est, 2**a.n, hits, None, k, x, "exact_exhaustive")


# ----------------------------------------------------------------- sweep


@dataclass(frozen=True)
class SweepRow:
    n: int
    estimate: Fraction | None
    ci_low: Fraction | None
    ci_high: Fraction | None
    samples: int
    wall_time: float
    error: str | None = None

    def to_dict(self, timing: bool = True) -> dict:
        out = {"n": self.n, "samples": self.samples}
        if self.error is None:
            out.update(estimate=float(self.estimate), estimate_exact=_frac_text(self.estimate),
                       ci_low=float(self.ci_low), ci_high=float(self.ci_high))
        else:
            out["error"] = self.error
        if timing:
            out["wall_time"] = self.wall_time
        return out


@dataclass(frozen=True)
class SweepResult:
    rows: list[SweepRow]
    fitted_slope: float
    fitted_intercept: float
    slope_stderr: float
    warnings: list[str] = field(default_factory=list)

    def to_dict(self, timing: bool = True) -> dict:
        return {
            "rows": [r.to_dict(timing) for r in self.rows],
            "fitted_slope": self.fitted_slope, "fitted_intercept": self.fitted_intercept,
            "slope_stderr": self.slope_stderr, "warnings": list(self.warnings),
        }


def fit_loglog(ns: Sequence[int], estimates: Sequence[float]) -> tuple[float, float, float]:
    """Least squares of log(estimate) on log(n), natural logs."""
    if len(ns) < 2:
        raise FitError("a log-log fit needs at least two points")
    res = sps.linregress(np.log(np.asarray(ns, dtype=float)),
                         np.log(np.asarray(estimates, dtype=float)))
    stderr = float(res.stderr) if len(ns) > 2 else float("nan")
    return float(res.slope), float(res.intercept), stderr


def parse_grid(text: str) -> list[int]:
    """``start:stop:xF`` (geometric), ``start:stop:+S`` (arithmetic) or a comma list."""
    text = text.strip()
    if ":" not in text:
        return [int(v) for v in text.split(",") if v.strip()]
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"grid {text!r} is not start:stop:step")
    start, stop, step = int(parts[0]), int(parts[1]), parts[2]
    out = []
    if step.startswith("x"):
        factor = int(step[1:])
        if factor < 2:
            raise UsageError("geometric grid factor must be >= 2")
        v = start
        while v <= stop:
            out.append(v)
            v *= factor
    else:
        inc = int(step.lstrip("+"))
        if inc < 1:
            raise UsageError("grid step must be >= 1")
        out = list(range(start, stop + 1, inc))
    return out


def sweep(spec: FamilySpec, k: int, n_grid: Sequence[int], samples: int, seed: int,
          x: int = 0, threads: int = 1) -> SweepResult:
    """Estimate Pr[R_x <= k] for each n and fit the log-log slope."""
    grid = list(n_grid)
    if len(grid) < 4:
        raise FitError(f"sweep needs at least 4 grid points, got {len(grid)}")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise UsageError("n grid must be strictly increasing")
    rows = []
    notes = []
    for n in grid:
        start = time.perf_counter()
        try:
            a = generate(spec.with_n(n))
        except ConstructionError as exc:
            rows.append(SweepRow(n, None, None, None, 0, 0.0, str(exc)))
            notes.append(f"n={n}: {exc}")
            continue
        rep = estimate_resilience_prob(a, x, k, samples, derive_seed(seed, n), threads)
        rows.append(SweepRow(n, rep.estimate, rep.ci_low, rep.ci_high, samples,
                             time.perf_counter() - start))
    usable = [r for r in rows if r.error is None and r.estimate > 0]
    zeros = [r.n for r in rows if r.error is None and r.estimate == 0]
    if zeros:
        msg = f"rows with zero estimate excluded from the fit: n = {zeros}"
        notes.append(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    if len(usable) < 4:
        raise FitError(f"only {len(usable)} usable rows; the fit needs 4")
    slope, icept, err = fit_loglog([r.n for r in usable], [float(r.estimate) for r in usable])
    return SweepResult(rows, slope, icept, err, notes)


# --------------------------------------------------- normal approximation


@dataclass(frozen=True)
class BerryEsseenStats:
    sigma_squared: int
    rho: int
    kolmogorov_distance: float
    mode: str

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma_squared)

    @property
    def ratio(self) -> float:
        return self.kolmogorov_distance / (self.rho / self.sigma**3)

    def to_dict(self) -> dict:
        return {"sigma": self.sigma, "sigma_squared": self.sigma_squared, "rho": self.rho,
                "kolmogorov_distance": self.kolmogorov_distance, "ratio": self.ratio,
                "mode": self.mode}


def kolmogorov_distance(atoms: np.ndarray, probs: np.ndarray, sigma: float) -> float:
    """sup_t |F(t) - Phi(t / sigma)| for a discrete law given by sorted atoms."""
    cdf = np.cumsum(probs)
    before = cdf - probs
    phi = np.array([normal_cdf(float(t) / sigma) for t in atoms])
    return float(max(np.abs(cdf - phi).max(), np.abs(before - phi).max()))


def _sample_sums(a: WeightSequence, samples: int, seed: int, threads: int) -> np.ndarray:
    sampler = _GroupSampler(a, 0, 0)

    def run(block):
        b, size = block
        rng = block_generator(seed, b)
        return sampler.sums(rng.binomial(sampler.counts, 0.5, size=(size, sampler.counts.size)))

    return np.concatenate(_map_blocks(run, _blocks(samples), threads))


def _law(a: WeightSequence, mode: str, samples: int | None, seed: int | None,
         limit: int, threads: int) -> tuple[np.ndarray, np.ndarray, int]:
    if mode == "exhaustive":
        atoms, counts = support(vertex_sums(a, limit, threads))
        return atoms, counts, 2**a.n
    if mode == "monte_carlo":
        if samples is None or seed is None or samples < 1:
            raise UsageError("monte_carlo mode needs samples >= 1 and a seed")
        atoms, counts = np.unique(_sample_sums(a, samples, seed, threads), return_counts=True)
        return atoms, counts, samples
    raise UsageError(f"unknown mode {mode!r}")


def berry_esseen_check(a: WeightSequence, mode: str = "exhaustive", samples: int | None = None,
                       seed: int | None = None, limit: int = EXHAUSTIVE_LIMIT,
                       threads: int = 1) -> BerryEsseenStats:
    atoms, counts, total = _law(a, mode, samples, seed, limit, threads)
    var = a.total_sum_of_squares()
    rho = sum(abs(w) ** 3 for w in a.weights)
    dist = kolmogorov_distance(atoms.astype(float), counts / total, math.sqrt(var))
    return BerryEsseenStats(var, rho, dist, mode)


@dataclass(frozen=True)
class AtomProbability:
    value: Fraction
    atom: int
    mode: str
    samples: int

    def to_dict(self) -> dict:
        return {"value": float(self.value), "value_exact": _frac_text(self.value),
                "atom": self.atom, "mode": self.mode, "samples": self.samples}


def max_atom_probability(a: WeightSequence, mode: str = "exhaustive", samples: int | None = None,
                         seed: int | None = None, limit: int = EXHAUSTIVE_LIMIT,
                         threads: int = 1) -> AtomProbability:
    """max_x Pr[X = x]; the smallest maximizing atom is reported."""
    atoms, counts, total = _law(a, mode, samples, seed, limit, threads)
    i = int(np.argmax(counts))
    return AtomProbability(Fraction(int(counts[i]), total), int(atoms[i]), mode, total)


def union_bound(a: WeightSequence, k: int, limit: int = EXHAUSTIVE_LIMIT) -> Fraction:
    """(number of flip sets of size <= k) times the largest atom probability."""
    return binomial_ball(a.n, k) * max_atom_probability(a, limit=limit).value


# ---------------------------------------------------- certificate batches


@dataclass(frozen=True)
class CertificateReport:
    samples: int
    successes: int
    max_size: int
    bound: int | None
    within_bound: int
    failures: dict[str, int]
    seed: int

    @property
    def rate(self) -> float:
        return self.successes / self.samples

    def to_dict(self) -> dict:
        return {"samples": self.samples, "successes": self.successes, "rate": self.rate,
                "max_size": self.max_size, "bound": self.bound,
                "within_bound": self.within_bound, "failures": dict(sorted(self.failures.items())),
                "seed": self.seed}


def sample_sign_vector(n: int, seed: int, index: int) -> SignVector:
    return SignVector.random(n, block_generator(seed, index))


def certificate_success(a: WeightSequence, samples: int, seed: int, threads: int = 1,
                        **kwargs) -> CertificateReport:
    """Run the family's certificate on ``samples`` seeded uniform sign vectors.

    Sign vector i comes from the generator keyed by (seed, i).
    """
    if samples < 1:
        raise UsageError("samples must be >= 1")

    def run(i: int):
        return certify(a, sample_sign_vector(a.n, seed, i), **kwargs)

    results = _map_blocks(run, list(range(samples)), threads)
    failures: dict[str, int] = {}
    sizes = []
    bound = None
    within = 0
    for res in results:
        if isinstance(res, CertificateFailure):
            failures[res.stage] = failures.get(res.stage, 0) + 1
            continue
        sizes.append(res.size)
        bound = res.details.get("bound", bound)
        within += bound is None or res.size <= bound
    return CertificateReport(samples, len(sizes), max(sizes, default=0), bound, within,
                             failures, seed)

