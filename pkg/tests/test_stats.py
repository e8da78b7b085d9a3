import math
import warnings
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lo_resilience.core import WeightSequence
from lo_resilience.errors import UsageError
from lo_resilience.families import FamilySpec, arithmetic, ones, random_weights
from lo_resilience.stats import (FitError, berry_esseen_check, certificate_success, derive_seed,
                                 estimate_resilience_prob, exact_resilience_prob, fit_loglog,
                                 kolmogorov_distance, max_atom_probability, normal_cdf,
                                 parse_grid, sweep, wilson_interval)


def test_estimate_examples():
    a = ones(4)
    rep = estimate_resilience_prob(a, 0, 0, 100000, seed=1)
    assert rep.ci_low <= Fraction(6, 16) <= rep.ci_high
    assert estimate_resilience_prob(a, 0, 4, 1000, seed=1).estimate == 1
    one = estimate_resilience_prob(a, 0, 4, 1, seed=3)
    assert one.samples == 1 and one.estimate == 1


def test_estimate_validation():
    with pytest.raises(UsageError):
        estimate_resilience_prob(ones(4), 0, 0, 0, seed=1)
    with pytest.raises(UsageError):
        estimate_resilience_prob(ones(4), 0, -1, 10, seed=1)


def test_estimate_is_deterministic_and_thread_invariant():
    a = random_weights(40, 3)
    runs = [estimate_resilience_prob(a, 0, 2, 20000, seed=99, threads=t) for t in (1, 1, 3)]
    assert runs[0] == runs[1] == runs[2]


def test_exact_matches_profile():
    rep = exact_resilience_prob(ones(4), 0, 0)
    assert rep.estimate == Fraction(6, 16) and rep.method == "exact_exhaustive"
    assert exact_resilience_prob(ones(4), 0, 2).estimate == 1


def test_calibration_of_the_interval():
    rng = np.random.default_rng(11)
    inside = 0
    trials = 100
    for t in range(trials):
        n = int(rng.integers(3, 15))
        a = random_weights(n, 1000 + t, bound=4)
        k = int(rng.integers(0, 3))
        exact = exact_resilience_prob(a, 0, k).estimate
        rep = estimate_resilience_prob(a, 0, k, 2000, seed=t)
        inside += rep.ci_low <= exact <= rep.ci_high
    assert inside >= 90


@given(st.integers(1, 10**6), st.data())
def test_wilson_interval_properties(samples, data):
    hits = data.draw(st.integers(0, samples))
    lo, hi = wilson_interval(hits, samples)
    assert 0 <= lo <= hi <= 1
    # the interval always contains a point near the estimate
    p = hits / samples
    assert lo <= p + 1e-12 and hi >= p - 1e-12


def test_wilson_interval_narrows():
    widths = [np.subtract(*wilson_interval(n // 3, n)[::-1]) for n in (30, 300, 3000, 30000)]
    assert all(a > b for a, b in zip(widths, widths[1:]))


def test_derive_seed_is_stable_and_distinct():
    assert derive_seed(5, 100) == derive_seed(5, 100)
    assert len({derive_seed(5, n) for n in range(50)}) == 50


# ---- normal approximation and atoms


def test_normal_cdf():
    assert normal_cdf(0) == 0.5
    assert math.isclose(normal_cdf(1.96), 0.975, abs_tol=1e-4)


def test_berry_esseen_examples():
    one = berry_esseen_check(WeightSequence.of(1))
    assert math.isclose(one.kolmogorov_distance, 0.3413, abs_tol=1e-4)
    assert berry_esseen_check(ones(20)).kolmogorov_distance < 0.1


def test_berry_esseen_scale_invariance():
    a = random_weights(10, 7)
    base = berry_esseen_check(a)
    scaled = berry_esseen_check(a.scaled(3))
    assert math.isclose(base.kolmogorov_distance, scaled.kolmogorov_distance, rel_tol=1e-9)
    assert math.isclose(base.ratio, scaled.ratio, rel_tol=1e-9)


def test_berry_esseen_decreases_with_n():
    d = [berry_esseen_check(ones(n)).kolmogorov_distance for n in (4, 8, 16, 24)]
    assert all(a > b for a, b in zip(d, d[1:]))


def test_berry_esseen_monte_carlo_is_close():
    a = ones(16)
    mc = berry_esseen_check(a, "monte_carlo", samples=200000, seed=4)
    assert abs(mc.kolmogorov_distance - berry_esseen_check(a).kolmogorov_distance) < 0.01
    with pytest.raises(UsageError):
        berry_esseen_check(a, "monte_carlo")


def test_kolmogorov_distance_checks_both_sides_of_atoms():
    # a single atom at 0 sits half a unit away on either side
    assert kolmogorov_distance(np.array([0.0]), np.array([1.0]), 1.0) == 0.5


def test_max_atom_examples():
    assert max_atom_probability(ones(4)).value == Fraction(6, 16)
    top = max_atom_probability(WeightSequence.of(1, 2, 4))
    assert top.value == Fraction(1, 8) and top.atom == -7


def test_max_atom_scale_invariance():
    a = random_weights(12, 2)
    assert max_atom_probability(a).value == max_atom_probability(a.scaled(-5)).value


def test_distinct_weights_beat_the_erdos_rate():
    def ratio(n):
        return max_atom_probability(arithmetic(n)).value / Fraction(math.comb(n, n // 2), 2**n)

    assert ratio(20) < 2 * ratio(10)
    assert ratio(20) < ratio(10)


# ---- sweeps


def test_sweep_needs_four_points():
    with pytest.raises(FitError):
        sweep(FamilySpec("ones", 1), 0, [64], 100, seed=1)
    with pytest.raises(FitError):
        fit_loglog([10], [0.5])
    assert issubclass(FitError, UsageError)


def test_sweep_excludes_zero_rows_with_a_warning():
    # odd n makes every all-ones sum odd, so Pr[R_0 <= 0] = 0 there
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        with pytest.raises(FitError):
            sweep(FamilySpec("ones", 1), 0, [9, 17, 33, 65, 128], 200, seed=1)
    assert any("zero estimate" in str(w.message) for w in caught)


def test_sweep_is_reproducible_and_fits_a_slope():
    spec = FamilySpec("ones", 1)
    first = sweep(spec, 0, [64, 128, 256, 512, 1024], 20000, seed=5)
    second = sweep(spec, 0, [64, 128, 256, 512, 1024], 20000, seed=5, threads=2)
    assert first.to_dict(timing=False) == second.to_dict(timing=False)
    assert -0.6 < first.fitted_slope < -0.4


def test_parse_grid():
    assert parse_grid("4:64:x2") == [4, 8, 16, 32, 64]
    assert parse_grid("10:30:+10") == [10, 20, 30]
    assert parse_grid("5,7,9") == [5, 7, 9]
    for bad in ("1:2", "4:64:x1", "4:64:+0"):
        with pytest.raises(UsageError):
            parse_grid(bad)


# ---- certificate batches


def test_certificate_batch_for_plain_sequences_uses_the_exact_solver():
    rep = certificate_success(ones(10), 50, seed=3)
    assert rep.successes + sum(rep.failures.values()) == 50
    assert rep.max_size <= 5
    threaded = certificate_success(ones(10), 50, seed=3, threads=3)
    assert threaded.to_dict() == rep.to_dict()


@settings(max_examples=20)
@given(st.integers(2, 10), st.integers(0, 3))
def test_estimate_tracks_exact_value(n, k):
    a = random_weights(n, n + 17 * k, bound=3)
    exact = exact_resilience_prob(a, 0, k).estimate
    rep = estimate_resilience_prob(a, 0, k, 4000, seed=n * 31 + k)
    assert abs(float(rep.estimate) - float(exact)) < 0.06
