import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from lo_resilience.core import SignVector, WeightSequence, binomial_ball, evaluate
from lo_resilience.errors import ResourceLimitError
from lo_resilience.families import arithmetic, ones, planted_log, powers2, random_weights
from lo_resilience.hypercube import (fiber_distances, fiber_distances_bfs, hypercube_profile,
                                     qk_exact, support, vertex_sums)
from lo_resilience.solver import (Exceeded, FlipSearch, min_flip_counts, resilience,
                                  resilience_bounded, resilience_dp)


def sv(text):
    return SignVector.from_string(text)


# ---- examples


def test_dp_examples():
    assert resilience_dp(WeightSequence.of(1, 1, 1, 1), sv("++++"), 0).value == 2
    a = WeightSequence.of(1, 2, 4)
    assert resilience_dp(a, sv("+++"), 7).value == 0
    res = resilience_dp(a, sv("+++"), 5)
    assert res.value == 1 and res.witness.indices == (1,)
    assert resilience_dp(a, sv("+++"), 6).infinite
    assert str(resilience_dp(a, sv("+++"), 6)) == "inf"


def test_bounded_examples():
    assert resilience_bounded(WeightSequence.of(1, 1, 1, 1), sv("++++"), 0, 1) == Exceeded(1)
    assert str(Exceeded(1)) == ">1"
    assert resilience_bounded(WeightSequence.of(1, 2, 4), sv("+++"), 5, 3).value == 1
    a = WeightSequence.of(3, -7, 2)
    xi = sv("+-+")
    assert resilience_bounded(a, xi, evaluate(a, xi), 0).value == 0


def test_profile_examples():
    assert hypercube_profile(WeightSequence.of(1, 1), 0).counts == {0: 2, 1: 2}
    assert hypercube_profile(WeightSequence.of(1), 1).counts == {0: 1, 1: 1}
    prof = hypercube_profile(powers2(4), 5)
    assert prof.counts == {d: math.comb(4, d) for d in range(5)}
    empty = hypercube_profile(WeightSequence.of(1, 2, 4), 6)
    assert not empty.achievable and empty.total == 0


def test_qk_examples():
    res = qk_exact(WeightSequence.of(1, 1, 1, 1), 0)
    assert res.value == Fraction(6, 16) and res.argmax == 0
    assert qk_exact(WeightSequence.of(1, 2, 4), 1).value == Fraction(4, 8)
    for a in (WeightSequence.of(3, 1, 4), random_weights(6, 1)):
        assert qk_exact(a, a.n).value == 1


def test_qk_reports_smallest_maximizer_and_ties():
    res = qk_exact(WeightSequence.of(1, 2, 4), 1)
    assert res.argmax == -7 and res.ties == 8


def test_resource_limit():
    with pytest.raises(ResourceLimitError):
        hypercube_profile(ones(27), 1)
    with pytest.raises(ResourceLimitError):
        hypercube_profile(ones(12), 0, limit=10)


def test_dp_refuses_oversized_tables():
    a = WeightSequence((10**12, 1, 1))
    with pytest.raises(ResourceLimitError):
        resilience_dp(a, sv("+++"), 0)
    # the dispatcher falls back to the bounded search
    assert resilience(a, sv("+-+"), 10**12 + 2).value == 1


# ---- oracles


small_weights = st.lists(st.integers(-8, 8).filter(bool), min_size=1, max_size=7)


@given(small_weights, st.data())
def test_dp_and_search_match_brute_force(ws, data):
    a = WeightSequence(tuple(ws))
    bits = data.draw(st.integers(0, (1 << a.n) - 1))
    xi = SignVector(bits, a.n)
    x = data.draw(st.integers(-a.abs_sum - 2, a.abs_sum + 2))
    want, _ = oracles.brute_resilience(ws, xi.signs().tolist(), x)
    dp = resilience_dp(a, xi, x)
    bounded = resilience_bounded(a, xi, x, a.n)
    assert dp.value == want
    if want == math.inf:
        assert isinstance(bounded, Exceeded)
    else:
        assert bounded.value == want


@given(small_weights, st.data())
def test_witnesses_are_valid(ws, data):
    a = WeightSequence(tuple(ws))
    xi = SignVector(data.draw(st.integers(0, (1 << a.n) - 1)), a.n)
    x = evaluate(a, SignVector(data.draw(st.integers(0, (1 << a.n) - 1)), a.n))
    for res in (resilience_dp(a, xi, x), resilience_bounded(a, xi, x, a.n)):
        assert len(res.witness) == res.value
        assert evaluate(a, xi.flipped(res.witness)) == x


@given(small_weights, st.data())
def test_dp_witness_is_lexicographically_first(ws, data):
    a = WeightSequence(tuple(ws))
    xi = SignVector(data.draw(st.integers(0, (1 << a.n) - 1)), a.n)
    x = evaluate(a, SignVector(data.draw(st.integers(0, (1 << a.n) - 1)), a.n))
    res = resilience_dp(a, xi, x)
    _, first = oracles.brute_resilience(ws, xi.signs().tolist(), x)
    assert res.witness.indices == first


@given(small_weights, st.data(), st.integers(0, 7))
def test_bounded_respects_kmax(ws, data, kmax):
    a = WeightSequence(tuple(ws))
    xi = SignVector(data.draw(st.integers(0, (1 << a.n) - 1)), a.n)
    x = evaluate(a, SignVector(data.draw(st.integers(0, (1 << a.n) - 1)), a.n))
    exact = resilience_dp(a, xi, x).value
    got = resilience_bounded(a, xi, x, kmax)
    if exact <= kmax:
        assert got.value == exact
    else:
        assert got == Exceeded(min(kmax, a.n))


@given(small_weights)
def test_profile_matches_brute_force(ws):
    a = WeightSequence(tuple(ws))
    for x in set(oracles.distribution(ws)):
        assert hypercube_profile(a, x).counts == oracles.brute_profile(ws, x)


@given(st.lists(st.integers(-6, 6).filter(bool), min_size=1, max_size=6), st.integers(0, 3))
def test_qk_matches_brute_force(ws, k):
    a = WeightSequence(tuple(ws))
    assert qk_exact(a, k).value == oracles.brute_qk(ws, k)


@given(st.lists(st.integers(-9, 9).filter(bool), min_size=1, max_size=14))
def test_vertex_sums_follow_the_bit_convention(ws):
    a = WeightSequence(tuple(ws))
    sums = vertex_sums(a)
    for v in (0, len(sums) - 1, len(sums) // 3):
        assert sums[v] == evaluate(a, SignVector(v, a.n))


@given(st.lists(st.integers(-9, 9).filter(bool), min_size=1, max_size=12), st.data())
def test_distance_sweep_matches_bfs(ws, data):
    a = WeightSequence(tuple(ws))
    sums = vertex_sums(a)
    x = int(data.draw(st.sampled_from(sorted(set(sums.tolist())))))
    assert np.array_equal(fiber_distances(sums, x, a.n), fiber_distances_bfs(sums, x, a.n))


def test_blocked_and_threaded_gray_walk(monkeypatch):
    import lo_resilience.hypercube as hc

    a = random_weights(14, 5)
    reference = np.array([evaluate(a, SignVector(v, 14)) for v in range(1 << 14)])
    monkeypatch.setattr(hc, "_GRAY_BLOCK", 1 << 9)
    assert np.array_equal(hc.vertex_sums(a), reference)
    assert np.array_equal(hc.vertex_sums(a, threads=3), reference)


def test_threaded_qk_is_identical():
    a = random_weights(12, 9)
    for k in range(3):
        assert qk_exact(a, k, threads=1) == qk_exact(a, k, threads=3)


def test_all_targets_matches_value_dp():
    rng = np.random.default_rng(4)
    for _ in range(30):
        vals = [int(v) for v in rng.integers(-9, 10, size=9) if v]
        row, off = FlipSearch.from_signed_values(vals, len(vals)).all_targets()
        ref, span = min_flip_counts(vals)
        assert off == span
        assert np.array_equal(np.minimum(row, 30000), np.minimum(ref, 30000))


def test_search_from_counts_needs_no_positions():
    fs = FlipSearch.from_counts([(1, 3), (-1, 1), (5, 1)], kmax=3)
    assert fs.search(7)[0] == 3
    assert fs.search(6)[0] == 2
    assert fs.search(9) is None


def test_large_n_sorted_token_path():
    rng = np.random.default_rng(8)
    a = WeightSequence(tuple(int(v) for v in rng.integers(1, 50, size=6000)))
    xi = SignVector.random(a.n, rng)
    x = evaluate(a, xi.flipped([10, 20, 4000]))
    res = resilience_bounded(a, xi, x, 3)
    assert res.value <= 3 and evaluate(a, xi.flipped(res.witness)) == x


# ---- invariants over the test families


def families(n):
    return [ones(n), arithmetic(n), powers2(n), planted_log(n), random_weights(n, n)]


@pytest.mark.parametrize("n", range(1, 11))
def test_zero_iff_on_fiber_and_monotone(n):
    for a in families(n):
        sums = vertex_sums(a)
        atoms, sizes = support(sums)
        prev = None
        for k in range(n + 1):
            q = qk_exact(a, k, sums=sums).value
            assert prev is None or q >= prev
            prev = q
        for x, size in zip(atoms.tolist(), sizes.tolist()):
            dist = fiber_distances(sums, x, n)
            assert np.array_equal(dist == 0, sums == x)
            prof = hypercube_profile(a, x, sums=sums)
            for k in range(n + 1):
                assert prof.at_most(k) <= size * binomial_ball(n, k)


@pytest.mark.parametrize("n", range(1, 13))
def test_binomial_law_for_powers_of_two(n):
    a = powers2(n)
    for x in (-(2**n - 1), 1 - 2**n + 2, 2**n - 1):
        if hypercube_profile(a, x).achievable:
            assert hypercube_profile(a, x).as_list() == [math.comb(n, d) for d in range(n + 1)]
