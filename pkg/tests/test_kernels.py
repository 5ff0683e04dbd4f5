import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from perfectsim.alphabet import HistorySpec, is_admissible_history, random_admissible_history
from perfectsim.errors import ConfigError, InadmissibleHistory
from perfectsim.kernels import (AlternatingRenewalKernel, ChangepointBinaryKernel,
                                GeneralizedWalkKernel, MarkovKernel, PinnedPattern, ak_of,
                                eval_p, kernel_from_config)

from conftest import BUNDLED, changepoint, iid_kernel, renewal_03_06, renewal_hard, walk3

N_HIST = {"renewal": 10_000, "renewal_hard": 10_000, "changepoint": 10_000, "walk": 10_000}


def random_extension(kernel, word, rng, tries=200):
    """An admissible history whose first len(word) letters are ``word``."""
    G = kernel.alphabet.size
    for _ in range(tries):
        more = tuple(int(x) for x in rng.integers(0, G, size=int(rng.integers(0, 8))))
        tail = tuple(int(x) for x in rng.integers(0, G, size=int(rng.integers(1, 4))))
        h = HistorySpec(tuple(word) + more, tail)
        if is_admissible_history(h, kernel):
            return h
    raise AssertionError(f"no admissible extension of {word}")


# ---------------------------------------------------------------- examples

def test_changepoint_all_ones():
    k = changepoint()
    assert eval_p(k, 1, HistorySpec.constant(1)) == pytest.approx(k.p1, abs=1e-15)


def test_changepoint_all_zeros_is_a0():
    k = changepoint()
    p = eval_p(k, 1, HistorySpec.constant(0))
    assert p == pytest.approx(k.p1 * (1 - k.c * k.zeta_alpha), abs=1e-14)
    assert p == pytest.approx(ak_of(k, 1, ()), abs=1e-14)


@pytest.mark.parametrize("i", [0, 1])
@pytest.mark.parametrize("run", [1, 2, 5, 40])
def test_renewal_run_then_switch(i, run):
    k = AlternatingRenewalKernel.symmetric([0.3, 0.45, 0.5], 0.6)
    h = HistorySpec.constant(1 - i, recent=[i] * run)
    assert eval_p(k, i, h) == k.rates[i].value(run)
    hard = renewal_hard()
    assert eval_p(hard, i, h) == pytest.approx(0.5 * (1 - 1 / math.sqrt(run + 1)), abs=1e-15)


def test_eval_p_rejects_inadmissible():
    cyc = GeneralizedWalkKernel(3, [(0, 1), (1, 2), (2, 0)], modulation="none")
    with pytest.raises(InadmissibleHistory):
        eval_p(cyc, 0, HistorySpec.constant(0))


def test_changepoint_band_sum_cases():
    k = changepoint()
    # T(w) = 1 at the first one; T > k for all-zero words
    for depth in (1, 3, 10, 30):
        w = (1,) + (0,) * (depth - 1)
        assert sum(k.ak_vector(w)) == pytest.approx(1 - k.p1 * k.c * k.gamma_tail(depth), abs=1e-14)
        z = (0,) * depth
        assert sum(k.ak_vector(z)) == pytest.approx(1 - k.p1 * k.c * k.beta_tail(depth), abs=1e-14)


def test_changepoint_beta_tail_vs_direct_sum():
    k = changepoint()
    direct = math.fsum(i ** -1.5 for i in range(11, 2_000_001))
    # tail beyond 2e6 by the integral bound, well below the check
    assert k.beta_tail(10) == pytest.approx(direct, abs=2 * (2e6) ** -0.5)


def test_memoryless_renewal():
    k = AlternatingRenewalKernel.symmetric([], 0.7)
    for w in [(0,), (1,), (0, 1, 1), (1, 1, 1, 0)]:
        h = HistorySpec.constant(0, recent=w)
        assert ak_of(k, 0, w) == pytest.approx(eval_p(k, 0, h), abs=1e-15)
        assert sum(k.ak_vector(w)) == pytest.approx(1.0, abs=1e-15)
        assert k.a_global(len(w)) == pytest.approx(1.0, abs=1e-15)


def test_renewal_depth0_formula():
    minus = [0.3, 0.5]
    plus = [0.2, 0.65]
    k = kernel_from_config({"type": "alternating_renewal",
                            "minus": {"values": minus, "limit": 0.4},
                            "plus": {"values": plus, "limit": 0.55}})
    a0_minus = min(min(minus + [0.4]), 1 - max(plus + [0.55]))
    a0_plus = min(1 - max(minus + [0.4]), min(plus + [0.55]))
    assert k.ak_vector(()) == pytest.approx((a0_minus, a0_plus), abs=1e-15)


def test_renewal_pinned_sign_change():
    k = renewal_03_06()
    assert k.ak_pinned(PinnedPattern(2, {-1: 1, -2: 0})) == 1.0
    assert renewal_hard().ak_pinned(PinnedPattern(2, {-1: 1, -2: 0})) == 1.0


@pytest.mark.parametrize("name", sorted(BUNDLED))
@pytest.mark.parametrize("h", [0, 1, 2, 5, 12])
def test_pinned_without_pins_is_global_bound(name, h):
    kernel = BUNDLED[name]()
    assert kernel.ak_pinned(PinnedPattern(h, {})) == pytest.approx(kernel.a_global(h), abs=1e-14)


def test_changepoint_pinned_density():
    k = ChangepointBinaryKernel(p1=0.5, c=0.1, sigma=0.2, alpha=1.5)
    pins = {-1: 1, -2: 1}
    value = k.ak_pinned(PinnedPattern(10, pins))
    assert value == pytest.approx(1 - 0.05 * 2.0 ** -10, abs=1e-15)
    # brute force: every depth-12 word honouring the pins, closed by a constant
    # tail of zeros or ones, covers the infimum of both letters
    best = {}
    for free in itertools.product((0, 1), repeat=10):
        word = (1, 1) + free
        for tail in (0, 1):
            h = HistorySpec(word, (tail,))
            key = word[:10]
            p = eval_p(k, 1, h)
            lo = best.setdefault(key, [1.0, 1.0])
            lo[0] = min(lo[0], 1 - p)
            lo[1] = min(lo[1], p)
    brute = min(sum(v) for v in best.values())
    assert brute == pytest.approx(value, abs=1e-14)


def test_walk_epsilon_bound():
    k = walk3()
    assert k.epsilon == pytest.approx(0.2, abs=1e-12)
    rng = np.random.default_rng(3)
    for _ in range(500):
        h = random_admissible_history(k, rng)
        w = h.letter_at(1)
        for g in range(3):
            p = eval_p(k, g, h)
            if (w, g) in k.arcs:
                assert p >= k.epsilon - 1e-12
            else:
                assert p == 0.0


def test_walk_rejects_zero_arc_probability():
    with pytest.raises(ConfigError):
        GeneralizedWalkKernel(3, [(w, g) for w in range(3) for g in range(3) if g != w],
                              (0.3, 0.2))


def test_markov_kernel_bounds_exact():
    k = iid_kernel(0.3)
    assert k.memory == 1
    assert k.ak_vector((0,)) == pytest.approx((0.7, 0.3))
    assert sum(k.ak_vector(())) == pytest.approx(1.0)


# ------------------------------------------------------------- invariants

@pytest.mark.parametrize("name", sorted(BUNDLED))
def test_normalization(name):
    kernel = BUNDLED[name]()
    rng = np.random.default_rng(11)
    for _ in range(N_HIST[name]):
        h = random_admissible_history(kernel, rng)
        assert abs(sum(kernel.p_vector(h)) - 1.0) <= 1e-12


@pytest.mark.parametrize("name", sorted(BUNDLED))
def test_bound_validity(name):
    kernel = BUNDLED[name]()
    rng = np.random.default_rng(13)
    G = kernel.alphabet.size
    for _ in range(N_HIST[name]):
        h = random_admissible_history(kernel, rng)
        k = int(rng.integers(0, 10))
        w = h.prefix(k)
        g = int(rng.integers(0, G))
        ext = random_extension(kernel, w, rng)
        assert ak_of(kernel, g, w) <= eval_p(kernel, g, ext) + 1e-12


@pytest.mark.parametrize("name", sorted(BUNDLED))
def test_monotone_in_depth(name):
    kernel = BUNDLED[name]()
    rng = np.random.default_rng(17)
    for _ in range(200):
        h = random_admissible_history(kernel, rng)
        prev = None
        for k, vec in zip(range(25), kernel.ak_bands(h)):
            direct = kernel.ak_vector(h.prefix(k))
            assert np.allclose(vec, direct, atol=1e-13, rtol=0)
            if prev is not None:
                assert all(b >= a - 1e-14 for a, b in zip(prev, vec))
            prev = vec
        # converges to p along a finite-memory kernel, and stays below it otherwise
        p = kernel.p_vector(h)
        assert all(a <= q + 1e-12 for a, q in zip(prev, p))


@pytest.mark.parametrize("name", sorted(BUNDLED))
def test_pinned_dominance(name):
    kernel = BUNDLED[name]()
    rng = np.random.default_rng(19)
    for _ in range(300):
        depth = int(rng.integers(1, 15))
        h = random_admissible_history(kernel, rng, max_recent=depth)
        word = h.prefix(depth)
        chosen = rng.random(depth) < 0.3
        pins = {-(j + 1): word[j] for j in range(depth) if chosen[j]}
        value = kernel.ak_pinned(PinnedPattern(depth, pins))
        assert value >= kernel.a_global(depth) - 1e-14
        # the pinned bound is an infimum over words honouring the pins
        assert value <= sum(kernel.ak_vector(word)) + 1e-12


@pytest.mark.parametrize("name", sorted(BUNDLED))
def test_accumulators_match_pinned(name):
    kernel = BUNDLED[name]()
    rng = np.random.default_rng(23)
    for _ in range(20):
        # pins read off an admissible path, oldest first
        h0 = random_admissible_history(kernel, rng, max_recent=16)
        path = h0.prefix(16)[::-1]
        row = np.array([g if rng.random() < 0.3 else -1 for g in path])
        table = kernel.pinned_bounds_forward(row[None, :])[0]
        acc = kernel.pinned_accumulator()
        assert acc.value() == pytest.approx(table[0], abs=1e-14)
        for h in range(1, 16):
            # anchored at time h: position -j holds column h - j
            pattern = {-(h - t): int(row[t]) for t in range(h) if row[t] >= 0}
            expected = kernel.ak_pinned(PinnedPattern(h, pattern))
            assert table[h] == pytest.approx(expected, abs=1e-13)
        # the accumulator pushes from the most recent position backwards
        for j in range(15):
            g = int(row[15 - j])
            acc.push(None if g < 0 else g)
            pattern = {-(i + 1): int(row[15 - i]) for i in range(j + 1) if row[15 - i] >= 0}
            assert acc.value() == pytest.approx(kernel.ak_pinned(PinnedPattern(j + 1, pattern)),
                                                abs=1e-13)


def _ordered_pair(rng, depth=20):
    lo = rng.integers(0, 2, size=depth)
    hi = np.maximum(lo, rng.integers(0, 2, size=depth))
    tail_lo = int(rng.integers(0, 2))
    tail_hi = max(tail_lo, int(rng.integers(0, 2)))
    return (HistorySpec(tuple(int(x) for x in lo), (tail_lo,)),
            HistorySpec(tuple(int(x) for x in hi), (tail_hi,)))


def test_changepoint_monotone():
    k = changepoint()
    rng = np.random.default_rng(29)
    for _ in range(1000):
        lo, hi = _ordered_pair(rng)
        assert eval_p(k, 1, lo) <= eval_p(k, 1, hi) + 1e-15


@given(st.lists(st.integers(0, 1), max_size=30), st.lists(st.integers(0, 1), min_size=1, max_size=4))
def test_changepoint_stopping_time_matches_scan(recent, tail):
    k = changepoint()
    h = HistorySpec(tuple(recent), tuple(tail))
    T = k.stopping_time(h)
    ones = 0
    found = math.inf
    for n in range(1, 400):
        ones += h.letter_at(n)
        if ones / n >= k.sigma:
            found = n
            break
    if found < math.inf:
        assert T == found
    else:
        assert T == math.inf or T >= 400


def test_finite_memory_certification():
    k = AlternatingRenewalKernel.symmetric([0.3, 0.45], 0.6)
    assert k.memory == 3
    rng = np.random.default_rng(31)
    for _ in range(500):
        h = random_admissible_history(k, rng)
        word = h.prefix(k.memory)
        other = HistorySpec(word + tuple(int(x) for x in rng.integers(0, 2, 5)),
                            (int(rng.integers(0, 2)),))
        assert k.p_vector(h) == k.p_vector(other)
        assert k.ak_vector(word) == pytest.approx(k.p_vector(h), abs=1e-15)
    assert renewal_hard().memory is None


# ----------------------------------------------------------------- config

def test_config_round_trip():
    for name, make in BUNDLED.items():
        kernel = make()
        clone = kernel_from_config(kernel.config())
        rng = np.random.default_rng(37)
        for _ in range(50):
            h = random_admissible_history(kernel, rng)
            assert clone.p_vector(h) == kernel.p_vector(h)


@pytest.mark.parametrize("cfg", [
    {"type": "changepoint_binary", "p1": 0.5, "colour": 1},
    {"type": "alternating_renewal", "survival": {"values": [0.3], "limit": 0.6, "x": 1}},
    {"type": "nope"},
    {"type": "alternating_renewal", "survival": {"values": [0.0], "limit": 0.6}},
    {"type": "changepoint_binary", "p1": 0.2},
    {"type": "markov", "matrix": [[0.5, 0.6], [0.5, 0.5]]},
])
def test_config_rejects(cfg):
    with pytest.raises(ConfigError):
        kernel_from_config(cfg)


def test_unknown_field_code():
    with pytest.raises(ConfigError) as exc:
        kernel_from_config({"type": "markov", "matrix": [[1, 0], [0, 1]], "extra": 0})
    assert exc.value.code == "config.unknown_field"


def test_markov_kernel_type():
    k = MarkovKernel([[0.2, 0.8], [0.6, 0.4]], ["a", "b"])
    assert k.alphabet.labels == ("a", "b")
    assert eval_p(k, 1, HistorySpec.constant(0)) == pytest.approx(0.8)
