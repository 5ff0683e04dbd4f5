import json

import numpy as np
import pytest

from perfectsim.alphabet import HistorySpec, random_admissible_history
from perfectsim.coupling import AkSequence, eval_f
from perfectsim.depth import Sampler
from perfectsim.errors import DegenerateRegime
from perfectsim.hybrid import (MarkovRestriction, ModifiedCoupling, build_markov_restriction,
                               detect_coalescence, graph_conditions, graph_from_arcs, tau0_hybrid)
from perfectsim.kernels import GeneralizedWalkKernel, MarkovKernel
from perfectsim.randsource import PerturbedSource, UniformSource

from conftest import renewal_03_06, walk3


def random_markov(rng, G):
    M = rng.random((G, G)) + 0.05
    return MarkovKernel((M / M.sum(axis=1, keepdims=True)).tolist())


# ------------------------------------------------------------ restriction

def test_markov_kernel_restriction_is_the_kernel():
    k = MarkovKernel([[0.2, 0.5, 0.3], [0.6, 0.1, 0.3], [0.3, 0.3, 0.4]])
    r = build_markov_restriction(k)
    assert r.a1 == pytest.approx(1.0)
    assert r.M == pytest.approx(np.array([[0.2, 0.5, 0.3], [0.6, 0.1, 0.3], [0.3, 0.3, 0.4]]),
                                abs=1e-12)
    for u in np.linspace(0, 0.999, 50):
        for w in range(3):
            assert r.tilde_f(float(u), w) == eval_f(k, float(u), HistorySpec.constant(w))[0]


def test_row_sums_random_kernels():
    rng = np.random.default_rng(73)
    for _ in range(10):
        k = random_markov(rng, int(rng.integers(2, 5)))
        for cp in (MarkovRestriction(k), ModifiedCoupling(k)):
            assert np.abs(cp.M.sum(axis=1) - 1).max() <= 1e-12
    for cp in (MarkovRestriction(walk3()), ModifiedCoupling(walk3())):
        assert np.abs(cp.M.sum(axis=1) - 1).max() <= 1e-12


def test_walk_restriction_respects_arcs():
    k = walk3()
    r = MarkovRestriction(k)
    for w in range(3):
        for g in range(3):
            if r.M[w, g] > 0:
                assert (w, g) in k.arcs


def test_tilde_f_independent_of_deeper_past():
    k = walk3()
    r = MarkovRestriction(k)
    rng = np.random.default_rng(79)
    for w in range(3):
        hs = []
        while len(hs) < 20:
            h = random_admissible_history(k, rng)
            if h.letter_at(1) == w:
                hs.append(h)
        for u in rng.random(50):
            outs = {eval_f(k, r.a1 * float(u), h)[0] for h in hs}
            assert outs == {r.tilde_f(float(u), w)}


def test_degenerate_regime():
    k = GeneralizedWalkKernel(2, [(0, 1), (1, 0)], modulation="none")
    with pytest.raises(DegenerateRegime):
        MarkovRestriction(k, AkSequence.from_values([0.0, 0.0, 1.0]))


@pytest.mark.parametrize("make", [walk3, renewal_03_06])
def test_modified_measure_accounting(make):
    k = make()
    cp = ModifiedCoupling(k)
    for w in cp.states:
        pieces = cp.pieces(w)
        pos = 0.0
        per_letter = np.zeros(k.alphabet.size)
        inside = np.zeros(k.alphabet.size)
        for lo, hi, g, _ in pieces:
            assert lo == pytest.approx(pos, abs=1e-15) and hi >= lo
            pos = hi
            per_letter[g] += hi - lo
            inside[g] += min(hi, cp.a1) - min(lo, cp.a1)
        assert per_letter == pytest.approx(np.array(k.ak_vector((w,))), abs=1e-12)
        # each letter with a_1(g | w) > 0 owns mass inside [0, a_1)
        for g in range(k.alphabet.size):
            assert (inside[g] > 0) == (k.ak(g, (w,)) > 0)


def test_modified_step_law():
    """Under (U^0, U^w) uniform the modified step has law p(. | h)."""
    k = walk3()
    cp = ModifiedCoupling(k)
    h = HistorySpec.periodic([0, 1, 2])
    w = h.letter_at(1)
    p = np.array(k.p_vector(h))
    law = np.zeros(3)
    # u^0 < a_1: the letter follows the arranged row rescaled to [0, a_1)
    for lo, hi, g, _ in cp.pieces(w):
        law[g] += cp.a1 * (min(hi, cp.a1) - min(lo, cp.a1)) / cp.a1
        law[g] += max(hi, cp.a1) - max(lo, cp.a1)
    # beyond a_1(w) the deeper bands are those of the base coupling
    layout_rest = p - np.array(k.ak_vector((w,)))
    assert law + layout_rest == pytest.approx(p, abs=1e-12)


# ------------------------------------------------------------ coalescence

class _Identity:
    states = [0, 1, 2]

    def block_step(self, row, w):
        return w


class _Constant:
    states = [0, 1]

    def block_step(self, row, w):
        return 1


def test_detect_coalescence_examples():
    assert detect_coalescence(_Constant(), [0.3])
    assert not detect_coalescence(_Identity(), np.random.default_rng(0).random(50))


def _walk_plain():
    k = GeneralizedWalkKernel(3, [(w, g) for w in range(3) for g in range(3) if g != w],
                              modulation="none")
    return MarkovRestriction(k)


def test_two_step_merge_probability():
    cp = _walk_plain()
    cells = 200
    mids = (np.arange(cells) + 0.5) / cells
    hits = 0
    for u1 in mids:
        after1 = {cp.tilde_f(float(u1), w) for w in cp.states}
        for u2 in mids:
            hits += len({cp.tilde_f(float(u2), w) for w in after1}) == 1
    grid = hits / cells**2
    assert grid == pytest.approx(0.5, abs=1e-12)
    rng = np.random.default_rng(83)
    U = rng.random((100_000, 2))
    mc = np.mean([detect_coalescence(cp, row) for row in U])
    assert abs(mc - grid) <= 0.01


def test_coalescence_monotone():
    cp = _walk_plain()
    rng = np.random.default_rng(89)
    for _ in range(500):
        block = rng.random(6)
        if detect_coalescence(cp, block[:3]):
            assert detect_coalescence(cp, block)


# ---------------------------------------------------------------- sampler

def test_markov_reduces_to_cftp():
    k = MarkovKernel([[0.1, 0.9], [0.8, 0.2]])
    cp = MarkovRestriction(k)
    for seed in range(200):
        src = UniformSource(seed)
        m = 0
        while True:
            cur = set(cp.states)
            for t in range(m, 1):
                cur = {cp.markov_step(src, t, w) for w in cur}
                if len(cur) == 1:
                    break
            if len(cur) == 1:
                break
            m -= 1
        assert tau0_hybrid(k, "plain", None, seed).tau == m


def test_plain_hybrid_matches_cff_letters():
    k = renewal_03_06()
    cff = Sampler(k, "cff")
    hyb = Sampler(k, "hybrid", coupling="plain")
    for seed in range(1000):
        assert hyb.sample(seed, 0, 2).letters == cff.sample(seed, 0, 2).letters


@pytest.mark.parametrize("coupling", ["plain", "modified"])
def test_hybrid_h2(coupling):
    k = walk3()
    sampler = Sampler(k, "hybrid", coupling=coupling)
    rng = np.random.default_rng(97)
    for seed in range(100):
        run = sampler.sample(seed, 0, 2)
        for _ in range(20):
            h = random_admissible_history(k, rng)
            letters = sampler.forward_from(seed, run.tau_window, 2, h)
            assert letters[-3:] == run.letters


def test_hybrid_h1():
    k = walk3()
    sampler = Sampler(k, "hybrid")
    for seed in range(100):
        base = sampler.sample(seed, 0, 1)
        again = sampler.sample(PerturbedSource(seed, base.tau_window, seed + 99), 0, 1)
        assert again.tau_window == base.tau_window and again.letters == base.letters


def test_hybrid_overlap():
    k = walk3()
    sampler = Sampler(k, "hybrid")
    for seed in range(100):
        assert sampler.sample(seed, -3, 3).letters[3:] == sampler.sample(seed, 0, 5).letters[:4]


def test_hybrid_merge_time_within_window():
    k = walk3()
    sampler = Sampler(k, "hybrid")
    for seed in range(200):
        res = sampler.tau(seed, 0, 0)
        assert res.tau <= res.merge_time <= 0
        assert res.algorithm == "hybrid"


def test_hybrid_terminates_on_walk():
    k = walk3()
    for seed in range(1000):
        assert tau0_hybrid(k, "modified", None, seed).status == "coalesced"


# ------------------------------------------------------------------ graph

def test_graph_complete_minus_loops():
    rep = graph_from_arcs(3, [(w, g) for w in range(3) for g in range(3) if g != w])
    assert rep.single_class and rep.aperiodic and rep.condition_iii
    assert rep.periods == [1]


def test_graph_two_cycle_periodic():
    rep = graph_from_arcs(2, [(0, 1), (1, 0)])
    assert rep.periods == [2]
    assert not rep.aperiodic and not rep.condition_ii


def test_graph_absorbing_classes():
    rep = graph_from_arcs(5, [(0, 1), (0, 3), (1, 2), (2, 1), (3, 4), (4, 3), (1, 1)])
    assert len(rep.closed_classes) == 2
    assert not rep.single_class and not rep.condition_ii


def test_graph_condition_iii_implies_zero_a0():
    k = walk3()
    rep = graph_conditions(k)
    assert rep.single_class and rep.aperiodic and rep.condition_iii
    assert rep.a0 == 0.0
    data = json.loads(rep.to_json())
    assert data["condition_iii"] is True


def test_graph_markov_full_support():
    k = MarkovKernel([[0.5, 0.5], [0.5, 0.5]])
    rep = graph_conditions(k)
    assert not rep.condition_iii and rep.a0 > 0
