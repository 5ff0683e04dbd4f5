import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from perfectsim.alphabet import (Alphabet, HistorySpec, check_history, is_admissible_history,
                                 is_admissible_prefix, is_forbidden, letter_at,
                                 random_admissible_history)
from perfectsim.coupling import eval_f
from perfectsim.errors import ConfigError, InadmissibleHistory
from perfectsim.kernels import GeneralizedWalkKernel

from conftest import BUNDLED, renewal_03_06, walk3


def cycle3():
    return GeneralizedWalkKernel(3, [(0, 1), (1, 2), (2, 0)], modulation="none")


def test_alphabet_validation():
    assert Alphabet(3).labels == ("0", "1", "2")
    with pytest.raises(ConfigError):
        Alphabet(1)
    with pytest.raises(ConfigError):
        Alphabet(2, ("a", "a"))


def test_letter_at_examples():
    h = HistorySpec.constant(0, recent=[1, 0])
    assert letter_at(h, 1) == 1
    assert letter_at(h, 5) == 0
    assert letter_at(HistorySpec.periodic([1, 0]), 2) == 0
    with pytest.raises(ValueError):
        letter_at(h, 0)


@given(st.lists(st.integers(0, 2), max_size=6), st.lists(st.integers(0, 2), min_size=1, max_size=4),
       st.integers(0, 30))
def test_prefix_matches_letter_at(recent, tail, k):
    h = HistorySpec(tuple(recent), tuple(tail))
    assert h.prefix(k) == tuple(h.letter_at(j) for j in range(1, k + 1))
    g = 2
    assert h.push(g).letter_at(1) == g and h.push(g).prefix(k + 1)[1:] == h.prefix(k)
    assert h.prepend([0, 1]).prefix(2) == (1, 0)


def test_run_length():
    assert HistorySpec.constant(1, recent=[1, 1]).run_length() == math.inf
    assert HistorySpec.constant(0, recent=[1, 1, 1]).run_length() == 3
    assert HistorySpec.periodic([1, 1, 0]).run_length() == 2


def test_renewal_has_no_forbidden_words():
    k = renewal_03_06()
    for word in [(), (0,), (1, 0, 1, 1), (0,) * 9]:
        assert not is_forbidden(word, k)
        assert is_admissible_prefix(word, k)


def test_walk_forbidden_words():
    k = cycle3()
    assert is_admissible_prefix((2, 1, 0), k)
    # forward reading 0 -> 2 uses the missing arc (0, 2)
    assert is_forbidden((2, 0), k)
    assert not is_admissible_prefix((2, 0, 1), k)
    assert not is_forbidden((), k)
    for g in range(3):
        assert is_admissible_prefix((g,), k)


def test_walk_arc_enumeration_matches_admissibility():
    k = cycle3()
    arcs = {(0, 1), (1, 2), (2, 0)}
    for n in range(1, 6):
        for word in np.ndindex(*(3,) * n):
            expected = all((word[j + 1], word[j]) in arcs for j in range(n - 1))
            assert is_admissible_prefix(word, k) == expected


@given(st.lists(st.integers(0, 2), min_size=1, max_size=5), st.lists(st.integers(0, 2), max_size=4))
def test_suffix_closure(word, older):
    k = walk3()
    if not is_admissible_prefix(tuple(word), k):
        assert not is_admissible_prefix(tuple(word) + tuple(older), k)


def test_check_history():
    k = cycle3()
    check_history(HistorySpec.periodic([2, 1, 0]), k)
    with pytest.raises(InadmissibleHistory):
        check_history(HistorySpec.constant(0), k)
    with pytest.raises(InadmissibleHistory):
        check_history(HistorySpec.constant(5), k)


@pytest.mark.parametrize("name", sorted(BUNDLED))
def test_admissibility_invariant_under_coupling(name):
    kernel = BUNDLED[name]()
    rng = np.random.default_rng(7)
    for _ in range(1000 if name != "renewal_hard" else 200):
        h = random_admissible_history(kernel, rng)
        u = float(rng.random())
        try:
            g, _ = eval_f(kernel, u, h, cap=20_000)
        except Exception:
            continue
        new = h.push(g)
        assert is_admissible_history(new, kernel)
        for depth in range(1, 13):
            assert is_admissible_prefix(new.prefix(depth), kernel)
