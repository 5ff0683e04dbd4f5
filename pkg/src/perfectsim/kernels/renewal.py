"""Alternating renewal kernel on {-1, +1}.

The next letter depends on the past only through the current letter and the
length of the run it closes: p(i | run of h copies of i) = p_h(i, i).
Letter index 0 is -1 and index 1 is +1.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from ..alphabet import Alphabet, HistorySpec
from ..errors import ConfigError
from .base import Kernel, PinnedPattern


class SurvivalRates:
    """p_h(i, i) for h = 1, 2, ... and h = infinity, for one letter i.

    ``values[h-1]`` gives p_h for h <= m; beyond m the rate equals ``limit``.
    """

    rule = None

    def __init__(self, values: Sequence[float], limit: float):
        self.values = [float(v) for v in values]
        self.limit = float(limit)
        m = len(self.values)
        # suffix extrema over h >= k, k = 1..m+1, limit included
        self._inf = [self.limit] * (m + 2)
        self._sup = [self.limit] * (m + 2)
        for k in range(m, 0, -1):
            self._inf[k] = min(self.values[k - 1], self._inf[k + 1])
            self._sup[k] = max(self.values[k - 1], self._sup[k + 1])

    @property
    def m(self) -> int:
        return len(self.values)

    def value(self, h) -> float:
        if h == math.inf or h > self.m:
            return self.limit
        return self.values[h - 1]

    def tail_inf(self, k: int) -> float:
        return self._inf[min(k, self.m + 1)]

    def tail_sup(self, k: int) -> float:
        return self._sup[min(k, self.m + 1)]

    def spread_array(self, ks: np.ndarray) -> np.ndarray:
        idx = np.minimum(ks, self.m + 1)
        return np.asarray(self._sup)[idx] - np.asarray(self._inf)[idx]

    def bounds(self) -> tuple:
        return self.tail_inf(1), self.tail_sup(1)

    def config(self):
        return {"values": self.values, "limit": self.limit}


class SqrtSurvival(SurvivalRates):
    """p_h = (1 - 1/sqrt(h+1)) / 2: increasing to 1/2, so a_k -> 1 very slowly."""

    rule = "sqrt"

    def __init__(self):
        self.values = []
        self.limit = 0.5

    @property
    def m(self):
        return math.inf

    def value(self, h):
        if h == math.inf:
            return 0.5
        return 0.5 * (1.0 - 1.0 / math.sqrt(h + 1))

    def tail_inf(self, k):
        return self.value(k)

    def tail_sup(self, k):
        return 0.5

    def spread_array(self, ks):
        return 0.5 / np.sqrt(np.asarray(ks, dtype=float) + 1.0)

    def config(self):
        return {"rule": "sqrt"}


class AlternatingRenewalKernel(Kernel):
    name = "alternating_renewal"

    def __init__(self, minus: SurvivalRates, plus: SurvivalRates, epsilon: float | None = None):
        super().__init__(Alphabet(2, ("-1", "+1")))
        self.rates = (minus, plus)
        lo = min(r.bounds()[0] for r in self.rates)
        hi = max(r.bounds()[1] for r in self.rates)
        margin = min(lo, 1.0 - hi)
        if epsilon is None:
            epsilon = margin
        if epsilon <= 0 or margin < epsilon:
            raise ConfigError(f"survival rates must lie in [eps, 1-eps] with eps > 0 (eps={epsilon})")
        self.epsilon = float(epsilon)
        m = max(minus.m, plus.m)
        self.memory = None if m == math.inf else m + 1
        # depth-0 bounds, ascending letter order
        a0_minus = min(minus.tail_inf(1), 1.0 - plus.tail_sup(1))
        a0_plus = min(1.0 - minus.tail_sup(1), plus.tail_inf(1))
        self._a0 = (a0_minus, a0_plus)

    @classmethod
    def symmetric(cls, values: Sequence[float], limit: float, epsilon=None):
        return cls(SurvivalRates(values, limit), SurvivalRates(values, limit), epsilon)

    @classmethod
    def sqrt_rule(cls):
        return cls(SqrtSurvival(), SqrtSurvival())

    def _vector(self, i: int, stay: float) -> tuple:
        return (stay, 1.0 - stay) if i == 0 else (1.0 - stay, stay)

    def p(self, g, h):
        i = h.letter_at(1)
        stay = self.rates[i].value(h.run_length())
        return stay if g == i else 1.0 - stay

    def p_vector(self, h):
        i = h.letter_at(1)
        return self._vector(i, self.rates[i].value(h.run_length()))

    def ak_vector(self, word):
        k = len(word)
        if k == 0:
            return self._a0
        i = word[0]
        r = 1
        while r < k and word[r] == i:
            r += 1
        rates = self.rates[i]
        if r < k:
            return self._vector(i, rates.value(r))
        lo, hi = rates.tail_inf(k), 1.0 - rates.tail_sup(k)
        return (lo, hi) if i == 0 else (hi, lo)

    def ak(self, g, word):
        return self.ak_vector(tuple(word))[g]

    def ak_bands(self, h):
        yield self._a0
        i = h.letter_at(1)
        r = h.run_length()
        rates = self.rates[i]
        k = 1
        while k <= r:
            lo, hi = rates.tail_inf(k), 1.0 - rates.tail_sup(k)
            yield (lo, hi) if i == 0 else (hi, lo)
            k += 1
        exact = self._vector(i, rates.value(r))
        while True:
            yield exact

    def spread(self, i: int, k: int) -> float:
        return self.rates[i].tail_sup(k) - self.rates[i].tail_inf(k)

    def a_global(self, k):
        if k == 0:
            return sum(self._a0)
        return 1.0 - max(self.spread(0, k), self.spread(1, k))

    def a_global_array(self, ks):
        ks = np.asarray(ks, dtype=np.int64)
        out = 1.0 - np.maximum(self.rates[0].spread_array(ks), self.rates[1].spread_array(ks))
        out[ks == 0] = sum(self._a0)
        return out

    a_global_provenance = "closed-form"

    def ak_pinned(self, pattern: PinnedPattern):
        if pattern.depth == 0:
            return sum(self._a0)
        letters = set(pattern.pins.values())
        if len(letters) == 2:
            # every compatible word contains a sign change
            return 1.0
        if letters:
            (i,) = letters
            return 1.0 - self.spread(i, pattern.depth)
        return self.a_global(pattern.depth)

    def pinned_accumulator(self):
        return _RenewalAccumulator(self)

    def pinned_bounds_forward(self, pins):
        rows, n1 = pins.shape
        seen0 = np.zeros((rows, n1), dtype=bool)
        seen1 = np.zeros((rows, n1), dtype=bool)
        # column h: pins among times 0..h-1
        seen0[:, 1:] = np.logical_or.accumulate(pins[:, :-1] == 0, axis=1)
        seen1[:, 1:] = np.logical_or.accumulate(pins[:, :-1] == 1, axis=1)
        hs = np.arange(n1)
        a = self.a_global_array(hs)
        one0 = 1.0 - self.rates[0].spread_array(hs)
        one1 = 1.0 - self.rates[1].spread_array(hs)
        out = np.broadcast_to(a, (rows, n1)).copy()
        out = np.where(seen0 & ~seen1, one0, out)
        out = np.where(seen1 & ~seen0, one1, out)
        out = np.where(seen0 & seen1, 1.0, out)
        out[:, 0] = sum(self._a0)
        return out

    def config(self):
        return {"type": self.name, "minus": self.rates[0].config(),
                "plus": self.rates[1].config(), "epsilon": self.epsilon}


class _RenewalAccumulator:
    def __init__(self, kernel):
        self.kernel = kernel
        self.depth = 0
        self.seen = [False, False]

    def push(self, letter):
        self.depth += 1
        if letter is not None:
            self.seen[letter] = True

    def value(self):
        k = self.kernel
        if self.depth == 0:
            return sum(k._a0)
        if self.seen[0] and self.seen[1]:
            return 1.0
        if self.seen[0]:
            return 1.0 - k.spread(0, self.depth)
        if self.seen[1]:
            return 1.0 - k.spread(1, self.depth)
        return k.a_global(self.depth)
