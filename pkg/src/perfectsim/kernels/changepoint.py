"""Binary kernel whose memory weights switch from a slow to a fast decay.

With T(w) the first k where the fraction of ones among w_-1..w_-k reaches
sigma,

    p(1 | w) = p1 * (1 - c * sum_{i : w_-i = 0} weight_i(w)),

where weight_i = beta(i) = i**-alpha for i < T(w) and gamma(i) = r**i for
i >= T(w). Since beta >= gamma, more ones in the past never lower p(1 | w).
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import zeta

from ..alphabet import Alphabet, HistorySpec
from ..errors import ConfigError
from .base import Kernel, PinnedPattern

_DIRECT_SUM_LIMIT = 2000


class ChangepointBinaryKernel(Kernel):
    name = "changepoint_binary"

    def __init__(self, p1: float = 0.5, c: float = 0.1, sigma: float = 0.2,
                 alpha: float = 1.5, gamma_ratio: float = 0.5):
        super().__init__(Alphabet(2, ("0", "1")))
        if not 0.0 < p1 < 1.0:
            raise ConfigError("p1 must lie in (0, 1)")
        if c <= 0 or not 0.0 < sigma <= 1.0 or alpha <= 1.0 or not 0.0 < gamma_ratio < 1.0:
            raise ConfigError("need c > 0, 0 < sigma <= 1, alpha > 1, 0 < gamma_ratio < 1")
        self.p1, self.c, self.sigma = float(p1), float(c), float(sigma)
        self.alpha, self.r = float(alpha), float(gamma_ratio)
        self.zeta_alpha = float(zeta(self.alpha, 1.0))
        if not self.p1 * (1.0 - self.c * self.zeta_alpha) > self.sigma:
            raise ConfigError("need p1 * (1 - c * zeta(alpha)) > sigma")
        # beta(i) >= gamma(i): log(i) / i is decreasing from i = 3 on
        i = np.arange(1, 10_001, dtype=float)
        if np.any(i ** -self.alpha < self.r ** i):
            raise ConfigError("need i**-alpha >= gamma_ratio**i for every i")
        self._beta_tail = []
        self._extend(64)

    def _extend(self, kmax: int) -> None:
        n = len(self._beta_tail)
        if kmax < n:
            return
        size = max(kmax + 1, 2 * n)
        ks = np.arange(n, size, dtype=float)
        self._beta_tail.extend(zeta(self.alpha, ks + 1.0).tolist())

    def beta(self, i: int) -> float:
        return i ** -self.alpha

    def gamma(self, i: int) -> float:
        return self.r ** i

    def beta_tail(self, k: int) -> float:
        """sum_{i > k} i**-alpha."""
        if k >= len(self._beta_tail):
            self._extend(k)
        return self._beta_tail[k]

    def gamma_tail(self, k: int) -> float:
        return self.r ** (k + 1) / (1.0 - self.r)

    # stopping time and weights on a full history
    def stopping_time(self, h: HistorySpec) -> float:
        sigma = self.sigma
        d, P = len(h.recent), len(h.tail)
        ones = 0
        horizon = d + 2 * P
        for k in range(1, horizon + 1):
            ones += h.letter_at(k)
            if ones / k >= sigma:
                return k
        # k = d + j + n * P with j in 1..P and n >= 2
        s = sum(h.tail)
        if s / P <= sigma:
            return math.inf
        S_d = sum(h.recent)
        best = math.inf
        cum = 0
        for j in range(1, P + 1):
            cum += h.tail[j - 1]
            A, B = S_d + cum, d + j

            def ok(n):
                return (A + n * s) / (B + n * P) >= sigma

            n = max(2, math.ceil((sigma * B - A) / (s - sigma * P)))
            while n > 2 and ok(n - 1):
                n -= 1
            while not ok(n):
                n += 1
            best = min(best, B + n * P)
        return best

    def zero_weight(self, h: HistorySpec, T: float) -> float:
        """sum over zeros w_-i of the switched weight, over the whole past."""
        d, P = len(h.recent), len(h.tail)
        alpha, r = self.alpha, self.r
        total = 0.0
        for i in range(1, d + 1):
            if h.recent[i - 1] == 0:
                total += self.beta(i) if i < T else self.gamma(i)
        for j in range(P):
            if h.tail[j] != 0:
                continue
            i0 = d + 1 + j  # positions i0 + n * P, n >= 0
            if T == math.inf:
                n_beta = math.inf
            else:
                n_beta = max(0, math.ceil((T - i0) / P))
            if n_beta == math.inf:
                total += P ** -alpha * float(zeta(alpha, i0 / P))
                continue
            if n_beta <= _DIRECT_SUM_LIMIT:
                total += sum((i0 + n * P) ** -alpha for n in range(n_beta))
            else:
                total += P ** -alpha * float(zeta(alpha, i0 / P) - zeta(alpha, i0 / P + n_beta))
            total += r ** (i0 + n_beta * P) / (1.0 - r ** P)
        return total

    def p(self, g, h):
        one = self.p1 * (1.0 - self.c * self.zero_weight(h, self.stopping_time(h)))
        return one if g == 1 else 1.0 - one

    def p_vector(self, h):
        one = self.p1 * (1.0 - self.c * self.zero_weight(h, self.stopping_time(h)))
        return (1.0 - one, one)

    # infimum bounds
    def _word_state(self, word):
        sigma = self.sigma
        ones, T = 0, None
        for k, g in enumerate(word, start=1):
            ones += g
            if ones / k >= sigma:
                T = k
                break
        Z = 0.0
        for i, g in enumerate(word, start=1):
            if g == 0:
                Z += self.beta(i) if T is None or i < T else self.gamma(i)
        return T, Z

    def _pair(self, k, T, Z):
        tail = self.gamma_tail(k) if T is not None else self.beta_tail(k)
        p1c = self.p1 * self.c
        return (1.0 - self.p1 + p1c * Z, self.p1 - p1c * (Z + tail))

    def ak_vector(self, word):
        word = tuple(word)
        T, Z = self._word_state(word)
        return self._pair(len(word), T, Z)

    def ak(self, g, word):
        return self.ak_vector(word)[g]

    def ak_bands(self, h):
        sigma, alpha, r = self.sigma, self.alpha, self.r
        p1, p1c = self.p1, self.p1 * self.c
        yield (1.0 - p1, p1 - p1c * self.zeta_alpha)
        d, P = len(h.recent), len(h.tail)
        recent, tail = h.recent, h.tail
        ones, reached, Z = 0, False, 0.0
        bt = self._beta_tail
        k = 0
        while True:
            k += 1
            g = recent[k - 1] if k <= d else tail[(k - d - 1) % P]
            if g:
                ones += 1
                if not reached and ones / k >= sigma:
                    reached = True
            elif reached:
                Z += r ** k
            else:
                Z += k ** -alpha
            if reached:
                tl = r ** (k + 1) / (1.0 - r)
            else:
                if k >= len(bt):
                    self._extend(k)
                    bt = self._beta_tail
                tl = bt[k]
            yield (1.0 - p1 + p1c * Z, p1 - p1c * (Z + tl))

    def a_global(self, k):
        return 1.0 - self.p1 * self.c * self.beta_tail(k)

    def a_global_array(self, ks):
        ks = np.asarray(ks, dtype=float)
        return 1.0 - self.p1 * self.c * zeta(self.alpha, ks + 1.0)

    a_global_provenance = "closed-form"

    def _pinned_value(self, depth, reached):
        p1c = self.p1 * self.c
        if reached:
            return 1.0 - p1c * self.gamma_tail(depth)
        return 1.0 - p1c * self.beta_tail(depth)

    def ak_pinned(self, pattern: PinnedPattern):
        # worst compatible word: pinned letters, zeros elsewhere
        ones, reached = 0, False
        for k in range(1, pattern.depth + 1):
            ones += pattern.pins.get(-k, 0)
            if ones / k >= self.sigma:
                reached = True
                break
        return self._pinned_value(pattern.depth, reached)

    def pinned_accumulator(self):
        return _ChangepointAccumulator(self)

    def pinned_bounds_forward(self, pins):
        rows, n1 = pins.shape
        hs = np.arange(n1)
        beta_vals = 1.0 - self.p1 * self.c * zeta(self.alpha, hs + 1.0)
        gamma_vals = 1.0 - self.p1 * self.c * self.r ** (hs + 1.0) / (1.0 - self.r)
        ones = (pins == 1)
        out = np.empty((rows, n1))
        out[:, 0] = beta_vals[0]
        for h in range(1, n1):
            back = ones[:, h - 1::-1]
            frac = np.cumsum(back, axis=1) / np.arange(1, h + 1)
            reached = np.any(frac >= self.sigma, axis=1)
            out[:, h] = np.where(reached, gamma_vals[h], beta_vals[h])
        return out

    def config(self):
        return {"type": self.name, "p1": self.p1, "c": self.c, "sigma": self.sigma,
                "alpha": self.alpha, "gamma_ratio": self.r}


class _ChangepointAccumulator:
    def __init__(self, kernel):
        self.kernel = kernel
        self.depth = 0
        self.ones = 0
        self.reached = False

    def push(self, letter):
        self.depth += 1
        if letter == 1:
            self.ones += 1
        if not self.reached and self.ones / self.depth >= self.kernel.sigma:
            self.reached = True

    def value(self):
        return self.kernel._pinned_value(self.depth, self.reached)
