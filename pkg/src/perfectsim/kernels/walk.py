"""Walks on a directed graph whose step law is modulated by recent steps.

    p(g | w) = P0[w_-1, g] + sum_{i=1}^{L} c_i * mod(w_-1, g, w_-i-1, w_-i)

``mod`` vanishes off the arcs of the graph and sums to zero over g, so each
p(. | w) is a probability vector supported on the out-arcs of w_-1. Words
that use a missing arc are forbidden. A Markov kernel is the case L = 0.
"""
from __future__ import annotations

import itertools
from collections import deque
from typing import Callable, Sequence

import numpy as np

from ..alphabet import Alphabet, HistorySpec, is_admissible_history
from ..errors import ConfigError, InadmissibleHistory
from .base import Kernel


def rotation_modulation(n: int) -> Callable:
    """Push the walk further in the direction of the past step on the cycle Z_n.

    A past step u -> v counts +1 if v = u + 1 (mod n), -1 if v = u - 1, else 0;
    the signed value is added to w -> w+1 and subtracted from w -> w-1.
    """

    def mod(w, g, u, v):
        if (v - u) % n == 1:
            s = 1.0
        elif (u - v) % n == 1:
            s = -1.0
        else:
            return 0.0
        if (g - w) % n == 1:
            return s
        if (w - g) % n == 1:
            return -s
        return 0.0

    return mod


def _no_modulation(w, g, u, v):
    return 0.0


class GeneralizedWalkKernel(Kernel):
    name = "generalized_walk"
    has_forbidden_words = True
    forbidden_context = 1

    def __init__(self, n_letters: int, arcs: Sequence[tuple], weights: Sequence[float] = (),
                 base=None, modulation="rotation", labels=None):
        super().__init__(Alphabet(n_letters, tuple(labels) if labels else ()))
        G = n_letters
        self.arcs = frozenset((int(a), int(b)) for a, b in arcs)
        for a, b in self.arcs:
            if not (0 <= a < G and 0 <= b < G):
                raise ConfigError(f"arc {(a, b)} uses a letter outside 0..{G - 1}")
        self.succ = [sorted(b for a, b in self.arcs if a == v) for v in range(G)]
        self.pred = [sorted(a for a, b in self.arcs if b == v) for v in range(G)]
        # letters with an infinite backward path
        ext = set(range(G))
        while True:
            keep = {v for v in ext if any(u in ext for u in self.pred[v])}
            if keep == ext:
                break
            ext = keep
        if not ext:
            raise ConfigError("graph has no cycle, so no admissible history exists")
        self.ext = frozenset(ext)
        if base is None:
            base = np.zeros((G, G))
            for v in range(G):
                for g in self.succ[v]:
                    base[v, g] = 1.0 / len(self.succ[v])
        self.base = np.asarray(base, dtype=float)
        if self.base.shape != (G, G):
            raise ConfigError("base matrix must be |G| x |G|")
        self.weights = tuple(float(c) for c in weights)
        if isinstance(modulation, str):
            self.modulation_name = modulation
            if modulation == "rotation":
                modulation = rotation_modulation(G)
            elif modulation == "none":
                modulation = _no_modulation
            else:
                raise ConfigError(f"unknown modulation {modulation!r}")
        else:
            self.modulation_name = getattr(modulation, "__name__", "custom")
        self.mod = modulation
        self.L = len(self.weights)
        self.has_forbidden_words = len(self.arcs) < G * G
        self.memory = self.L + 1 if self.L else 1
        self._validate()
        self._dp = self._build_dp()
        self._cache = {}
        self._a0 = self._depth0()
        # least on-arc probability over all admissible pasts
        on_arc = [self.ak(g, (w,)) for w, g in self.arcs if w in self.ext]
        self.epsilon = min(on_arc)
        if self.epsilon <= 0.0:
            raise ConfigError("some arc gets probability 0 under an admissible past")

    def _validate(self):
        G = self.alphabet.size
        for v in range(G):
            for g in range(G):
                if (v, g) not in self.arcs and abs(self.base[v, g]) > 0:
                    raise ConfigError(f"base puts mass on missing arc {(v, g)}")
            if v in self.ext and abs(self.base[v].sum() - 1.0) > 1e-12:
                raise ConfigError(f"base row {v} does not sum to 1")
        for w in range(G):
            for u, v in itertools.product(range(G), repeat=2):
                vals = [self.mod(w, g, u, v) for g in range(G)]
                if abs(sum(vals)) > 1e-12:
                    raise ConfigError("modulation must sum to zero over the next letter")
                if any(vals[g] != 0 and (w, g) not in self.arcs for g in range(G)):
                    raise ConfigError("modulation must vanish off the arcs")

    def _build_dp(self):
        """V[(w, g)][i][v]: least modulation from past arcs i..L, given w_-i = v."""
        G, L = self.alphabet.size, self.L
        dp = {}
        for w, g in self.arcs:
            V = [[0.0] * G for _ in range(L + 2)]
            for i in range(L, 0, -1):
                c = self.weights[i - 1]
                for v in range(G):
                    opts = [c * self.mod(w, g, u, v) + V[i + 1][u]
                            for u in self.pred[v] if u in self.ext]
                    V[i][v] = min(opts) if opts else 0.0
            dp[(w, g)] = V
        return dp

    def _depth0(self):
        G = self.alphabet.size
        out = []
        for g in range(G):
            vals = []
            for w in self.ext:
                if (w, g) in self.arcs:
                    vals.append(self.base[w, g] + (self._dp[(w, g)][1][w] if self.L else 0.0))
                else:
                    vals.append(0.0)
            out.append(min(vals))
        return tuple(out)

    def p(self, g, h):
        w = h.letter_at(1)
        if (w, g) not in self.arcs:
            return 0.0
        val = self.base[w, g]
        for i in range(1, self.L + 1):
            val += self.weights[i - 1] * self.mod(w, g, h.letter_at(i + 1), h.letter_at(i))
        return float(val)

    def p_vector(self, h):
        word = h.prefix(self.L + 1)
        return self.ak_vector(word)

    def ak_vector(self, word):
        word = tuple(word)[: self.L + 1]
        hit = self._cache.get(word)
        if hit is not None:
            return hit
        k = len(word)
        if k == 0:
            return self._a0
        G, L = self.alphabet.size, self.L
        w = word[0]
        out = []
        for g in range(G):
            if (w, g) not in self.arcs:
                out.append(0.0)
                continue
            val = self.base[w, g]
            for i in range(1, min(k - 1, L) + 1):
                val += self.weights[i - 1] * self.mod(w, g, word[i], word[i - 1])
            if k - 1 < L:
                val += self._dp[(w, g)][k][word[k - 1]]
            out.append(float(val))
        out = tuple(out)
        self._cache[word] = out
        return out

    def ak(self, g, word):
        return self.ak_vector(word)[g]

    def ak_bands(self, h):
        for k in range(self.L + 2):
            yield self.ak_vector(h.prefix(k))
        last = self.ak_vector(h.prefix(self.L + 1))
        while True:
            yield last

    def vanishes(self, g, word):
        if word:
            return (word[0], g) not in self.arcs
        return not self.pred[g]

    def admissible_words(self, k: int):
        """Most-recent-first words of length k that extend to an admissible history."""
        words = [(v,) for v in sorted(self.ext)] if k else [()]
        for _ in range(k - 1):
            words = [wd + (u,) for wd in words for u in self.pred[wd[-1]] if u in self.ext]
        return words

    def a_global(self, k):
        if k == 0:
            return float(sum(self._a0))
        k = min(k, self.L + 1)
        return min(float(sum(self.ak_vector(wd))) for wd in self.admissible_words(k))

    def a_global_array(self, ks):
        ks = np.asarray(ks, dtype=np.int64)
        table = np.array([self.a_global(k) for k in range(self.L + 2)])
        return table[np.minimum(ks, self.L + 1)]

    a_global_provenance = "enumeration"

    def ak_pinned(self, pattern):
        """inf of sum_g a_h(g | w) over admissible words honouring the pins."""
        h = pattern.depth
        if h == 0:
            return float(sum(self._a0))

        def allowed(j):
            pin = pattern.pins.get(-j)
            return self.ext if pin is None else self.ext & {pin}

        # feasible[j]: letters at position -j that chain back through the deeper pins
        feasible = {h: set(allowed(h))}
        for j in range(h - 1, 0, -1):
            feasible[j] = {v for v in allowed(j) if any(u in feasible[j + 1] for u in self.pred[v])}
        depth = min(h, self.L + 1)
        words = [(v,) for v in sorted(feasible[1])]
        for j in range(2, depth + 1):
            words = [wd + (u,) for wd in words for u in self.pred[wd[-1]] if u in feasible[j]]
        if not words:
            raise ValueError("pins are not compatible with any admissible history")
        return min(float(sum(self.ak_vector(wd))) for wd in words)

    def shortest_cycle(self, letter: int):
        """Shortest cycle through ``letter`` as a forward list, or None."""
        prev = {letter: None}
        queue = deque([letter])
        while queue:
            v = queue.popleft()
            for g in self.succ[v]:
                if g == letter:
                    path = [v]
                    while prev[path[-1]] is not None:
                        path.append(prev[path[-1]])
                    return path[::-1]
                if g not in prev:
                    prev[g] = v
                    queue.append(g)
        return None

    def history_ending_in(self, w: int) -> HistorySpec:
        h = HistorySpec.constant(w)
        if is_admissible_history(h, self):
            return h
        # walk backward from w to the nearest letter on a cycle
        back = {w: None}
        queue = deque([w])
        while queue:
            v = queue.popleft()
            cycle = self.shortest_cycle(v)
            if cycle is not None:
                forward = []
                x = v
                while x != w:
                    x = back[x]
                    forward.append(x)
                recent = forward[::-1]
                # forward ... v, c1, ..., c_last, v, ..., w read most-recent-first
                return HistorySpec(tuple(recent), (v,) + tuple(reversed(cycle[1:])))
            for u in self.pred[v]:
                if u in self.ext and u not in back:
                    back[u] = v
                    queue.append(u)
        raise InadmissibleHistory(f"letter {w} has no infinite past")

    def default_reference(self, letter: int = 0) -> HistorySpec:
        order = [letter] + [v for v in range(self.alphabet.size) if v != letter]
        for v in order:
            h = HistorySpec.constant(v)
            if is_admissible_history(h, self):
                return h
            cycle = self.shortest_cycle(v)
            if cycle:
                # tail is most-recent-first: the cycle read backwards, ending at v
                h = HistorySpec.periodic(tuple(reversed(cycle)))
                if is_admissible_history(h, self):
                    return h
        raise InadmissibleHistory(f"no periodic admissible history for {self.name}")

    def config(self):
        return {"type": self.name, "n_letters": self.alphabet.size,
                "arcs": sorted(list(a) for a in self.arcs), "weights": list(self.weights),
                "base": self.base.tolist(), "modulation": self.modulation_name}


class MarkovKernel(GeneralizedWalkKernel):
    """First-order chain with transition matrix ``matrix`` (arcs where positive)."""

    name = "markov"

    def __init__(self, matrix, labels=None):
        M = np.asarray(matrix, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ConfigError("transition matrix must be square")
        if np.any(M < 0) or np.any(np.abs(M.sum(axis=1) - 1.0) > 1e-12):
            raise ConfigError("transition matrix must be row-stochastic")
        arcs = [(int(a), int(b)) for a, b in zip(*np.nonzero(M))]
        super().__init__(M.shape[0], arcs, (), base=M, modulation="none", labels=labels)
        self.matrix = M

    def config(self):
        return {"type": self.name, "matrix": self.matrix.tolist()}
