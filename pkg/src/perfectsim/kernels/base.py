"""Kernel interface: conditional law of the next letter plus its infimum bounds."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from ..alphabet import Alphabet, HistorySpec, is_admissible_history, is_admissible_prefix
from ..errors import InadmissibleHistory, UnsupportedKernel


@dataclass(frozen=True)
class PinnedPattern:
    """Positions -1..-depth, some of them pinned to a letter.

    ``pins`` maps a negative position (-1 is the most recent) to the letter
    forced there because the uniform at that time fell in the depth-0 band.
    """

    depth: int
    pins: dict = field(default_factory=dict)

    def __post_init__(self):
        for pos in self.pins:
            if not -self.depth <= pos <= -1:
                raise ValueError(f"pin position {pos} outside -1..-{self.depth}")


class _GenericPinnedAccumulator:
    """A_h by repeated calls to ``ak_pinned``; quadratic, used as the fallback."""

    def __init__(self, kernel):
        self.kernel = kernel
        self.depth = 0
        self.pins = {}

    def push(self, letter):
        self.depth += 1
        if letter is not None:
            self.pins[-self.depth] = letter

    def value(self) -> float:
        return self.kernel.ak_pinned(PinnedPattern(self.depth, dict(self.pins)))


class Kernel:
    """Base class for kernels p(g | past) on a finite alphabet.

    Subclasses implement :meth:`p` and :meth:`ak`; the bundled kernels also
    override the incremental and vectorized hooks for speed.
    """

    name = "kernel"
    has_forbidden_words = False
    forbidden_context = 1
    memory: Optional[int] = None

    def __init__(self, alphabet: Alphabet):
        self.alphabet = alphabet

    # conditional law
    def p(self, g: int, h: HistorySpec) -> float:
        raise NotImplementedError

    def p_vector(self, h: HistorySpec) -> tuple:
        return tuple(self.p(g, h) for g in range(self.alphabet.size))

    # infimum bounds a_k(g | w)
    def ak(self, g: int, word: tuple) -> float:
        raise UnsupportedKernel(f"{self.name} has no closed-form a_k bound")

    def ak_vector(self, word: tuple) -> tuple:
        return tuple(self.ak(g, word) for g in range(self.alphabet.size))

    def ak_bands(self, h: HistorySpec) -> Iterator[tuple]:
        """Yield (a_k(g | w_-1..w_-k) for g in G) for k = 0, 1, 2, ..."""
        for k in itertools.count():
            yield self.ak_vector(h.prefix(k))

    def a_global(self, k: int) -> float:
        """inf over admissible words of length k of sum_g a_k(g | w), by enumeration."""
        G = self.alphabet.size
        if G ** k > 200_000:
            raise UnsupportedKernel(f"{self.name}: a_{k} by enumeration is too large")
        best = 1.0
        for word in itertools.product(range(G), repeat=k):
            if self.has_forbidden_words and not is_admissible_prefix(word, self):
                continue
            best = min(best, sum(self.ak_vector(word)))
        return best

    def a_global_array(self, ks: np.ndarray) -> np.ndarray:
        return np.array([self.a_global(int(k)) for k in ks], dtype=float)

    a_global_provenance = "enumeration"

    # forbidden words
    def vanishes(self, g: int, word: tuple) -> bool:
        """True iff p(g | .) = 0 for every history extending ``word``."""
        if not self.has_forbidden_words:
            return False
        raise UnsupportedKernel(f"{self.name} cannot decide vanishing probabilities")

    # pinned bounds for the history-adaptive depth
    def ak_pinned(self, pattern: PinnedPattern) -> float:
        raise UnsupportedKernel(f"{self.name} has no pinned bound")

    def pinned_accumulator(self):
        return _GenericPinnedAccumulator(self)

    def pinned_bounds_forward(self, pins: np.ndarray) -> np.ndarray:
        """A_h(U_{h-1}, ..., U_0) for every row and h = 0..n.

        ``pins`` has shape (rows, n+1); entry t is the letter pinned by U_t or
        -1. Column h of the result only depends on columns 0..h-1.
        """
        rows, n1 = pins.shape
        out = np.empty((rows, n1))
        for r in range(rows):
            for h in range(n1):
                acc = self.pinned_accumulator()
                for t in range(h - 1, -1, -1):
                    g = int(pins[r, t])
                    acc.push(None if g < 0 else g)
                out[r, h] = acc.value()
        return out

    # histories
    def default_reference(self, letter: int = 0) -> HistorySpec:
        h = HistorySpec.constant(letter)
        if is_admissible_history(h, self):
            return h
        raise InadmissibleHistory(f"constant history {letter} is not admissible for {self.name}")

    def history_ending_in(self, w: int) -> HistorySpec:
        """Some admissible history with w_-1 = w."""
        h = HistorySpec.constant(w)
        if is_admissible_history(h, self):
            return h
        raise InadmissibleHistory(f"no constant admissible history ending in {w}")

    def check(self, h: HistorySpec) -> None:
        from ..alphabet import check_history

        check_history(h, self)

    def config(self) -> dict:
        raise NotImplementedError

    def __repr__(self):
        return f"<{type(self).__name__} {self.config()}>"
