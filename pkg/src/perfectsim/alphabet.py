"""Letters, words and histories, plus forbidden-word and admissibility checks.

Words are tuples of letter indices stored most recent first: ``word[0]`` is
the letter at position -1, ``word[j]`` the letter at position -(j+1).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, InadmissibleHistory

Word = tuple


@dataclass(frozen=True)
class Alphabet:
    size: int
    labels: tuple = field(default=())

    def __post_init__(self):
        if self.size < 2:
            raise ConfigError("alphabet needs at least two letters")
        if not self.labels:
            object.__setattr__(self, "labels", tuple(str(i) for i in range(self.size)))
        if len(self.labels) != self.size or len(set(self.labels)) != self.size:
            raise ConfigError("labels must be distinct, one per letter")

    def index(self, label) -> int:
        return self.labels.index(str(label))

    def to_labels(self, letters_forward: Sequence[int]) -> list:
        return [self.labels[g] for g in letters_forward]


@dataclass(frozen=True, slots=True)
class HistorySpec:
    """An infinite past: an explicit recent word followed by a periodic tail.

    ``recent`` is most-recent-first. ``tail`` repeats forever before the
    oldest recent letter, also most-recent-first; a length-one tail is the
    constant history.
    """

    recent: tuple
    tail: tuple

    @classmethod
    def constant(cls, letter: int, recent: Sequence[int] = ()) -> "HistorySpec":
        return cls(tuple(recent), (int(letter),))

    @classmethod
    def periodic(cls, period: Sequence[int], recent: Sequence[int] = ()) -> "HistorySpec":
        if not period:
            raise ConfigError("periodic tail needs at least one letter")
        return cls(tuple(recent), tuple(int(g) for g in period))

    def letter_at(self, j: int) -> int:
        """Letter at position -j, j >= 1."""
        d = len(self.recent)
        if j <= d:
            return self.recent[j - 1]
        return self.tail[(j - d - 1) % len(self.tail)]

    def prefix(self, k: int) -> tuple:
        d = len(self.recent)
        if k <= d:
            return self.recent[:k]
        P = len(self.tail)
        rest = k - d
        reps = -(-rest // P)
        return self.recent + (self.tail * reps)[:rest]

    def prepend(self, letters_forward: Sequence[int]) -> "HistorySpec":
        """History after the letters (oldest first) are appended in time."""
        return HistorySpec(tuple(reversed(letters_forward)) + self.recent, self.tail)

    def push(self, letter: int) -> "HistorySpec":
        return HistorySpec((letter,) + self.recent, self.tail)

    @property
    def is_constant_tail(self) -> bool:
        return len(set(self.tail)) == 1

    def run_length(self) -> float:
        """Length of the leading run of w_-1; ``math.inf`` if it never ends."""
        first = self.letter_at(1)
        r = 0
        for g in self.recent:
            if g != first:
                return r
            r += 1
        for g in self.tail:
            if g != first:
                return r
            r += 1
        return math.inf

    def window(self, depth: int) -> "HistorySpec":
        """Drop the first ``depth`` positions (the history seen ``depth`` steps earlier)."""
        d = len(self.recent)
        if depth <= d:
            return HistorySpec(self.recent[depth:], self.tail)
        shift = (depth - d) % len(self.tail)
        return HistorySpec((), self.tail[shift:] + self.tail[:shift])


def letter_at(h: HistorySpec, j: int) -> int:
    if j < 1:
        raise ValueError("positions are -1, -2, ...; j must be >= 1")
    return h.letter_at(j)


def is_forbidden(word: Sequence[int], kernel) -> bool:
    """Recursive forbidden-word test, evaluated to the word's own length.

    ``word`` is most-recent-first; it is forbidden when some letter has zero
    probability under every history extending the older part of the word.
    """
    word = tuple(word)
    if not word or not kernel.has_forbidden_words:
        return False
    return any(kernel.vanishes(word[j], word[j + 1:]) for j in range(len(word)))


def is_admissible_prefix(word: Sequence[int], kernel) -> bool:
    word = tuple(word)
    return all(not is_forbidden(word[:n], kernel) for n in range(1, len(word) + 1))


def is_admissible_history(h: HistorySpec, kernel) -> bool:
    if not kernel.has_forbidden_words:
        return True
    depth = len(h.recent) + 2 * len(h.tail) + kernel.forbidden_context
    return is_admissible_prefix(h.prefix(depth), kernel)


def check_history(h: HistorySpec, kernel) -> None:
    if any(not 0 <= g < kernel.alphabet.size for g in h.recent + h.tail):
        raise InadmissibleHistory("letter index out of range")
    if not is_admissible_history(h, kernel):
        raise InadmissibleHistory(f"history {h} is not admissible for {kernel.name}")


def random_admissible_history(kernel, rng: np.random.Generator, max_recent: int = 12,
                              max_period: int = 3, tries: int = 1000) -> HistorySpec:
    """Random admissible history: grown into the past letter by letter, then
    closed with a constant or periodic tail that keeps it admissible."""
    G = kernel.alphabet.size
    for _ in range(tries):
        n = int(rng.integers(0, max_recent + 1))
        word = ()
        for _ in range(n):
            cands = [v for v in range(G) if is_admissible_prefix(word + (v,), kernel)]
            if not cands:
                break
            word = word + (int(rng.choice(cands)),)
        if len(word) < n:
            continue
        for _ in range(20):
            P = int(rng.integers(1, max_period + 1))
            tail = tuple(int(x) for x in rng.integers(0, G, size=P))
            h = HistorySpec(word, tail)
            if is_admissible_history(h, kernel):
                return h
    raise InadmissibleHistory(f"could not draw an admissible history for {kernel.name}")
