"""Counter-based uniform randomness addressed by (seed, time index, stream).

Backward coalescence searches read U_0, U_-1, ... lazily and window sampling
revisits the same indices, so every uniform is a pure function of its key.
The mixer is a three-round splitmix64 finalizer chain over the key fields;
the top 53 bits of the result give a double in [0, 1).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_K_SEED = 0xD1B54A32D192ED03
_K_STREAM = 0xABC98388FB8FAC03
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_INV53 = 1.0 / (1 << 53)


@dataclass(frozen=True)
class RandomKey:
    seed: int
    time_index: int
    stream: int = 0


def encode_index(t: int) -> int:
    """Zig-zag map Z -> N: 0, -1, 1, -2, 2 -> 0, 1, 2, 3, 4."""
    return 2 * t if t >= 0 else -2 * t - 1


def decode_index(c: int) -> int:
    return c >> 1 if c % 2 == 0 else -((c + 1) >> 1)


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * _M1) & _MASK
    z = ((z ^ (z >> 27)) * _M2) & _MASK
    return z ^ (z >> 31)


def _hash(seed: int, counter: int, stream: int) -> int:
    h = _mix((seed * _GOLDEN + _K_SEED) & _MASK)
    h = _mix((h ^ ((counter * _GOLDEN) & _MASK)) + _K_SEED & _MASK)
    return _mix((h ^ (((stream + 1) * _K_STREAM) & _MASK)) + _GOLDEN & _MASK)


def uniform(seed: int, t: int, stream: int = 0) -> float:
    """Uniform in [0, 1) for the key (seed, t, stream); never returns 1.0."""
    return (_hash(seed & _MASK, encode_index(t), stream) >> 11) * _INV53


def uniform_key(key: RandomKey) -> float:
    return uniform(key.seed, key.time_index, key.stream)


def _mix_np(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def uniform_array(seed, t, stream=0) -> np.ndarray:
    """Vectorized :func:`uniform`; ``seed``, ``t`` and ``stream`` broadcast.

    Bit-identical to the scalar path.
    """
    seed = np.asarray(seed, dtype=np.uint64)
    t = np.asarray(t, dtype=np.int64)
    counter = np.where(t >= 0, 2 * t, -2 * t - 1).astype(np.uint64)
    stream = np.asarray(stream, dtype=np.uint64)
    with np.errstate(over="ignore"):
        h = _mix_np(seed * np.uint64(_GOLDEN) + np.uint64(_K_SEED))
        h = _mix_np((h ^ (counter * np.uint64(_GOLDEN))) + np.uint64(_K_SEED))
        h = _mix_np((h ^ ((stream + np.uint64(1)) * np.uint64(_K_STREAM)))
                    + np.uint64(_GOLDEN))
    return (h >> np.uint64(11)).astype(np.float64) * _INV53


class UniformSource:
    """Memoizing view of the uniforms for one seed.

    Samplers take a source rather than a bare seed so that tests can swap in
    perturbed or shifted streams.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK
        self._cache: dict[tuple[int, int], float] = {}

    def __call__(self, t: int, stream: int = 0) -> float:
        key = (t, stream)
        v = self._cache.get(key)
        if v is None:
            v = self._draw(t, stream)
            self._cache[key] = v
        return v

    def _draw(self, t: int, stream: int) -> float:
        return uniform(self.seed, t, stream)


class PerturbedSource(UniformSource):
    """Same as the base seed at times >= ``before``; fresh values earlier."""

    def __init__(self, seed: int, before: int, alt_seed: int):
        super().__init__(seed)
        self.before = before
        self.alt_seed = int(alt_seed) & _MASK

    def _draw(self, t, stream):
        if t < self.before:
            return uniform(self.alt_seed, t, stream)
        return uniform(self.seed, t, stream)


class ShiftedSource(UniformSource):
    """U'_t = U_{t + shift} for the base seed."""

    def __init__(self, seed: int, shift: int):
        super().__init__(seed)
        self.shift = shift

    def _draw(self, t, stream):
        return uniform(self.seed, t + self.shift, stream)


def as_source(seed_or_source) -> UniformSource:
    if isinstance(seed_or_source, UniformSource):
        return seed_or_source
    return UniformSource(int(seed_or_source))
