"""Maximal coupling function, its band layout, and the global depth K(u).

Given a history w, band k of [0, 1) is [a_{k-1}(w), a_k(w)); inside it each
letter g owns a sub-interval of length b_k(g | w) = a_k(g | w) - a_{k-1}(g | w),
left-packed in ascending letter order. A uniform u falling in band k is
turned into a letter by reading only w_-1..w_-k.
"""
from __future__ import annotations

import bisect
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .alphabet import HistorySpec
from .errors import DepthCapExceeded, NegativeIncrement, NormalizationError

DEFAULT_DEPTH_CAP = 1_000_000
CLIP_TOL = 1e-9
SATURATION_TOL = 1e-12


@dataclass(frozen=True)
class Band:
    k: int
    start: float
    end: float
    pieces: tuple  # (letter, lo, hi), ascending letter, empty pieces dropped


@dataclass(frozen=True)
class BandLayout:
    word: tuple
    bands: tuple

    def measure(self, g: int, depth: int | None = None) -> float:
        """Total length owned by ``g`` in bands 0..depth."""
        total = 0.0
        for band in self.bands:
            if depth is not None and band.k > depth:
                break
            for letter, lo, hi in band.pieces:
                if letter == g:
                    total += hi - lo
        return total

    def locate(self, u: float):
        """(letter, k) for the piece containing u, or None past the last band."""
        for band in self.bands:
            for letter, lo, hi in band.pieces:
                if lo <= u < hi:
                    return letter, band.k
        return None

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("k,letter,start,end\n")
        for band in self.bands:
            for letter, lo, hi in band.pieces:
                out.write(f"{band.k},{letter},{lo:.17g},{hi:.17g}\n")
        return out.getvalue()


def _clip(b: float) -> float:
    if b < 0.0:
        if b < -CLIP_TOL:
            raise NegativeIncrement(f"band increment {b:.3g} below -{CLIP_TOL:g}")
        return 0.0
    return b


def build_layout(kernel, h: HistorySpec, depth: int) -> BandLayout:
    G = kernel.alphabet.size
    prev = [0.0] * G
    pos = 0.0
    bands = []
    gen = kernel.ak_bands(h)
    for k in range(depth + 1):
        vec = next(gen)
        if sum(vec) > 1.0 + SATURATION_TOL:
            raise NormalizationError(f"a_{k}(w) = {sum(vec)!r} exceeds 1")
        start = pos
        pieces = []
        for g in range(G):
            b = _clip(vec[g] - prev[g])
            prev[g] += b
            if b > 0.0:
                pieces.append((g, pos, pos + b))
                pos += b
        bands.append(Band(k, start, pos, tuple(pieces)))
    return BandLayout(h.prefix(depth), tuple(bands))


def eval_f(kernel, u: float, h: HistorySpec, cap: int = DEFAULT_DEPTH_CAP):
    """Maximal coupling f(u | h): returns (letter, depth_used).

    Uses the same cumulative arithmetic as :func:`build_layout`. Once the
    bands cover [0, 1) up to ``SATURATION_TOL``, a u in the rounding gap
    goes to the last nonempty piece.
    """
    G = kernel.alphabet.size
    prev = [0.0] * G
    pos = 0.0
    last = None
    k = 0
    for vec in kernel.ak_bands(h):
        for g in range(G):
            b = vec[g] - prev[g]
            if b <= 0.0:
                if b < -CLIP_TOL:
                    raise NegativeIncrement(f"band increment {b:.3g} below -{CLIP_TOL:g}")
                continue
            prev[g] += b
            pos += b
            if u < pos:
                return g, k
            last = (g, k)
        if pos >= 1.0 - SATURATION_TOL and last is not None:
            return last
        k += 1
        if k > cap:
            raise DepthCapExceeded(f"u={u!r} not reached within {cap} bands")
    raise AssertionError("ak_bands ended")


def iterate_f(kernel, u_list: Sequence[float], h: HistorySpec, cap: int = DEFAULT_DEPTH_CAP) -> list:
    """Forward trajectory from ``h`` driven by ``u_list`` (most recent first).

    The oldest uniform ``u_list[-1]`` produces the first letter; the result is
    in forward time order.
    """
    return run_forward(kernel, list(reversed(u_list)), h, cap)


def run_forward(kernel, u_forward: Iterable[float], h: HistorySpec, cap: int = DEFAULT_DEPTH_CAP) -> list:
    out = []
    for u in u_forward:
        g, _ = eval_f(kernel, u, h, cap)
        out.append(g)
        h = h.push(g)
    return out


class AkSequence:
    """The global bounds a_k = inf_w a_k(w), extended lazily up to a cap."""

    def __init__(self, kernel, cap: int = DEFAULT_DEPTH_CAP, initial: int = 64):
        self.kernel = kernel
        self.cap = cap
        self.provenance = getattr(kernel, "a_global_provenance", "enumeration")
        self._values = np.empty(0)
        self._list = []
        self._extend(min(initial, cap))

    @classmethod
    def from_values(cls, values: Sequence[float], cap: int | None = None):
        """Fixed sequence; entries past the end repeat the last value."""
        obj = cls.__new__(cls)
        obj.kernel = None
        obj.provenance = "given"
        vals = np.asarray(values, dtype=float)
        obj.cap = len(vals) - 1 if cap is None else cap
        obj._values = vals
        obj._list = vals.tolist()
        obj._check(vals)
        return obj

    @staticmethod
    def _check(vals):
        if np.any(vals < -1e-12) or np.any(vals > 1 + 1e-12):
            raise NormalizationError("a_k outside [0, 1]")
        if np.any(np.diff(vals) < -1e-12):
            raise NormalizationError("a_k must be nondecreasing")

    def _extend(self, kmax: int) -> None:
        n = len(self._values)
        if kmax < n or self.kernel is None:
            return
        size = min(max(kmax + 1, 2 * n), self.cap + 1)
        new = self.kernel.a_global_array(np.arange(n, size))
        vals = np.concatenate([self._values, new])
        self._check(vals)
        self._values = np.maximum.accumulate(vals)
        self._list = self._values.tolist()

    def __getitem__(self, k: int) -> float:
        if k >= len(self._list):
            self._extend(k)
            if k >= len(self._list):
                return self._list[-1]
        return self._list[k]

    def values(self, kmax: int) -> np.ndarray:
        self._extend(kmax)
        vals = self._values[: kmax + 1]
        if len(vals) < kmax + 1:
            vals = np.concatenate([vals, np.full(kmax + 1 - len(vals), vals[-1])])
        return vals

    def depth(self, u: float) -> int:
        """K(u) = least k with a_k > u."""
        while True:
            k = bisect.bisect_right(self._list, u)
            if k < len(self._list):
                return k
            if len(self._list) > self.cap or self.kernel is None:
                raise DepthCapExceeded(f"no a_k > {u!r} for k <= {self.cap}")
            self._extend(2 * len(self._list))


def depth_K(a_seq: AkSequence, u: float) -> int:
    return a_seq.depth(u)


@dataclass(frozen=True)
class ConditionReport:
    n_max: int
    sum_products: float          # S_n = sum_{k<=n} prod_{j=0..k} a_j
    product: float               # P_n = prod_{j=0..n} a_j
    sum_products_from1: float    # same with products started at j = 1
    product_from1: float
    increment_ratio: float       # (S_n - S_{n/2}) / S_n
    divergence: str              # "diverges" | "converges" | "undecided"
    product_positive: str        # "holds" | "fails" | "undecided"
    heuristic: bool = True

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _verdict_sum(S_n: float, S_half: float) -> tuple:
    if not math.isfinite(S_n) or S_n == 0.0:
        return 0.0, "converges"
    ratio = (S_n - S_half) / S_n
    if ratio > 1e-2:
        return ratio, "diverges"
    if ratio < 1e-6:
        return ratio, "converges"
    return ratio, "undecided"


def check_conditions(a_seq: AkSequence, n_max: int = 100_000) -> ConditionReport:
    """Partial sums of products of a_k, with a heuristic divergence verdict.

    The verdict compares the second half of the partial sum with the whole:
    a sum that still grows by more than 1% over (n/2, n] is reported as
    diverging, one that grows by less than 1e-6 as converging.
    """
    a = np.asarray(a_seq.values(n_max), dtype=float)
    with np.errstate(divide="ignore"):
        logs = np.log(a)
    prods = np.exp(np.cumsum(logs))
    prods1 = np.exp(np.cumsum(logs[1:]))
    S = np.cumsum(prods)
    half = n_max // 2
    S1 = np.cumsum(prods1) if len(prods1) else np.zeros(1)
    ratio, verdict = _verdict_sum(float(S[-1]), float(S[half]))
    P_n = float(prods[-1])
    tail_factor = float(a[-1])
    if P_n == 0.0:
        positive = "fails"
    elif tail_factor >= 1.0 or float(prods[half]) - P_n <= 1e-6 * P_n:
        positive = "holds"
    else:
        positive = "undecided"
    return ConditionReport(n_max, float(S[-1]), P_n,
                           float(S1[-1]) if len(prods1) else 0.0,
                           float(prods1[-1]) if len(prods1) else 1.0,
                           ratio, verdict, positive)
