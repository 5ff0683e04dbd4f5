"""Backward coalescence from information depths, window sampling, diagnostics.

Two depths are provided. ``K_j = K(U_j)`` only looks at U_j through the
global bounds a_k. The history-adaptive ``K'_j`` also looks at the earlier
uniforms: any U_{j-i} that fell in the depth-0 band B_0(g) pins the letter at
time j-i to g, and the infimum A_h over histories respecting those pins can
be much larger than a_h.

The coalescence time for the window [m, n] is the largest s <= m with
K_j <= j - s for every j in [s, n]; the window letters are then obtained by
running the coupling forward from any admissible history placed before s.
"""
from __future__ import annotations

import bisect
import math
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

from .alphabet import HistorySpec, check_history
from .coupling import DEFAULT_DEPTH_CAP, AkSequence, eval_f
from .errors import ConfigError, DepthCapExceeded, UnsupportedKernel
from .randsource import as_source, uniform_array

DEFAULT_MAX_BACK = 10_000_000
ALGORITHMS = ("cff", "adaptive", "hybrid")


def resolve_max_back(max_back: Optional[int] = None) -> int:
    """Explicit value, else ``PERFECTSIM_MAX_BACK``, else the default."""
    if max_back is not None:
        return int(max_back)
    env = os.environ.get("PERFECTSIM_MAX_BACK")
    return int(env) if env else DEFAULT_MAX_BACK


@dataclass
class CoalescenceResult:
    tau: Optional[int]
    window: tuple
    depth_trace: list
    uniforms_consumed: int
    status: str = "coalesced"  # or "depth-cap-hit"
    merge_time: Optional[int] = None  # hybrid only: where all trajectories merged
    algorithm: str = "cff"

    @property
    def anchor(self) -> int:
        return self.window[1]


@dataclass
class SampleRun:
    window: tuple
    letters: list  # forward time order, letters at m..n
    tau_window: int
    seed: int
    kernel: str
    algorithm: str
    labels: list = field(default_factory=list)


def _scan(depth_of, m: int, n: int, max_back: int):
    """Largest s <= m with j - K_j >= s for all j in [s, n]."""
    run_min = math.inf
    s = n
    trace = []
    while True:
        K = depth_of(s)
        trace.append((s, K))
        if s - K < run_min:
            run_min = s - K
        if s <= m and s <= run_min:
            return s, trace
        if n - s + 1 >= max_back:
            raise DepthCapExceeded(f"no coalescence within {max_back} uniforms before {n}")
        s -= 1


class _BandZero:
    """Letter pinned by a uniform in the depth-0 band, or None."""

    def __init__(self, kernel):
        a0 = kernel.ak_vector(())
        self.cum = list(np.cumsum(a0))
        self.G = len(a0)

    def __call__(self, u: float):
        g = bisect.bisect_right(self.cum, u)
        return g if g < self.G else None

    def array(self, u: np.ndarray) -> np.ndarray:
        g = np.searchsorted(np.asarray(self.cum), u, side="right")
        return np.where(g < self.G, g, -1)


class CFFEngine:
    """Coalescence from the history-free depth K(U_j)."""

    name = "cff"

    def __init__(self, kernel, a_seq: AkSequence, depth_cap: int = DEFAULT_DEPTH_CAP):
        if a_seq[0] <= 0.0:
            raise UnsupportedKernel("a_0 = 0: K is never 0, use the hybrid sampler")
        self.kernel = kernel
        self.a_seq = a_seq
        self.depth_cap = depth_cap

    def depth_fn(self, source):
        a_seq = self.a_seq
        return lambda j: a_seq.depth(source(j))

    def window_tau(self, source, m, n, max_back) -> CoalescenceResult:
        before = len(source._cache)
        s, trace = _scan(self.depth_fn(source), m, n, max_back)
        return CoalescenceResult(s, (m, n), trace, len(source._cache) - before, algorithm=self.name)

    def forward(self, source, start, stop, history: HistorySpec) -> list:
        """Letters at times start..stop from ``history`` placed before ``start``."""
        kernel, cap = self.kernel, self.depth_cap
        out = []
        h = history
        for t in range(start, stop + 1):
            g, _ = eval_f(kernel, source(t), h, cap)
            out.append(g)
            h = h.push(g)
        return out


class AdaptiveEngine(CFFEngine):
    """Coalescence from the history-adaptive depth K'_j."""

    name = "adaptive"

    def __init__(self, kernel, a_seq: AkSequence, depth_cap: int = DEFAULT_DEPTH_CAP):
        if kernel.has_forbidden_words:
            raise UnsupportedKernel("adaptive depth needs a kernel without forbidden words")
        super().__init__(kernel, a_seq, depth_cap)
        self.band0 = _BandZero(kernel)

    def depth_fn(self, source):
        kernel, band0, cap = self.kernel, self.band0, self.depth_cap
        memo = {}

        def K_prime(j):
            hit = memo.get(j)
            if hit is not None:
                return hit
            u = source(j)
            acc = kernel.pinned_accumulator()
            h = 0
            while not u < acc.value():
                h += 1
                if h > cap:
                    raise DepthCapExceeded(f"K' at time {j} exceeds {cap}")
                acc.push(band0(source(j - h)))
            memo[j] = h
            return h

        return K_prime


class Sampler:
    """Perfect sampler for one kernel and algorithm.

    Parameters
    ----------
    kernel : Kernel
    algorithm : {"cff", "adaptive", "hybrid"}
    reference : HistorySpec, optional
        History placed before the coalescence time; defaults to the kernel's
        constant-letter-0 history (or a short cycle when that is forbidden).
        The sampled letters never depend on this choice.
    max_back : int, optional
        Maximum number of uniforms scanned backward before giving up.
    coupling : {"modified", "plain"}
        Hybrid only: the per-state coupling or the rescaled plain one.
    """

    def __init__(self, kernel, algorithm: str = "cff", reference: Optional[HistorySpec] = None,
                 max_back: Optional[int] = None, depth_cap: int = DEFAULT_DEPTH_CAP,
                 a_seq: Optional[AkSequence] = None, coupling: str = "modified"):
        if algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {algorithm!r}")
        self.kernel = kernel
        self.algorithm = algorithm
        self.a_seq = a_seq if a_seq is not None else AkSequence(kernel, cap=depth_cap)
        self.max_back = resolve_max_back(max_back)
        if reference is None:
            reference = kernel.default_reference(0)
        check_history(reference, kernel)
        self.reference = reference
        if algorithm == "cff":
            self.engine = CFFEngine(kernel, self.a_seq, depth_cap)
        elif algorithm == "adaptive":
            self.engine = AdaptiveEngine(kernel, self.a_seq, depth_cap)
        else:
            from .hybrid import HybridEngine

            self.engine = HybridEngine(kernel, self.a_seq, depth_cap, coupling=coupling)

    def tau(self, seed, m: int = 0, n: Optional[int] = None, on_cap: str = "raise") -> CoalescenceResult:
        n = m if n is None else n
        if m > n:
            raise ConfigError(f"window [{m}, {n}] has m > n", code="window.invalid")
        source = as_source(seed)
        try:
            return self.engine.window_tau(source, m, n, self.max_back)
        except DepthCapExceeded:
            if on_cap == "raise":
                raise
            return CoalescenceResult(None, (m, n), [], len(source._cache),
                                     status="depth-cap-hit", algorithm=self.algorithm)

    def sample(self, seed, m: int = 0, n: Optional[int] = None) -> SampleRun:
        n = m if n is None else n
        source = as_source(seed)
        res = self.tau(source, m, n)
        letters = self.engine.forward(source, res.tau, n, self.reference)
        letters = letters[m - res.tau:]
        return SampleRun((m, n), letters, res.tau, source.seed, self.kernel.name,
                         self.algorithm, self.kernel.alphabet.to_labels(letters))

    def forward_from(self, seed, start: int, stop: int, history: HistorySpec) -> list:
        return self.engine.forward(as_source(seed), start, stop, history)


def tau0_cff(kernel, a_seq: Optional[AkSequence], seed, anchor: int = 0,
             max_back: Optional[int] = None) -> CoalescenceResult:
    a_seq = a_seq if a_seq is not None else AkSequence(kernel)
    engine = CFFEngine(kernel, a_seq)
    return engine.window_tau(as_source(seed), anchor, anchor, resolve_max_back(max_back))


def tau0_adaptive(kernel, seed, anchor: int = 0, max_back: Optional[int] = None,
                  a_seq: Optional[AkSequence] = None) -> CoalescenceResult:
    a_seq = a_seq if a_seq is not None else AkSequence(kernel)
    engine = AdaptiveEngine(kernel, a_seq)
    return engine.window_tau(as_source(seed), anchor, anchor, resolve_max_back(max_back))


def sample_window(kernel, algorithm: str, seed, m: int, n: int, **kwargs) -> SampleRun:
    return Sampler(kernel, algorithm, **kwargs).sample(seed, m, n)


def adaptive_A(kernel, seed, anchor: int, h: int) -> float:
    """A_h with pins read from U_{anchor-1}, ..., U_{anchor-h}."""
    source = as_source(seed)
    band0 = _BandZero(kernel)
    acc = kernel.pinned_accumulator()
    for i in range(1, h + 1):
        acc.push(band0(source(anchor - i)))
    return acc.value()


def k_prime(kernel, seed, anchor: int, a_seq: Optional[AkSequence] = None) -> int:
    a_seq = a_seq if a_seq is not None else AkSequence(kernel)
    return AdaptiveEngine(kernel, a_seq).depth_fn(as_source(seed))(anchor)


# forward-indexed diagnostics over independent seeds

def forward_uniforms(seed_count: int, n: int, seed0: int = 0) -> np.ndarray:
    """U_0..U_n for seeds seed0..seed0+seed_count-1, shape (seed_count, n+1)."""
    seeds = np.arange(seed0, seed0 + seed_count, dtype=np.uint64)
    return uniform_array(seeds[:, None], np.arange(n + 1)[None, :])


def forward_bounds(kernel, U: np.ndarray, adaptive: bool = True) -> np.ndarray:
    """Column h holds A_h(U_{h-1}, ..., U_0), or a_h if not adaptive."""
    n1 = U.shape[1]
    if not adaptive:
        a = AkSequence(kernel).values(n1 - 1)
        return np.broadcast_to(a, U.shape)
    pins = _BandZero(kernel).array(U)
    return kernel.pinned_bounds_forward(pins)


@dataclass
class MartingaleEstimate:
    n: int
    mean: float
    stderr: float
    count: int


def martingale_diagnostic(kernel, seed_count: int, n: int, seed0: int = 0) -> MartingaleEstimate:
    """Mean of Y_n = prod_h 1{U_h < A_h} / prod_h A_h over independent seeds (theory: 1)."""
    U = forward_uniforms(seed_count, n, seed0)
    A = forward_bounds(kernel, U, adaptive=True)
    alive = np.all(U < A, axis=1)
    with np.errstate(divide="ignore"):
        denom = np.prod(A, axis=1)
    Y = np.where(alive, 1.0 / np.where(alive, denom, 1.0), 0.0)
    stderr = float(Y.std(ddof=1) / math.sqrt(seed_count)) if seed_count > 1 else math.nan
    return MartingaleEstimate(n, float(Y.mean()), stderr, seed_count)


@dataclass
class RegenerationEstimate:
    q: np.ndarray  # q[n] = fraction of seeds with K_j <= j for all j <= n
    count: int
    lower_bound: float  # one-sided 95% Clopper-Pearson bound for q[-1]
    algorithm: str

    def as_dict(self):
        return {"n_max": len(self.q) - 1, "q_n_max": float(self.q[-1]), "count": self.count,
                "lower_bound_95": self.lower_bound, "algorithm": self.algorithm}


def clopper_pearson_lower(successes: int, trials: int, confidence: float = 0.95) -> float:
    if successes == 0:
        return 0.0
    return float(stats.beta.ppf(1.0 - confidence, successes, trials - successes + 1))


def regeneration_diagnostic(kernel, algorithm: str, seed_count: int, n_max: int,
                            seed0: int = 0) -> RegenerationEstimate:
    """q_n = empirical P(K_j <= j for 0 <= j <= n), with K (cff) or K' (adaptive)."""
    if algorithm not in ("cff", "adaptive"):
        raise ValueError("algorithm must be 'cff' or 'adaptive'")
    U = forward_uniforms(seed_count, n_max, seed0)
    A = forward_bounds(kernel, U, adaptive=algorithm == "adaptive")
    ok = np.logical_and.accumulate(U < A, axis=1)
    q = ok.mean(axis=0)
    lb = clopper_pearson_lower(int(ok[:, -1].sum()), seed_count)
    return RegenerationEstimate(q, seed_count, lb, algorithm)
