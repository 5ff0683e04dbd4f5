"""Independent references for exactness checks.

For a kernel whose dependence on the past stops at depth m, the process is an
order-m Markov chain on admissible words of length m, and its stationary law
is the unique law of the process. The sampler's empirical window laws are
compared against it in total variation.
"""
from __future__ import annotations

import itertools
import json
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np
from scipy import stats

from .alphabet import is_admissible_prefix, random_admissible_history
from .coupling import build_layout
from .errors import NotFiniteMemory, SupportMismatch

ROW_TOL = 1e-12
DENSE_LIMIT = 4096


@dataclass
class TruncatedChainOracle:
    m: int
    states: list        # words of length m, most recent first
    P: np.ndarray       # transition matrix over states
    pi: np.ndarray      # stationary distribution
    residual: float
    method: str

    def letter_marginal(self) -> np.ndarray:
        G = 1 + max(g for s in self.states for g in s)
        out = np.zeros(G)
        for s, p in zip(self.states, self.pi):
            out[s[0]] += p
        return out


def _states(kernel, m: int) -> list:
    if hasattr(kernel, "admissible_words"):
        return sorted(kernel.admissible_words(m))
    G = kernel.alphabet.size
    words = itertools.product(range(G), repeat=m)
    if not kernel.has_forbidden_words:
        return sorted(words)
    return sorted(w for w in words if is_admissible_prefix(w, kernel))


def stationary_oracle(kernel, m: Optional[int] = None, tol: float = 1e-12,
                      max_iter: int = 200_000) -> TruncatedChainOracle:
    """Stationary law of the order-m chain given by the kernel's depth-m bounds.

    a_m(g | w) equals p(g | w) exactly when the memory is at most m; any row
    of bounds that does not sum to 1 proves otherwise.
    """
    m = kernel.memory if m is None else m
    if m is None:
        raise NotFiniteMemory(f"{kernel.name} does not certify a finite memory")
    m = max(int(m), 1)
    states = _states(kernel, m)
    index = {s: i for i, s in enumerate(states)}
    n = len(states)
    P = np.zeros((n, n))
    for i, s in enumerate(states):
        row = kernel.ak_vector(s)
        if abs(sum(row) - 1.0) > ROW_TOL:
            raise NotFiniteMemory(f"bounds at depth {m} sum to {sum(row)!r} after {s}")
        for g, p in enumerate(row):
            if p > 0.0:
                P[i, index[(g,) + s[:-1]]] += p
    pi = np.full(n, 1.0 / n)
    method = "power"
    residual = np.inf
    for _ in range(max_iter):
        nxt = pi @ P
        residual = float(np.abs(nxt - pi).sum())
        pi = nxt
        if residual < tol:
            break
    if residual >= tol:
        if n > DENSE_LIMIT:
            raise NotFiniteMemory(f"power iteration did not converge on {n} states")
        A = np.vstack([P.T - np.eye(n), np.ones(n)])
        b = np.zeros(n + 1)
        b[-1] = 1.0
        pi = np.linalg.lstsq(A, b, rcond=None)[0]
        pi = np.clip(pi, 0.0, None)
        pi /= pi.sum()
        residual = float(np.abs(pi @ P - pi).sum())
        method = "solve"
    pi = pi / pi.sum()
    return TruncatedChainOracle(m, states, P, pi, residual, method)


def window_law(oracle: TruncatedChainOracle, length: int) -> dict:
    """Law of (X_1, ..., X_length) in forward order under the stationary chain."""
    law = Counter()
    index = {s: i for i, s in enumerate(oracle.states)}
    m = oracle.m
    for s, p in zip(oracle.states, oracle.pi):
        if p == 0.0:
            continue
        if length <= m:
            law[tuple(reversed(s[:length]))] += p
            continue
        # extend the state forward by length - m letters
        paths = [(s, p, tuple(reversed(s)))]
        for _ in range(length - m):
            nxt = []
            for cur, q, fw in paths:
                row = oracle.P[index[cur]]
                for j in np.nonzero(row)[0]:
                    new = oracle.states[j]
                    nxt.append((new, q * row[j], fw + (new[0],)))
            paths = nxt
        for _, q, fw in paths:
            law[fw] += q
    return dict(law)


def empirical_law(windows) -> dict:
    counts = Counter(tuple(w) for w in windows)
    total = sum(counts.values())
    return {k: v / total for k, v in counts.items()}


def _aligned(empirical, exact, zero_cells: bool):
    """Both laws as arrays over one outcome list.

    Outcomes absent from ``exact`` (a missing key, or a shape mismatch) are a
    support mismatch. With ``zero_cells`` set, so is an observed outcome whose
    exact probability is 0.
    """
    if isinstance(empirical, Mapping) and isinstance(exact, Mapping):
        extra = [k for k in empirical if k not in exact and empirical[k] > 0]
        if zero_cells:
            extra += [k for k in empirical if exact.get(k) == 0.0 and empirical[k] > 0]
        if extra:
            raise SupportMismatch(f"observed outcomes outside the exact support: {extra[:5]}")
        keys = sorted(set(exact) | set(empirical))
        return (np.array([empirical.get(k, 0.0) for k in keys], dtype=float),
                np.array([exact.get(k, 0.0) for k in keys], dtype=float))
    a = np.asarray(empirical, dtype=float)
    b = np.asarray(exact, dtype=float)
    if a.shape != b.shape:
        raise SupportMismatch(f"shapes {a.shape} and {b.shape} differ")
    if zero_cells and np.any((b == 0) & (a > 0)):
        raise SupportMismatch("observed outcomes with exact probability 0")
    return a, b


def tv_distance(empirical, exact) -> float:
    a, b = _aligned(empirical, exact, zero_cells=False)
    return 0.5 * float(np.abs(a - b).sum())


def chi_square(empirical_counts, exact) -> tuple:
    """(statistic, p-value) of observed counts against exact probabilities."""
    a, b = _aligned(empirical_counts, exact, zero_cells=True)
    keep = b > 0
    a, b = a[keep], b[keep]
    expected = b / b.sum() * a.sum()
    res = stats.chisquare(a, expected)
    return float(res.statistic), float(res.pvalue)


def measure_audit(kernel, depth: int, n_histories: int, seed: int = 0) -> float:
    """max |sum_{k<=d} |B_k(g|w)| - a_d(g|w)| over random admissible histories."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_histories):
        h = random_admissible_history(kernel, rng, max_recent=depth)
        layout = build_layout(kernel, h, depth)
        word = h.prefix(depth)
        for g in range(kernel.alphabet.size):
            worst = max(worst, abs(layout.measure(g, depth) - kernel.ak(g, word)))
    return worst


@dataclass
class VerificationResult:
    test: str
    statistic: float
    threshold: float
    passed: bool

    def as_dict(self):
        return {"test": self.test, "statistic": self.statistic,
                "threshold": self.threshold, "pass": self.passed}


def report_json(results) -> str:
    return json.dumps([r.as_dict() for r in results], indent=2, sort_keys=True)
