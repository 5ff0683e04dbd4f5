"""Coupling from the past when a_0 = 0 but a_1 > 0.

A step whose uniform falls below a_1 is markovian: the maximal coupling only
reads the previous letter there. A block of consecutive markovian steps in
which the trajectories started from every letter merge (classical CFTP) makes
the letters after the block independent of the earlier past, as long as the
later steps do not look back past the merge point.

Two couplings drive the markovian steps. :class:`MarkovRestriction` reuses
the maximal coupling rescaled to [0, a_1) with one shared uniform.
:class:`ModifiedCoupling` rearranges band 1 so that every letter with
a_1(g | w) > 0 gets mass inside [0, a_1), and lets each starting letter use
its own uniform until the trajectories meet.
"""
from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .alphabet import HistorySpec
from .coupling import DEFAULT_DEPTH_CAP, AkSequence, eval_f
from .depth import CoalescenceResult
from .errors import DegenerateRegime, DepthCapExceeded


def _row_pieces(kernel, w: int):
    """Bands 0 and 1 of the maximal coupling given w_-1 = w, as (lo, hi, letter, k)."""
    G = kernel.alphabet.size
    gen = kernel.ak_bands(kernel.history_ending_in(w))
    prev = [0.0] * G
    pos = 0.0
    pieces = []
    for k in (0, 1):
        vec = next(gen)
        for g in range(G):
            b = vec[g] - prev[g]
            if b <= 0.0:
                continue
            prev[g] += b
            pieces.append((pos, pos + b, g, k))
            pos += b
    return pieces, pos


class MarkovRestriction:
    """tilde_f(u | w) = f(a_1 u | any history with w_-1 = w), and its kernel M."""

    name = "plain"

    def __init__(self, kernel, a_seq: Optional[AkSequence] = None):
        self.kernel = kernel
        a_seq = a_seq if a_seq is not None else AkSequence(kernel)
        self.a0, self.a1 = a_seq[0], a_seq[1]
        if self.a1 <= 0.0:
            raise DegenerateRegime("a_1 = 0: no markovian regime")
        self.states = sorted(getattr(kernel, "ext", range(kernel.alphabet.size)))
        G = kernel.alphabet.size
        self._rows = {}
        self._ends = {}
        for w in self.states:
            pieces, end = self._arrange(w)
            self._rows[w] = ([p[1] for p in pieces], [(p[2], p[3]) for p in pieces])
            self._ends[w] = end
        self.M = np.zeros((G, G))
        for w in self.states:
            for lo, hi, g, _ in self.pieces(w):
                self.M[w, g] += (min(hi, self.a1) - min(lo, self.a1)) / self.a1

    def _arrange(self, w):
        return _row_pieces(self.kernel, w)

    def pieces(self, w):
        his, labels = self._rows[w]
        los = [0.0] + his[:-1]
        return [(lo, hi, g, k) for lo, hi, (g, k) in zip(los, his, labels)]

    def band_end(self, w) -> float:
        """a_1(w) as accumulated by the layout: u beyond it needs a deeper past."""
        return self._ends[w]

    def local(self, v: float, w: int):
        """(letter, depth) for v < a_1(w), reading only w_-1 = w."""
        his, labels = self._rows[w]
        i = bisect.bisect_right(his, v)
        if i >= len(his):
            i = len(his) - 1
        return labels[i]

    def tilde_f(self, u: float, w: int) -> int:
        return self.local(self.a1 * u, w)[0]

    # one step of the process at time t
    def step(self, source, t: int, h: HistorySpec, cap: int = DEFAULT_DEPTH_CAP):
        u0 = source(t)
        w = h.letter_at(1)
        if u0 < self._ends[w]:
            return self.local(u0, w)
        return eval_f(self.kernel, u0, h, cap)

    def markov_step(self, source, t: int, w: int) -> int:
        return self.tilde_f(source(t) / self.a1, w)

    def block_step(self, row, w: int) -> int:
        return self.tilde_f(row, w)


class ModifiedCoupling(MarkovRestriction):
    """Band 1 split so that each letter owns mass inside [0, a_1); per-state streams.

    Every band-1 piece b_1(h | w) is divided in the proportion
    r = (a_1 - a_0) / (a_1(w) - a_0): the part B1 of length r * b_1 is packed
    into [a_0, a_1), the part B2 into [a_1, a_1(w)). At a markovian step the
    trajectory sitting at letter w draws u^w from stream w + 1.
    """

    name = "modified"

    def _arrange(self, w):
        pieces, end = _row_pieces(self.kernel, w)
        band0 = [p for p in pieces if p[3] == 0]
        band1 = [p for p in pieces if p[3] == 1]
        a0, a1 = self.a0, self.a1
        start = band0[-1][1] if band0 else 0.0
        width = end - start
        r = (a1 - start) / width if width > 0 else 0.0
        out = list(band0)
        for part, lo0, hi_end in ((r, start, a1), (1.0 - r, a1, end)):
            if part <= 0.0:
                continue
            pos = lo0
            for i, (lo, hi, g, k) in enumerate(band1):
                nxt = hi_end if i == len(band1) - 1 else pos + part * (hi - lo)
                if nxt > pos:
                    out.append((pos, nxt, g, 1))
                pos = nxt
        return out, end

    def step(self, source, t, h, cap=DEFAULT_DEPTH_CAP):
        u0 = source(t)
        w = h.letter_at(1)
        if u0 < self.a1:
            return self.local(self.a1 * source(t, w + 1), w)
        if u0 < self._ends[w]:
            return self.local(u0, w)
        return eval_f(self.kernel, u0, h, cap)

    def markov_step(self, source, t, w):
        return self.tilde_f(source(t, w + 1), w)

    def block_step(self, row, w):
        return self.tilde_f(row[w], w)


def build_markov_restriction(kernel, a_seq: Optional[AkSequence] = None) -> MarkovRestriction:
    return MarkovRestriction(kernel, a_seq)


def detect_coalescence(coupling: MarkovRestriction, u_block) -> bool:
    """True iff the trajectories from every letter merge by the end of the block.

    ``u_block`` lists the rescaled uniforms oldest first: shape (n,) for the
    plain restriction, (n, |G|) with one column per current letter for the
    modified coupling.
    """
    states = set(coupling.states)
    for row in u_block:
        states = {coupling.block_step(row, w) for w in states}
        if len(states) == 1:
            return True
    return len(states) == 1


class HybridEngine:
    """Backward coalescence time from markovian merging blocks plus a depth guard."""

    name = "hybrid"

    def __init__(self, kernel, a_seq: AkSequence, depth_cap: int = DEFAULT_DEPTH_CAP,
                 coupling: str = "modified"):
        self.kernel = kernel
        self.a_seq = a_seq
        self.depth_cap = depth_cap
        if coupling == "modified":
            self.coupling = ModifiedCoupling(kernel, a_seq)
        elif coupling == "plain":
            self.coupling = MarkovRestriction(kernel, a_seq)
        else:
            raise ValueError(f"unknown coupling {coupling!r}")

    def anchor_tau(self, source, t: int, max_back: int, K: dict):
        """(m, l) for anchor t: largest m with a merging markovian block [m, l]
        and K_j <= j - l for j in (l, t]."""
        a1, a_seq, cp = self.coupling.a1, self.a_seq, self.coupling
        states = cp.states
        m = t
        while True:
            if t - m + 1 > max_back:
                raise DepthCapExceeded(f"no hybrid coalescence within {max_back} uniforms before {t}")
            if source(m) < a1:
                cur = set(states)
                pos = m
                merged_at = None
                while pos <= t and source(pos) < a1:
                    cur = {cp.markov_step(source, pos, w) for w in cur}
                    if len(cur) == 1:
                        merged_at = pos
                        break
                    pos += 1
                if merged_at is not None:
                    l = merged_at
                    ok = True
                    for j in range(t, l, -1):
                        Kj = K.get(j)
                        if Kj is None:
                            Kj = K[j] = a_seq.depth(source(j))
                        if j - Kj < l:
                            ok = False
                            break
                    if ok:
                        return m, l
            m -= 1

    def window_tau(self, source, m, n, max_back) -> CoalescenceResult:
        before = len(source._cache)
        K = {}
        best = None
        for t in range(n, m - 1, -1):
            mt, lt = self.anchor_tau(source, t, max_back, K)
            if best is None or mt < best[0]:
                best = (mt, lt)
        trace = sorted(K.items(), reverse=True)
        return CoalescenceResult(best[0], (m, n), trace, len(source._cache) - before,
                                 merge_time=best[1], algorithm=self.name)

    def forward(self, source, start, stop, history: HistorySpec) -> list:
        cp, cap = self.coupling, self.depth_cap
        out = []
        h = history
        for t in range(start, stop + 1):
            g, _ = cp.step(source, t, h, cap)
            out.append(g)
            h = h.push(g)
        return out


def tau0_hybrid(kernel, coupling: Optional[str], a_seq: Optional[AkSequence], seed, anchor: int = 0,
                max_back: Optional[int] = None) -> CoalescenceResult:
    from .depth import resolve_max_back
    from .randsource import as_source

    a_seq = a_seq if a_seq is not None else AkSequence(kernel)
    engine = HybridEngine(kernel, a_seq, coupling=coupling or "modified")
    return engine.window_tau(as_source(seed), anchor, anchor, resolve_max_back(max_back))


@dataclass
class GraphReport:
    arcs: list
    classes: list
    closed_classes: list
    periods: list  # one per closed class
    single_class: bool
    aperiodic: bool
    condition_ii: bool
    condition_iii: bool
    a0: float

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True)


def _period(members, succ) -> int:
    members = set(members)
    root = min(members)
    level = {root: 0}
    queue = [root]
    g = 0
    while queue:
        nxt = []
        for v in queue:
            for u in succ[v]:
                if u not in members:
                    continue
                if u not in level:
                    level[u] = level[v] + 1
                    nxt.append(u)
                else:
                    g = math.gcd(g, level[v] + 1 - level[u])
        queue = nxt
    return g if g else 0  # 0: a single letter without a self-loop


def graph_from_arcs(n: int, arcs, a0: float = 0.0) -> GraphReport:
    arcs = sorted(set(arcs))
    succ = [[] for _ in range(n)]
    for a, b in arcs:
        succ[a].append(b)
    rows = [a for a, _ in arcs]
    cols = [b for _, b in arcs]
    adj = csr_matrix((np.ones(len(arcs)), (rows, cols)), shape=(n, n))
    _, labels = connected_components(adj, directed=True, connection="strong")
    classes = {}
    for v, c in enumerate(labels):
        classes.setdefault(int(c), []).append(v)
    classes = sorted(classes.values())
    closed = [c for c in classes
              if all(b in c for v in c for b in succ[v]) and any(succ[v] for v in c)]
    periods = [_period(c, succ) for c in closed]
    single = len(closed) == 1
    aperiodic = single and periods[0] == 1
    cond_iii = all(any((w, g) not in set(arcs) for w in range(n)) for g in range(n))
    return GraphReport([list(a) for a in arcs], classes, closed, periods, single,
                       aperiodic, single and aperiodic, cond_iii, float(a0))


def graph_conditions(kernel) -> GraphReport:
    """Arcs {(w, g): a_1(g | w) > 0}, their classes, and the hybrid conditions."""
    states = sorted(getattr(kernel, "ext", range(kernel.alphabet.size)))
    arcs = [(w, g) for w in states for g in range(kernel.alphabet.size)
            if kernel.ak(g, (w,)) > 0.0]
    return graph_from_arcs(kernel.alphabet.size, arcs, a0=sum(kernel.ak_vector(())))
