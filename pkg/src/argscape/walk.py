"""Construction of the tree-valued process along the genome.

Starting from a coalescent tree at the left end of the genome, the walk
repeatedly measures the length L of the retained structure, advances the
position by Exponential(1)/(L*rho), drops a split at a uniform point of
that structure and lets the new branch climb, coalescing at rate 1 per
available line.  Variants differ only in what is retained:

  full       the whole growing graph; every branch ever created stays
             available, so the result is equal in law to the backward
             graph (and inherits its exponential event count in
             rho*(b-a) -- use moderate rates);
  smc        the current tree; the branch from the split point up to its
             ancestral node is deleted before re-coalescence;
  smc-prime  the current tree, nothing deleted;
  macs(k)    the union of the last k trees (k=1 coincides with
             smc-prime under these rules).

The finished graph is emitted as an ordinary event log, so extraction,
tree paths and coupled-tree metrics apply unchanged.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

from scipy import stats

from .arg import COAL, SPLIT, ArgEventLog, Extraction, TreePath, tree_path
from .rng import RandomSource

logger = logging.getLogger(__name__)

_INF = float("inf")


@dataclass(frozen=True)
class WalkVariant:
    kind: str
    k: int = 0

    def __post_init__(self):
        if self.kind not in ("full", "smc", "smc-prime", "macs"):
            raise ValueError(f"unknown walk variant {self.kind!r}")
        if self.kind == "macs" and self.k < 1:
            raise ValueError("macs window must be >= 1")

    @classmethod
    def full(cls):
        return cls("full")

    @classmethod
    def smc(cls):
        return cls("smc")

    @classmethod
    def smc_prime(cls):
        return cls("smc-prime")

    @classmethod
    def macs(cls, k: int):
        return cls("macs", k)

    @classmethod
    def parse(cls, text: str) -> "WalkVariant":
        text = text.strip().lower()
        if text.startswith("macs"):
            digits = text.replace("macs", "").strip("():")
            return cls.macs(int(digits) if digits else 1)
        return cls(text)

    def __str__(self):
        return f"macs({self.k})" if self.kind == "macs" else self.kind


class WalkStep(NamedTuple):
    gap: float  # genome distance advanced by this draw
    retained_length: float  # branch length the draw was measured against


class _HorizonHit(Exception):
    pass


class _Graph:
    """Growing coalescing/splitting graph, kept as rewritable events.

    Lines are particles: born once, dead once.  A coalescence onto the
    interior of a line fragments it, moving the upper part (and its
    recorded death event) to a fresh id, so the event list stays a valid
    particle history throughout.  The never-dying top line is the root
    ray, continued indefinitely; for splitting-measure purposes it is
    capped at ``horizon``.
    """

    def __init__(self, n, rng_uniforms, horizon=_INF):
        self.us = rng_uniforms
        self.horizon = horizon
        self.events: list = []
        self.birth = {}
        self.death = {}
        self.death_event = {}
        self.next_id = 1
        self.top = 0.0
        self.top_line = None
        self.leaves = tuple(range(1, n + 1))
        for x in self.leaves:
            self._add_line(x, 0.0)
        self.next_id = n + 1
        # initial coalescent tree
        t = 0.0
        lineages = list(self.leaves)
        k = n
        while k > 1:
            t += self.us.exponential(k * (k - 1) / 2.0)
            i, j = self.us.pair_index(k)
            a, b = lineages[i], lineages[j]
            lineages[j] = lineages[-1]
            lineages.pop()
            node = self._coalesce(t, a, b)
            lineages[i] = node
            k -= 1
        self.top = t
        self.top_line = lineages[0]

    def _add_line(self, ident, birth):
        self.birth[ident] = birth
        self.death[ident] = None
        self.death_event[ident] = None

    def _fresh(self):
        ident = self.next_id
        self.next_id += 1
        return ident

    def _coalesce(self, t, a, b):
        node = self._fresh()
        self._add_line(node, t)
        idx = len(self.events)
        self.events.append((COAL, t, a, b, node))
        for line in (a, b):
            self.death[line] = t
            self.death_event[line] = idx
        return node

    def _rewrite_participant(self, idx, old, new):
        ev = self.events[idx]
        if ev[0] == COAL:
            _, t, p, q, res = ev
            self.events[idx] = (COAL, t, new if p == old else p, new if q == old else q, res)
        else:
            _, t, p, mark, left, right = ev
            self.events[idx] = (SPLIT, t, new, mark, left, right)

    def fragment(self, line, t):
        """Cut ``line`` at time t; the part above continues as a new id."""
        upper = self._fresh()
        self.birth[upper] = t
        self.death[upper] = self.death[line]
        self.death_event[upper] = self.death_event[line]
        if self.death_event[upper] is not None:
            self._rewrite_participant(self.death_event[upper], line, upper)
        if self.top_line == line:
            self.top_line = upper
        return upper

    def add_split(self, line, t, mark):
        """Split ``line`` at (t, mark): left continues it, right climbs."""
        left = self.fragment(line, t)
        right = self._fresh()
        self._add_line(right, t)
        idx = len(self.events)
        self.events.append((SPLIT, t, line, mark, left, right))
        self.death[line] = t
        self.death_event[line] = idx
        return left, right

    def attach(self, climber, partner, t):
        """Coalesce the climbing line onto ``partner`` at time t."""
        upper = self.fragment(partner, t)
        node = self._fresh()
        self._add_line(node, t)
        # the merged line continues along the partner's physical path
        idx = len(self.events)
        self.events.append((COAL, t, climber, partner, node))
        self.death[climber] = t
        self.death_event[climber] = idx
        self.death[partner] = t
        self.death_event[partner] = idx
        # reconnect: the fresh upper piece of the partner is the continuation
        # of the merged line; they are the same physical line, so merge ids.
        self._merge_ids(upper, node)
        self.top = max(self.top, t)
        return node

    def _merge_ids(self, upper, node):
        # ``upper`` was created by fragment() with the partner's future;
        # the coalescence result ``node`` takes over that future.
        self.death[node] = self.death.pop(upper)
        self.death_event[node] = self.death_event.pop(upper)
        if self.death_event[node] is not None:
            self._rewrite_participant(self.death_event[node], upper, node)
        if self.top_line == upper:
            self.top_line = node
        self.birth.pop(upper)

    def sorted_events(self):
        return tuple(sorted(self.events, key=lambda e: e[1]))

    def full_measure_segments(self):
        cap = self.horizon
        out = []
        for line, b in self.birth.items():
            d = self.death[line]
            hi = cap if d is None else min(d, cap)
            if hi > b:
                out.append((b, hi, line))
        return out

    def full_avail_segments(self):
        out = []
        for line, b in self.birth.items():
            d = self.death[line]
            out.append((b, _INF if d is None else d, line))
        return out


def _choose_point(us, segments):
    total = sum(hi - lo for lo, hi, _ in segments)
    x = us.uniform() * total
    for lo, hi, line in segments:
        w = hi - lo
        if x < w:
            return line, lo + x
        x -= w
    lo, hi, line = segments[-1]
    return line, hi


def _climb(us, start, avail, exclude, horizon):
    """Simulate the re-coalescence of a branch born at ``start``.

    ``avail``: (lo, hi, line) segments available for coalescence (hi may
    be inf).  Returns (coalescence time, partner line).
    """
    bounds = sorted({x for lo, hi, _ in avail for x in (lo, hi) if start < x < _INF})
    h = start
    bi = 0
    while bi < len(bounds) and bounds[bi] <= h:
        bi += 1
    while True:
        live = [line for lo, hi, line in avail if lo <= h < hi and line not in exclude]
        m = len(live)
        ceiling = bounds[bi] if bi < len(bounds) else _INF
        if m == 0:
            if ceiling == _INF:
                raise RuntimeError("no line available for re-coalescence; invalid structure")
            h = ceiling
            bi += 1
            continue
        e = us.exponential(m)
        if h + e < ceiling:
            h += e
            if h > horizon:
                raise _HorizonHit
            return h, live[us.index(m)]
        h = ceiling
        bi += 1
        if h > horizon:
            raise _HorizonHit


def _tree_structure(events_sorted, leaves, locus):
    """Extended extraction plus per-particle tree chunks.

    Returns (extraction, chunks, lineage_of, root_chain) where ``chunks``
    maps particle -> (lo, hi) for the pre-root tree skeleton, and
    ``root_chain`` is the particle chain continuing above the root,
    finishing with an unbounded piece.
    """
    ex = Extraction.replay(events_sorted, leaves, locus, extended=True)
    root_t = ex.root_time
    merge_at = {}
    for t, a, b, node in ex.tree.merges:
        merge_at[a] = (t, node)
        merge_at[b] = (t, node)
    chunks = {}
    lineage_of = {}
    for x in leaves:
        route = ex.routes[x]
        lineage = x
        for i, (t_in, p) in enumerate(route):
            if t_in >= root_t:
                break
            t_out = route[i + 1][0] if i + 1 < len(route) else root_t
            while lineage in merge_at and merge_at[lineage][0] <= t_in:
                lineage = merge_at[lineage][1]
            hi = min(t_out, merge_at[lineage][0]) if lineage in merge_at else root_t
            if hi > t_in and p not in chunks:
                chunks[p] = (t_in, hi)
                lineage_of[p] = lineage
    # continuation above the root, ending in an unbounded top piece
    route = ex.routes[leaves[0]]
    chain = []
    for i, (t_in, p) in enumerate(route):
        t_out = route[i + 1][0] if i + 1 < len(route) else _INF
        if t_out <= root_t:
            continue
        chain.append((max(t_in, root_t), t_out, p))
    if not chain:
        chain.append((root_t, _INF, ex.root_node))
    elif chain[-1][1] < _INF:
        lo, hi, p = chain[-1]
        chain[-1] = (lo, _INF, p)
    return ex, chunks, lineage_of, chain


def _deleted_chain(chunks, lineage_of, tree, line, t):
    """Particles forming the branch from (line, t) up to its tree node."""
    lineage = lineage_of[line]
    merge_time = None
    for mt, a, b, node in tree.merges:
        if a == lineage or b == lineage:
            merge_time = mt
            break
    out = set()
    for p, (lo, hi) in chunks.items():
        if lineage_of[p] == lineage and hi > t:
            if merge_time is None or lo < merge_time:
                out.add(p)
    return out


def sample_walk(
    n: int,
    a: float,
    b: float,
    rho: float,
    variant: WalkVariant,
    rng: RandomSource,
) -> TreePath:
    """Run the along-genome construction and return its tree path.

    The path carries the finished event log (``source``) and the drawn
    (gap, retained length) steps (``walk_trace``), including the final
    overshooting gap.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if a >= b:
        raise ValueError("need a < b")
    if rho <= 0:
        raise ValueError("rho must be positive (use ~1e-12 for the no-recombination limit)")
    us = rng.uniforms()
    # 20 expected tree heights; splits above never matter in practice
    horizon = 20.0 * 2.0 * (1.0 - 1.0 / n) if n > 1 else 40.0
    graph = _Graph(n, us, horizon=horizon if variant.kind == "full" else _INF)
    trace: list[WalkStep] = []
    position = a
    markov = variant.kind in ("smc", "smc-prime", "macs")
    window = variant.k if variant.kind == "macs" else 1
    mark_history: list[float] = []

    while True:
        if variant.kind == "full":
            measure = graph.full_measure_segments()
            current = None
        else:
            # re-extract the retained trees so segments carry current ids
            events_sorted = graph.sorted_events()
            loci = mark_history[-(window - 1) :] if window > 1 else []
            structures = [
                _tree_structure(events_sorted, graph.leaves, locus) for locus in loci
            ]
            structures.append(_tree_structure(events_sorted, graph.leaves, b))
            current = structures[-1]
            union: dict = {}
            for _, chunks, _, _ in structures:
                for p, (lo, hi) in chunks.items():
                    if p in union:
                        union[p] = (min(union[p][0], lo), max(union[p][1], hi))
                    else:
                        union[p] = (lo, hi)
            measure = [(lo, hi, p) for p, (lo, hi) in union.items()]
        total_len = sum(hi - lo for lo, hi, _ in measure)
        if total_len <= 0.0:
            break
        gap = us.exponential(total_len * rho)
        trace.append(WalkStep(gap, total_len))
        position += gap
        if position > b:
            break

        line, t_x = _choose_point(us, measure)
        if variant.kind == "full":
            avail = graph.full_avail_segments()
            exclude = set()
        else:
            _, chunks_cur, lineage_of_cur, chain_cur = current
            merged: dict = {p: (lo, hi) for lo, hi, p in measure}
            for lo, hi, p in chain_cur:
                if p in merged:
                    merged[p] = (min(merged[p][0], lo), max(merged[p][1], hi))
                else:
                    merged[p] = (lo, hi)
            avail = [(lo, hi, p) for p, (lo, hi) in merged.items()]
            exclude = set()
            if variant.kind == "smc" and line in lineage_of_cur:
                exclude = _deleted_chain(
                    chunks_cur, lineage_of_cur, current[0].tree, line, t_x
                )

        while True:
            try:
                t_c, partner = _climb(us, t_x, avail, exclude, horizon + 2.0 * horizon)
                break
            except _HorizonHit:
                logger.warning("re-coalescence horizon hit at position %s; resampling", position)

        left, right = graph.add_split(line, t_x, position)
        if partner == line:
            partner = left  # the split moved the upper part to a new id
        graph.attach(right, partner, t_c)
        mark_history.append(position)

    log = ArgEventLog(
        n, a, b, rho, graph.sorted_events(), seed=rng.master_seed, style=f"walk-{variant}"
    )
    path = tree_path(log, log.leaves)
    return TreePath(
        path.a,
        path.b,
        path.breakpoints,
        path.trees,
        source=log,
        leaf_set=path.leaf_set,
        walk_trace=tuple(trace),
    )


class IntensityReport(NamedTuple):
    n_gaps: int
    ks_statistic: float
    p_value: float


def breakpoint_intensity_check(path: TreePath, rho: float) -> IntensityReport:
    """Probability-integral-transform check of the walk's gap law.

    Conditionally on the retained length L, each drawn gap is
    Exponential(L*rho); the transforms 1 - exp(-rho L g) must be uniform.
    """
    if not path.walk_trace:
        raise ValueError("path carries no walk trace")
    pit = [1.0 - math.exp(-rho * step.retained_length * step.gap) for step in path.walk_trace]
    return pooled_intensity_check_values(pit)


def pooled_intensity_check_values(pit_values) -> IntensityReport:
    stat = stats.kstest(pit_values, "uniform")
    return IntensityReport(len(pit_values), float(stat.statistic), float(stat.pvalue))
