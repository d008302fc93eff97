"""Backward-in-time ancestral recombination graphs.

An event log records one realization: coalescences ("coal", t, a, b, result)
and splits ("split", t, particle, mark, left, right) in increasing time,
over a genome interval [a, b] with per-line split rate rho*(b-a) and
uniform marks.  Trees at any locus are deterministic replays of the log:
follow a leaf set forward through the events, merging on joint
coalescences and choosing the left child at a split iff the locus is <=
the mark.  Merged lineages take the identity of the coalescence's result
particle, so trees extracted at different loci share node identities
whenever they share the merge event.

Two samplers produce logs of identical extracted-tree law:

* ``style="gm"`` splits every line (the literal dynamics).  Its particle
  count is a birth-death chain with birth rate rho*(b-a)*k, and the event
  count grows exponentially in rho*(b-a); use it at moderate rates.
* ``style="hudson"`` only splits where a mark would separate material that
  is ancestral to the sample, and retires genome segments once they have
  fully coalesced.  It stays cheap at high recombination rates.
"""

from __future__ import annotations

import bisect
import json
from dataclasses import dataclass, field
from functools import cached_property

from .rng import RandomSource
from .trees import UltrametricTree

COAL = "coal"
SPLIT = "split"


@dataclass(frozen=True)
class ArgEventLog:
    n_leaves: int
    a: float
    b: float
    rho: float
    events: tuple
    leaves: tuple = ()
    seed: int | None = None
    style: str = "gm"

    def __post_init__(self):
        if not self.leaves:
            object.__setattr__(self, "leaves", tuple(range(1, self.n_leaves + 1)))
        object.__setattr__(self, "events", tuple(tuple(e) for e in self.events))
        if len(self.leaves) != self.n_leaves:
            raise ValueError("leaves must enumerate the initial particles")

    @property
    def terminal_time(self) -> float:
        return self.events[-1][1] if self.events else 0.0

    @property
    def split_count(self) -> int:
        return sum(1 for e in self.events if e[0] == SPLIT)

    def split_marks(self) -> tuple:
        return tuple(e[3] for e in self.events if e[0] == SPLIT)

    def particle_count_trajectory(self) -> tuple:
        """Counts after each event, starting from n_leaves."""
        k = self.n_leaves
        out = [k]
        for e in self.events:
            k += 1 if e[0] == SPLIT else -1
            out.append(k)
        return tuple(out)

    def validate(self) -> None:
        alive = set(self.leaves)
        prev = 0.0
        for e in self.events:
            t = e[1]
            if t <= prev and prev > 0.0:
                raise ValueError("event times must be strictly increasing")
            prev = t
            if e[0] == COAL:
                _, _, p, q, res = e
                if p not in alive or q not in alive or p == q:
                    raise ValueError(f"coalescence at t={t} references dead particles")
                alive.discard(p)
                alive.discard(q)
                alive.add(res)
            elif e[0] == SPLIT:
                _, _, p, mark, left, right = e
                if p not in alive:
                    raise ValueError(f"split at t={t} references a dead particle")
                if not (self.a <= mark <= self.b):
                    raise ValueError(f"mark {mark} outside the genome")
                alive.discard(p)
                alive.add(left)
                alive.add(right)
            else:
                raise ValueError(f"unknown event kind {e[0]!r}")
        if self.style == "gm" and self.events and len(alive) != 1:
            raise ValueError("log must end with a single particle")

    # -- serialization: JSON lines, one event per line ---------------------

    def to_jsonl(self) -> str:
        header = {
            "n": self.n_leaves,
            "a": self.a,
            "b": self.b,
            "rho": self.rho,
            "seed": self.seed,
            "style": self.style,
            "leaves": list(self.leaves),
        }
        lines = [json.dumps(header)]
        for e in self.events:
            if e[0] == COAL:
                lines.append(json.dumps({"t": e[1], "type": "coal", "parts": [e[2], e[3], e[4]]}))
            else:
                lines.append(
                    json.dumps({"t": e[1], "type": "split", "parts": [e[2], e[4], e[5]], "mark": e[3]})
                )
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "ArgEventLog":
        rows = [json.loads(line) for line in text.strip().splitlines() if line.strip()]
        header, events = rows[0], []
        for r in rows[1:]:
            if r["type"] == "coal":
                events.append((COAL, r["t"], r["parts"][0], r["parts"][1], r["parts"][2]))
            else:
                events.append((SPLIT, r["t"], r["parts"][0], r["mark"], r["parts"][1], r["parts"][2]))
        return cls(
            n_leaves=header["n"],
            a=header["a"],
            b=header["b"],
            rho=header["rho"],
            events=tuple(events),
            leaves=tuple(header["leaves"]),
            seed=header.get("seed"),
            style=header.get("style", "gm"),
        )


# ---------------------------------------------------------------------------
# Samplers
# ---------------------------------------------------------------------------


def sample_arg(
    n: int, a: float, b: float, rho: float, rng: RandomSource, style: str = "gm"
) -> ArgEventLog:
    """Simulate one realization of the n-line graph over genome [a, b].

    While k lines remain, the next event is a coalescence of a uniform pair
    with probability (k-1)/2 over ((k-1)/2 + rho(b-a)), else a split of a
    uniform line marked Uniform[a, b].
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if a >= b:
        raise ValueError("need a < b")
    if rho <= 0:
        raise ValueError("rho must be positive (use ~1e-12 for the no-recombination limit)")
    if style == "gm":
        events = _sample_gm(n, a, b, rho, rng)
    elif style == "hudson":
        events = _sample_hudson(n, a, b, rho, rng)
    else:
        raise ValueError(f"unknown style {style!r}")
    return ArgEventLog(n, a, b, rho, tuple(events), seed=rng.master_seed, style=style)


def _sample_gm(n, a, b, rho, rng):
    us = rng.uniforms()
    lam = rho * (b - a)
    width = b - a
    particles = list(range(1, n + 1))
    next_id = n + 1
    events = []
    t = 0.0
    k = n
    while k > 1:
        crate = k * (k - 1) * 0.5
        total = crate + lam * k
        t += us.exponential(total)
        if us.uniform() * total < crate:
            i, j = us.pair_index(k)
            p, q = particles[i], particles[j]
            particles[j] = particles[-1]
            particles.pop()
            particles[i] = next_id
            events.append((COAL, t, p, q, next_id))
            next_id += 1
            k -= 1
        else:
            i = us.index(k)
            p = particles[i]
            mark = a + us.uniform() * width
            left, right = next_id, next_id + 1
            next_id += 2
            particles[i] = left
            particles.append(right)
            events.append((SPLIT, t, p, mark, left, right))
            k += 1
    return events


def _split_material(material, cut):
    left, right = [], []
    for lo, hi, cnt in material:
        if hi <= cut:
            left.append((lo, hi, cnt))
        elif lo >= cut:
            right.append((lo, hi, cnt))
        else:
            left.append((lo, cut, cnt))
            right.append((cut, hi, cnt))
    return left, right


def _merge_material(m1, m2, n):
    """Union of two ancestral-interval lists; overlaps add leaf counts and
    fully covered stretches (count == n) are retired."""
    cuts = sorted({x for lo, hi, _ in m1 + m2 for x in (lo, hi)})
    out = []
    for lo, hi in zip(cuts, cuts[1:]):
        mid = 0.5 * (lo + hi)
        cnt = 0
        for lo1, hi1, c in m1:
            if lo1 <= mid < hi1:
                cnt += c
                break
        for lo2, hi2, c in m2:
            if lo2 <= mid < hi2:
                cnt += c
                break
        if 0 < cnt < n:
            if out and out[-1][1] == lo and out[-1][2] == cnt:
                out[-1] = (out[-1][0], hi, cnt)
            else:
                out.append((lo, hi, cnt))
    return out


def _sample_hudson(n, a, b, rho, rng):
    us = rng.uniforms()
    lines = {i: [(a, b, 1)] for i in range(1, n + 1)}
    if n == 1:
        return []
    hull = {i: b - a for i in lines}
    next_id = n + 1
    events = []
    t = 0.0
    while True:
        ids = [i for i in lines if lines[i]]
        k = len(ids)
        if k <= 1:
            break
        crate = k * (k - 1) * 0.5
        srate = rho * sum(hull[i] for i in ids)
        total = crate + srate
        t += us.exponential(total)
        if us.uniform() * total < crate:
            i, j = us.pair_index(k)
            p, q = ids[i], ids[j]
            merged = _merge_material(lines.pop(p), lines.pop(q), n)
            hull.pop(p)
            hull.pop(q)
            events.append((COAL, t, p, q, next_id))
            lines[next_id] = merged
            hull[next_id] = (merged[-1][1] - merged[0][0]) if merged else 0.0
            next_id += 1
        else:
            # choose a line weighted by hull width, then a mark inside it
            target = us.uniform() * sum(hull[i] for i in ids)
            acc = 0.0
            p = ids[-1]
            for i in ids:
                acc += hull[i]
                if target < acc:
                    p = i
                    break
            mat = lines[p]
            lo, hi = mat[0][0], mat[-1][1]
            mark = lo + us.uniform() * (hi - lo)
            left_mat, right_mat = _split_material(mat, mark)
            if not left_mat or not right_mat:
                continue  # zero-probability guard at the hull edge
            left, right = next_id, next_id + 1
            next_id += 2
            del lines[p], hull[p]
            lines[left] = left_mat
            hull[left] = left_mat[-1][1] - left_mat[0][0]
            lines[right] = right_mat
            hull[right] = right_mat[-1][1] - right_mat[0][0]
            events.append((SPLIT, t, p, mark, left, right))
    return events


# ---------------------------------------------------------------------------
# Extraction
# ---------------------------------------------------------------------------


class Extraction:
    """Deterministic replay of an event log at one locus for a leaf set.

    Records the tree, every split that hit a followed line on its way to
    the root (with the leaf set it cut), and, when ``extended`` is set,
    per-leaf particle routes continued past the root to the end of the log.
    """

    __slots__ = ("tree", "split_hits", "root_node", "root_time", "routes", "locus")

    def __init__(self, tree, split_hits, root_node, root_time, routes, locus):
        self.tree = tree
        self.split_hits = split_hits
        self.root_node = root_node
        self.root_time = root_time
        self.routes = routes
        self.locus = locus

    @classmethod
    def run(cls, log: ArgEventLog, leaf_set, u: float, extended: bool = False) -> "Extraction":
        if not (log.a <= u <= log.b):
            raise ValueError(f"locus {u} outside genome [{log.a}, {log.b}]")
        B = tuple(leaf_set)
        if not B:
            raise ValueError("leaf set must be nonempty")
        if not set(B) <= set(log.leaves):
            raise ValueError("leaf set must be a subset of the log's leaves")
        return cls.replay(log.events, B, u, extended)

    @classmethod
    def replay(cls, events, leaf_set, u: float, extended: bool = False) -> "Extraction":
        B = tuple(leaf_set)
        lineage = {x: x for x in B}  # live particle -> tree lineage id
        leafset = {x: frozenset((x,)) for x in B}
        routes = {x: [(0.0, x)] for x in B} if extended else None
        merges = []
        split_hits = []
        root_node = B[0]
        root_time = 0.0
        done = len(B) == 1

        for ev in events:
            kind = ev[0]
            if kind == COAL:
                _, t, p, q, res = ev
                lp = lineage.pop(p, None)
                lq = lineage.pop(q, None)
                if lp is None and lq is None:
                    continue
                if lp is not None and lq is not None and not done:
                    merges.append((t, lp, lq, res))
                    lineage[res] = res
                    group = leafset[lp] | leafset[lq]
                    leafset[res] = group
                    if extended:
                        for x in group:
                            routes[x].append((t, res))
                    if len(lineage) == 1:
                        done = True
                        root_node = res
                        root_time = t
                        if not extended:
                            break
                else:
                    keep = lp if lp is not None else lq
                    lineage[res] = keep
                    if extended:
                        for x in leafset[keep]:
                            routes[x].append((t, res))
            else:
                _, t, p, mark, left, right = ev
                lp = lineage.pop(p, None)
                if lp is None:
                    continue
                child = left if u <= mark else right
                lineage[child] = lp
                if not done:
                    split_hits.append((t, mark, leafset[lp]))
                if extended:
                    for x in leafset[lp]:
                        routes[x].append((t, child))

        if not done:
            raise ValueError("log ends before the leaf set coalesces")
        tree = UltrametricTree(B, tuple(merges))
        return cls(tree, tuple(split_hits), root_node, root_time, routes, u)

    def cut_leaves(self, lo: float, hi: float) -> frozenset:
        """Leaves whose path to the root is hit by a mark in [lo, hi]."""
        out: frozenset = frozenset()
        for _, mark, group in self.split_hits:
            if lo <= mark <= hi:
                out = out | group
        return out


def extract_tree(log: ArgEventLog, leaf_set, u: float) -> UltrametricTree:
    """Tree of the leaf set at locus u (root may precede the log's end)."""
    return Extraction.run(log, leaf_set, u).tree


# ---------------------------------------------------------------------------
# Tree-valued path along the genome
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TreePath:
    """Piecewise-constant map from genome position to tree.

    ``trees[i]`` applies on the interval (breakpoints[i-1], breakpoints[i]],
    with the first interval closed at ``a`` and the last ending at ``b``.
    """

    a: float
    b: float
    breakpoints: tuple
    trees: tuple
    source: ArgEventLog | None = field(default=None, compare=False, repr=False)
    leaf_set: tuple = field(default=(), compare=False)
    walk_trace: tuple = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        if len(self.trees) != len(self.breakpoints) + 1:
            raise ValueError("need exactly one tree per interval")
        if any(not (self.a < x < self.b) for x in self.breakpoints):
            raise ValueError("breakpoints must lie strictly inside the genome")
        if list(self.breakpoints) != sorted(set(self.breakpoints)):
            raise ValueError("breakpoints must be strictly increasing")

    def evaluate(self, u: float) -> UltrametricTree:
        if not (self.a <= u <= self.b):
            raise ValueError("locus outside the genome")
        return self.trees[bisect.bisect_left(self.breakpoints, u)]

    def to_json_dict(self) -> dict:
        from .newick import newick_encode

        return {
            "a": self.a,
            "b": self.b,
            "breakpoints": list(self.breakpoints),
            "trees": [newick_encode(t) for t in self.trees],
        }


def tree_path(log: ArgEventLog, leaf_set=None) -> TreePath:
    """Extract the full piecewise-constant tree path of a leaf set.

    Breakpoints are the split marks at which the extracted tree actually
    changes (change is decided on shared node identities, not times).
    """
    B = tuple(leaf_set) if leaf_set is not None else log.leaves
    marks = sorted({m for m in log.split_marks() if log.a < m < log.b})
    trees = [extract_tree(log, B, m) for m in marks]
    trees.append(extract_tree(log, B, log.b))
    breakpoints = []
    kept = [trees[0]]
    prev_key = trees[0].structure_key()
    for m, tr in zip(marks, trees[1:]):
        key = tr.structure_key()
        if key != prev_key:
            breakpoints.append(m)
            kept.append(tr)
            prev_key = key
    return TreePath(log.a, log.b, tuple(breakpoints), tuple(kept), source=log, leaf_set=B)


def distinct_tree_count(log: ArgEventLog) -> tuple:
    """(number of splits R, number of distinct trees along the full path)."""
    path = tree_path(log, log.leaves)
    distinct = {t.structure_key() for t in path.trees}
    return log.split_count, len(distinct)


# ---------------------------------------------------------------------------
# Projections
# ---------------------------------------------------------------------------


def subsample_arg(log: ArgEventLog, leaf_set) -> ArgEventLog:
    """The graph obtained by following a subset of leaves through the log.

    Coalescences among followed lines are kept (result takes the source
    id), splits hitting a followed line are kept with both children, and
    the log is truncated at the first time one followed line remains.
    """
    B = tuple(leaf_set)
    if not B:
        raise ValueError("leaf set must be nonempty")
    if not set(B) <= set(log.leaves):
        raise ValueError("leaf set must be a subset of the log's leaves")
    current = {x: x for x in B}  # source particle -> output particle
    events = []
    count = len(B)
    for ev in log.events:
        if count == 1:
            break
        if ev[0] == COAL:
            _, t, p, q, res = ev
            sp = current.pop(p, None)
            sq = current.pop(q, None)
            if sp is not None and sq is not None:
                events.append((COAL, t, sp, sq, res))
                current[res] = res
                count -= 1
            elif sp is not None or sq is not None:
                current[res] = sp if sp is not None else sq
        else:
            _, t, p, mark, left, right = ev
            sp = current.pop(p, None)
            if sp is not None:
                events.append((SPLIT, t, sp, mark, left, right))
                current[left] = left
                current[right] = right
                count += 1
    return ArgEventLog(
        len(B), log.a, log.b, log.rho, tuple(events), leaves=B, seed=log.seed, style=log.style
    )


def restrict_genome(log: ArgEventLog, c: float, d: float) -> ArgEventLog:
    """Project the log onto the genome interval [c, d].

    Splits marked inside [c, d] are kept; splits marked outside continue
    the line as the child that carries the restricted material (right for
    marks below c, left for marks above d).  Extraction at any locus in
    [c, d] yields trees identical to extraction from the source log.
    """
    if not (log.a <= c < d <= log.b):
        raise ValueError("need a <= c < d <= b")
    current = {x: x for x in log.leaves}
    events = []
    count = len(log.leaves)
    for ev in log.events:
        if count == 1:
            break
        if ev[0] == COAL:
            _, t, p, q, res = ev
            sp = current.pop(p, None)
            sq = current.pop(q, None)
            if sp is not None and sq is not None:
                events.append((COAL, t, sp, sq, res))
                current[res] = res
                count -= 1
            elif sp is not None or sq is not None:
                current[res] = sp if sp is not None else sq
        else:
            _, t, p, mark, left, right = ev
            sp = current.pop(p, None)
            if sp is None:
                continue
            if c <= mark <= d:
                events.append((SPLIT, t, sp, mark, left, right))
                current[left] = left
                current[right] = right
                count += 1
            elif mark < c:
                current[right] = sp
            else:
                current[left] = sp
    return ArgEventLog(
        log.n_leaves, c, d, log.rho, tuple(events), leaves=log.leaves, seed=log.seed, style=log.style
    )
