"""Distances between finite metric (measure) spaces and coupled trees.

Plain Hausdorff / Prohorov / total-variation distances act on index sets
with an explicit distance matrix.  The Gromov-style quantities on coupled
trees work through explicit common embeddings certified by construction:
the exact Gromov-TV searches for a maximal common sub-isometry, and the
genealogical upper bounds glue the two extracted trees along the branches
they share in the underlying event log.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .arg import ArgEventLog, Extraction
from .mmspace import DistanceMatrix, FiniteMmSpace
from .rng import RandomSource
from .trees import UltrametricTree

_MATCH_TOL = 1e-9


class UnsupportedInstanceError(ValueError):
    """Instance outside the supported regime of an exact routine."""


# ---------------------------------------------------------------------------
# Distances on a fixed space
# ---------------------------------------------------------------------------


def hausdorff_distance(A, B, metric: DistanceMatrix) -> float:
    """max-min distance between two index subsets of the matrix."""
    A, B = list(A), list(B)
    if not A or not B:
        raise ValueError("sets must be nonempty")
    d = metric.values
    sub = d[np.ix_(A, B)]
    return float(max(sub.min(axis=1).max(), sub.min(axis=0).max()))


def total_variation(mu1, mu2) -> float:
    """Half the l1 distance between two probability vectors."""
    p, q = np.asarray(mu1, float), np.asarray(mu2, float)
    if p.shape != q.shape:
        raise ValueError("mismatched sizes")
    return float(0.5 * np.abs(p - q).sum())


def _max_flow(n_nodes: int, edges: dict, s: int, t: int) -> float:
    """Dinic's algorithm on float capacities (small dense instances)."""
    cap = [dict() for _ in range(n_nodes)]
    for (u, v), c in edges.items():
        cap[u][v] = cap[u].get(v, 0.0) + c
        cap[v].setdefault(u, 0.0)
    total = 0.0
    while True:
        level = {s: 0}
        frontier = [s]
        while frontier:
            nxt = []
            for u in frontier:
                for v, c in cap[u].items():
                    if c > 1e-15 and v not in level:
                        level[v] = level[u] + 1
                        nxt.append(v)
            frontier = nxt
        if t not in level:
            return total

        def dfs(u, f):
            if u == t:
                return f
            for v in list(cap[u]):
                c = cap[u][v]
                if c > 1e-15 and level.get(v, -1) == level[u] + 1:
                    d = dfs(v, min(f, c))
                    if d > 1e-15:
                        cap[u][v] -= d
                        cap[v][u] += d
                        return d
            level[u] = -1
            return 0.0

        while True:
            pushed = dfs(s, float("inf"))
            if pushed <= 1e-15:
                break
            total += pushed


def prohorov_distance(mu1, mu2, metric: DistanceMatrix) -> float:
    """Infimal eps with mu1(F) <= mu2(F^eps) + eps for all F.

    Feasibility of a candidate eps is a transport problem: mass may move
    strictly less than eps, leaving deficit at most eps; solved by maximum
    flow, with bisection to absolute tolerance 1e-9.
    """
    p, q = np.asarray(mu1, float), np.asarray(mu2, float)
    n = metric.size
    if p.shape != (n,) or q.shape != (n,):
        raise ValueError("mismatched sizes")
    for vec in (p, q):
        if abs(vec.sum() - 1.0) > 1e-12:
            raise ValueError("measures must sum to 1")
    d = metric.values
    source, sink = 2 * n, 2 * n + 1

    def feasible(eps: float) -> bool:
        edges = {}
        for i in range(n):
            if p[i] > 0:
                edges[(source, i)] = float(p[i])
            if q[i] > 0:
                edges[(n + i, sink)] = float(q[i])
        for i in range(n):
            for j in range(n):
                if d[i, j] < eps:
                    edges[(i, n + j)] = 2.0
        return _max_flow(2 * n + 2, edges, source, sink) >= 1.0 - eps - 1e-12

    lo, hi = 0.0, 1.0
    while hi - lo > 1e-9:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# Exact Gromov total variation for small uniform spaces
# ---------------------------------------------------------------------------


def gtv_exact(x1: FiniteMmSpace, x2: FiniteMmSpace) -> float:
    """1 - M/N where M is the maximal common sub-isometry size.

    Restricted to equal-size uniform spaces with at most 8 points; the
    search is branch-and-bound over partial point matchings, and metric
    amalgamation guarantees the glued space realizing the bound exists.
    """
    n = x1.size
    if x2.size != n or n > 8:
        raise UnsupportedInstanceError("gtv_exact needs equal sizes <= 8")
    if not (x1.has_uniform_weights() and x2.has_uniform_weights()):
        raise UnsupportedInstanceError("gtv_exact needs uniform weights")
    d1, d2 = x1.distances.values, x2.distances.values

    best = [1]  # a single point always matches

    def search(i, pairs):
        if len(pairs) + (n - i) <= best[0]:
            return
        if i == n:
            best[0] = max(best[0], len(pairs))
            return
        used = {q for _, q in pairs}
        for q in range(n):
            if q in used:
                continue
            if all(abs(d1[i, p] - d2[q, qq]) <= _MATCH_TOL for p, qq in pairs):
                search(i + 1, pairs + [(i, q)])
        search(i + 1, pairs)

    search(0, [])
    return 1.0 - best[0] / n


# ---------------------------------------------------------------------------
# Coupled trees read off one event log at two loci
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CoupledTreePair:
    """Trees of one leaf set at two loci, with their shared-branch coupling.

    ``locus_u`` is the anchor: the auxiliary distance walks leaf paths in
    the tree at ``locus_u``.
    """

    log: ArgEventLog
    leaf_set: tuple
    locus_u: float
    locus_v: float

    def __post_init__(self):
        object.__setattr__(self, "leaf_set", tuple(self.leaf_set))

    @cached_property
    def extraction_u(self) -> Extraction:
        return Extraction.run(self.log, self.leaf_set, self.locus_u, extended=True)

    @cached_property
    def extraction_v(self) -> Extraction:
        return Extraction.run(self.log, self.leaf_set, self.locus_v, extended=True)

    @property
    def tree_u(self) -> UltrametricTree:
        return self.extraction_u.tree

    @property
    def tree_v(self) -> UltrametricTree:
        return self.extraction_v.tree


def d_aux(pair: CoupledTreePair) -> float:
    """Fraction of leaves whose path to the anchor-tree root is hit by a
    split marked inside the closed interval between the loci."""
    lo = min(pair.locus_u, pair.locus_v)
    hi = max(pair.locus_u, pair.locus_v)
    cut = pair.extraction_u.cut_leaves(lo, hi)
    return len(cut) / len(pair.leaf_set)


def _glued_cross_distances(pair: CoupledTreePair) -> np.ndarray:
    """Distances between u-leaf and v-leaf images in the glued tree.

    The glue identifies the tail of each leaf's route at ``locus_v`` with
    the structure traced by the routes at ``locus_u``: a route point is
    shared once the route stays inside the anchor structure all the way
    up.  Cross distance is twice the height at which the two routes join.
    """
    if not (pair.log.style == "gm" or pair.log.style.startswith("walk")):
        raise UnsupportedInstanceError(
            "shared-branch gluing requires a complete graph-style log"
        )
    ru = pair.extraction_u.routes
    rv = pair.extraction_v.routes
    leaves = pair.leaf_set
    u_particles = {p for route in ru.values() for _, p in route}

    # suffix[y] = index in y's v-route from which every particle is shared
    suffix = {}
    for y in leaves:
        route = rv[y]
        k = len(route)
        while k > 0 and route[k - 1][1] in u_particles:
            k -= 1
        suffix[y] = k

    n = len(leaves)
    route_u = {x: {p: t for t, p in ru[x]} for x in leaves}
    out = np.empty((n, n))
    for j, y in enumerate(leaves):
        tail = rv[y][suffix[y] :]
        if not tail:
            raise UnsupportedInstanceError("routes never rejoin; log appears truncated")
        for i, x in enumerate(leaves):
            mine = route_u[x]
            for t_enter, p in tail:
                if p in mine:
                    out[i, j] = 2.0 * max(t_enter, mine[p])
                    break
            else:
                raise UnsupportedInstanceError("routes never rejoin; log appears truncated")
    return out


def gh_bounds(pair: CoupledTreePair) -> tuple:
    """(lower, upper) bounds on the Gromov-Hausdorff distance of the pair.

    lower: half the diameter gap.  upper: Hausdorff distance between the
    leaf images inside the glued common tree; zero exactly when the shared
    branches cover both trees.
    """
    lower = abs(pair.tree_u.root_time - pair.tree_v.root_time)
    cross = _glued_cross_distances(pair)
    upper = float(max(cross.min(axis=1).max(), cross.min(axis=0).max()))
    return lower, upper


# ---------------------------------------------------------------------------
# Variation along the genome
# ---------------------------------------------------------------------------


def path_variation(path, distance: str) -> float:
    """Total variation of a piecewise-constant tree path.

    The path has finitely many jumps, so the supremum over partitions is
    the sum of jump distances at the breakpoints.  ``distance`` selects
    the jump functional: "d-aux-chain" (leaf paths cut exactly at the
    breakpoint mark), "gtv-exact" (trees of at most 8 leaves) or
    "gh-upper" (glued-tree Hausdorff bound).
    """
    if distance not in ("d-aux-chain", "gtv-exact", "gh-upper"):
        raise UnsupportedInstanceError(f"unknown distance {distance!r}")
    if not path.breakpoints:
        return 0.0
    if distance == "gtv-exact":
        if any(t.n_leaves > 8 for t in path.trees):
            raise UnsupportedInstanceError("gtv-exact limited to trees of <= 8 leaves")
        return sum(
            gtv_exact(path.trees[i].to_mm_space(), path.trees[i + 1].to_mm_space())
            for i in range(len(path.breakpoints))
        )
    if path.source is None:
        raise UnsupportedInstanceError(f"{distance} needs the source event log")
    B = path.leaf_set or path.source.leaves
    total = 0.0
    for i, m in enumerate(path.breakpoints):
        if distance == "d-aux-chain":
            cut = Extraction.run(path.source, B, m).cut_leaves(m, m)
            total += len(cut) / len(B)
        else:
            nxt = path.breakpoints[i + 1] if i + 1 < len(path.breakpoints) else path.b
            lower, upper = gh_bounds(CoupledTreePair(path.source, B, m, nxt))
            total += upper
    return total


# ---------------------------------------------------------------------------
# Re-marking oracle for the conditional mean of the auxiliary distance
# ---------------------------------------------------------------------------


def remark_cut_fraction(tree: UltrametricTree, rho_delta: float, rng: RandomSource) -> float:
    """Scatter split marks over the tree at intensity ``rho_delta`` per unit
    branch length and return the fraction of leaves with a hit path.

    This is the direct simulation of marking a fixed tree while moving a
    genome distance ``delta`` at recombination rate ``rho``; its
    conditional mean given the tree is 1 - exp(-rho_delta * height).
    """
    if rho_delta < 0:
        raise ValueError("rho_delta must be non-negative")
    segments = []  # (cum_length, leafset)
    birth = {x: 0.0 for x in tree.leaf_labels}
    total = 0.0
    sets = tree.leaf_sets
    for t, a, b, node in tree.merges:
        for lineage in (a, b):
            length = t - birth.pop(lineage)
            if length > 0:
                total += length
                segments.append((total, sets[lineage]))
        birth[node] = t
    gen = rng.generator()
    hits = gen.poisson(rho_delta * total)
    if hits == 0 or not segments:
        return 0.0
    bounds = [s[0] for s in segments]
    cut: frozenset = frozenset()
    for x in gen.random(hits) * total:
        idx = int(np.searchsorted(bounds, x, side="right"))
        idx = min(idx, len(segments) - 1)
        cut = cut | segments[idx][1]
    return len(cut) / tree.n_leaves
