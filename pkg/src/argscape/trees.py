"""Ultrametric genealogical trees and the Kingman coalescent sampler.

A tree is stored as its merge history: (time, lineage_a, lineage_b, node)
tuples in time order.  Pair entries refer to leaf labels or to the node id
of an earlier merge, so topology and node identities are explicit; distance
matrices are derived on demand (leaf distance = twice the merge time of the
pair's first common lineage).
"""

from __future__ import annotations

import bisect
import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .mmspace import DistanceMatrix, FiniteMmSpace
from .rng import RandomSource

Merge = tuple  # (time, lineage_a, lineage_b, node_id)


@dataclass(frozen=True)
class UltrametricTree:
    leaf_labels: tuple
    merges: tuple

    def __post_init__(self):
        object.__setattr__(self, "leaf_labels", tuple(self.leaf_labels))
        object.__setattr__(self, "merges", tuple(tuple(m) for m in self.merges))
        if len(self.merges) != len(self.leaf_labels) - 1:
            raise ValueError("a binary tree on n leaves has exactly n-1 merges")

    # -- basic structure ---------------------------------------------------

    @property
    def n_leaves(self) -> int:
        return len(self.leaf_labels)

    @property
    def root_time(self) -> float:
        return self.merges[-1][0] if self.merges else 0.0

    @cached_property
    def merge_times(self) -> tuple:
        return tuple(m[0] for m in self.merges)

    def validate(self, strictly_increasing: bool = True) -> None:
        """Raise if the merge history is not a well-formed binary history."""
        alive = set(self.leaf_labels)
        if len(alive) != len(self.leaf_labels):
            raise ValueError("duplicate leaf labels")
        prev = None
        for t, a, b, node in self.merges:
            if t < 0:
                raise ValueError("merge times must be non-negative")
            if prev is not None:
                if t < prev:
                    raise ValueError("merge times must be non-decreasing")
                if strictly_increasing and t == prev:
                    raise ValueError("merge times must be strictly increasing")
            if a not in alive or b not in alive or a == b:
                raise ValueError(f"merge at t={t} references unknown lineage")
            if node in alive:
                raise ValueError(f"node id {node!r} reused")
            alive.discard(a)
            alive.discard(b)
            alive.add(node)
            prev = t
        if len(alive) != 1:
            raise ValueError("merge history does not end in a single lineage")

    @cached_property
    def leaf_sets(self) -> dict:
        """Lineage id -> frozenset of leaf labels below it."""
        sets = {x: frozenset((x,)) for x in self.leaf_labels}
        for _, a, b, node in self.merges:
            sets[node] = sets[a] | sets[b]
        return sets

    def structure_key(self):
        """Canonical form keyed on node identities.

        Two trees extracted from the same event log compare equal here iff
        every merge happens at the same recorded event with the same leaf
        arrangement.
        """
        canon = {x: x for x in self.leaf_labels}
        key = None
        for _, a, b, node in self.merges:
            key = (node, frozenset((canon[a], canon[b])))
            canon[node] = key
        return key if key is not None else self.leaf_labels[0]

    # -- levels and small-time structure ------------------------------------

    def level_times(self) -> tuple:
        """Durations (S_n, ..., S_2): S_k = time spent with k lineages."""
        out = []
        prev = 0.0
        for t in self.merge_times:
            out.append(t - prev)
            prev = t
        return tuple(out)

    def lineage_count_at_depth(self, eps: float) -> int:
        """Number of lineages alive at time ``eps`` above the leaves."""
        if eps <= 0:
            raise ValueError("eps must be positive")
        done = bisect.bisect_right(self.merge_times, eps)
        return self.n_leaves - done

    def total_branch_length(self) -> float:
        """Sum of k * S_k over levels."""
        total = 0.0
        k = self.n_leaves
        for s in self.level_times():
            total += k * s
            k -= 1
        return total

    # -- metric view ---------------------------------------------------------

    def distance_matrix(self) -> DistanceMatrix:
        """Leaf distances r(i,j) = 2 * (merge time of i and j)."""
        n = self.n_leaves
        index = {x: i for i, x in enumerate(self.leaf_labels)}
        members: dict = {x: [index[x]] for x in self.leaf_labels}
        d = np.zeros((n, n))
        for t, a, b, node in self.merges:
            left, right = members.pop(a), members.pop(b)
            for i in left:
                for j in right:
                    d[i, j] = d[j, i] = 2.0 * t
            left.extend(right)
            members[node] = left
        return DistanceMatrix(d)

    def to_mm_space(self) -> FiniteMmSpace:
        """Leaves with tree distance and uniform weights."""
        n = self.n_leaves
        return FiniteMmSpace(self.leaf_labels, self.distance_matrix(), np.full(n, 1.0 / n))

    # -- serialization ---------------------------------------------------------

    def to_json_dict(self) -> dict:
        """Schema: {leaves: [...], merges: [{t, pair}, ...]}.

        Pair entries name each lineage by its smallest-listed leaf, so the
        record is independent of internal node ids.
        """
        rep = {x: x for x in self.leaf_labels}
        order = {x: i for i, x in enumerate(self.leaf_labels)}
        merges = []
        for t, a, b, node in self.merges:
            ra, rb = rep[a], rep[b]
            merges.append({"t": t, "pair": [ra, rb]})
            rep[node] = ra if order[ra] <= order[rb] else rb
        return {"leaves": list(self.leaf_labels), "merges": merges}

    @classmethod
    def from_json_dict(cls, data: dict) -> "UltrametricTree":
        leaves = tuple(data["leaves"])
        current = {x: x for x in leaves}  # representative -> lineage id
        order = {x: i for i, x in enumerate(leaves)}
        merges = []
        for k, m in enumerate(data["merges"]):
            ra, rb = m["pair"]
            node = ("m", k)
            merges.append((float(m["t"]), current.pop(ra), current.pop(rb), node))
            keep = ra if order[ra] <= order[rb] else rb
            current[keep] = node
        return cls(leaves, tuple(merges))

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json(cls, text: str) -> "UltrametricTree":
        return cls.from_json_dict(json.loads(text))


def sample_kingman(n: int, rng: RandomSource) -> UltrametricTree:
    """Coalescent tree on leaf labels 1..n.

    With k lineages the next merge comes after an Exponential(k(k-1)/2)
    wait and hits a uniformly chosen pair.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    us = rng.uniforms()
    lineages = list(range(1, n + 1))
    merges = []
    t = 0.0
    next_node = n + 1
    k = n
    while k > 1:
        t += us.exponential(k * (k - 1) / 2.0)
        i, j = us.pair_index(k)
        a, b = lineages[i], lineages[j]
        # swap-pop, removing the larger index first
        lineages[j] = lineages[-1]
        lineages.pop()
        lineages[i] = next_node
        merges.append((t, a, b, next_node))
        next_node += 1
        k -= 1
    return UltrametricTree(tuple(range(1, n + 1)), tuple(merges))
