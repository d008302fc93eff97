"""Hand-built event logs with known extraction results.

Used by tests and the structure-verification experiment as exact oracles:
every tree, breakpoint and distance below was worked out by hand from the
event lists.
"""

from __future__ import annotations

from .arg import COAL, SPLIT, ArgEventLog


def five_leaf_two_mark_log(u1: float = 0.3, u2: float = 0.7) -> ArgEventLog:
    """Five leaves, two split marks u1 < u2, three distinct trees.

    Extractions (merge times per group):
      u <= u1:      {4,5}@1, {2,3}@5, {2,3,4,5}@6, all@7
      u1 < u <= u2: {4,5}@1, {1,2}@2.3, {1,2,3}@5, all@6
      u > u2:       {4,5}@1, {1,2}@2.3, {3,4,5}@4, all@6
    """
    if not 0.0 < u1 < u2 < 1.0:
        raise ValueError("need 0 < u1 < u2 < 1")
    events = (
        (COAL, 1.0, 4, 5, 6),
        (SPLIT, 1.5, 1, u1, 7, 8),
        (COAL, 2.3, 8, 2, 9),
        (SPLIT, 3.0, 3, u2, 10, 11),
        (COAL, 4.0, 11, 6, 12),
        (COAL, 5.0, 10, 9, 13),
        (COAL, 6.0, 13, 12, 14),
        (COAL, 7.0, 14, 7, 15),
    )
    return ArgEventLog(5, 0.0, 1.0, 1.0, events)


def five_leaf_single_mark_log(mark: float = 0.5) -> ArgEventLog:
    """Five leaves, one split mark; the coupled pair of trees across the
    mark differs exactly in leaves {4, 5}.

    At u <= mark: {4,5}@1, {2,3}@2.3, {2,3,4,5}@5, all@7.
    At u > mark:  {4,5}@1, {2,3}@2.3, {1,4,5}@6,   all@7.
    The leaf paths at the left locus hit by the mark are {4, 5}, so the
    auxiliary distance across the mark is 2/5, and the maximal common
    sub-isometry is {1, 2, 3}, so the exact Gromov-TV distance is 2/5 too.
    """
    if not 0.0 < mark < 1.0:
        raise ValueError("mark must lie strictly inside the genome")
    events = (
        (COAL, 1.0, 4, 5, 6),
        (COAL, 2.3, 2, 3, 7),
        (SPLIT, 4.0, 6, mark, 8, 9),
        (COAL, 5.0, 8, 7, 10),
        (COAL, 6.0, 9, 1, 11),
        (COAL, 7.0, 10, 11, 12),
    )
    return ArgEventLog(5, 0.0, 1.0, 1.0, events)
