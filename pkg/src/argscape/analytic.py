"""Closed-form two-locus probabilities and bound functions.

The first-event decomposition of the four-line two-locus system gives a
3x3 linear system in

    x = P(cross pairs share their merge event)
    y = P(after one cross coalescence, the remaining pattern matches)
    z = P(a fixed pair merges at the same event at both loci)

solved here in closed form so Monte Carlo experiments have exact targets.
The ``aux`` variant replaces the final equation by the decoupled-graph
version, where rings fire at rate 2 per pair of shared lines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple


@dataclass(frozen=True)
class FirstEventSystem:
    variant: str  # "arg" | "aux"
    rho_distance: float

    def __post_init__(self):
        if self.variant not in ("arg", "aux"):
            raise ValueError("variant must be 'arg' or 'aux'")
        if self.rho_distance < 0:
            raise ValueError("rho_distance must be non-negative")


class FirstEventSolution(NamedTuple):
    x: float
    y: float
    z: float


def solve_first_event_system(sys: FirstEventSystem) -> FirstEventSolution:
    """Exact (x, y, z) by elimination; never singular for rho >= 0.

    arg:  x = 2/(9 + 13 r + 2 r^2)
    aux:  x = 2/(9 +  7 r +   r^2)
    """
    r = sys.rho_distance
    if sys.variant == "arg":
        y = 3.0 / (2.0 * r * r + 13.0 * r + 9.0)
        z = (2.0 * r * y + 1.0) / (2.0 * r + 1.0)
    else:
        y = 3.0 / (r * r + 7.0 * r + 9.0)
        z = (r * y + 1.0) / (r + 1.0)
    return FirstEventSolution(2.0 * y / 3.0, y, z)


def prob_equal_cross_pair(rho_v: float) -> float:
    """P(disjoint pairs merge at the same event): 2/(9 + 13 rv + 2 rv^2)."""
    if rho_v < 0:
        raise ValueError("rho_v must be non-negative")
    return 2.0 / (9.0 + 13.0 * rho_v + 2.0 * rho_v * rho_v)


def prob_equal_same_pair(rho_v: float) -> float:
    """P(one pair merges at the same event at both loci): the z component."""
    return solve_first_event_system(FirstEventSystem("arg", rho_v)).z


def prob_ring_from_two_shared(rho_u: float) -> float:
    """P(some ring fires in the decoupled graph started from (2,0,2))."""
    if rho_u < 0:
        raise ValueError("rho_u must be non-negative")
    return 2.0 / (9.0 + 7.0 * rho_u + rho_u * rho_u)


def cross_pair_union_bound(n: int, rho_v: float) -> float:
    """(n choose 2)^2 * prob_equal_cross_pair; may exceed 1 (vacuous)."""
    if n < 2:
        raise ValueError("n must be >= 2")
    pairs = n * (n - 1) // 2
    return pairs * pairs * prob_equal_cross_pair(rho_v)


def mixing_bound(n: int, rho_u: float) -> float:
    """Covariance bound 2 n^4 / (9 + 7 ru + ru^2) per unit of kernel norms.

    Returned unclamped; values above the trivial bound 2 are vacuous and
    are flagged as such where reported.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if rho_u < 0:
        raise ValueError("rho_u must be non-negative")
    return 2.0 * n**4 / (9.0 + 7.0 * rho_u + rho_u * rho_u)


def trivial_covariance_bound() -> float:
    """The always-valid bound 2 per unit of the two kernel sup norms."""
    return 2.0


def height_mean(n: int) -> float:
    """E[tree height] = sum 2/(k(k-1)) = 2(1 - 1/n)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return 2.0 * (1.0 - 1.0 / n)


def height_second_moment(n: int | float) -> float:
    """Exact E[(S_2 + ... + S_n)^2] = mean^2 + sum of level variances.

    Accepts math.inf for the limiting value 4 + 4(pi^2/3 - 3).
    """
    if n == math.inf:
        return 4.0 + 4.0 * (math.pi**2 / 3.0 - 3.0)
    n = int(n)
    if n < 2:
        raise ValueError("n must be >= 2")
    mean = 0.0
    var = 0.0
    for k in range(2, n + 1):
        rate = k * (k - 1) / 2.0
        mean += 1.0 / rate
        var += 1.0 / (rate * rate)
    return mean * mean + var


def printed_height_second_moment_bound() -> float:
    """The cruder constant 8(pi^2/3 - 3) + 8 (< 11) used in print."""
    return 8.0 * (math.pi**2 / 3.0 - 3.0) + 8.0


class TightnessBound(NamedTuple):
    corrected: float  # rho^2 h^2 E[height^2]
    printed: float  # 11 rho h^2 as printed


def tightness_rhs(rho: float, h: float, n: int | float) -> TightnessBound:
    """Right-hand side of the two-sided increment-product bound.

    The product of the two conditional means is (rho h)^2 * height^2, so the
    corrected form carries rho^2; the printed form (11 rho h^2) is returned
    alongside for reporting.
    """
    if rho <= 0 or h <= 0:
        raise ValueError("rho and h must be positive")
    return TightnessBound(rho * rho * h * h * height_second_moment(n), 11.0 * rho * h * h)
