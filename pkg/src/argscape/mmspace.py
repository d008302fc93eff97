"""Finite metric measure spaces, distance-matrix sampling and polynomials.

A genealogical tree enters the metric world as a triple (points, pairwise
distances, sampling weights).  Polynomial functionals are expectations of a
bounded kernel of finitely many pairwise distances under i.i.d. sampling
from the weights; the kernel library is closed (named built-ins with
parameters) so that sup-norm bounds are always available to the mixing
bounds that consume them.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .rng import RandomSource

_EXACT_TUPLE_LIMIT = 10**8
_CHUNK = 1 << 17


class ResourceLimitError(RuntimeError):
    """Raised when an exact enumeration would exceed the tuple budget."""


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric non-negative matrix with zero diagonal."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError("distance matrix must be square")
        if not np.allclose(v, v.T, atol=1e-12):
            raise ValueError("distance matrix must be symmetric")
        if np.any(np.diag(v) != 0.0):
            raise ValueError("distance matrix must have zero diagonal")
        if np.any(v < 0.0):
            raise ValueError("distances must be non-negative")

    @property
    def size(self) -> int:
        return self.values.shape[0]

    def __getitem__(self, ij):
        return self.values[ij]

    def is_ultrametric(self, tol: float = 1e-9) -> bool:
        """Check r(i,j) <= max(r(i,k), r(j,k)) over all triples."""
        v = self.values
        n = self.size
        for k in range(n):
            # vectorised over (i, j) for each k
            if np.any(v > np.maximum.outer(v[:, k], v[:, k]) + tol):
                return False
        return True


@dataclass(frozen=True)
class FiniteMmSpace:
    """Finite point set with a metric and a full-support probability."""

    points: tuple
    distances: DistanceMatrix
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "points", tuple(self.points))
        if len(self.points) != self.distances.size or len(self.points) != len(w):
            raise ValueError("points, distances and weights must have equal size")
        if np.any(w <= 0.0):
            raise ValueError("weights must have full support")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")

    @property
    def size(self) -> int:
        return len(self.points)

    def has_uniform_weights(self, tol: float = 1e-12) -> bool:
        return bool(np.all(np.abs(self.weights - 1.0 / self.size) <= tol))


# --------------------------------------------------------------------------
# Kernel library (closed set of named built-ins)
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class IndicatorKernel:
    """1{r[i,j] <= threshold}."""

    threshold: float
    i: int = 0
    j: int = 1

    def __post_init__(self):
        if self.threshold < 0 or self.i == self.j or min(self.i, self.j) < 0:
            raise ValueError("invalid indicator kernel")

    @property
    def degree(self) -> int:
        return max(self.i, self.j) + 1

    @property
    def bound(self) -> float:
        return 1.0

    def batch(self, r: np.ndarray) -> np.ndarray:
        return (r[..., self.i, self.j] <= self.threshold).astype(float)


@dataclass(frozen=True)
class ExponentialKernel:
    """exp(-sum of lam[i,j] * r[i,j]) over the given pairs, lam >= 0."""

    lambdas: tuple  # ((i, j, lam), ...)

    def __post_init__(self):
        lams = tuple((int(i), int(j), float(l)) for i, j, l in self.lambdas)
        object.__setattr__(self, "lambdas", lams)
        for i, j, l in lams:
            if i == j or min(i, j) < 0 or l < 0:
                raise ValueError("invalid exponential kernel")

    @property
    def degree(self) -> int:
        return max(max(i, j) for i, j, _ in self.lambdas) + 1

    @property
    def bound(self) -> float:
        return 1.0

    def batch(self, r: np.ndarray) -> np.ndarray:
        s = np.zeros(r.shape[:-2])
        for i, j, l in self.lambdas:
            s += l * r[..., i, j]
        return np.exp(-s)


@dataclass(frozen=True)
class ProductKernel:
    """Product of built-in kernels."""

    factors: tuple

    @property
    def degree(self) -> int:
        return max(f.degree for f in self.factors)

    @property
    def bound(self) -> float:
        out = 1.0
        for f in self.factors:
            out *= f.bound
        return out

    def batch(self, r: np.ndarray) -> np.ndarray:
        out = np.ones(r.shape[:-2])
        for f in self.factors:
            out = out * f.batch(r)
        return out


Kernel = IndicatorKernel | ExponentialKernel | ProductKernel


@dataclass(frozen=True)
class PolynomialDescriptor:
    """Degree-n functional: mean of ``kernel`` over n-point distance draws."""

    degree: int
    kernel: Kernel
    sup_norm_bound: float = field(default=0.0)

    def __post_init__(self):
        if self.degree < 1:
            raise ValueError("degree must be positive")
        if self.kernel.degree > self.degree:
            raise ValueError("kernel touches pairs beyond the stated degree")
        bound = self.sup_norm_bound if self.sup_norm_bound > 0 else self.kernel.bound
        object.__setattr__(self, "sup_norm_bound", float(bound))


def exponential_pair_kernel(lam: float) -> PolynomialDescriptor:
    """Convenience: degree-2 kernel exp(-lam * r12)."""
    return PolynomialDescriptor(2, ExponentialKernel(((0, 1, lam),)))


def threshold_pair_kernel(t: float) -> PolynomialDescriptor:
    """Convenience: degree-2 kernel 1{r12 <= t}."""
    return PolynomialDescriptor(2, IndicatorKernel(t))


# --------------------------------------------------------------------------
# Sampling and evaluation
# --------------------------------------------------------------------------


def sample_distance_submatrix(space: FiniteMmSpace, m: int, rng: RandomSource) -> DistanceMatrix:
    """Pairwise distances of m points drawn i.i.d. (with replacement)."""
    if m < 1:
        raise ValueError("m must be positive")
    gen = rng.generator()
    idx = gen.choice(space.size, size=m, p=space.weights)
    return DistanceMatrix(space.distances.values[np.ix_(idx, idx)])


def _submatrices(r: np.ndarray, idx: np.ndarray) -> np.ndarray:
    # idx: (m, n) index tuples -> (m, n, n) distance submatrices
    return r[idx[:, :, None], idx[:, None, :]]


def _tuple_chunks(size: int, n: int):
    it = itertools.product(range(size), repeat=n)
    while True:
        chunk = list(itertools.islice(it, _CHUNK))
        if not chunk:
            return
        yield np.array(chunk, dtype=np.intp)


def evaluate_polynomial(
    space: FiniteMmSpace,
    poly: PolynomialDescriptor,
    mode: str,
    rng: RandomSource | None = None,
    reps: int = 10000,
) -> float:
    """Evaluate the polynomial in ``exact``, ``exact-distinct`` or
    ``monte-carlo`` mode.

    exact           weighted mean over all size^n ordered tuples
    exact-distinct  weighted mean over tuples with pairwise-distinct entries
    monte-carlo     empirical mean over ``reps`` i.i.d. draws (needs ``rng``)
    """
    n = poly.degree
    r = space.distances.values
    w = space.weights
    size = space.size

    if mode in ("exact", "exact-distinct"):
        if mode == "exact-distinct" and n > size:
            raise ValueError("degree exceeds space size; no distinct tuples")
        if float(size) ** n > _EXACT_TUPLE_LIMIT:
            raise ResourceLimitError(
                f"{size}^{n} tuples exceed the exact-mode budget; "
                "use monte-carlo mode instead"
            )
        num = 0.0
        den = 0.0
        for idx in _tuple_chunks(size, n):
            wt = np.prod(w[idx], axis=1)
            if mode == "exact-distinct":
                keep = np.ones(len(idx), dtype=bool)
                for a in range(n):
                    for b in range(a + 1, n):
                        keep &= idx[:, a] != idx[:, b]
                idx = idx[keep]
                wt = wt[keep]
                if len(idx) == 0:
                    continue
            vals = poly.kernel.batch(_submatrices(r, idx))
            num += float(np.dot(vals, wt))
            den += float(wt.sum())
        return num / den

    if mode == "monte-carlo":
        if rng is None:
            raise ValueError("monte-carlo mode requires an rng")
        gen = rng.generator()
        total = 0.0
        left = int(reps)
        while left > 0:
            m = min(left, _CHUNK)
            idx = gen.choice(size, size=(m, n), p=w)
            total += float(poly.kernel.batch(_submatrices(r, idx)).sum())
            left -= m
        return total / reps

    raise ValueError(f"unknown mode: {mode!r}")
