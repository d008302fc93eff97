import math

import numpy as np
import pytest
from scipy import integrate, stats

from argscape.mmspace import (
    DistanceMatrix,
    FiniteMmSpace,
    IndicatorKernel,
    ResourceLimitError,
    evaluate_polynomial,
    exponential_pair_kernel,
    sample_distance_submatrix,
    threshold_pair_kernel,
)
from argscape.rng import RandomSource
from argscape.trees import sample_kingman

SEED = 2000


def two_leaf_space(t):
    d = DistanceMatrix(np.array([[0.0, 2 * t], [2 * t, 0.0]]))
    return FiniteMmSpace((1, 2), d, np.array([0.5, 0.5]))


def random_space(rng_seed, n):
    gen = RandomSource(rng_seed).generator()
    pts = gen.random((n, 3))
    d = DistanceMatrix(np.linalg.norm(pts[:, None] - pts[None, :], axis=2))
    w = gen.dirichlet(np.ones(n))
    return FiniteMmSpace(tuple(range(n)), d, w)


def test_distance_matrix_validation():
    with pytest.raises(ValueError):
        DistanceMatrix(np.array([[0.0, 1.0], [2.0, 0.0]]))  # asymmetric
    with pytest.raises(ValueError):
        DistanceMatrix(np.array([[1.0, 1.0], [1.0, 0.0]]))  # nonzero diagonal
    with pytest.raises(ValueError):
        DistanceMatrix(np.array([[0.0, -1.0], [-1.0, 0.0]]))


def test_mm_space_validation():
    d = DistanceMatrix(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        FiniteMmSpace((1, 2), d, np.array([1.0, 0.0]))  # not full support
    with pytest.raises(ValueError):
        FiniteMmSpace((1, 2), d, np.array([0.6, 0.6]))  # does not sum to 1


def test_exact_two_leaf_exponential_kernel():
    t = 0.7
    lam = 1.3
    space = two_leaf_space(t)
    poly = exponential_pair_kernel(lam)
    # enumeration over the 4 ordered pairs: two diagonal (r=0), two off-diagonal
    expected = (1 + math.exp(-2 * lam * t)) / 2
    assert math.isclose(evaluate_polynomial(space, poly, "exact"), expected, abs_tol=1e-12)
    assert math.isclose(
        evaluate_polynomial(space, poly, "exact-distinct"), math.exp(-2 * lam * t), abs_tol=1e-12
    )


def test_distinct_pair_expectation_over_coalescent_trees():
    # E[exp(-2 lam T)] with T ~ Exp(1); quadrature oracle, then MC over trees
    lam = 0.8
    oracle, _ = integrate.quad(lambda t: math.exp(-2 * lam * t) * math.exp(-t), 0, np.inf)
    assert math.isclose(oracle, 1 / (1 + 2 * lam), rel_tol=1e-9)
    reps = 20_000
    poly = exponential_pair_kernel(lam)
    vals = [
        evaluate_polynomial(
            sample_kingman(2, RandomSource(SEED, i)).to_mm_space(), poly, "exact-distinct"
        )
        for i in range(reps)
    ]
    se = np.std(vals, ddof=1) / math.sqrt(reps)
    assert abs(np.mean(vals) - oracle) <= 3 * se


def test_monte_carlo_agrees_with_exact():
    reps = 4000
    for i in range(100):
        space = random_space(SEED + 40 + i, 3 + i % 5)
        poly = (
            exponential_pair_kernel(0.2 + 0.1 * (i % 7))
            if i % 2
            else threshold_pair_kernel(0.1 + 0.05 * (i % 9))
        )
        exact = evaluate_polynomial(space, poly, "exact")
        mc = evaluate_polynomial(space, poly, "monte-carlo", RandomSource(SEED + 1, i), reps=reps)
        assert abs(mc - exact) <= 4 / math.sqrt(reps) * poly.sup_norm_bound


def test_exact_vs_distinct_gap_shrinks():
    lam = 0.5
    poly = exponential_pair_kernel(lam)
    gaps = []
    for n in (10, 100, 1000):
        tree = sample_kingman(n, RandomSource(SEED + 2, n))
        space = tree.to_mm_space()
        exact = evaluate_polynomial(space, poly, "exact")
        distinct = evaluate_polynomial(space, poly, "exact-distinct")
        falling = n * (n - 1)
        bound = poly.sup_norm_bound * (1 - falling / n**2)
        assert abs(exact - distinct) <= bound + 1e-12
        gaps.append(abs(exact - distinct))
    assert gaps[2] < gaps[0]


def test_exact_mode_resource_limit():
    space = random_space(SEED + 3, 200)
    poly = threshold_pair_kernel(0.5)
    big = type(poly)(degree=4, kernel=poly.kernel)
    with pytest.raises(ResourceLimitError):
        evaluate_polynomial(space, big, "exact")


def test_submatrix_m1_is_zero():
    space = two_leaf_space(0.3)
    sub = sample_distance_submatrix(space, 1, RandomSource(SEED + 4))
    assert sub.size == 1 and sub[0, 0] == 0.0


def test_submatrix_atom_at_zero():
    # drawing the same leaf twice has probability 1/n; for n=2 the entry is 0
    # in 2 of the 4 ordered pairs
    space = two_leaf_space(0.4)
    reps = 20_000
    zeros = sum(
        sample_distance_submatrix(space, 2, RandomSource(SEED + 5, i))[0, 1] == 0.0
        for i in range(reps)
    )
    assert abs(zeros / reps - 0.5) <= 3 * math.sqrt(0.25 / reps)


def test_distinct_pair_submatrix_is_exponential():
    # conditioned on distinct leaves, entry/2 is the pair merge time ~ Exp(1)
    reps = 10_000
    draws = []
    i = 0
    while len(draws) < reps:
        tree = sample_kingman(4, RandomSource(SEED + 6, i))
        sub = sample_distance_submatrix(tree.to_mm_space(), 2, RandomSource(SEED + 7, i))
        i += 1
        if sub[0, 1] > 0:
            draws.append(sub[0, 1] / 2)
    res = stats.kstest(draws, "expon")
    assert res.pvalue > 0.01


def test_kernel_degree_validation():
    with pytest.raises(ValueError):
        type(exponential_pair_kernel(1.0))(degree=1, kernel=IndicatorKernel(1.0, 0, 1))
