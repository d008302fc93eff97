import math

import numpy as np
import pytest
from scipy import integrate, stats

from argscape.analytic import prob_equal_same_pair
from argscape.arg import TreePath, sample_arg, tree_path
from argscape.experiments import _pair_merge_node
from argscape.rng import RandomSource
from argscape.trees import sample_kingman
from argscape.walk import (
    WalkStep,
    WalkVariant,
    breakpoint_intensity_check,
    sample_walk,
)

SEED = 6300
VARIANTS = [WalkVariant.full(), WalkVariant.smc(), WalkVariant.smc_prime(), WalkVariant.macs(3)]


def test_variant_parsing():
    assert WalkVariant.parse("full").kind == "full"
    assert WalkVariant.parse("smc-prime").kind == "smc-prime"
    assert WalkVariant.parse("macs:5") == WalkVariant.macs(5)
    assert WalkVariant.parse("macs(2)") == WalkVariant.macs(2)
    with pytest.raises(ValueError):
        WalkVariant.parse("bogus")
    with pytest.raises(ValueError):
        WalkVariant.macs(0)


def test_preconditions():
    rng = RandomSource(SEED)
    with pytest.raises(ValueError):
        sample_walk(0, 0.0, 1.0, 1.0, WalkVariant.full(), rng)
    with pytest.raises(ValueError):
        sample_walk(2, 1.0, 1.0, 1.0, WalkVariant.full(), rng)
    with pytest.raises(ValueError):
        sample_walk(2, 0.0, 1.0, 0.0, WalkVariant.full(), rng)


@pytest.mark.parametrize("variant", VARIANTS, ids=str)
def test_no_recombination_limit(variant):
    path = sample_walk(4, 0.0, 1.0, 1e-12, variant, RandomSource(SEED, 1))
    assert path.breakpoints == ()
    assert len(path.trees) == 1
    path.trees[0].validate()


@pytest.mark.parametrize("variant", VARIANTS, ids=str)
def test_walk_paths_are_valid(variant):
    for i in range(25):
        path = sample_walk(4, 0.0, 1.0, 1.5, variant, RandomSource(SEED + 1, i))
        path.source.validate()
        for t in path.trees:
            t.validate()
        assert all(0.0 < m < 1.0 for m in path.breakpoints)
        assert list(path.breakpoints) == sorted(path.breakpoints)


def test_walk_is_deterministic():
    a = sample_walk(5, 0.0, 1.0, 1.0, WalkVariant.macs(2), RandomSource(99, 3))
    b = sample_walk(5, 0.0, 1.0, 1.0, WalkVariant.macs(2), RandomSource(99, 3))
    assert a.source.events == b.source.events
    assert a.walk_trace == b.walk_trace


@pytest.mark.parametrize("variant", VARIANTS, ids=str)
def test_marginal_tree_is_a_coalescent(variant):
    # level durations of the tree at the far end of the genome
    reps = 3000
    n = 4
    levels = np.array(
        [
            sample_walk(n, 0.0, 1.0, 1.0, variant, RandomSource(SEED + 2, i))
            .evaluate(1.0)
            .level_times()
            for i in range(reps)
        ]
    )
    for i, k in enumerate(range(n, 1, -1)):
        rate = k * (k - 1) / 2
        p = stats.kstest(levels[:, i], "expon", args=(0, 1 / rate)).pvalue
        assert p > 0.01, f"{variant} level {k}: p={p}"


def test_full_walk_matches_backward_graph():
    # same-locus-pair statistic and breakpoint counts against the
    # backward simulation at rho*(b-a) = 1
    reps = 6000
    rho = 1.0
    hits = 0
    wk_bp = []
    for i in range(reps):
        path = sample_walk(2, 0.0, 1.0, rho, WalkVariant.full(), RandomSource(SEED + 3, i))
        n0, _ = _pair_merge_node(path.source.events, 1, 2, 0.0)
        n1, _ = _pair_merge_node(path.source.events, 1, 2, 1.0)
        hits += n0 == n1
        wk_bp.append(len(path.breakpoints))
    target = prob_equal_same_pair(rho)
    assert abs(hits / reps - target) <= 3 * math.sqrt(target * (1 - target) / reps)
    ar_bp = [
        len(tree_path(sample_arg(2, 0.0, 1.0, rho, RandomSource(SEED + 4, i))).breakpoints)
        for i in range(reps)
    ]
    se = math.sqrt(np.var(wk_bp) / reps + np.var(ar_bp) / reps)
    assert abs(np.mean(wk_bp) - np.mean(ar_bp)) <= 3 * se


def test_smc_first_gap_mixture_law():
    # first gap given the tree is Exp(2 rho T); the mixture CDF comes from
    # numeric integration, independent of any closed form
    rho = 1.0
    reps = 10_000
    gaps = np.array(
        [
            sample_walk(2, 0.0, 50.0, rho, WalkVariant.smc(), RandomSource(SEED + 5, i))
            .walk_trace[0]
            .gap
            for i in range(reps)
        ]
    )

    def cdf(g):
        val, _ = integrate.quad(lambda t: math.exp(-t) * (1 - math.exp(-2 * rho * t * g)), 0, np.inf)
        return val

    grid = np.quantile(gaps, np.linspace(0.05, 0.95, 19))
    emp = np.searchsorted(np.sort(gaps), grid, side="right") / reps
    sup = max(abs(emp[i] - cdf(g)) for i, g in enumerate(grid))
    assert sup <= 1.63 / math.sqrt(reps)  # 1% KS band


def test_full_first_gap_mean_against_direct_oracle():
    # initial structure length is (two branches of length T) + the root ray
    # up to the horizon: L = 2T + (H - T); oracle averages 1/(rho L) directly
    rho = 1.0
    horizon = 20.0 * 2.0 * (1.0 - 0.5)
    reps = 20_000
    gen = RandomSource(SEED + 6).generator()
    t_draws = gen.exponential(1.0, size=reps)
    oracle = float(np.mean(1.0 / (rho * (t_draws + horizon))))
    gaps = np.array(
        [
            sample_walk(2, 0.0, 50.0, rho, WalkVariant.full(), RandomSource(SEED + 7, i))
            .walk_trace[0]
            .gap
            for i in range(reps)
        ]
    )
    se = math.sqrt(gaps.var(ddof=1) / reps + np.var(1.0 / (rho * (t_draws + horizon))) / reps)
    assert abs(gaps.mean() - oracle) <= 3 * se


def test_intensity_check_frozen_length_fixture():
    # gaps constructed directly at frozen retained length 3 and rho 2
    us = RandomSource(SEED + 8).uniforms()
    trace = tuple(WalkStep(us.exponential(6.0), 3.0) for _ in range(100_000))
    tree = sample_kingman(3, RandomSource(SEED + 9))
    path = TreePath(0.0, 1.0, (), (tree,), walk_trace=trace)
    report = breakpoint_intensity_check(path, rho=2.0)
    assert report.n_gaps == 100_000
    assert report.p_value > 0.01


def test_intensity_check_on_real_walks():
    pit_paths = [
        sample_walk(3, 0.0, 1.0, 1.0, WalkVariant.smc(), RandomSource(SEED + 10, i))
        for i in range(300)
    ]
    from argscape.walk import pooled_intensity_check_values

    pit = []
    for p in pit_paths:
        pit.extend(
            1.0 - math.exp(-1.0 * s.retained_length * s.gap) for s in p.walk_trace
        )
    report = pooled_intensity_check_values(pit)
    assert report.p_value > 0.01


def test_intensity_check_requires_trace():
    log = sample_arg(3, 0.0, 1.0, 1.0, RandomSource(SEED + 11))
    with pytest.raises(ValueError):
        breakpoint_intensity_check(tree_path(log), 1.0)


def test_smc_prime_and_macs1_coincide():
    # under the retained-structure rules the two variants use identical
    # availability, so the same stream yields the same walk
    a = sample_walk(4, 0.0, 1.0, 1.5, WalkVariant.smc_prime(), RandomSource(SEED + 12, 7))
    b = sample_walk(4, 0.0, 1.0, 1.5, WalkVariant.macs(1), RandomSource(SEED + 12, 7))
    assert a.source.events == b.source.events


def test_single_leaf_walk():
    path = sample_walk(1, 0.0, 1.0, 5.0, WalkVariant.full(), RandomSource(SEED + 13))
    assert len(path.trees) == 1
    assert path.trees[0].n_leaves == 1
