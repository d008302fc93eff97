import math

import numpy as np
import pytest
from scipy import stats

from argscape.analytic import prob_equal_cross_pair, prob_ring_from_two_shared
from argscape.arg import sample_arg
from argscape.coupling import sample_aux_graph, sample_coupled_pair, sample_real_pair
from argscape.experiments import _pair_merge_node
from argscape.rng import RandomSource

SEED = 5200


def test_trivial_single_leaf_pair():
    res = sample_coupled_pair(1, 0.0, RandomSource(SEED))
    assert res.real_tree_0.merges == () and res.real_tree_u.merges == ()
    assert not res.aux.event_iv_occurred


def test_ring_fires_always_from_two_doubles_at_zero_rate():
    # from (0,2,0) with rho_u = 0 nothing can split, so a ring must fire
    for i in range(2000):
        res = sample_aux_graph(0, 2, 0, 0.0, RandomSource(SEED + 1, i))
        assert res.event_iv_occurred


def test_ring_probability_vanishes_at_large_rate():
    reps = 10_000
    fired = sum(
        sample_aux_graph(2, 0, 2, 100.0, RandomSource(SEED + 2, i)).event_iv_occurred
        for i in range(reps)
    )
    assert fired / reps < 0.004


@pytest.mark.parametrize("rho_u", [0.0, 1.0, 5.0])
def test_ring_probability_matches_closed_form(rho_u):
    reps = 20_000
    fired = sum(
        sample_aux_graph(2, 0, 2, rho_u, RandomSource(SEED + 3, i)).event_iv_occurred
        for i in range(reps)
    )
    target = prob_ring_from_two_shared(rho_u)
    assert abs(fired / reps - target) <= 3 * math.sqrt(target * (1 - target) / reps)


def test_union_bound():
    reps = 10_000
    ru = 5.0
    for n in (2, 3):
        fired = sum(
            sample_aux_graph(n, 0, n, ru, RandomSource(SEED + 4 + n, i)).event_iv_occurred
            for i in range(reps)
        )
        est = fired / reps
        bound = (n * (n - 1) // 2) ** 2 * prob_ring_from_two_shared(ru)
        assert est <= bound + 3 * math.sqrt(max(est * (1 - est), 1 / reps) / reps)


def test_marginal_trees_are_coalescents():
    reps = 5000
    n = 4
    levels0 = []
    for i in range(reps):
        res = sample_aux_graph(n, 0, n, 1.0, RandomSource(SEED + 7, i))
        res.tree_0.validate()
        res.tree_u.validate()
        levels0.append(res.tree_0.level_times())
    levels0 = np.array(levels0)
    for i, k in enumerate(range(n, 1, -1)):
        rate = k * (k - 1) / 2
        assert stats.kstest(levels0[:, i], "expon", args=(0, 1 / rate)).pvalue > 0.01


def test_tree_independence():
    reps = 20_000
    h0, hu = [], []
    for i in range(reps):
        res = sample_aux_graph(3, 0, 3, 1.0, RandomSource(SEED + 8, i))
        h0.append(res.tree_0.root_time)
        hu.append(res.tree_u.root_time)
    corr = np.corrcoef(h0, hu)[0, 1]
    assert abs(corr) <= 3 / math.sqrt(reps)


def test_ring_free_runs_bit_identical():
    checked = 0
    for i in range(3000):
        res = sample_coupled_pair(3, 1.0, RandomSource(SEED + 9, i))
        alone = sample_aux_graph(3, 0, 3, 1.0, RandomSource(SEED + 9, i))
        if res.aux.event_iv_occurred:
            assert alone.event_iv_occurred
            continue
        checked += 1
        assert res.real_tree_0.merges == alone.tree_0.merges
        assert res.real_tree_u.merges == alone.tree_u.merges
        assert res.aux.tree_0.merges == alone.tree_0.merges
    assert checked > 100


def test_real_pair_matches_direct_four_leaf_graph():
    # cross-pair merge equality from the reduced process vs the explicit graph
    reps = 15_000
    rho = 1.0
    hits_reduced = 0
    for i in range(reps):
        t0, tu = sample_real_pair(2, 0, 2, rho, RandomSource(SEED + 10, i))
        hits_reduced += t0.merges[0][3] == tu.merges[0][3]
    hits_direct = 0
    for i in range(reps):
        log = sample_arg(4, 0.0, 1.0, rho, RandomSource(SEED + 11, i))
        n0, _ = _pair_merge_node(log.events, 1, 2, 0.0)
        n1, _ = _pair_merge_node(log.events, 3, 4, 1.0)
        hits_direct += n0 == n1
    target = prob_equal_cross_pair(rho)
    se = math.sqrt(target * (1 - target) / reps)
    assert abs(hits_reduced / reps - target) <= 3 * se
    assert abs(hits_direct / reps - target) <= 3 * se
    two_sample_se = math.sqrt(2) * se
    assert abs(hits_reduced / reps - hits_direct / reps) <= 3 * two_sample_se


def test_coupled_real_marginal_is_two_locus_law():
    reps = 15_000
    rho = 2.0
    hits = 0
    for i in range(reps):
        res = sample_coupled_pair(2, rho, RandomSource(SEED + 12, i))
        hits += res.real_tree_0.merges[0][3] == res.real_tree_u.merges[0][3]
    target = prob_equal_cross_pair(rho)
    assert abs(hits / reps - target) <= 3 * math.sqrt(target * (1 - target) / reps)


def test_death_chain_of_one_margin():
    # lineage count of one tree falls at rate k(k-1)/2 regardless of the
    # configuration of doubles and singles
    reps = 4000
    first = []
    for i in range(reps):
        res = sample_aux_graph(0, 3, 0, 0.7, RandomSource(SEED + 13, i))
        first.append(res.tree_0.merge_times[0])
    assert stats.kstest(first, "expon", args=(0, 1 / 3.0)).pvalue > 0.01


def test_invalid_configurations():
    with pytest.raises(ValueError):
        sample_aux_graph(0, 0, 2, 1.0, RandomSource(SEED))
    with pytest.raises(ValueError):
        sample_aux_graph(2, 0, 2, -1.0, RandomSource(SEED))
    with pytest.raises(ValueError):
        sample_coupled_pair(0, 1.0, RandomSource(SEED))
