import math

import numpy as np
import pytest
from scipy import stats

from argscape.arg import (
    COAL,
    SPLIT,
    ArgEventLog,
    Extraction,
    distinct_tree_count,
    extract_tree,
    restrict_genome,
    sample_arg,
    subsample_arg,
    tree_path,
)
from argscape.fixtures import five_leaf_single_mark_log, five_leaf_two_mark_log
from argscape.rng import RandomSource

SEED = 3100


def test_preconditions():
    rng = RandomSource(SEED)
    with pytest.raises(ValueError):
        sample_arg(0, 0.0, 1.0, 1.0, rng)
    with pytest.raises(ValueError):
        sample_arg(2, 1.0, 0.0, 1.0, rng)
    with pytest.raises(ValueError):
        sample_arg(2, 0.0, 1.0, 0.0, rng)
    with pytest.raises(ValueError):
        sample_arg(2, 0.0, 1.0, -1.0, rng)


def test_no_recombination_limit_is_a_plain_coalescent():
    for i in range(40):
        log = sample_arg(5, 0.0, 1.0, 1e-12, RandomSource(SEED, i))
        assert log.split_count == 0
        tree = extract_tree(log, log.leaves, 0.5)
        tree.validate()
        assert tree.n_leaves == 5


def test_first_event_split_probability():
    # two lines, rho*(b-a) = 1: split rate 2, coalescence rate 1
    reps = 20_000
    splits = sum(
        sample_arg(2, 0.0, 1.0, 1.0, RandomSource(SEED + 1, i)).events[0][0] == SPLIT
        for i in range(reps)
    )
    target = 2 / 3
    assert abs(splits / reps - target) <= 3 * math.sqrt(target * (1 - target) / reps)


def test_particle_count_trajectory_is_birth_death():
    for i in range(200):
        log = sample_arg(4, 0.0, 1.0, 1.5, RandomSource(SEED + 2, i))
        log.validate()
        counts = log.particle_count_trajectory()
        assert counts[0] == 4 and counts[-1] == 1
        assert all(abs(a - b) == 1 for a, b in zip(counts, counts[1:]))


def test_first_transition_frequencies():
    # from k=3 the chain moves up with probability rho/(rho + 1) at rho*(b-a)=1
    reps = 20_000
    ups = sum(
        sample_arg(3, 0.0, 1.0, 1.0, RandomSource(SEED + 3, i)).events[0][0] == SPLIT
        for i in range(reps)
    )
    counts = np.array([ups, reps - ups])
    res = stats.chisquare(counts, reps * np.array([0.5, 0.5]))
    assert res.pvalue > 0.01


def test_extraction_is_piecewise_constant_in_locus():
    eps = 1e-12
    for i in range(100):
        log = sample_arg(4, 0.0, 1.0, 2.0, RandomSource(SEED + 4, i))
        for mark in log.split_marks():
            if not (0.0 + eps < mark < 1.0 - eps):
                continue
            at = extract_tree(log, log.leaves, mark).structure_key()
            below = extract_tree(log, log.leaves, mark - eps).structure_key()
            above = extract_tree(log, log.leaves, mark + eps).structure_key()
            assert at == below  # left child is followed when u <= mark
            path = tree_path(log)
            assert (above != at) == (mark in path.breakpoints)


def test_extracted_pair_distance_is_standard_exponential():
    reps = 10_000
    times = []
    for i in range(reps):
        log = sample_arg(5, 0.0, 1.0, 1.0, RandomSource(SEED + 5, i))
        tree = extract_tree(log, (2, 4), 0.7)
        times.append(tree.root_time)
    assert stats.kstest(times, "expon").pvalue > 0.01


def test_node_identity_coherence_across_loci():
    # merges occurring at the same recorded event report the same node id
    for i in range(200):
        log = sample_arg(5, 0.0, 1.0, 1.0, RandomSource(SEED + 6, i))
        t_left = extract_tree(log, log.leaves, 0.0)
        t_right = extract_tree(log, log.leaves, 1.0)
        shared = {m[3] for m in t_left.merges} & {m[3] for m in t_right.merges}
        times_left = {m[3]: m[0] for m in t_left.merges}
        times_right = {m[3]: m[0] for m in t_right.merges}
        for node in shared:
            assert times_left[node] == times_right[node]


def test_tree_path_basics():
    log = sample_arg(6, 0.0, 1.0, 1e-12, RandomSource(SEED + 7))
    path = tree_path(log)
    assert path.breakpoints == () and len(path.trees) == 1

    fixture = five_leaf_two_mark_log(0.3, 0.7)
    path = tree_path(fixture)
    assert path.breakpoints == (0.3, 0.7)
    assert len({t.structure_key() for t in path.trees}) == 3
    assert path.evaluate(0.3).structure_key() == path.trees[0].structure_key()
    assert path.evaluate(0.31).structure_key() == path.trees[1].structure_key()


def test_distinct_trees_bounded_by_splits():
    for i in range(1000):
        log = sample_arg(4, 0.0, 1.0, 1.0, RandomSource(SEED + 8, i))
        r, count = distinct_tree_count(log)
        assert 1 <= count <= r + 1


def test_path_agrees_with_extraction_everywhere():
    gen = RandomSource(SEED + 9).generator()
    for i in range(50):
        log = sample_arg(4, 0.0, 1.0, 1.5, RandomSource(SEED + 10, i))
        path = tree_path(log)
        for u in gen.random(5):
            assert path.evaluate(u).structure_key() == extract_tree(
                log, log.leaves, u
            ).structure_key()


def test_subsample_full_leafset_is_identity():
    log = sample_arg(5, 0.0, 1.0, 1.0, RandomSource(SEED + 11))
    sub = subsample_arg(log, log.leaves)
    assert sub.events == log.events


def test_subsample_pair_first_event_law():
    # a followed pair behaves as a two-line graph: split rate 2*rho*(b-a)
    reps = 20_000
    lam = 1.0
    target = 2 * lam / (1 + 2 * lam)
    hits = 0
    for i in range(reps):
        log = sample_arg(6, 0.0, 1.0, lam, RandomSource(SEED + 12, i))
        sub = subsample_arg(log, (2, 5))
        hits += sub.events[0][0] == SPLIT
    assert abs(hits / reps - target) <= 3 * math.sqrt(target * (1 - target) / reps)


def test_subsample_chain_matches_direct(two_sided_reps=15_000):
    sub_up = []
    direct_up = []
    for i in range(two_sided_reps):
        log = sample_arg(6, 0.0, 1.0, 1.0, RandomSource(SEED + 13, i))
        sub = subsample_arg(log, (1, 2, 3))
        sub_up.append(sub.events[0][0] == SPLIT)
        direct = sample_arg(3, 0.0, 1.0, 1.0, RandomSource(SEED + 14, i))
        direct_up.append(direct.events[0][0] == SPLIT)
    table = np.array(
        [
            [sum(sub_up), len(sub_up) - sum(sub_up)],
            [sum(direct_up), len(direct_up) - sum(direct_up)],
        ]
    )
    assert stats.chi2_contingency(table).pvalue > 0.01


def test_subsample_validates_and_preserves_labels():
    log = sample_arg(6, 0.0, 1.0, 1.0, RandomSource(SEED + 15))
    sub = subsample_arg(log, (2, 4, 6))
    sub.validate()
    assert sub.leaves == (2, 4, 6)
    tree = extract_tree(sub, (2, 6), 0.5)
    assert set(tree.leaf_labels) == {2, 6}


def test_restrict_identity_interval():
    log = sample_arg(5, 0.0, 1.0, 1.0, RandomSource(SEED + 16))
    res = restrict_genome(log, 0.0, 1.0)
    assert res.events == log.events


def test_restrict_preserves_trees_exactly():
    gen = RandomSource(SEED + 17).generator()
    for i in range(200):
        log = sample_arg(5, 0.0, 1.0, 1.5, RandomSource(SEED + 18, i))
        res = restrict_genome(log, 0.25, 0.75)
        res.validate()
        u = 0.25 + 0.5 * gen.random()
        assert extract_tree(res, log.leaves, u).structure_key() == extract_tree(
            log, log.leaves, u
        ).structure_key()


def test_restrict_split_count_matches_direct_law():
    reps = 15_000
    restricted = []
    direct = []
    for i in range(reps):
        log = sample_arg(4, 0.0, 1.0, 1.0, RandomSource(SEED + 19, i))
        restricted.append(restrict_genome(log, 0.2, 0.7).split_count)
        direct.append(sample_arg(4, 0.2, 0.7, 1.0, RandomSource(SEED + 20, i)).split_count)
    se = math.sqrt(np.var(restricted) / reps + np.var(direct) / reps)
    assert abs(np.mean(restricted) - np.mean(direct)) <= 3 * se


def test_hudson_style_tree_law_matches_gm():
    # heights at a fixed locus from both simulators against each other
    reps = 4000
    h_gm, h_hud = [], []
    for i in range(reps):
        h_gm.append(
            extract_tree(
                sample_arg(3, 0.0, 1.0, 2.0, RandomSource(SEED + 21, i)), (1, 2, 3), 0.4
            ).root_time
        )
        h_hud.append(
            extract_tree(
                sample_arg(3, 0.0, 1.0, 2.0, RandomSource(SEED + 22, i), style="hudson"),
                (1, 2, 3),
                0.4,
            ).root_time
        )
    assert stats.ks_2samp(h_gm, h_hud).pvalue > 0.01


def test_jsonl_roundtrip():
    log = sample_arg(4, 0.0, 2.0, 0.7, RandomSource(SEED + 23))
    back = ArgEventLog.from_jsonl(log.to_jsonl())
    assert back == log


def test_extraction_errors():
    log = sample_arg(3, 0.0, 1.0, 1.0, RandomSource(SEED + 24))
    with pytest.raises(ValueError):
        extract_tree(log, (1, 2), 1.5)
    with pytest.raises(ValueError):
        extract_tree(log, (), 0.5)
    with pytest.raises(ValueError):
        extract_tree(log, (1, 9), 0.5)
    with pytest.raises(ValueError):
        restrict_genome(log, 0.5, 0.2)


def test_single_mark_fixture_extractions():
    log = five_leaf_single_mark_log(0.5)
    left = extract_tree(log, log.leaves, 0.2)
    right = extract_tree(log, log.leaves, 0.8)
    groups_left = {(m[0], tuple(sorted(left.leaf_sets[m[3]]))) for m in left.merges}
    groups_right = {(m[0], tuple(sorted(right.leaf_sets[m[3]]))) for m in right.merges}
    assert groups_left == {(1.0, (4, 5)), (2.3, (2, 3)), (5.0, (2, 3, 4, 5)), (7.0, (1, 2, 3, 4, 5))}
    assert groups_right == {(1.0, (4, 5)), (2.3, (2, 3)), (6.0, (1, 4, 5)), (7.0, (1, 2, 3, 4, 5))}


def test_extended_routes_reach_the_final_particle():
    log = sample_arg(4, 0.0, 1.0, 1.0, RandomSource(SEED + 25))
    ex = Extraction.run(log, log.leaves, 0.5, extended=True)
    final = {route[-1][1] for route in ex.routes.values()}
    assert len(final) == 1
