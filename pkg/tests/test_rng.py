import numpy as np
import pytest

from argscape.rng import RandomSource


def test_same_source_reproduces_sequences():
    a = RandomSource(42, 3).generator().random(100)
    b = RandomSource(42, 3).generator().random(100)
    assert np.array_equal(a, b)


def test_distinct_streams_differ():
    a = RandomSource(42, 0).generator().random(100)
    b = RandomSource(42, 1).generator().random(100)
    assert not np.array_equal(a, b)


def test_streams_look_independent():
    # crude smoke check: correlation across many stream pairs stays tiny
    n = 200
    xs = np.array([RandomSource(7, i).generator().random(64) for i in range(n)])
    corr = np.corrcoef(xs)
    off_diag = corr[~np.eye(n, dtype=bool)]
    assert np.abs(off_diag).max() < 0.6  # 64 samples: generous band
    assert np.abs(off_diag).mean() < 0.12


def test_uniform_stream_matches_generator():
    us = RandomSource(5).uniforms()
    direct = RandomSource(5).generator().random(10000)
    assert np.allclose([us.uniform() for _ in range(10000)], direct)


def test_exponential_inverse_cdf():
    us = RandomSource(9).uniforms()
    draws = np.array([us.exponential(2.5) for _ in range(20000)])
    assert abs(draws.mean() - 1 / 2.5) < 4 * (1 / 2.5) / np.sqrt(20000)
    with pytest.raises(ValueError):
        us.exponential(0.0)


def test_pair_index_uniform_over_pairs():
    us = RandomSource(11).uniforms()
    counts = {}
    n = 30000
    for _ in range(n):
        counts[us.pair_index(4)] = counts.get(us.pair_index(4), 0) + 1
    assert set(counts) == {(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)}
    for c in counts.values():
        assert abs(c - n / 6) < 5 * np.sqrt(n / 6)


def test_negative_stream_rejected():
    with pytest.raises(ValueError):
        RandomSource(1, -1)
