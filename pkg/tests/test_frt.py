import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from outlier_hst import errors
from outlier_hst.frt import (FixedSampler, FrtSampler, ListSampler, frt_sample, singleton_sampler)
from outlier_hst.hst import random_hst, to_json, validate_hst
from outlier_hst.merge import merge_hst
from outlier_hst.metric import Subset, random_euclidean, random_graph_metric, validate


def clique(n):
    return validate(np.ones((n, n)) - np.eye(n))


def test_single_point():
    e = frt_sample(validate([[0.0]]), 1)
    assert e.points == [0] and len(e.tree) == 1


def test_two_points_range():
    m = validate([[0, 1], [1, 0]])
    for s in range(50):
        d = frt_sample(m, s).distance(0, 1)
        assert 1 <= d <= 4


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 14), st.integers(0, 10**6))
def test_non_contracting_and_valid(n, seed):
    m = random_graph_metric(n, seed)
    e = frt_sample(m, seed)
    assert validate_hst(e.tree) == []
    D = e.distance_matrix()
    off = ~np.eye(n, dtype=bool)
    assert (D[off] >= m.dist[off]).all()


def test_same_seed_same_tree():
    m = random_euclidean(12, 4)
    assert to_json(frt_sample(m, 9)) == to_json(frt_sample(m, 9))
    assert frt_sample(m, 9).tree == frt_sample(m, 9).tree


def test_subset_domain():
    m = random_euclidean(10, 1)
    s = Subset(m, [1, 4, 6])
    e = frt_sample(s, 2)
    assert e.points == [1, 4, 6]
    assert FrtSampler(s).points == [1, 4, 6]


def test_k8_regression():
    m = clique(8)
    acc = np.zeros((8, 8))
    for e in FrtSampler(m).samples(200, 0):
        D = e.distance_matrix()
        assert (D[~np.eye(8, dtype=bool)] >= 1).all()
        acc += D
    assert (acc / 200)[~np.eye(8, dtype=bool)].max() <= 8


def test_fixed_and_singleton_samplers():
    e = random_hst(range(5), 2)
    f = FixedSampler(e)
    assert f.sample(1) is f.sample(2)
    m = validate([[0.0, 1.0], [1.0, 0.0]])
    s = singleton_sampler(m, 1)
    a, b = s.sample(0), s.sample(1)
    assert a.tree == b.tree and a.points == [1]


def test_singleton_merge_leaves_other_unchanged():
    m = random_euclidean(6, 3)
    e = frt_sample(m, 4)
    merged = merge_hst(e, singleton_sampler(m, 2).sample())
    assert np.array_equal(merged.distance_matrix(), e.distance_matrix())


def test_list_sampler():
    m = random_euclidean(4, 0)
    a, b = frt_sample(m, 1), frt_sample(m, 2)
    ls = ListSampler([(0.25, a), (0.75, b)])
    picks = [ls.sample(s) is b for s in range(400)]
    assert 0.6 < np.mean(picks) < 0.9
    with pytest.raises(errors.ProbabilitiesDontSum):
        ListSampler([(0.5, a), (0.4, b)])


def test_distortion_bound_random_metrics():
    for seed, n in ((0, 10), (1, 16)):
        m = random_euclidean(n, seed)
        acc = np.zeros((n, n))
        N = 200
        for e in FrtSampler(m).samples(N, seed):
            acc += e.distance_matrix()
        ratio = (acc / N)[~np.eye(n, dtype=bool)] / m.dist[~np.eye(n, dtype=bool)]
        assert ratio.max() <= 8 * math.log(n) + 4
