import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from outlier_hst import errors
from outlier_hst._random import derive
from outlier_hst.frt import FixedSampler, FrtSampler
from outlier_hst.hst import random_hst, scale_up, ultrametric_to_hst, validate_hst
from outlier_hst.metric import Subset, random_euclidean, random_graph_metric, validate
from outlier_hst.nested import (Assortment, NestedSampler, c_x_default, nearest_anchor,
                                nested_compose, partition_outliers)


def assortment(m, s):
    return Assortment(m, Subset(m, s), FrtSampler(m, s))


def test_nearest_anchor_tie_and_unique():
    m = validate([[0, 1, 1, 3], [1, 0, 2, 2], [1, 2, 0, 2], [3, 2, 2, 0]])
    assert nearest_anchor(m, [1, 2], 0) == 1  # tie goes to the lower index
    assert nearest_anchor(m, [2, 3], 0) == 2
    with pytest.raises(errors.EmptyS):
        nearest_anchor(m, [], 0)


def test_nearest_anchor_matches_scan():
    m = random_euclidean(10, 7)
    s = [0, 2, 3, 5, 8, 9]
    for u in (1, 4, 6, 7):
        best = min(s, key=lambda x: (m.dist[u, x], x))
        assert nearest_anchor(m, s, u) == best


def test_empty_k_is_scaled_s_embedding():
    m = random_euclidean(6, 1)
    a = assortment(m, range(6))
    e, trace = nested_compose(a, seed=3)
    alpha = a.sampler_s.sample(derive(derive(3, 0), 0))
    assert np.array_equal(e.distance_matrix(), 4 * alpha.distance_matrix())
    assert trace.clusters == [] and trace.pi == []


def test_three_point_example():
    m = validate([[0, 2, 1], [2, 0, 2], [1, 2, 0]], ["s1", "s2", "o"])
    a = assortment(m, [0, 1])
    for seed in range(100):
        pre, trace = nested_compose(a, seed, scale=False)
        assert trace.gamma == {2: 0}
        assert trace.clusters == [(2, (2,), 0)]
        assert pre.distance(2, 1) >= max(pre.distance(2, 0), pre.distance(0, 1))
        post = scale_up(pre, 2)
        D = post.distance_matrix()
        assert (D[~np.eye(3, dtype=bool)] >= m.dist[~np.eye(3, dtype=bool)]).all()


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 11), st.integers(0, 10**6), st.data())
def test_trace_partitions_k(n, seed, data):
    m = random_graph_metric(n, seed)
    s = sorted(data.draw(st.sets(st.integers(0, n - 1), min_size=1, max_size=n)))
    trace = partition_outliers(m, Subset(m, s), seed)
    k = [i for i in range(n) if i not in s]
    members = [v for _, mem, _ in trace.clusters for v in mem]
    assert sorted(members) == k
    assert 2 <= trace.b <= 4
    assert sorted(trace.pi) == k
    for u, mem, anchor in trace.clusters:
        assert anchor == trace.gamma[u]
        for v in mem:
            assert m.dist[v, u] <= trace.b * m.dist[v, trace.gamma[v]]


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 10), st.integers(0, 10**6), st.data())
def test_contraction_tiers(n, seed, data):
    m = random_euclidean(n, seed)
    s = sorted(data.draw(st.sets(st.integers(0, n - 1), min_size=1, max_size=n)))
    a = assortment(m, s)
    pre, _ = nested_compose(a, seed, scale=False)
    post = scale_up(pre, 2)
    assert validate_hst(pre.tree) == [] and validate_hst(post.tree) == []
    D = pre.distance_matrix()
    inside = set(s)
    for x in range(n):
        for y in range(x + 1, n):
            tier = {2: 1.0, 1: 0.5, 0: 1 / 3}[(x in inside) + (y in inside)]
            assert D[x, y] >= tier * m.dist[x, y]
    Dp = post.distance_matrix()
    off = ~np.eye(n, dtype=bool)
    assert (Dp[off] >= m.dist[off]).all()


def test_obliviousness():
    m = random_euclidean(9, 2)
    a = assortment(m, [0, 1, 2, 3])
    traces = [nested_compose(a, seed=s, partition_seed=77)[1].to_json(m) for s in range(10)]
    assert all(t == traces[0] for t in traces)
    other = nested_compose(a, seed=0, partition_seed=78)[1].to_json(m)
    assert other["b"] != traces[0]["b"]


def test_identity_s_pairs_scaled_by_four():
    core = random_hst(range(6), 4)
    n = 8
    d = np.zeros((n, n))
    d[:6, :6] = core.distance_matrix()
    d[6:, :6] = d[:6, 6:] = 40.0
    d[6, 7] = d[7, 6] = 40.0
    m = validate(d)
    a = Assortment(m, Subset(m, range(6)), FixedSampler(ultrametric_to_hst(m, range(6))))
    for s in range(20):
        e, _ = nested_compose(a, s)
        assert np.array_equal(e.distance_matrix(list(range(6))), 4 * m.dist[:6, :6])


def test_sampler_interface_and_errors():
    m = random_euclidean(7, 5)
    a = assortment(m, [0, 1, 2])
    ns = NestedSampler(a)
    e = ns.sample(1)
    assert e.points == list(range(7))
    assert ns.config()["scale_steps"] == 2
    with pytest.raises(errors.SamplerFailure):
        Assortment(m, Subset(m, [0, 1]), FrtSampler(m, [0, 1, 2]))

    def broken(metric, pts, seed):
        raise RuntimeError("boom")

    bad = Assortment(m, Subset(m, [0, 1, 2]), FrtSampler(m, [0, 1, 2]), family_rule=broken)
    with pytest.raises(errors.SamplerFailure):
        nested_compose(bad, 0)


def test_c_x_default():
    assert c_x_default(0) == 8.0
    assert c_x_default(2) == 16.0
