import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from outlier_hst import errors
from outlier_hst.hst import HstEmbedding, TreeBuilder, random_hst, validate_hst
from outlier_hst.merge import merge_hst
from outlier_hst.metric import MetricSpace


def blank_metric(n):
    return MetricSpace([f"p{i}" for i in range(n)], np.zeros((n, n)))


def check_merge(a1, a2):
    out = merge_hst(a1, a2)
    assert validate_hst(out.tree) == []
    (v,) = set(a1.points) & set(a2.points)
    z1, z2 = a1.points, a2.points
    assert np.array_equal(out.distance_matrix(z1), a1.distance_matrix(z1))
    assert np.array_equal(out.distance_matrix(z2), a2.distance_matrix(z2))
    for x in z1:
        for y in z2:
            if x != v and y != v:
                assert out.distance(x, y) >= max(a1.distance(x, v), a2.distance(v, y))
    assert out.tree.root_height == max(a1.tree.root_height, a2.tree.root_height)
    assert out.points == sorted(set(z1) | set(z2))
    return out


def test_example_one():
    m = blank_metric(3)  # u=0, x=1, y=2
    b = TreeBuilder()
    r = b.add(1)
    b.add(0, r, 0)
    b.add(0, r, 1)
    t1 = HstEmbedding(m, b.build())
    b = TreeBuilder()
    r = b.add(2)
    b.chain_to_leaf(b.add(1, r), 0)
    b.chain_to_leaf(b.add(1, r), 2)
    t2 = HstEmbedding(m, b.build())
    out = check_merge(t1, t2)
    assert out.distance(0, 1) == 1 and out.distance(0, 2) == 2 and out.distance(1, 2) == 2


def test_example_singleton():
    m = blank_metric(4)
    t1 = random_hst([0, 1, 2, 3], 3, metric=m)
    b = TreeBuilder()
    b.add(0, -1, 2)
    out = check_merge(t1, HstEmbedding(m, b.build()))
    assert np.array_equal(out.distance_matrix(), t1.distance_matrix())


def test_example_three():
    m = blank_metric(4)  # u=0, x=1, w=2, y=3
    b = TreeBuilder()
    r = b.add(2)
    ux = b.add(1, r)
    b.add(0, ux, 0)
    b.add(0, ux, 1)
    b.chain_to_leaf(r, 2)
    t1 = HstEmbedding(m, b.build())
    b = TreeBuilder()
    r = b.add(1)
    b.add(0, r, 0)
    b.add(0, r, 3)
    t2 = HstEmbedding(m, b.build())
    out = check_merge(t1, t2)
    assert out.distance(1, 3) == 1
    assert out.distance(2, 3) == 2


@settings(max_examples=150, deadline=None)
@given(st.integers(1, 10), st.integers(1, 10), st.integers(0, 10**6))
def test_random_merges(n1, n2, seed):
    rng = np.random.default_rng(seed)
    n = n1 + n2 - 1
    m = blank_metric(n)
    perm = rng.permutation(n)
    z1 = sorted(int(p) for p in perm[:n1])
    shared = z1[int(rng.integers(n1))]
    z2 = sorted([int(p) for p in perm[n1:]] + [shared])
    a1 = random_hst(z1, int(rng.integers(2**31)), metric=m)
    a2 = random_hst(z2, int(rng.integers(2**31)), metric=m)
    check_merge(a1, a2)


def test_errors():
    m = blank_metric(4)
    a = random_hst([0, 1], 1, metric=m)
    b = random_hst([2, 3], 1, metric=m)
    with pytest.raises(errors.SharedPointCountNotOne):
        merge_hst(a, b)
    c = random_hst([0, 1, 2], 2, metric=m)
    with pytest.raises(errors.SharedPointCountNotOne):
        merge_hst(a, c)
    tb = TreeBuilder(3.0)
    r = tb.add(1)
    tb.add(0, r, 1)
    tb.add(0, r, 3)
    with pytest.raises(errors.BetaMismatch):
        merge_hst(random_hst([0, 1], 1, metric=m), HstEmbedding(m, tb.build()))


def test_invalid_input_tree(registry):
    m = blank_metric(3)
    tb = TreeBuilder()
    r = tb.add(2)
    tb.add(0, r, 1)
    tb.add(0, r, 2)
    with registry.exempt():
        bad = HstEmbedding(m, tb.build())
    with pytest.raises(errors.InvalidInputTree):
        merge_hst(random_hst([0, 1], 1, metric=m), bad)
