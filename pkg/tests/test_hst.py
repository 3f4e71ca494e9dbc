import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from outlier_hst import errors
from outlier_hst.hst import (Hst, HstEmbedding, TreeBuilder, check_hst, delete_leaves, eta,
                             from_json, hst_distance, hst_metric, is_ultrametric, random_hst,
                             scale_up, single_leaf, to_json, ultrametric_to_hst, validate_hst)
from outlier_hst.metric import from_graph, validate


def brute_lca_height(t: Hst, a: int, b: int) -> int:
    up = set()
    v = a
    while v >= 0:
        up.add(v)
        v = t.parent[v]
    v = b
    while v not in up:
        v = t.parent[v]
    return t.height[v]


def two_leaf(height=1):
    b = TreeBuilder(2.0)
    r = b.add(height)
    b.chain_to_leaf(r, 0)
    b.chain_to_leaf(r, 1)
    m = validate(np.array([[0.0, 1.0], [1.0, 0.0]]))
    return HstEmbedding(m, b.build())


def test_eta_relation():
    assert eta(2, 0) == 0.5 and eta(2, 1) == 1 and eta(2, 3) == 4
    assert eta(3, 2) == 3


def test_distance_examples():
    e = two_leaf(1)
    assert hst_distance(e, 0, 0) == 0
    assert hst_distance(e, 0, 1) == 1
    e3 = two_leaf(3)
    assert hst_distance(e3, 0, 1) == 4
    assert e3.lca_height(0, 1) == brute_lca_height(e3.tree, e3.leaf_of[0], e3.leaf_of[1])


def test_point_not_embedded():
    e = two_leaf()
    with pytest.raises(errors.PointNotEmbedded):
        hst_distance(e, 0, 7)


def test_validate_single_leaf_ok():
    b = TreeBuilder()
    b.add(0, -1, 0)
    assert validate_hst(b.build()) == []


def test_validate_height_skip():
    b = TreeBuilder()
    r = b.add(2)
    b.add(0, r, 0)
    kinds = [v.kind for v in validate_hst(b.build())]
    assert kinds == ["HeightSkip"]
    with pytest.raises(errors.InvalidHst):
        check_hst(b.build())


def test_validate_leaf_not_at_zero_and_empty():
    b = TreeBuilder()
    r = b.add(2)
    b.add(1, r, 0)
    assert [v.kind for v in validate_hst(b.build())] == ["LeafNotAtZero"]
    empty = Hst(2.0, (), (), (), ())
    assert [v.kind for v in validate_hst(empty)] == ["EmptyTree"]


def test_validate_reports_path():
    b = TreeBuilder()
    r = b.add(3)
    a = b.add(2, r)
    b.chain_to_leaf(a, 0)
    c = b.add(2, r)
    b.add(0, c, 1)
    bad = validate_hst(b.build())
    assert bad[0].kind == "HeightSkip" and bad[0].path == (1, 0)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 16), st.integers(0, 10**6))
def test_random_hst_is_metric_and_ultrametric(n, seed):
    e = random_hst(range(n), seed)
    assert validate_hst(e.tree) == []
    D = e.distance_matrix()
    assert is_ultrametric(D)
    assert np.array_equal(D, D.T)
    # exhaustive triangle check
    for j in range(n):
        assert (D <= D[:, [j]] + D[[j], :] + 1e-12).all()
    # LCA via matrix agrees with pointer walking
    t = e.tree
    for a in range(n):
        for b in range(a + 1, n):
            assert e.lca_height(a, b) == brute_lca_height(t, e.leaf_of[a], e.leaf_of[b])


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 8), st.integers(0, 4), st.integers(0, 4), st.integers(0, 10**6))
def test_scale_up_composes(n, s, t, seed):
    e = random_hst(range(n), seed)
    a = scale_up(scale_up(e, s), t).distance_matrix()
    b = scale_up(e, s + t).distance_matrix()
    assert np.array_equal(a, b)
    assert np.array_equal(b, e.distance_matrix() * 2.0 ** (s + t))


def test_scale_up_examples():
    e = two_leaf(1)
    assert scale_up(e, 0).distance(0, 1) == 1
    assert scale_up(e, 2).distance(0, 1) == 4
    r = random_hst(range(8), 3)
    assert np.array_equal(scale_up(r, 3).distance_matrix(), 8 * r.distance_matrix())
    assert validate_hst(scale_up(r, 3).tree) == []


def test_is_ultrametric_examples():
    path = from_graph([("a", "b", 1), ("b", "c", 1)])
    assert not is_ultrametric(path)
    assert is_ultrametric(validate([[0.0]]))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 12), st.integers(0, 10**6))
def test_ultrametric_to_hst_roundtrip(n, seed):
    e = random_hst(range(n), seed)
    m = validate(e.distance_matrix(), [str(i) for i in range(n)])
    back = ultrametric_to_hst(m)
    assert np.array_equal(back.distance_matrix(), m.dist)


def test_ultrametric_to_hst_rejects():
    with pytest.raises(errors.NotHstMetric):
        ultrametric_to_hst(from_graph([("a", "b", 1), ("b", "c", 1)]))
    um = validate([[0, 3, 3], [3, 0, 1.5], [3, 1.5, 0]])
    with pytest.raises(errors.NotHstMetric):
        ultrametric_to_hst(um)
    rounded = ultrametric_to_hst(um, round_up=True).distance_matrix()
    assert (rounded >= um.dist).all() and (rounded < 2 * um.dist + np.eye(3)).all()


def test_delete_leaves_keeps_distances():
    e = random_hst(range(9), 11)
    keep = [0, 2, 3, 7]
    r = delete_leaves(e, [p for p in range(9) if p not in keep])
    assert r.points == keep
    assert np.array_equal(r.distance_matrix(keep), e.distance_matrix(keep))
    with pytest.raises(errors.PointNotEmbedded):
        delete_leaves(e, range(9))


def test_json_roundtrip():
    e = random_hst(range(7), 5)
    m = hst_metric(e)
    e2 = HstEmbedding(m, e.tree)
    obj = to_json(e2)
    back = from_json(obj, m)
    assert back.tree == e2.tree
    assert to_json(back) == obj


def test_single_leaf():
    m = validate([[0.0]])
    e = single_leaf(m, 0)
    assert e.points == [0] and len(e.tree) == 1
