import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from outlier_hst import errors
from outlier_hst.evaluate import estimate_distortion, rounding_pair_bound
from outlier_hst.hst import random_hst, validate_hst
from outlier_hst.io import dumps
from outlier_hst.lp_model import build_lp, log2k_sq, radii_for
from outlier_hst.lp_solver import solve
from outlier_hst.metric import gen_expander_clique, random_euclidean, random_graph_metric, validate
from outlier_hst.rounding import (Partitions, RoundingSampler, delta_threshold, lp_value,
                                  outlier_embed, partitions_to_hst, round_partitions,
                                  star_embedding)


def hst_metric_of(n, seed):
    e = random_hst(range(n), seed)
    return validate(e.distance_matrix(), [str(i) for i in range(n)])


def fabricated(m, fill_diag, fill_off):
    """x matrices with given diagonal and off-diagonal values at every radius."""
    out = {}
    for r in radii_for(m.diameter):
        X = np.full((m.n, m.n), float(fill_off))
        np.fill_diagonal(X, fill_diag)
        out[r] = X
    return out


def test_self_assignment_gives_singletons():
    m = random_euclidean(5, 2)
    top = radii_for(m.diameter)[-1]
    for seed in range(5):
        parts = round_partitions(m, fabricated(m, 1.0, 0.0), seed)
        assert not parts.fallback
        for r, lv in parts.levels.items():
            assert sorted(mem for _, mem in lv) == [(i,) for i in range(5)]
        D = partitions_to_hst(m, parts).distance_matrix()
        off = ~np.eye(5, dtype=bool)
        assert (D[off] == 4 * top).all()


def test_all_together_distance_two():
    m = random_euclidean(5, 3)
    parts = round_partitions(m, fabricated(m, 1.0, 1.0), 0)
    e = partitions_to_hst(m, parts)
    assert validate_hst(e.tree) == []
    D = e.distance_matrix()
    assert (D[~np.eye(5, dtype=bool)] == 2).all()


@pytest.mark.parametrize("p", [0.2, 0.7])
def test_two_point_marginal(p):
    m = validate([[0, 1], [1, 0]])
    xs = {1: np.array([[1.0, p], [p, 1.0]])}
    together = [len(round_partitions(m, xs, s).levels[1]) == 1 for s in range(2000)]
    assert abs(np.mean(together) - p) < 0.05


def test_tiny_x_falls_back_to_star():
    m = random_euclidean(4, 1)
    top = radii_for(m.diameter)[-1]
    parts = round_partitions(m, fabricated(m, 0.0, 0.0), 0)
    assert parts.fallback
    cap = math.ceil(16 * 4 * math.log(max(m.diameter, 1) / 0.5))
    assert max(parts.draws.values()) == cap
    D = partitions_to_hst(m, parts).distance_matrix()
    assert (D[~np.eye(4, dtype=bool)] == 2 * top).all()
    assert np.array_equal(star_embedding(m).distance_matrix(), D)


def test_partition_not_covering():
    m = random_euclidean(3, 0)
    parts = Partitions([1], {1: [(0, (0, 1))]})
    with pytest.raises(errors.PartitionNotCovering):
        partitions_to_hst(m, parts)


@pytest.mark.parametrize("seed", [0, 1])
def test_rounded_trees_never_contract(seed):
    m = random_graph_metric(6, seed)
    model = build_lp(m, 2.0, 2)
    sampler = RoundingSampler(m, model, solve(model))
    off = ~np.eye(6, dtype=bool)
    for s in range(500):
        D = sampler.sample(s).distance_matrix()
        assert (D[off] >= m.dist[off]).all()


@settings(max_examples=10, deadline=None)
@given(st.integers(2, 6), st.integers(0, 10**6))
def test_rounded_trees_valid(n, seed):
    m = random_euclidean(n, seed)
    model = build_lp(m, 1.0, 1)
    sampler = RoundingSampler(m, model, solve(model))
    for s in range(20):
        e = sampler.sample(s)
        assert validate_hst(e.tree) == []
        assert e.points == list(range(n))


def test_hst_metric_has_no_outliers():
    m = hst_metric_of(7, 5)
    res = outlier_embed(m, 1.0, 1.0, seed=0)
    assert res.k_star == 1 and res.lp_objective == 0 and len(res.outliers) == 0
    rep = estimate_distortion(res.sampler, m, 200, seed=1)
    assert rep.min_contraction.min() >= 1
    assert rep.max_mean_ratio <= rounding_pair_bound(1.0, 1, 0, 0) + 1


def test_delta_threshold_formula():
    assert delta_threshold(1.0, 723, 1) == 1 / (16 * 723)
    assert delta_threshold(0.5, 10, 8) == 0.5 / (16 * 10 * 9)
    assert log2k_sq(0) == log2k_sq(2) == 1.0


@pytest.mark.parametrize("zeta", [1.0, 723.0])
def test_outlier_count_bound(zeta):
    m = gen_expander_clique(10, 1)
    res = outlier_embed(m, 0.2, 1.0, seed=0, zeta=zeta)
    assert res.lp_objective <= res.k_star + 1e-9
    assert len(res.outliers) <= res.lp_objective / res.delta_star + 1e-9
    assert res.delta_star == delta_threshold(1.0, zeta, res.k_star)


def test_weighted_bound_and_choice():
    m = gen_expander_clique(10, 1)
    w = np.linspace(1, 3, m.n)
    res = outlier_embed(m, 0.2, 1.0, weights=w, zeta=1.0, seed=0)
    assert res.outlier_weight() <= res.lp_objective / res.delta_star + 1e-9
    scores = [(p["v_k"] * log2k_sq(p["k"]), p["k"]) for p in res.per_k if p["v_k"] is not None]
    assert min(scores)[1] == res.k_star


def test_all_infeasible_at_tiny_c():
    m = random_euclidean(4, 2)
    with pytest.raises(errors.AllInfeasible):
        outlier_embed(m, 1e-3, 1.0, ks=[1], zeta=1.0)


def test_argument_checks():
    m = random_euclidean(3, 0)
    with pytest.raises(ValueError):
        outlier_embed(m, 0.0, 1.0)
    with pytest.raises(ValueError):
        outlier_embed(m, 1.0, 1.5)


def test_parallel_matches_serial():
    m = gen_expander_clique(8, 3)
    a = outlier_embed(m, 0.5, 1.0, seed=4, zeta=1.0, jobs=1)
    b = outlier_embed(m, 0.5, 1.0, seed=4, zeta=1.0, jobs=3)
    assert a.k_star == b.k_star
    assert a.outliers.members == b.outliers.members
    assert a.lp_objective == pytest.approx(b.lp_objective, abs=1e-9)
    assert np.array_equal(a.sampler.sample(9).distance_matrix(), b.sampler.sample(9).distance_matrix())


def test_result_json():
    m = random_euclidean(4, 6)
    res = outlier_embed(m, 1.0, 1.0, seed=2)
    obj = json.loads(dumps(res.to_json()))
    assert {"k_star", "delta_star", "outliers", "lp_objective", "config", "per_k", "stats",
            "points"} <= set(obj)
    assert obj["config"]["c"] == 1.0 and obj["config"]["seed"] == 2
    assert lp_value(res.sampler.model, res.sampler.solution) == res.lp_objective
