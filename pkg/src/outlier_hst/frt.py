"""FRT random tree embeddings into 2-HSTs and the sampler abstraction."""
from __future__ import annotations

import math
from typing import Callable, Iterable, Sequence

import numpy as np

from . import errors
from ._random import derive, make_rng
from .hst import HstEmbedding, TreeBuilder, single_leaf
from .metric import MetricSpace, Subset

# empirical regression constant for expected FRT distortion, per log2(n)
FRT_ETA = 8.0


def _domain(m) -> tuple[MetricSpace, list[int]]:
    if isinstance(m, Subset):
        return m.parent, list(m.members)
    return m, list(range(m.n))


def frt_sample(m: MetricSpace | Subset, seed=None, points: Iterable[int] | None = None) -> HstEmbedding:
    """One FRT tree: random permutation, one radius multiplier in [1, 2).

    Level ``i`` clusters use radius ``beta0 * 2**(i-1)`` and become nodes at
    height ``i + 2`` (eta ``2**(i+1)`` exceeds any cluster diameter), so every
    sample is non-contracting.
    """
    metric, pts = _domain(m)
    if points is not None:
        pts = sorted(set(points))
    if not pts:
        raise errors.SamplerFailure("cannot embed an empty point set")
    if len(pts) == 1:
        return single_leaf(metric, pts[0])
    rng = make_rng(seed)
    perm = rng.permutation(len(pts))
    beta0 = 1.0 + rng.random()
    d = metric.dist[np.ix_(pts, pts)]
    top = math.ceil(math.log2(float(d.max()))) + 1
    dc = d[:, perm]

    b = TreeBuilder(2.0)
    root = b.add(top + 2)
    node_of = np.full(len(pts), root)
    for i in range(top - 1, -1, -1):
        within = dc <= beta0 * math.ldexp(1.0, i - 1)
        center = np.argmax(within, axis=1)
        new_nodes: dict[tuple[int, int], int] = {}
        nxt = np.empty_like(node_of)
        for a in range(len(pts)):
            key = (int(node_of[a]), int(center[a]))
            if key not in new_nodes:
                new_nodes[key] = b.add(i + 2, key[0])
            nxt[a] = new_nodes[key]
        node_of = nxt
    for a, p in enumerate(pts):
        b.chain_to_leaf(int(node_of[a]), p)
    return HstEmbedding(metric, b.build())


class EmbeddingSampler:
    """A probabilistic embedding: ``sample(seed)`` draws one expanding HST embedding."""

    kind = "abstract"

    def __init__(self, metric: MetricSpace, points: Iterable[int]):
        self.metric = metric
        self.points = sorted(set(points))

    def sample(self, seed=None) -> HstEmbedding:
        raise NotImplementedError

    def samples(self, n: int, seed=None) -> list[HstEmbedding]:
        return [self.sample(derive(seed, i)) for i in range(n)]

    def config(self) -> dict:
        return {"kind": self.kind, "points": len(self.points)}

    def __repr__(self):
        return f"{type(self).__name__}(points={len(self.points)})"


class FrtSampler(EmbeddingSampler):
    kind = "frt"

    def __init__(self, m: MetricSpace | Subset, points: Iterable[int] | None = None):
        metric, pts = _domain(m)
        super().__init__(metric, pts if points is None else points)

    def sample(self, seed=None) -> HstEmbedding:
        return frt_sample(self.metric, seed, self.points)


class FixedSampler(EmbeddingSampler):
    """Deterministic embedding: every draw returns the same tree."""

    kind = "deterministic"

    def __init__(self, embedding: HstEmbedding):
        super().__init__(embedding.metric, embedding.points)
        self.embedding = embedding

    def sample(self, seed=None) -> HstEmbedding:
        return self.embedding


class ListSampler(EmbeddingSampler):
    """User-supplied finite distribution ``[(prob, embedding), ...]``."""

    kind = "user-supplied list"

    def __init__(self, dist: Sequence[tuple[float, HstEmbedding]]):
        if not dist:
            raise errors.SamplerFailure("empty distribution")
        probs = np.array([p for p, _ in dist], dtype=float)
        if (probs < 0).any() or abs(probs.sum() - 1.0) > 1e-9:
            raise errors.ProbabilitiesDontSum(f"probabilities sum to {probs.sum()}")
        domains = {tuple(e.points) for _, e in dist}
        if len(domains) != 1:
            raise errors.SamplerFailure("embeddings in the list cover different point sets")
        super().__init__(dist[0][1].metric, dist[0][1].points)
        self.probs = probs / probs.sum()
        self.embeddings = [e for _, e in dist]

    def sample(self, seed=None) -> HstEmbedding:
        rng = make_rng(seed)
        return self.embeddings[int(rng.choice(len(self.embeddings), p=self.probs))]


class CallableSampler(EmbeddingSampler):
    kind = "callable"

    def __init__(self, metric: MetricSpace, points: Iterable[int], fn: Callable):
        super().__init__(metric, points)
        self.fn = fn

    def sample(self, seed=None) -> HstEmbedding:
        return self.fn(seed)


def singleton_sampler(metric: MetricSpace, x: int) -> FixedSampler:
    return FixedSampler(single_leaf(metric, x))
