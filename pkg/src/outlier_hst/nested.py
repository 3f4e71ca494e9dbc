"""Nested composition: extend an embedding of S to all of X through perfect merges.

The outliers K = X \\ S are clustered around random centers (radius factor
``b`` in [2, 4], random order ``pi``); each cluster plus its center's nearest
S-point is embedded on its own and merged in. The clustering draws only from
the partition stream, so it is independent of the S-embedding draw.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from . import errors
from ._random import derive, make_rng
from .frt import FRT_ETA, EmbeddingSampler, frt_sample
from .hst import HstEmbedding, scale_up
from .merge import merge_hst
from .metric import MetricSpace, Subset

# 3 * (125 + 116): expansion-bound constants, tripled to absorb the contraction tiers
DEFAULT_ZETA = 723.0
SCALE_STEPS = 2  # beta**2 = 4 >= 3 undoes the worst-case contraction


def default_family(metric: MetricSpace, points: list[int], seed) -> HstEmbedding:
    return frt_sample(metric, seed, points)


def c_x_default(k: int) -> float:
    return FRT_ETA * math.log2(k + 2)


@dataclass
class Assortment:
    metric: MetricSpace
    s: Subset
    sampler_s: EmbeddingSampler
    family_rule: Callable[[MetricSpace, list, object], HstEmbedding] = default_family
    c_s: float = 1.0

    def __post_init__(self):
        if not isinstance(self.s, Subset):
            self.s = Subset(self.metric, self.s)
        if list(self.sampler_s.points) != list(self.s.members):
            raise errors.SamplerFailure("S-sampler does not cover exactly S")

    @property
    def k(self) -> int:
        return self.metric.n - len(self.s)

    def c_x(self) -> float:
        return c_x_default(self.k)


@dataclass
class NestedTrace:
    gamma: dict
    b: float
    pi: list
    clusters: list = field(default_factory=list)  # (center, members, anchor)

    def to_json(self, metric: MetricSpace | None = None) -> dict:
        lab = (lambda i: metric.labels[i]) if metric is not None else (lambda i: i)
        return {
            "b": self.b,
            "pi": [lab(u) for u in self.pi],
            "gamma": {str(lab(u)): lab(s) for u, s in sorted(self.gamma.items())},
            "clusters": [{"center": lab(c), "members": [lab(v) for v in mem], "anchor": lab(a)}
                         for c, mem, a in self.clusters],
        }


def nearest_anchor(m: MetricSpace, s: Iterable[int], u: int) -> int:
    """Closest point of S to ``u``; ties go to the lowest index."""
    members = sorted(s)
    if not members:
        raise errors.EmptyS("S is empty")
    row = m.dist[u, members]
    return members[int(np.argmin(row))]  # argmin returns the first minimum


def partition_outliers(m: MetricSpace, s: Subset, seed) -> NestedTrace:
    """The clustering half of the composition; depends only on (metric, S, seed)."""
    rng = make_rng(seed)
    sset = set(s.members)
    k_pts = [i for i in range(m.n) if i not in sset]
    gamma = {u: nearest_anchor(m, s.members, u) for u in k_pts}
    b = float(rng.uniform(2.0, 4.0))
    pi = [k_pts[i] for i in rng.permutation(len(k_pts))] if k_pts else []
    remaining = list(k_pts)
    clusters = []
    for u in pi:
        members = [v for v in remaining if m.dist[v, u] <= b * m.dist[v, gamma[v]]]
        if not members:
            continue
        clusters.append((u, tuple(members), gamma[u]))
        taken = set(members)
        remaining = [v for v in remaining if v not in taken]
    return NestedTrace(gamma=gamma, b=b, pi=pi, clusters=clusters)


def nested_compose(a: Assortment, seed=None, partition_seed=None,
                   scale: bool = True) -> tuple[HstEmbedding, NestedTrace]:
    """Draw one embedding of X. ``scale=False`` returns the pre-scaling tree."""
    embed_seq = derive(seed, 0)
    trace = partition_outliers(a.metric, a.s, derive(seed if partition_seed is None else partition_seed, 1))
    alpha = a.sampler_s.sample(derive(embed_seq, 0))
    if set(alpha.points) != set(a.s.members):
        raise errors.SamplerFailure("S-sampler returned an embedding of the wrong domain")
    for i, (u, members, anchor) in enumerate(trace.clusters):
        pts = sorted(set(members) | {anchor})
        try:
            alpha_i = a.family_rule(a.metric, pts, derive(embed_seq, i + 1))
        except errors.OutlierHstError:
            raise
        except Exception as exc:  # noqa: BLE001 - surfaced as a domain error
            raise errors.SamplerFailure(f"family rule failed on {pts}: {exc}") from exc
        if set(alpha_i.points) != set(pts):
            raise errors.SamplerFailure(f"family rule returned the wrong domain for {pts}")
        try:
            alpha = merge_hst(alpha, alpha_i, check=False)
        except errors.SharedPointCountNotOne as exc:
            raise errors.MergePreconditionViolated(str(exc)) from exc
    if scale:
        alpha = scale_up(alpha, SCALE_STEPS)
    return alpha, trace


class NestedSampler(EmbeddingSampler):
    kind = "nested"

    def __init__(self, assortment: Assortment, scale: bool = True):
        super().__init__(assortment.metric, range(assortment.metric.n))
        self.assortment = assortment
        self.scale = scale

    def sample(self, seed=None) -> HstEmbedding:
        return nested_compose(self.assortment, seed, scale=self.scale)[0]

    def config(self) -> dict:
        return {"kind": self.kind, "points": len(self.points), "s_size": len(self.assortment.s),
                "c_s": self.assortment.c_s, "scale_steps": SCALE_STEPS if self.scale else 0}
