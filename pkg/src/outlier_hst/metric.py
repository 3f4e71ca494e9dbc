"""Finite metric spaces: validation, normalization, restriction, generators."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import networkx as nx
import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import shortest_path

from . import errors

TRIANGLE_RTOL = 1e-9


class MetricSpace:
    """Immutable symmetric distance matrix over labelled points.

    ``scale`` is the divisor applied during normalization; original distances
    are ``dist * scale``.
    """

    __slots__ = ("labels", "dist", "scale", "_index")

    def __init__(self, labels: Sequence[str], dist: np.ndarray, scale: float = 1.0):
        d = np.array(dist, dtype=float)
        d.setflags(write=False)
        self.labels = tuple(str(l) for l in labels)
        self.dist = d
        self.scale = float(scale)
        self._index = {l: i for i, l in enumerate(self.labels)}

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def diameter(self) -> float:
        return float(self.dist.max()) if self.n > 1 else 0.0

    @property
    def min_distance(self) -> float:
        if self.n < 2:
            return math.inf
        return float(self.dist[~np.eye(self.n, dtype=bool)].min())

    def index(self, label: str) -> int:
        try:
            return self._index[str(label)]
        except KeyError:
            raise errors.UnknownPoint(f"unknown point {label!r}", point=str(label)) from None

    def d(self, i: int, j: int) -> float:
        return float(self.dist[i, j])

    def restrict(self, members: Iterable[int]) -> "MetricSpace":
        idx = sorted(set(int(i) for i in members))
        return MetricSpace([self.labels[i] for i in idx], self.dist[np.ix_(idx, idx)], self.scale)

    def subset(self, members: Iterable[int]) -> "Subset":
        return Subset(self, members)

    def __eq__(self, other):
        if not isinstance(other, MetricSpace):
            return NotImplemented
        return (self.labels == other.labels and self.scale == other.scale
                and np.array_equal(self.dist, other.dist))

    def __hash__(self):
        return hash((self.labels, self.dist.tobytes()))

    def __repr__(self):
        return f"MetricSpace(n={self.n}, diameter={self.diameter:g}, scale={self.scale:g})"


@dataclass(frozen=True)
class Subset:
    parent: MetricSpace
    members: tuple = field(default=())

    def __init__(self, parent: MetricSpace, members: Iterable[int]):
        ms = tuple(sorted(set(int(i) for i in members)))
        for i in ms:
            if not 0 <= i < parent.n:
                raise errors.UnknownPoint(f"index {i} out of range", point=i)
        object.__setattr__(self, "parent", parent)
        object.__setattr__(self, "members", ms)

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __contains__(self, i):
        return i in set(self.members)

    def complement(self) -> "Subset":
        inside = set(self.members)
        return Subset(self.parent, [i for i in range(self.parent.n) if i not in inside])

    def metric(self) -> MetricSpace:
        return self.parent.restrict(self.members)

    def labels(self) -> list[str]:
        return [self.parent.labels[i] for i in self.members]


def _find_triangle_violation(d: np.ndarray, tol: float):
    n = d.shape[0]
    for j in range(n):
        # d[i,k] <= d[i,j] + d[j,k] for all i,k
        slack = d[:, j][:, None] + d[j, :][None, :] - d
        bad = np.argwhere(slack < -tol)
        if bad.size:
            i, k = bad[0]
            return int(i), j, int(k)
    return None


def validate(m, labels: Sequence[str] | None = None) -> MetricSpace:
    """Check metric axioms and normalize so the minimum distance is at least 1.

    Accepts a raw square matrix or an existing :class:`MetricSpace` (whose
    scale is carried forward, making the call idempotent).
    """
    prior_scale = 1.0
    if isinstance(m, MetricSpace):
        labels = m.labels if labels is None else labels
        prior_scale = m.scale
        m = m.dist
    d = np.array(m, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1] or d.shape[0] == 0:
        raise errors.NotSquareMatrix(f"expected a non-empty square matrix, got shape {d.shape}")
    n = d.shape[0]
    if labels is None:
        labels = [str(i) for i in range(n)]
    if len(labels) != n:
        raise errors.NotSquareMatrix(f"{len(labels)} labels for {n} points")
    if len(set(map(str, labels))) != n:
        raise errors.NotSquareMatrix("duplicate point labels")
    if not np.all(np.isfinite(d)):
        raise errors.NegativeDistance("matrix has non-finite entries")
    if (d < 0).any():
        i, j = map(int, np.argwhere(d < 0)[0])
        raise errors.NegativeDistance(f"d[{i}][{j}] = {d[i, j]} < 0", pair=[i, j])
    scale_ref = float(d.max()) if n > 1 else 0.0
    tol = TRIANGLE_RTOL * max(scale_ref, 1.0)
    if np.any(np.abs(d - d.T) > tol):
        i, j = map(int, np.argwhere(np.abs(d - d.T) > tol)[0])
        raise errors.AsymmetricMatrix(f"d[{i}][{j}] != d[{j}][{i}]", pair=[i, j])
    d = (d + d.T) / 2.0
    np.fill_diagonal(d, 0.0)
    off = ~np.eye(n, dtype=bool)
    if n > 1 and (d[off] == 0).any():
        i, j = map(int, np.argwhere((d == 0) & off)[0])
        raise errors.ZeroOffDiagonal(f"distinct points {i} and {j} at distance 0", pair=[i, j])
    bad = _find_triangle_violation(d, tol)
    if bad is not None:
        i, j, k = bad
        raise errors.TriangleViolation(
            f"d[{i}][{k}]={d[i, k]} > d[{i}][{j}]+d[{j}][{k}]={d[i, j] + d[j, k]}",
            triple=[i, j, k],
        )
    scale = 1.0
    if n > 1:
        mn = float(d[off].min())
        if mn < 1.0:
            scale = mn
            d = d / mn
            d[(d < 1.0) & off] = 1.0  # guard last-ulp rounding
    return MetricSpace(labels, d, prior_scale * scale)


def from_graph(edges: Iterable[tuple]) -> MetricSpace:
    """Shortest-path metric of a connected undirected weighted graph."""
    edges = list(edges)
    labels: list[str] = []
    index: dict[str, int] = {}
    for u, v, *_ in edges:
        for p in (str(u), str(v)):
            if p not in index:
                index[p] = len(labels)
                labels.append(p)
    n = len(labels)
    if n == 0:
        raise errors.DisconnectedGraph("graph has no edges")
    w = np.full((n, n), np.inf)
    for u, v, *rest in edges:
        wt = float(rest[0]) if rest else 1.0
        if not wt > 0:
            raise errors.NonpositiveWeight(f"edge {u}-{v} has weight {wt}", edge=[str(u), str(v)])
        a, b = index[str(u)], index[str(v)]
        if a != b:
            w[a, b] = w[b, a] = min(w[a, b], wt)
    rows, cols = np.nonzero(np.isfinite(w))
    graph = coo_matrix((w[rows, cols], (rows, cols)), shape=(n, n)).tocsr()
    d = shortest_path(graph, method="D", directed=False)
    if not np.all(np.isfinite(d)):
        i, j = map(int, np.argwhere(~np.isfinite(d))[0])
        raise errors.DisconnectedGraph(f"{labels[i]} and {labels[j]} are not connected",
                                       pair=[labels[i], labels[j]])
    return validate(d, labels)


def compose(m: MetricSpace, blocks: Sequence[MetricSpace], beta: float) -> MetricSpace:
    """Metric composition: blocks sit at the points of ``m``, spread by beta * Delta."""
    if beta < 0.5:
        raise errors.BetaTooSmall(f"beta={beta} < 1/2 does not give a metric", beta=beta)
    if len(blocks) != m.n:
        raise errors.BlockCountMismatch(f"{len(blocks)} blocks for {m.n} points")
    delta = max(b.diameter for b in blocks)
    if delta == 0:
        delta = 1.0
    sizes = [b.n for b in blocks]
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    total = int(offsets[-1])
    d = np.empty((total, total))
    labels = []
    for x, bx in enumerate(blocks):
        labels.extend(f"{m.labels[x]}:{u}" for u in bx.labels)
        for y in range(m.n):
            block = (slice(offsets[x], offsets[x + 1]), slice(offsets[y], offsets[y + 1]))
            d[block] = bx.dist if x == y else beta * delta * m.dist[x, y]
    return validate(d, labels)


def gen_expander_clique(n: int, seed=None, expander_size: int | None = None) -> MetricSpace:
    """Random 3-regular-ish graph joined by a unit edge to a unit clique.

    The expander part has ``ceil(log2 n)`` nodes unless ``expander_size`` is
    given. Parts too small for a 3-regular graph use the complete graph; odd
    sizes get one degree-2 node.
    """
    if n < 8:
        raise errors.TooSmall(f"n={n} < 8", n=n)
    m = expander_size if expander_size is not None else math.ceil(math.log2(n))
    if m < 1 or n - m < 2:
        raise errors.TooSmall(f"expander part {m} leaves no room for a clique", n=n)
    rng = np.random.default_rng(seed)
    g = _expander_proxy(m, rng)
    ex = [f"e{i}" for i in range(m)]
    cl = [f"c{i}" for i in range(n - m)]
    edges = [(ex[a], ex[b], 1.0) for a, b in g.edges()]
    edges += [(cl[a], cl[b], 1.0) for a in range(len(cl)) for b in range(a + 1, len(cl))]
    edges.append((ex[int(rng.integers(m))], cl[0], 1.0))
    metric = from_graph(edges)
    order = [metric.index(l) for l in ex + cl]
    return MetricSpace(ex + cl, metric.dist[np.ix_(order, order)], metric.scale)


def _expander_proxy(m: int, rng: np.random.Generator) -> nx.Graph:
    if m <= 4:
        return nx.complete_graph(m)
    degrees = [3] * m
    if (3 * m) % 2:
        degrees[-1] = 2
    for _ in range(1000):
        s = int(rng.integers(2**31))
        if degrees[-1] == 3:
            g = nx.random_regular_graph(3, m, seed=s)
        else:
            try:
                g = nx.random_degree_sequence_graph(degrees, seed=s, tries=50)
            except nx.NetworkXUnfeasible:
                continue
        if nx.is_connected(g):
            return g
    raise errors.TooSmall(f"could not sample a connected expander proxy on {m} nodes")


def random_euclidean(n: int, seed=None, dim: int = 2) -> MetricSpace:
    """Uniform points in the unit cube, normalized."""
    rng = np.random.default_rng(seed)
    pts = rng.random((n, dim))
    d = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
    return validate(d)


def random_graph_metric(n: int, seed=None, p: float = 0.4, wmax: int = 5) -> MetricSpace:
    """Shortest-path metric of a connected Erdos-Renyi graph with integer weights."""
    rng = np.random.default_rng(seed)
    while True:
        g = nx.gnp_random_graph(n, p, seed=int(rng.integers(2**31)))
        if n == 1 or nx.is_connected(g):
            break
    if n == 1:
        return validate([[0.0]])
    edges = [(str(a), str(b), float(rng.integers(1, wmax + 1))) for a, b in g.edges()]
    metric = from_graph(edges)
    order = [metric.index(str(i)) for i in range(n)]
    return MetricSpace([str(i) for i in range(n)], metric.dist[np.ix_(order, order)], metric.scale)
