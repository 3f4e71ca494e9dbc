"""Exact beta-HSTs with integer heights and embeddings of metric points into their leaves.

A node at height ``h`` carries ``eta = beta**(h - 1)``; leaves sit at height 0.
Heights are stored, never eta, so tree surgery can match levels exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import errors
from .metric import MetricSpace, validate

ULTRAMETRIC_RTOL = 1e-9


def eta(beta: float, h: int) -> float:
    if beta == 2:
        return math.ldexp(1.0, h - 1)
    return float(beta) ** (h - 1)


class Hst:
    """Rooted tree stored as parallel tuples indexed by node id.

    ``point[v]`` is the metric point index held by leaf ``v`` (None for
    internal nodes). Build instances with :class:`TreeBuilder`.
    """

    __slots__ = ("beta", "height", "parent", "children", "point", "root")

    def __init__(self, beta, height, parent, children, point, root=0):
        self.beta = float(beta)
        self.height = tuple(height)
        self.parent = tuple(parent)
        self.children = tuple(tuple(c) for c in children)
        self.point = tuple(point)
        self.root = root

    def __len__(self):
        return len(self.height)

    @property
    def root_height(self) -> int:
        return self.height[self.root] if self.height else 0

    def leaves(self) -> list[int]:
        return [v for v in range(len(self)) if not self.children[v]]

    def eta(self, v: int) -> float:
        return eta(self.beta, self.height[v])

    def structure(self):
        """Canonical nested tuple, used for equality and hashing."""
        def rec(v):
            if not self.children[v]:
                return (self.height[v], self.point[v])
            return (self.height[v], tuple(rec(c) for c in self.children[v]))
        return (self.beta, rec(self.root)) if len(self) else (self.beta, None)

    def __eq__(self, other):
        if not isinstance(other, Hst):
            return NotImplemented
        return self.structure() == other.structure()

    def __hash__(self):
        return hash(self.structure())

    def __repr__(self):
        return f"Hst(nodes={len(self)}, leaves={len(self.leaves())}, root_height={self.root_height})"


class TreeBuilder:
    def __init__(self, beta: float = 2.0):
        self.beta = beta
        self.height: list[int] = []
        self.parent: list[int] = []
        self.children: list[list[int]] = []
        self.point: list = []

    def add(self, height: int, parent: int = -1, point=None) -> int:
        v = len(self.height)
        self.height.append(int(height))
        self.parent.append(parent)
        self.children.append([])
        self.point.append(point)
        if parent >= 0:
            self.children[parent].append(v)
        return v

    def chain_to_leaf(self, parent: int, point: int) -> int:
        """Unary chain from just below ``parent`` down to a height-0 leaf."""
        v = parent
        for h in range(self.height[parent] - 1, 0, -1):
            v = self.add(h, v)
        return self.add(0, v, point)

    def copy_subtree(self, src: Hst, node: int, parent: int, shift: int = 0) -> int:
        stack = [(node, parent)]
        top = None
        while stack:
            v, p = stack.pop()
            nv = self.add(src.height[v] + shift if src.children[v] else 0, p, src.point[v])
            if top is None:
                top = nv
            # reversed push keeps child order
            for c in reversed(src.children[v]):
                stack.append((c, nv))
        return top

    def build(self, root: int = 0) -> Hst:
        return Hst(self.beta, self.height, self.parent, self.children, self.point, root)


@dataclass(frozen=True)
class HstViolation:
    kind: str
    path: tuple
    message: str


def validate_hst(t: Hst) -> list[HstViolation]:
    """Structural check; returns violations in preorder (empty list means valid)."""
    if len(t) == 0:
        return [HstViolation("EmptyTree", (), "tree has no nodes")]
    out = []
    seen = {}
    stack = [(t.root, ())]
    while stack:
        v, path = stack.pop()
        kids = t.children[v]
        if not kids:
            if t.height[v] != 0:
                out.append(HstViolation("LeafNotAtZero", path, f"leaf at height {t.height[v]}"))
            if t.point[v] is None:
                out.append(HstViolation("PointlessLeaf", path, "leaf carries no point"))
            elif t.point[v] in seen:
                out.append(HstViolation("DuplicatePoint", path, f"point {t.point[v]} on two leaves"))
            else:
                seen[t.point[v]] = v
        else:
            if t.point[v] is not None:
                out.append(HstViolation("InternalPoint", path, "internal node carries a point"))
            for pos, c in enumerate(kids):
                if t.height[c] != t.height[v] - 1:
                    out.append(HstViolation(
                        "HeightSkip", path + (pos,),
                        f"child height {t.height[c]} under parent height {t.height[v]}"))
        for pos in range(len(kids) - 1, -1, -1):
            stack.append((kids[pos], path + (pos,)))
    if len(seen) >= 2 and t.root_height < 1:
        out.append(HstViolation("RootTooLow", (), "root below height 1"))
    return out


def check_hst(t: Hst) -> Hst:
    bad = validate_hst(t)
    if bad:
        v = bad[0]
        raise errors.InvalidHst(f"{v.kind} at {list(v.path)}: {v.message}", kind=v.kind, path=list(v.path))
    return t


class HstEmbedding:
    """Injective map from metric points to HST leaves."""

    __slots__ = ("metric", "tree", "leaf_of", "_anc")

    def __init__(self, metric: MetricSpace, tree: Hst):
        self.metric = metric
        self.tree = tree
        self.leaf_of = {tree.point[v]: v for v in tree.leaves() if tree.point[v] is not None}
        self._anc = None

    @property
    def points(self) -> list[int]:
        return sorted(self.leaf_of)

    @property
    def beta(self) -> float:
        return self.tree.beta

    def _ancestors(self):
        if self._anc is None:
            t = self.tree
            pts = self.points
            depth = t.root_height + 1
            anc = np.full((len(pts), depth), -1, dtype=np.int64)
            for row, p in enumerate(pts):
                v = self.leaf_of[p]
                while v >= 0:
                    h = t.height[v]
                    if 0 <= h < depth:
                        anc[row, h] = v
                    v = t.parent[v]
            self._anc = ({p: r for r, p in enumerate(pts)}, anc)
        return self._anc

    def lca_height(self, x: int, y: int) -> int:
        if x not in self.leaf_of or y not in self.leaf_of:
            missing = x if x not in self.leaf_of else y
            raise errors.PointNotEmbedded(f"point {missing} is not embedded", point=missing)
        if x == y:
            return 0
        rows, anc = self._ancestors()
        same = anc[rows[x]] == anc[rows[y]]
        return int(np.argmax(same))

    def distance(self, x: int, y: int) -> float:
        if x == y:
            if x not in self.leaf_of:
                raise errors.PointNotEmbedded(f"point {x} is not embedded", point=x)
            return 0.0
        return eta(self.tree.beta, self.lca_height(x, y))

    def height_matrix(self, points: Sequence[int] | None = None) -> np.ndarray:
        pts = self.points if points is None else list(points)
        rows, anc = self._ancestors()
        for p in pts:
            if p not in rows:
                raise errors.PointNotEmbedded(f"point {p} is not embedded", point=p)
        a = anc[[rows[p] for p in pts]]
        same = a[:, None, :] == a[None, :, :]
        return np.argmax(same, axis=2)

    def distance_matrix(self, points: Sequence[int] | None = None) -> np.ndarray:
        h = self.height_matrix(points)
        if self.tree.beta == 2:
            d = np.ldexp(1.0, h - 1)
        else:
            d = np.power(self.tree.beta, h - 1.0)
        d[h == 0] = 0.0
        return d

    def __repr__(self):
        return f"HstEmbedding(points={len(self.leaf_of)}, tree={self.tree!r})"


def hst_distance(e: HstEmbedding, x: int, y: int) -> float:
    return e.distance(x, y)


def scale_up(e: HstEmbedding, t: int) -> HstEmbedding:
    """Multiply every embedded distance by beta**t (raise heights, pad leaves with chains)."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0 or len(e.tree) <= 1:
        return e
    src = e.tree
    b = TreeBuilder(src.beta)
    stack = [(src.root, -1)]
    while stack:
        v, p = stack.pop()
        if src.children[v]:
            nv = b.add(src.height[v] + t, p)
            for c in reversed(src.children[v]):
                stack.append((c, nv))
        else:
            b.chain_to_leaf(p, src.point[v])
    return HstEmbedding(e.metric, b.build())


def is_ultrametric(m: MetricSpace | np.ndarray) -> bool:
    d = m.dist if isinstance(m, MetricSpace) else np.asarray(m, dtype=float)
    n = d.shape[0]
    if n < 3:
        return True
    tol = ULTRAMETRIC_RTOL * max(float(d.max()), 1.0)
    for j in range(n):
        bound = np.maximum(d[:, j][:, None], d[j, :][None, :])
        if (d > bound + tol).any():
            return False
    return True


def single_leaf(metric: MetricSpace, point: int, beta: float = 2.0) -> HstEmbedding:
    b = TreeBuilder(beta)
    b.add(0, -1, point)
    return HstEmbedding(metric, b.build())


def ultrametric_to_hst(metric: MetricSpace, points: Iterable[int] | None = None,
                       round_up: bool = False) -> HstEmbedding:
    """Identity 2-HST embedding of an HST metric.

    With ``round_up`` any ultrametric is accepted and distances are rounded up
    to the next power of two (distortion < 2).
    """
    pts = sorted(set(points)) if points is not None else list(range(metric.n))
    if not pts:
        raise errors.NotHstMetric("no points")
    sub = metric.dist[np.ix_(pts, pts)]
    if not is_ultrametric(sub):
        raise errors.NotHstMetric("distances are not an ultrametric")
    b = TreeBuilder(2.0)
    if len(pts) == 1:
        b.add(0, -1, pts[0])
        return HstEmbedding(metric, b.build())
    off = sub[~np.eye(len(pts), dtype=bool)]
    safe = np.where(sub > 0, sub, 1.0)
    levels = np.ceil(np.log2(safe) - 1e-12).astype(int) + 1
    levels[np.eye(len(pts), dtype=bool)] = 0
    if not round_up:
        exact = np.ldexp(1.0, levels - 1)
        if not np.allclose(exact[~np.eye(len(pts), dtype=bool)], off, rtol=1e-12, atol=0):
            raise errors.NotHstMetric("distances are not powers of two")
    top = int(levels.max())

    def rec(members, h, parent):
        if h == 0:
            b.add(0, parent, pts[members[0]])
            return
        v = b.add(h, parent)
        groups: list[list[int]] = []
        for a in members:
            for g in groups:
                if levels[a, g[0]] <= h - 1:
                    g.append(a)
                    break
            else:
                groups.append([a])
        for g in groups:
            rec(g, h - 1, v)

    rec(list(range(len(pts))), top, -1)
    return HstEmbedding(metric, b.build())


def random_hst(points: Sequence[int], seed=None, height: int | None = None,
               metric: MetricSpace | None = None, max_children: int = 3) -> HstEmbedding:
    """Random 2-HST over ``points``; builds a labelled metric from it when none is given."""
    rng = np.random.default_rng(seed)
    pts = list(points)
    need = max(1, math.ceil(math.log2(len(pts)))) if len(pts) > 1 else 0
    if height is None:
        height = need + int(rng.integers(0, 3)) if len(pts) > 1 else 0
    height = max(height, need)
    b = TreeBuilder(2.0)

    def rec(members, h, parent):
        if h == 0:
            b.add(0, parent, members[0])
            return
        v = b.add(h, parent)
        if len(members) == 1:
            rec(members, h - 1, v)
            return
        cap = 2 ** (h - 1)  # a child at height h-1 can hold at most this many leaves
        k_min = math.ceil(len(members) / cap)
        k = int(rng.integers(k_min, max(k_min, min(len(members), max_children)) + 1))
        order = list(rng.permutation(members))
        groups = [[] for _ in range(k)]
        for i, p in enumerate(order[:k]):
            groups[i].append(p)
        for p in order[k:]:
            open_ = [g for g in groups if len(g) < cap]
            open_[int(rng.integers(len(open_)))].append(p)
        for g in groups:
            rec(sorted(int(x) for x in g), h - 1, v)

    rec(sorted(pts), height, -1)
    tree = b.build()
    if metric is None:
        tmp = HstEmbedding(MetricSpace([str(p) for p in range(max(pts) + 1)],
                                       np.zeros((max(pts) + 1,) * 2)), tree)
        d = np.zeros((max(pts) + 1,) * 2)
        d[np.ix_(pts, pts)] = tmp.distance_matrix(pts)
        labels = [str(p) for p in range(max(pts) + 1)]
        metric = MetricSpace(labels, d)
    return HstEmbedding(metric, tree)


def hst_metric(e: HstEmbedding, labels: Sequence[str] | None = None) -> MetricSpace:
    """The metric induced on the embedded points (in sorted point order)."""
    pts = e.points
    labs = labels if labels is not None else [e.metric.labels[p] for p in pts]
    return validate(e.distance_matrix(pts), labs)


def delete_leaves(e: HstEmbedding, drop: Iterable[int]) -> HstEmbedding:
    """Remove the given points' leaves and prune internal nodes left without leaves."""
    drop = set(drop)
    src = e.tree
    keep_count = {}

    def count(v):
        if not src.children[v]:
            c = 0 if src.point[v] in drop else 1
        else:
            c = sum(count(ch) for ch in src.children[v])
        keep_count[v] = c
        return c

    if count(src.root) == 0:
        raise errors.PointNotEmbedded("deleting every leaf leaves an empty tree")
    b = TreeBuilder(src.beta)
    stack = [(src.root, -1)]
    while stack:
        v, p = stack.pop()
        nv = b.add(src.height[v], p, src.point[v])
        for c in reversed(src.children[v]):
            if keep_count[c]:
                stack.append((c, nv))
    return HstEmbedding(e.metric, b.build())


def restrict(e: HstEmbedding, keep: Iterable[int]) -> HstEmbedding:
    keep = set(keep)
    return delete_leaves(e, [p for p in e.points if p not in keep])


# --- JSON ------------------------------------------------------------------

def to_json(e: HstEmbedding) -> dict:
    t = e.tree
    labels = e.metric.labels

    def rec(v):
        if not t.children[v]:
            return {"h": t.height[v], "point": labels[t.point[v]]}
        return {"h": t.height[v], "children": [rec(c) for c in t.children[v]]}

    out = rec(t.root)
    out["beta"] = t.beta
    return out


def from_json(obj: dict, metric: MetricSpace) -> HstEmbedding:
    b = TreeBuilder(float(obj.get("beta", 2.0)))
    stack = [(obj, -1)]
    while stack:
        node, p = stack.pop()
        point = metric.index(node["point"]) if "point" in node else None
        v = b.add(int(node["h"]), p, point)
        for c in reversed(node.get("children", [])):
            stack.append((c, v))
    return HstEmbedding(metric, b.build())
