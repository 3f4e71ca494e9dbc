"""Perfect merge of two HST embeddings that share exactly one point.

Both shared-point-to-root paths are aligned height by height; every subtree
hanging off the second path is grafted onto the first path's node at the same
height. The first tree is never altered except for unary nodes added above
its root, so its distances survive exactly; the grafted copies keep their
heights, so the second tree's distances survive too.
"""
from __future__ import annotations

from . import errors
from .hst import HstEmbedding, TreeBuilder, validate_hst


def _path_to_root(tree, leaf: int) -> list[int]:
    path = []
    v = leaf
    while v >= 0:
        path.append(v)
        v = tree.parent[v]
    return path


def merge_hst(a1: HstEmbedding, a2: HstEmbedding, check: bool = True) -> HstEmbedding:
    shared = set(a1.leaf_of) & set(a2.leaf_of)
    if len(shared) != 1:
        raise errors.SharedPointCountNotOne(
            f"embeddings share {len(shared)} points", shared=sorted(shared))
    if a1.tree.beta != a2.tree.beta:
        raise errors.BetaMismatch(f"beta {a1.tree.beta} != {a2.tree.beta}")
    if check:
        for name, a in (("first", a1), ("second", a2)):
            bad = validate_hst(a.tree)
            if bad:
                raise errors.InvalidInputTree(f"{name} tree: {bad[0].kind} at {list(bad[0].path)}")
    (v,) = shared
    t1, t2 = a1.tree, a2.tree
    top = max(t1.root_height, t2.root_height)

    b = TreeBuilder(t1.beta)
    parent = -1
    for h in range(top, t1.root_height, -1):
        parent = b.add(h, parent)
    b.copy_subtree(t1, t1.root, parent)

    leaf = next(i for i, p in enumerate(b.point) if p == v)
    path1 = [leaf]
    while b.parent[path1[-1]] >= 0:
        path1.append(b.parent[path1[-1]])
    path2 = _path_to_root(t2, a2.leaf_of[v])

    # path index equals height on both sides for valid trees
    for h in range(1, len(path2)):
        below = path2[h - 1]
        for c in t2.children[path2[h]]:
            if c != below:
                b.copy_subtree(t2, c, path1[h])
    return HstEmbedding(a1.metric, b.build())
