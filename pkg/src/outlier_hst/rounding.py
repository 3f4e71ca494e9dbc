"""Rounding an HST LP solution into random 2-HSTs, and the outlier outer loop."""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import errors
from ._random import derive, make_rng
from .frt import EmbeddingSampler
from .hst import HstEmbedding, TreeBuilder
from .lp_model import LpModel, build_lp, log2k_sq
from .lp_solver import LpSolution, solve
from .metric import MetricSpace, Subset
from .nested import DEFAULT_ZETA

C_PRIME = 16.0


@dataclass
class Partitions:
    """Per-level parts ``{r: [(center, members), ...]}`` in creation order."""

    radii: list
    levels: dict
    fallback: bool = False
    draws: dict = field(default_factory=dict)


def level_matrices(model: LpModel, sol: LpSolution) -> dict:
    """x values as dense n x n matrices per radius; -inf outside the ball."""
    n = model.params["n"]
    out = {}
    for r in model.params["radii"]:
        X = np.full((n, n), -np.inf)
        out[r] = X
    for name, col in model.index.items():
        if name.startswith("x_"):
            _, i, j, r = name.split("_")
            out[int(r)][int(i), int(j)] = sol.x[col]
    return out


def round_partitions(m: MetricSpace, xs: dict, seed=None, eps_prime: float = 0.5,
                     c_prime: float = C_PRIME) -> Partitions:
    """Threshold rounding, coarsest level first.

    ``xs`` comes from :func:`level_matrices`. Each draw picks a uniform center
    and a uniform threshold and claims every unassigned ball member whose x
    value clears it. More than ``c_prime * n * ln(Delta / eps_prime)`` draws at
    one level aborts into the star fallback.
    """
    rng = make_rng(seed)
    n = m.n
    radii = sorted(xs)
    cap = math.ceil(c_prime * n * math.log(max(m.diameter, 1.0) / eps_prime))
    levels, draws = {}, {}
    for r in reversed(radii):
        X = xs[r]
        free = np.ones(n, dtype=bool)
        parts = []
        count = 0
        while free.any():
            if count >= cap:
                draws[r] = count
                return Partitions(radii, levels, True, draws)
            i = int(rng.integers(n))
            ell = float(rng.random())
            got = np.flatnonzero(free & (X[i] >= ell))
            count += 1
            if len(got):
                parts.append((i, tuple(int(j) for j in got)))
                free[got] = False
        levels[r] = parts
        draws[r] = count
    return Partitions(radii, levels, False, draws)


def star_embedding(m: MetricSpace) -> HstEmbedding:
    """Fallback: every pair at distance 2 * 2^ceil(log2 Delta)."""
    top = int(math.log2(_top_radius(m)))
    b = TreeBuilder(2.0)
    root = b.add(top + 2)
    for p in range(m.n):
        b.chain_to_leaf(root, p)
    return HstEmbedding(m, b.build())


def _top_radius(m: MetricSpace) -> int:
    d = m.diameter
    return 2 ** max(0, math.ceil(math.log2(d) - 1e-12)) if d > 1 else 1


def partitions_to_hst(m: MetricSpace, parts: Partitions) -> HstEmbedding:
    """Nested refinement tree: a level-r part is a node with eta 2r.

    The root sits one level above the coarsest parts (eta 4 * 2^ceil(log2 Delta))
    so heights stay consecutive.
    """
    if parts.fallback:
        return star_embedding(m)
    n = m.n
    radii = sorted(parts.levels)
    top = int(math.log2(radii[-1]))
    b = TreeBuilder(2.0)
    root = b.add(top + 3)
    node_of = np.full(n, root)
    for r in reversed(radii):
        part_of = np.full(n, -1)
        for idx, (_, members) in enumerate(parts.levels[r]):
            part_of[list(members)] = idx
        if (part_of < 0).any():
            raise errors.PartitionNotCovering(f"level {r} misses point {int(np.argmax(part_of < 0))}")
        h = int(math.log2(r)) + 2
        made: dict[tuple[int, int], int] = {}
        nxt = np.empty(n, dtype=int)
        for p in range(n):
            key = (int(node_of[p]), int(part_of[p]))
            if key not in made:
                made[key] = b.add(h, key[0])
            nxt[p] = made[key]
        node_of = nxt
    for p in range(n):
        b.chain_to_leaf(int(node_of[p]), p)
    return HstEmbedding(m, b.build())


class RoundingSampler(EmbeddingSampler):
    kind = "rounding"

    def __init__(self, metric: MetricSpace, model: LpModel, sol: LpSolution,
                 eps_prime: float = 0.5, c_prime: float = C_PRIME):
        super().__init__(metric, range(metric.n))
        self.model = model
        self.solution = sol
        self.eps_prime = eps_prime
        self.c_prime = c_prime
        self.xs = level_matrices(model, sol)
        self.fallbacks = 0

    def sample(self, seed=None) -> HstEmbedding:
        parts = round_partitions(self.metric, self.xs, seed, self.eps_prime, self.c_prime)
        if parts.fallback:
            self.fallbacks += 1
        return partitions_to_hst(self.metric, parts)

    def config(self) -> dict:
        return {"kind": self.kind, "points": len(self.points), "c": self.model.params["c"],
                "k": self.model.params["k"], "eps_prime": self.eps_prime, "c_prime": self.c_prime}


def delta_threshold(eps: float, zeta: float, k: int) -> float:
    return eps / (16 * zeta * log2k_sq(k))


@dataclass
class OutlierResult:
    k_star: int
    delta_star: float
    outliers: Subset
    sampler: RoundingSampler
    lp_objective: float
    epsilon: float
    config: dict
    per_k: list = field(default_factory=list)
    stats: dict = field(default_factory=dict)

    def outlier_weight(self) -> float:
        w = self.config.get("weights")
        if w is None:
            return float(len(self.outliers))
        return float(sum(w[i] for i in self.outliers.members))

    def to_json(self) -> dict:
        m = self.outliers.parent
        return {
            "k_star": self.k_star,
            "delta_star": self.delta_star,
            "outliers": self.outliers.labels(),
            "lp_objective": self.lp_objective,
            "config": self.config,
            "per_k": self.per_k,
            "stats": self.stats,
            "points": list(m.labels),
        }


def _solve_k(m, c, k, zeta, weights, method):
    t0 = time.monotonic()
    model = build_lp(m, c, k, zeta, weights)
    try:
        sol = solve(model, method)
    except errors.Infeasible:
        return model, None, time.monotonic() - t0
    return model, sol, time.monotonic() - t0


def lp_value(model: LpModel, sol: LpSolution) -> float:
    """Weighted delta mass, recomputed from clipped values so thresholding counts exactly."""
    d = np.clip(sol.deltas(model), 0.0, 1.0)
    return float(model.objective[: len(d)] @ d)


def outlier_embed(m: MetricSpace, c: float, eps: float, weights: Sequence[float] | None = None,
                  seed=None, ks: Sequence[int] | None = None, zeta: float = DEFAULT_ZETA,
                  method: str = "auto", jobs: int = 1) -> OutlierResult:
    """Solve LP_k over the k range, pick k*, and threshold deltas at eps / (16 zeta log^2 k*).

    Unweighted: the first k with v_k <= k. Weighted: the k minimizing
    v_k * log^2 k, ties to the smaller k.
    """
    if not c > 0:
        raise ValueError("c must be positive")
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    ks = list(range(1, m.n + 1)) if ks is None else sorted(set(int(k) for k in ks))
    weighted = weights is not None
    t0 = time.monotonic()
    runs = {}

    def run(k):
        return k, _solve_k(m, c, k, zeta, weights, method)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            runs = dict(ex.map(run, ks))
    else:
        for k in ks:
            runs[k] = run(k)[1]
            model, sol, _ = runs[k]
            if not weighted and sol is not None and lp_value(model, sol) <= k + 1e-9:
                break

    per_k = []
    best = None
    for k in ks:
        if k not in runs:
            break
        model, sol, dt = runs[k]
        v = lp_value(model, sol) if sol is not None else math.inf
        per_k.append({"k": k, "v_k": v if sol is not None else None,
                      "status": "optimal" if sol is not None else "infeasible", "seconds": dt,
                      **{key: val for key, val in model.counts().items() if key in ("variables", "rows")}})
        if sol is None:
            continue
        if weighted:
            score = v * log2k_sq(k)
            if best is None or score < best[0]:
                best = (score, k)
        elif v <= k + 1e-9 and best is None:
            best = (v, k)
    if best is None:
        raise errors.AllInfeasible("no k in range admits v_k <= k" if not weighted
                                   else "every LP_k is infeasible", ks=ks)
    k_star = best[1]
    model, sol, _ = runs[k_star]
    v = lp_value(model, sol)
    dstar = delta_threshold(eps, zeta, k_star)
    deltas = np.clip(sol.deltas(model), 0.0, 1.0)
    out = Subset(m, np.flatnonzero(deltas >= dstar))
    sampler = RoundingSampler(m, model, sol, eps / 2)
    config = {"c": c, "eps": eps, "zeta": zeta, "ks": ks, "method": method, "c_prime": C_PRIME,
              "weights": None if weights is None else [float(w) for w in weights],
              "seed": seed if isinstance(seed, (int, type(None))) else str(seed)}
    stats = {**model.counts(), "solve_seconds": sum(p["seconds"] for p in per_k),
             "total_seconds": time.monotonic() - t0, "solver": sol.method}
    return OutlierResult(k_star, dstar, out, sampler, v, eps, config, per_k, stats)
