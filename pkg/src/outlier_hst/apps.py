"""Applications: outlier MCCT on HST inputs, and the buy-at-bulk / dial-a-ride outer loop."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Protocol, Sequence

import numpy as np
from scipy import sparse

from . import errors
from ._random import derive
from .frt import FRT_ETA, frt_sample
from .hst import HstEmbedding, delete_leaves, is_ultrametric, ultrametric_to_hst
from .lp_model import LpModel
from .lp_solver import solve
from .metric import MetricSpace
from .nested import DEFAULT_ZETA
from .rounding import outlier_embed

MCCT_THRESHOLD = 1.0 / 3.0 - 1e-6


# --- MCCT ---------------------------------------------------------------------

@dataclass
class McctInstance:
    tree_metric: MetricSpace
    demands: np.ndarray
    k: int

    def __post_init__(self):
        self.demands = np.asarray(self.demands, dtype=float)
        n = self.tree_metric.n
        if self.demands.shape != (n, n):
            raise ValueError(f"demand matrix must be {n}x{n}")
        if (self.demands < 0).any():
            raise ValueError("demands must be nonnegative")
        self.demands = np.triu(self.demands + self.demands.T, 1)  # one entry per unordered pair
        if not is_ultrametric(self.tree_metric):
            raise errors.NotUltrametric("MCCT input must be an ultrametric (HST) metric")
        if self.k < 0:
            raise ValueError("k must be nonnegative")


@dataclass
class McctResult:
    outliers: list
    cost: float
    lp_objective: float
    deltas: np.ndarray
    tree: HstEmbedding | None

    def to_json(self, metric: MetricSpace) -> dict:
        return {"outliers": [metric.labels[i] for i in self.outliers], "cost": self.cost,
                "lp_objective": self.lp_objective, "deltas": [float(v) for v in self.deltas]}


def pair_cost(inst: McctInstance, removed: Sequence[int] = ()) -> float:
    keep = np.ones(inst.tree_metric.n, dtype=bool)
    keep[list(removed)] = False
    w = inst.demands * inst.tree_metric.dist
    return float(w[np.ix_(keep, keep)].sum())


def mcct_lp(inst: McctInstance) -> LpModel:
    n = inst.tree_metric.n
    pairs = list(combinations(range(n), 2))
    names = [f"delta_{i}" for i in range(n)] + [f"x_{i}_{j}" for i, j in pairs]
    index = {nm: c for c, nm in enumerate(names)}
    rows, cols, vals = [], [], []
    for r, (i, j) in enumerate(pairs):
        rows += [r, r, r]
        cols += [i, j, n + r]
        vals += [1.0, 1.0, 1.0]
    budget = len(pairs)
    rows += [budget] * n
    cols += list(range(n))
    vals += [1.0] * n
    A = sparse.csr_matrix((vals, (rows, cols)), shape=(len(pairs) + 1, len(names)))
    obj = np.zeros(len(names))
    for r, (i, j) in enumerate(pairs):
        obj[n + r] = inst.demands[i, j] * inst.tree_metric.dist[i, j]
    sense = np.array([">"] * len(pairs) + ["<"])
    rhs = np.array([1.0] * len(pairs) + [float(inst.k)])
    row_names = [f"cover_{i}_{j}" for i, j in pairs] + ["budget"]
    return LpModel(names, index, obj, A, sense, rhs, row_names, np.zeros(len(rhs), dtype=int),
                   np.zeros(len(names)), np.ones(len(names)), {"n": n, "k": inst.k},
                   inst.tree_metric)


def mcct_outlier(inst: McctInstance, method: str = "auto") -> McctResult:
    model = mcct_lp(inst)
    try:
        sol = solve(model, method)
    except errors.Infeasible as exc:
        raise errors.LpInfeasible(str(exc), **exc.detail) from exc
    deltas = np.clip(sol.deltas(model), 0.0, 1.0)
    out = [int(i) for i in np.flatnonzero(deltas >= MCCT_THRESHOLD)]
    tree = None
    try:
        base = ultrametric_to_hst(inst.tree_metric)
        tree = delete_leaves(base, out) if len(out) < inst.tree_metric.n else None
    except errors.NotHstMetric:
        pass  # general ultrametric: survivors keep their own distances
    return McctResult(out, pair_cost(inst, out), sol.objective, deltas, tree)


# --- requests and cost tables -------------------------------------------------

class CostTable:
    """Concave nondecreasing piecewise-linear g with g(0) = 0 and g(1) = 1."""

    def __init__(self, points: Sequence[Sequence[float]]):
        pts = sorted((float(a), float(b)) for a, b in points)
        if not pts or pts[0][0] <= 0:
            raise errors.InvalidCostTable("breakpoints must have positive loads")
        if len({a for a, _ in pts}) != len(pts):
            raise errors.InvalidCostTable("duplicate load breakpoints")
        self.loads = np.array([0.0] + [a for a, _ in pts])
        self.costs = np.array([0.0] + [b for _, b in pts])
        slopes = np.diff(self.costs) / np.diff(self.loads)
        if (slopes < -1e-12).any():
            raise errors.InvalidCostTable("g must be nondecreasing")
        if (np.diff(slopes) > 1e-12).any():
            raise errors.InvalidCostTable("g must be concave")
        self.tail = float(slopes[-1])
        if abs(self(1.0) - 1.0) > 1e-12:
            raise errors.InvalidCostTable(f"g(1) = {self(1.0)}, expected 1")
        bps = self.loads[1:]
        for a in bps:
            for b in bps:
                if self(a + b) > self(a) + self(b) + 1e-9:
                    raise errors.InvalidCostTable(f"g({a}+{b}) exceeds g({a})+g({b})")

    def __call__(self, load: float) -> float:
        if load <= self.loads[-1]:
            return float(np.interp(load, self.loads, self.costs))
        return float(self.costs[-1] + self.tail * (load - self.loads[-1]))

    def to_json(self) -> list:
        return [[float(a), float(b)] for a, b in zip(self.loads[1:], self.costs[1:])]


LINEAR = [[1.0, 1.0]]


@dataclass
class Request:
    s: int
    t: int
    d: float = 1.0


@dataclass
class RequestSet:
    requests: list
    capacity: int = 1
    g: CostTable = field(default_factory=lambda: CostTable(LINEAR))

    def __post_init__(self):
        for r in self.requests:
            if r.d < 1:
                raise ValueError(f"request demand {r.d} < 1")
        if self.capacity < 1:
            raise ValueError("capacity must be at least 1")

    @classmethod
    def from_json(cls, obj: dict, metric: MetricSpace) -> "RequestSet":
        reqs = [Request(metric.index(r["s"]), metric.index(r["t"]), float(r.get("d", 1)))
                for r in obj["requests"]]
        g = CostTable(obj["g"]) if obj.get("g") else CostTable(LINEAR)
        return cls(reqs, int(obj.get("capacity", 1)), g)


def per_request_opt(m: MetricSpace, req: Request, problem: str = "buy-at-bulk",
                    g: CostTable | None = None) -> float:
    for p in (req.s, req.t):
        if not 0 <= p < m.n:
            raise errors.UnknownPoint(f"request endpoint {p} out of range", point=p)
    d = m.dist[req.s, req.t]
    if problem == "buy-at-bulk":
        return float(d * (g or CostTable(LINEAR))(req.d))
    if problem == "dial-a-ride":
        return float(d)
    raise ValueError(f"unknown problem {problem!r}")


def point_weights(m: MetricSpace, reqs: RequestSet, problem: str) -> np.ndarray:
    """w_x = sum of single-request optima over requests touching x."""
    w = np.zeros(m.n)
    for r in reqs.requests:
        opt = per_request_opt(m, r, problem, reqs.g)
        for x in {r.s, r.t}:
            w[x] += opt
    return w


# --- oracles ------------------------------------------------------------------

@dataclass
class Solution:
    cost: float
    detail: dict = field(default_factory=dict)


class Oracle(Protocol):
    def __call__(self, m: MetricSpace, reqs: RequestSet, idx: Sequence[int],
                 tree: HstEmbedding | None) -> Solution: ...


def tree_edge_length(h: int) -> float:
    """Length of the edge from a height-h node to its parent (2-HST with eta 2^(h-1))."""
    return 0.5 if h == 0 else math.ldexp(1.0, h - 2)


def tree_loads(tree: HstEmbedding, reqs: RequestSet, idx: Sequence[int]) -> dict:
    """Load on every tree edge (keyed by child node) under unique-path routing."""
    t = tree.tree
    loads: dict[int, float] = {}
    for i in idx:
        r = reqs.requests[i]
        a, b = tree.leaf_of[r.s], tree.leaf_of[r.t]
        while a != b:
            if t.height[a] <= t.height[b]:
                loads[a] = loads.get(a, 0.0) + r.d
                a = t.parent[a]
            else:
                loads[b] = loads.get(b, 0.0) + r.d
                b = t.parent[b]
    return loads


def buy_at_bulk_tree_cost(tree: HstEmbedding, reqs: RequestSet, idx: Sequence[int]) -> float:
    t = tree.tree
    return float(sum(tree_edge_length(t.height[v]) * reqs.g(load)
                     for v, load in tree_loads(tree, reqs, idx).items()))


def _representatives(tree: HstEmbedding) -> list[int]:
    t = tree.tree
    rep = [-1] * len(t.height)
    order = [t.root]
    for v in order:
        order.extend(t.children[v])
    for v in reversed(order):
        rep[v] = t.point[v] if not t.children[v] else min(rep[c] for c in t.children[v])
    return rep


def buy_at_bulk_tree_oracle(m: MetricSpace, reqs: RequestSet, idx: Sequence[int],
                            tree: HstEmbedding | None) -> Solution:
    """Route on the tree, then buy each tree edge as the metric pair of its endpoint representatives.

    Loads landing on the same metric pair are merged (g is subadditive, so
    merging never costs more); the result is a feasible purchase in ``m``.
    """
    if tree is None or not idx:
        return buy_at_bulk_naive(m, reqs, idx, None)
    rep = _representatives(tree)
    t = tree.tree
    pair_load: dict[tuple[int, int], float] = {}
    for v, load in tree_loads(tree, reqs, idx).items():
        a, b = rep[v], rep[t.parent[v]]
        if a != b:
            key = (min(a, b), max(a, b))
            pair_load[key] = pair_load.get(key, 0.0) + load
    cost = sum(m.dist[a, b] * reqs.g(load) for (a, b), load in pair_load.items())
    return Solution(float(cost), {"tree_cost": buy_at_bulk_tree_cost(tree, reqs, idx),
                                  "pairs": len(pair_load)})


def buy_at_bulk_naive(m: MetricSpace, reqs: RequestSet, idx: Sequence[int],
                      tree: HstEmbedding | None = None) -> Solution:
    cost = sum(per_request_opt(m, reqs.requests[i], "buy-at-bulk", reqs.g) for i in idx)
    return Solution(float(cost), {"mode": "naive"})


@dataclass
class Stop:
    point: int
    action: str   # "pickup" | "drop"
    request: int
    count: float


def validate_schedule(m: MetricSpace, reqs: RequestSet, idx: Sequence[int],
                      stops: Sequence[Stop]) -> float:
    """Check a dial-a-ride schedule and return its travel cost."""
    load = 0.0
    picked: dict[int, float] = {}
    dropped: dict[int, float] = {}
    for st in stops:
        r = reqs.requests[st.request]
        if st.action == "pickup":
            if st.point != r.s:
                raise errors.OracleFailure(f"pickup for request {st.request} away from its source")
            load += st.count
            picked[st.request] = picked.get(st.request, 0.0) + st.count
        elif st.action == "drop":
            if st.point != r.t:
                raise errors.OracleFailure(f"drop for request {st.request} away from its target")
            if dropped.get(st.request, 0.0) + st.count > picked.get(st.request, 0.0) + 1e-9:
                raise errors.OracleFailure(f"request {st.request} dropped before pickup")
            load -= st.count
            dropped[st.request] = dropped.get(st.request, 0.0) + st.count
        else:
            raise errors.OracleFailure(f"unknown action {st.action!r}")
        if load < -1e-9 or load > reqs.capacity + 1e-9:
            raise errors.OracleFailure(f"van load {load} outside [0, {reqs.capacity}]")
    for i in idx:
        if abs(dropped.get(i, 0.0) - reqs.requests[i].d) > 1e-9:
            raise errors.OracleFailure(f"request {i} not fully delivered")
    pts = [st.point for st in stops]
    return float(sum(m.dist[a, b] for a, b in zip(pts, pts[1:])))


def dial_a_ride_naive(m: MetricSpace, reqs: RequestSet, idx: Sequence[int],
                      tree: HstEmbedding | None = None) -> Solution:
    """Serve requests one at a time; with a tree, visit them in its leaf order."""
    order = list(idx)
    if tree is not None and order:
        pos = {p: i for i, p in enumerate(_leaf_order(tree))}
        order.sort(key=lambda i: (pos[reqs.requests[i].s], pos[reqs.requests[i].t], i))
    stops = []
    for i in order:
        r = reqs.requests[i]
        left = r.d
        while left > 0:
            take = min(left, reqs.capacity)
            stops.append(Stop(r.s, "pickup", i, take))
            stops.append(Stop(r.t, "drop", i, take))
            left -= take
    cost = validate_schedule(m, reqs, idx, stops)
    return Solution(cost, {"stops": [(s.point, s.action, s.request, s.count) for s in stops],
                           "order": order})


def _leaf_order(tree: HstEmbedding) -> list[int]:
    t = tree.tree
    out, stack = [], [t.root]
    while stack:
        v = stack.pop()
        if not t.children[v]:
            out.append(t.point[v])
        stack.extend(reversed(t.children[v]))
    return out


ORACLES = {
    "buy-at-bulk": (buy_at_bulk_tree_oracle, buy_at_bulk_naive),
    "dial-a-ride": (dial_a_ride_naive, dial_a_ride_naive),
}


def _join(problem: str, m: MetricSpace, a: Solution, b: Solution) -> float:
    """Cost of running two partial solutions back to back."""
    if problem == "dial-a-ride" and a.detail.get("stops") and b.detail.get("stops"):
        return a.cost + b.cost + float(m.dist[a.detail["stops"][-1][0], b.detail["stops"][0][0]])
    return a.cost + b.cost


def _call(oracle, m, reqs, idx, tree) -> Solution:
    try:
        return oracle(m, reqs, idx, tree)
    except errors.OutlierHstError:
        raise
    except Exception as exc:  # noqa: BLE001 - plug-in oracles surface as domain errors
        raise errors.OracleFailure(f"oracle raised {type(exc).__name__}: {exc}") from exc


def rung_ladder(n: int, eta: float = FRT_ETA) -> list[float]:
    top = int(math.floor(math.log2(math.log2(n)))) if n >= 4 else 0
    return [eta * math.log2(n) / 2**i for i in range(top + 1)]


def app_outer_loop(m: MetricSpace, reqs: RequestSet, problem: str = "buy-at-bulk",
                   oracle=None, eps: float = 1.0, seed=None, eta: float = FRT_ETA,
                   zeta: float = DEFAULT_ZETA, method: str = "auto",
                   ks: Sequence[int] | None = None) -> dict:
    if m.n < 2:
        raise ValueError("need at least two points")
    tree_oracle, naive = ORACLES[problem]
    tree_oracle = oracle or tree_oracle
    w = point_weights(m, reqs, problem)
    opt = [per_request_opt(m, r, problem, reqs.g) for r in reqs.requests]
    all_idx = list(range(len(reqs.requests)))
    naive_all = _call(naive, m, reqs, all_idx, None)
    rungs = []
    for i, c in enumerate(rung_ladder(m.n, eta)):
        res = outlier_embed(m, c, eps, weights=w, seed=seed, ks=ks, zeta=zeta, method=method)
        out = set(res.outliers.members)
        r1 = [j for j in all_idx if reqs.requests[j].s not in out and reqs.requests[j].t not in out]
        r2 = [j for j in all_idx if j not in set(r1)]
        sol1 = _call(tree_oracle, m, reqs, r1, res.sampler.sample(derive(seed, i, 0)))
        touched = sorted({p for j in r2 for p in (reqs.requests[j].s, reqs.requests[j].t)})
        fresh = frt_sample(m, derive(seed, i, 1), touched) if touched else None
        sol2 = _call(tree_oracle, m, reqs, r2, fresh)
        sol3 = _call(naive, m, reqs, r2, None)
        part2 = sol2 if sol2.cost <= sol3.cost else sol3
        total = _join(problem, m, sol1, part2)
        rungs.append({
            "c": c, "k_star": res.k_star, "outliers": res.outliers.labels(),
            "outlier_weight": float(w[list(out)].sum()), "lp_objective": res.lp_objective,
            "log2_n_sq": math.log2(m.n) ** 2, "log2_outliers_sq": math.log2(max(len(out), 2)) ** 2,
            "requests_tree": len(r1), "requests_outlier": len(r2),
            "sol1": sol1.cost, "sol2": sol2.cost, "sol3": sol3.cost,
            "second_part": "sol2" if part2 is sol2 else "sol3", "cost": total,
        })
    best = min(range(len(rungs)), key=lambda i: (rungs[i]["cost"], i))
    cost = rungs[best]["cost"]
    choice = f"rung{best}"
    if naive_all.cost < cost:
        cost, choice = naive_all.cost, "naive"
    return {"problem": problem, "cost": cost, "choice": choice, "naive_cost": naive_all.cost,
            "sum_opt": float(sum(opt)), "weights": [float(v) for v in w], "rungs": rungs,
            "config": {"eps": eps, "eta": eta, "zeta": zeta, "method": method,
                       "capacity": reqs.capacity, "g": reqs.g.to_json(),
                       "seed": seed if isinstance(seed, (int, type(None))) else str(seed)}}
