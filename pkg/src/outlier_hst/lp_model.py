"""The HST linear program with per-point outlier variables, plus its feasibility witness.

Variables (all indexed by metric point indices, radii r in M = {1, 2, 4, ...}):

* ``delta_i``            outlier indicator of point i, in [0, 1]
* ``x_i_j_r``            i represents j at level r (only when d(i, j) <= r)
* ``z_i_j_jp_r``         i represents both j and jp at level r
* ``gamma_j_jp_r``       j and jp are separated at level r, in [0, 1]

Rows are tagged with the constraint family they belong to:
``2`` distortion budget, ``3`` z <= x (two rows per z), ``4`` shared
representative, ``5`` every point represented, ``7`` forced separation below
d(j, jp). The bounds cover the remaining families (gamma <= 1, nonnegativity,
delta <= 1).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import sparse

from . import errors
from .hst import HstEmbedding
from .metric import MetricSpace, Subset
from .nested import DEFAULT_ZETA

FEAS_TOL = 1e-7


def log2k_sq(k: int) -> float:
    """log2(k)^2 with k clamped to at least 2 so tiny budgets stay finite."""
    return math.log2(max(int(k), 2)) ** 2


def radii_for(diameter: float) -> list[int]:
    top = max(0, math.ceil(math.log2(diameter) - 1e-12)) if diameter > 1 else 0
    return [2**t for t in range(top + 1)]


@dataclass
class LpModel:
    names: list[str]
    index: dict[str, int]
    objective: np.ndarray
    A: sparse.csr_matrix
    sense: np.ndarray          # '<', '>', '='
    rhs: np.ndarray
    row_names: list[str]
    row_tags: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    params: dict = field(default_factory=dict)
    metric: MetricSpace | None = None

    @property
    def n_vars(self) -> int:
        return len(self.names)

    @property
    def n_rows(self) -> int:
        return len(self.rhs)

    def col(self, name: str) -> int:
        return self.index[name]

    def counts(self) -> dict:
        kinds = {"delta": 0, "x": 0, "z": 0, "gamma": 0}
        for nm in self.names:
            kinds[nm.split("_", 1)[0]] += 1
        rows = {f"c{t}": int((self.row_tags == t).sum()) for t in (2, 3, 4, 5, 7)}
        return {"variables": self.n_vars, "rows": self.n_rows, **kinds, **rows}

    def with_fixed(self, values: dict[str, float]) -> "LpModel":
        """Copy with some variables pinned through their bounds."""
        lb, ub = self.lb.copy(), self.ub.copy()
        for nm, v in values.items():
            j = self.index[nm]
            lb[j] = ub[j] = v
        return LpModel(self.names, self.index, self.objective, self.A, self.sense, self.rhs,
                       self.row_names, self.row_tags, lb, ub, dict(self.params), self.metric)

    def residuals(self, x: np.ndarray) -> np.ndarray:
        """Per-row violation (>= 0 means violated by that amount)."""
        ax = self.A @ x
        out = np.zeros_like(ax)
        le, ge, eq = self.sense == "<", self.sense == ">", self.sense == "="
        out[le] = ax[le] - self.rhs[le]
        out[ge] = self.rhs[ge] - ax[ge]
        out[eq] = np.abs(ax[eq] - self.rhs[eq])
        return out

    def check(self, x: np.ndarray, tol: float = FEAS_TOL) -> "FeasibilityReport":
        res = self.residuals(x)
        bound_viol = np.maximum(self.lb - x, x - self.ub)
        by_class = {}
        for t in (2, 3, 4, 5, 7):
            sel = self.row_tags == t
            by_class[f"c{t}"] = float(res[sel].max()) if sel.any() else 0.0
        by_class["bounds"] = float(bound_viol.max()) if len(x) else 0.0
        violated = [self.row_names[i] for i in np.flatnonzero(res > tol)]
        violated += [f"bound:{self.names[j]}" for j in np.flatnonzero(bound_viol > tol)]
        return FeasibilityReport(by_class, violated, tol)


@dataclass
class FeasibilityReport:
    max_violation: dict
    violated: list
    tol: float

    @property
    def ok(self) -> bool:
        return not self.violated

    @property
    def structural_ok(self) -> bool:
        """Every family except the distortion budget (which depends on the distribution)."""
        return all(v <= self.tol for k, v in self.max_violation.items() if k != "c2")

    @property
    def distortion_ok(self) -> bool:
        return self.max_violation["c2"] <= self.tol


def build_lp(m: MetricSpace, c: float, k: int, zeta: float = DEFAULT_ZETA,
             weights: Sequence[float] | None = None) -> LpModel:
    if not c > 0:
        raise ValueError(f"target distortion c={c} must be positive")
    if k < 0:
        raise ValueError("k must be nonnegative")
    n = m.n
    d = m.dist
    radii = radii_for(m.diameter)
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (n,) or (w < 0).any():
        raise ValueError("weights must be one nonnegative value per point")
    lk = log2k_sq(k)

    names: list[str] = []
    index: dict[str, int] = {}

    def var(name):
        index[name] = len(names)
        names.append(name)
        return index[name]

    for i in range(n):
        var(f"delta_{i}")
    balls = {(i, r): [j for j in range(n) if d[i, j] <= r] for r in radii for i in range(n)}
    for r in radii:
        for i in range(n):
            for j in balls[i, r]:
                var(f"x_{i}_{j}_{r}")
    for r in radii:
        for i in range(n):
            b = balls[i, r]
            for a in range(len(b)):
                for bb in range(a + 1, len(b)):
                    var(f"z_{i}_{b[a]}_{b[bb]}_{r}")
    for j in range(n):
        for jp in range(j + 1, n):
            for r in radii:
                var(f"gamma_{j}_{jp}_{r}")

    rows, cols, vals = [], [], []
    sense, rhs, row_names, tags = [], [], [], []

    def row(coefs, s, b, name, tag):
        ridx = len(rhs)
        for col, v in coefs:
            rows.append(ridx)
            cols.append(col)
            vals.append(v)
        sense.append(s)
        rhs.append(b)
        row_names.append(name)
        tags.append(tag)

    for j in range(n):
        for jp in range(j + 1, n):
            djj = d[j, jp]
            slack = zeta * c * djj * lk
            coefs = [(index[f"gamma_{j}_{jp}_{r}"], float(r)) for r in radii]
            coefs += [(index[f"delta_{j}"], -slack), (index[f"delta_{jp}"], -slack)]
            row(coefs, "<", 4.0 * c * djj, f"c2_{j}_{jp}", 2)
    for r in radii:
        for i in range(n):
            b = balls[i, r]
            for a in range(len(b)):
                for bb in range(a + 1, len(b)):
                    j, jp = b[a], b[bb]
                    zc = index[f"z_{i}_{j}_{jp}_{r}"]
                    row([(zc, 1.0), (index[f"x_{i}_{j}_{r}"], -1.0)], "<", 0.0, f"c3a_{i}_{j}_{jp}_{r}", 3)
                    row([(zc, 1.0), (index[f"x_{i}_{jp}_{r}"], -1.0)], "<", 0.0, f"c3b_{i}_{j}_{jp}_{r}", 3)
    for j in range(n):
        for jp in range(j + 1, n):
            for r in radii:
                coefs = [(index[f"z_{i}_{j}_{jp}_{r}"], 1.0)
                         for i in range(n) if d[i, j] <= r and d[i, jp] <= r]
                coefs.append((index[f"gamma_{j}_{jp}_{r}"], 1.0))
                row(coefs, ">", 1.0, f"c4_{j}_{jp}_{r}", 4)
    for j in range(n):
        for r in radii:
            coefs = [(index[f"x_{i}_{j}_{r}"], 1.0) for i in range(n) if d[i, j] <= r]
            row(coefs, "=", 1.0, f"c5_{j}_{r}", 5)
    for j in range(n):
        for jp in range(j + 1, n):
            for r in radii:
                if r < d[j, jp]:
                    row([(index[f"gamma_{j}_{jp}_{r}"], 1.0)], "=", 1.0, f"c7_{j}_{jp}_{r}", 7)

    nv = len(names)
    A = sparse.csr_matrix((vals, (rows, cols)), shape=(len(rhs), nv))
    obj = np.zeros(nv)
    obj[:n] = w
    lb = np.zeros(nv)
    ub = np.full(nv, np.inf)
    ub[:n] = 1.0
    for j in range(n):
        for jp in range(j + 1, n):
            for r in radii:
                ub[index[f"gamma_{j}_{jp}_{r}"]] = 1.0
    params = {"c": float(c), "k": int(k), "zeta": float(zeta), "radii": radii,
              "weights": None if weights is None else [float(v) for v in w], "n": n}
    return LpModel(names, index, obj, A, np.array(sense), np.array(rhs, dtype=float),
                   row_names, np.array(tags), lb, ub, params, m)


def delta_pins(model: LpModel, outliers) -> dict[str, float]:
    out = set(outliers)
    return {f"delta_{i}": (1.0 if i in out else 0.0) for i in range(model.params["n"])}


def witness_from_distribution(dist: Sequence[tuple[float, HstEmbedding]], K,
                              model: LpModel) -> tuple[np.ndarray, FeasibilityReport]:
    """LP assignment induced by a finite distribution over non-contracting HST embeddings.

    At level r a sample's clusters are the maximal subtrees whose eta is at
    most r; each cluster is represented by its lowest-index member.
    """
    m = model.metric
    n = m.n
    probs = np.array([p for p, _ in dist], dtype=float)
    if (probs < 0).any() or abs(probs.sum() - 1.0) > 1e-9:
        raise errors.ProbabilitiesDontSum(f"probabilities sum to {probs.sum()}")
    K = set(K.members) if isinstance(K, Subset) else set(K)
    radii = model.params["radii"]
    val = np.zeros(model.n_vars)
    for i in K:
        val[model.index[f"delta_{i}"]] = 1.0
    idx = model.index
    for p, e in dist:
        if sorted(e.points) != list(range(n)):
            raise errors.NotNonContracting("witness embeddings must cover every point")
        h = e.height_matrix(list(range(n)))
        da = e.distance_matrix(list(range(n)))
        off = ~np.eye(n, dtype=bool)
        if (da[off] < m.dist[off] * (1 - 1e-12)).any():
            i, j = map(int, np.argwhere((da < m.dist * (1 - 1e-12)) & off)[0])
            raise errors.NotNonContracting(f"pair ({i}, {j}) contracted: {da[i, j]} < {m.dist[i, j]}",
                                           pair=[i, j])
        beta = e.tree.beta
        for r in radii:
            hr = int(math.floor(math.log(r, beta) + 1e-12)) + 1  # highest height with eta <= r
            same = h <= hr
            rep = np.array([int(np.argmax(same[j])) for j in range(n)])  # lowest-index co-member
            for j in range(n):
                val[idx[f"x_{rep[j]}_{j}_{r}"]] += p
            for j in range(n):
                for jp in range(j + 1, n):
                    if same[j, jp]:
                        val[idx[f"z_{rep[j]}_{j}_{jp}_{r}"]] += p
                    else:
                        val[idx[f"gamma_{j}_{jp}_{r}"]] += p
    return val, model.check(val)


# --- interchange formats ------------------------------------------------------

def _lp_terms(pairs) -> str:
    parts = []
    for name, v in pairs:
        sign = "-" if v < 0 else "+"
        parts.append(f"{sign} {abs(v):.17g} {name}")
    s = " ".join(parts)
    return s[2:] if s.startswith("+ ") else s


def to_lp_text(model: LpModel) -> str:
    """CPLEX-style LP text: objective, constraints, bounds."""
    out = ["\\ HST outlier LP", f"\\ params: c={model.params['c']} k={model.params['k']} "
           f"zeta={model.params['zeta']} radii={model.params['radii']}", "Minimize"]
    nz = [(model.names[j], model.objective[j]) for j in np.flatnonzero(model.objective)]
    out.append(" obj: " + (_lp_terms(nz) if nz else "0 " + model.names[0]))
    out.append("Subject To")
    A = model.A.tocsr()
    ops = {"<": "<=", ">": ">=", "=": "="}
    for i in range(model.n_rows):
        lo, hi = A.indptr[i], A.indptr[i + 1]
        terms = [(model.names[j], v) for j, v in zip(A.indices[lo:hi], A.data[lo:hi])]
        out.append(f" {model.row_names[i]}: {_lp_terms(terms)} {ops[model.sense[i]]} {model.rhs[i]:.17g}")
    out.append("Bounds")
    for j, nm in enumerate(model.names):
        lo, hi = model.lb[j], model.ub[j]
        if lo == hi:
            out.append(f" {nm} = {lo:.17g}")
        elif np.isinf(hi):
            if lo != 0:
                out.append(f" {nm} >= {lo:.17g}")
        else:
            out.append(f" {lo:.17g} <= {nm} <= {hi:.17g}")
    out.append("End")
    return "\n".join(out) + "\n"


def solution_to_text(model: LpModel, x: np.ndarray) -> str:
    return "".join(f"{nm} {v:.17g}\n" for nm, v in zip(model.names, x))


def solution_from_text(model: LpModel, text: str) -> np.ndarray:
    x = np.zeros(model.n_vars)
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith(("#", "\\")):
            continue
        name, value = line.split()
        x[model.index[name]] = float(value)
    return x
