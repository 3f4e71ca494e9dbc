"""LP solving: a dense two-phase primal simplex with Bland's rule, and a HiGHS backend.

The dense solver is the reference: deterministic, no external state, and
small enough to audit. Models beyond a few hundred thousand tableau cells go
to HiGHS through scipy, which is also used to cross-check the dense solver.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from . import errors
from .lp_model import FEAS_TOL, LpModel

PIVOT_TOL = 1e-9
AUTO_DENSE_CELLS = 400_000


@dataclass
class LpSolution:
    status: str                 # optimal | infeasible | iteration-limit
    x: np.ndarray
    objective: float
    method: str = ""
    iterations: int = 0
    seconds: float = 0.0
    info: dict = field(default_factory=dict)

    def value(self, model: LpModel, name: str) -> float:
        return float(self.x[model.index[name]])

    def deltas(self, model: LpModel) -> np.ndarray:
        return self.x[: model.params["n"]]


# --- standard form --------------------------------------------------------------

@dataclass
class _Standard:
    A: np.ndarray        # rows x free columns (after fixing), shifted by lb
    b: np.ndarray
    sense: np.ndarray
    c: np.ndarray
    const: float
    free: np.ndarray     # model column of each standard column
    lb: np.ndarray
    x_fixed: np.ndarray  # full-length vector holding pinned values
    row_labels: list


def _standardize(model: LpModel) -> _Standard:
    lb, ub = model.lb, model.ub
    if np.isneginf(lb).any():
        raise ValueError("free variables are not supported")
    if (lb > ub + FEAS_TOL).any():
        j = int(np.argmax(lb > ub + FEAS_TOL))
        raise errors.Infeasible(f"empty bound interval for {model.names[j]}",
                                rows=[f"bound:{model.names[j]}"])
    fixed = ub - lb <= 0
    free = np.flatnonzero(~fixed)
    x_fixed = np.where(fixed, lb, 0.0)
    A = model.A.tocsr()
    shift = A @ lb  # every column starts at its lower bound
    b = model.rhs - shift
    Af = A[:, free].toarray()
    rows = [Af]
    bs = [b]
    senses = [model.sense]
    labels = list(model.row_names)
    fin = np.flatnonzero(np.isfinite(ub[free]))
    if len(fin):
        Ab = np.zeros((len(fin), len(free)))
        Ab[np.arange(len(fin)), fin] = 1.0
        rows.append(Ab)
        bs.append(ub[free][fin] - lb[free][fin])
        senses.append(np.full(len(fin), "<"))
        labels += [f"bound:{model.names[free[j]]}" for j in fin]
    c = model.objective[free]
    const = float(model.objective @ lb)
    return _Standard(np.vstack(rows), np.concatenate(bs), np.concatenate(senses), c, const,
                     free, lb, x_fixed, labels)


def _assemble(st: _Standard, x_free: np.ndarray) -> np.ndarray:
    x = st.lb.copy()
    x[st.free] += x_free
    return x


# --- dense simplex --------------------------------------------------------------

class _Tableau:
    def __init__(self, T: np.ndarray, basis: np.ndarray, max_iter: int, deadline: float):
        self.T = T
        self.basis = basis
        self.iterations = 0
        self.max_iter = max_iter
        self.deadline = deadline

    def pivot(self, r: int, j: int):
        T = self.T
        T[r] /= T[r, j]
        col = T[:, j].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        T[:, j] = 0.0
        T[r, j] = 1.0
        self.basis[r] = j
        self.iterations += 1

    def run(self, ncols: int) -> str:
        """Minimize the objective in the last row over the first ``ncols`` columns."""
        T = self.T
        m = T.shape[0] - 1
        while True:
            if self.iterations >= self.max_iter or time.monotonic() > self.deadline:
                return "iteration-limit"
            red = T[-1, :ncols]
            cand = np.flatnonzero(red < -PIVOT_TOL)
            if not len(cand):
                return "optimal"
            j = int(cand[0])  # Bland: lowest index enters
            colj = T[:m, j]
            pos = np.flatnonzero(colj > PIVOT_TOL)
            if not len(pos):
                return "unbounded"
            ratios = T[pos, -1] / colj[pos]
            best = ratios.min()
            tie = pos[ratios <= best + 1e-12 * max(1.0, abs(best))]
            r = int(tie[np.argmin(self.basis[tie])])  # Bland: lowest basic index leaves
            self.pivot(r, j)


def _simplex(model: LpModel, max_iter: int, time_limit: float) -> LpSolution:
    t0 = time.monotonic()
    st = _standardize(model)
    A, b, sense = st.A.copy(), st.b.copy(), st.sense.copy()
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1
    sense = np.where(neg & (sense == "<"), ">", np.where(neg & (sense == ">"), "<", sense))
    m, n = A.shape
    le = np.flatnonzero(sense == "<")
    ge = np.flatnonzero(sense == ">")
    art_rows = np.flatnonzero(sense != "<")
    n_slack = len(le) + len(ge)
    n_art = len(art_rows)
    N = n + n_slack + n_art
    T = np.zeros((m + 1, N + 1))
    T[:m, :n] = A
    T[:m, -1] = b
    basis = np.empty(m, dtype=np.int64)
    col = n
    for i in le:
        T[i, col] = 1.0
        basis[i] = col
        col += 1
    for i in ge:
        T[i, col] = -1.0
        col += 1
    art_start = col
    for i in art_rows:
        T[i, col] = 1.0
        basis[i] = col
        col += 1
    # phase 1 objective: sum of artificials, priced out
    T[-1, art_start:N] = 1.0
    for i in art_rows:
        T[-1] -= T[i]
    tab = _Tableau(T, basis, max_iter, t0 + time_limit)
    status = tab.run(N)
    if status == "iteration-limit":
        raise errors.IterationLimit("phase 1 hit the iteration limit", iterations=tab.iterations)
    if -T[-1, -1] > FEAS_TOL:
        cert = [st.row_labels[i] for i in range(m)
                if tab.basis[i] >= art_start and T[i, -1] > FEAS_TOL]
        raise errors.Infeasible(f"phase 1 optimum {-T[-1, -1]:.3g} > 0", rows=cert)
    # drive zero-level artificials out; drop rows that cannot be pivoted (redundant)
    keep = np.ones(m + 1, dtype=bool)
    for i in range(m):
        if tab.basis[i] >= art_start:
            cand = np.flatnonzero(np.abs(T[i, :art_start]) > PIVOT_TOL)
            if len(cand):
                tab.pivot(i, int(cand[0]))
            else:
                keep[i] = False
    T = np.ascontiguousarray(np.delete(T[keep], np.s_[art_start:N], axis=1))
    basis = tab.basis[keep[:m]]
    m2 = T.shape[0] - 1
    cfull = np.zeros(art_start)
    cfull[:n] = st.c
    T[-1, :] = 0.0
    T[-1, :art_start] = cfull
    for i in range(m2):
        if cfull[basis[i]] != 0.0:
            T[-1] -= cfull[basis[i]] * T[i]
    tab2 = _Tableau(T, basis, max_iter, t0 + time_limit)
    tab2.iterations = tab.iterations
    status = tab2.run(art_start)
    y = np.zeros(art_start)
    y[basis] = T[:m2, -1]
    x = _assemble(st, np.maximum(y[:n], 0.0))
    sol = LpSolution(status, x, float(model.objective @ x), "simplex", tab2.iterations,
                     time.monotonic() - t0)
    if status == "iteration-limit":
        raise errors.IterationLimit("phase 2 hit the iteration limit",
                                    iterations=tab2.iterations, best=sol.objective)
    if status == "unbounded":
        raise errors.Infeasible("objective is unbounded below", rows=[])
    return sol


# --- HiGHS ----------------------------------------------------------------------

def _split(model: LpModel):
    A = model.A.tocsr()
    le, ge, eq = model.sense == "<", model.sense == ">", model.sense == "="
    A_ub = sparse.vstack([A[le], -A[ge]]).tocsr()
    b_ub = np.concatenate([model.rhs[le], -model.rhs[ge]])
    A_eq = A[eq]
    b_eq = model.rhs[eq]
    bounds = [(lo, None if np.isinf(hi) else hi) for lo, hi in zip(model.lb, model.ub)]
    return A_ub, b_ub, A_eq, b_eq, bounds


def _elastic_certificate(model: LpModel) -> list[str]:
    """Rows that must be violated in a minimum total-violation relaxation."""
    A = model.A.tocsr()
    m = model.n_rows
    # Ax + e_plus - e_minus (sense) b with penalties only on the harmful side
    plus = sparse.identity(m, format="csr")
    Aaug = sparse.hstack([A, plus, -plus]).tocsr()
    c = np.concatenate([np.zeros(model.n_vars), np.where(model.sense == "<", 0.0, 1.0),
                        np.where(model.sense == ">", 0.0, 1.0)])
    relaxed = LpModel(model.names + [f"e+{i}" for i in range(m)] + [f"e-{i}" for i in range(m)],
                      {}, c, Aaug, model.sense, model.rhs, model.row_names, model.row_tags,
                      np.concatenate([model.lb, np.zeros(2 * m)]),
                      np.concatenate([model.ub, np.full(2 * m, np.inf)]), dict(model.params))
    A_ub, b_ub, A_eq, b_eq, bounds = _split(relaxed)
    res = linprog(c, A_ub=A_ub if A_ub.shape[0] else None, b_ub=b_ub if A_ub.shape[0] else None,
                  A_eq=A_eq if A_eq.shape[0] else None, b_eq=b_eq if A_eq.shape[0] else None,
                  bounds=bounds, method="highs")
    if res.status != 0:
        return []
    e = res.x[model.n_vars:]
    viol = e[:m] * (model.sense != "<") + e[m:] * (model.sense != ">")
    return [model.row_names[i] for i in np.flatnonzero(viol > FEAS_TOL)]


def _highs(model: LpModel, max_iter: int, time_limit: float) -> LpSolution:
    t0 = time.monotonic()
    A_ub, b_ub, A_eq, b_eq, bounds = _split(model)
    res = linprog(model.objective,
                  A_ub=A_ub if A_ub.shape[0] else None, b_ub=b_ub if A_ub.shape[0] else None,
                  A_eq=A_eq if A_eq.shape[0] else None, b_eq=b_eq if A_eq.shape[0] else None,
                  bounds=bounds, method="highs",
                  options={"maxiter": max_iter, "time_limit": time_limit})
    dt = time.monotonic() - t0
    if res.status == 2:
        raise errors.Infeasible("HiGHS reports the model infeasible", rows=_elastic_certificate(model))
    if res.status == 3:
        raise errors.Infeasible("objective is unbounded below", rows=[])
    if res.status == 1:
        raise errors.IterationLimit("HiGHS hit the iteration or time limit", iterations=int(res.nit))
    if res.status != 0:
        raise errors.Infeasible(f"HiGHS failed: {res.message}", rows=[])
    x = np.clip(res.x, model.lb, model.ub)
    return LpSolution("optimal", x, float(model.objective @ x), "highs", int(res.nit), dt)


def dense_cells(model: LpModel) -> int:
    extra = int(np.isfinite(model.ub).sum())
    rows = model.n_rows + extra
    return rows * (model.n_vars + 2 * rows)


def solve(model: LpModel, method: str = "auto", max_iter: int = 200_000,
          time_limit: float = 600.0) -> LpSolution:
    """Solve ``model``; raises Infeasible (with a row certificate) or IterationLimit."""
    if method == "auto":
        method = "simplex" if dense_cells(model) <= AUTO_DENSE_CELLS else "highs"
    if method == "simplex":
        return _simplex(model, max_iter, time_limit)
    if method == "highs":
        return _highs(model, max_iter, time_limit)
    raise ValueError(f"unknown LP method {method!r}")
