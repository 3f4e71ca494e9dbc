"""Monte-Carlo distortion estimates, exhaustive outlier search, bound formulas, planted instances."""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

from . import errors
from ._random import derive, make_rng
from .frt import EmbeddingSampler
from .hst import HstEmbedding, random_hst, ultrametric_to_hst
from .lp_model import build_lp, delta_pins, log2k_sq
from .lp_solver import solve
from .metric import MetricSpace, validate
from .nested import DEFAULT_ZETA

BRUTE_FORCE_MAX_N = 10


@dataclass
class DistortionReport:
    points: list
    pairs: list
    d: np.ndarray
    mean_ratio: np.ndarray
    stderr: np.ndarray
    max_expansion: np.ndarray     # per sample
    min_contraction: np.ndarray   # per sample
    samples: int
    seed: object
    config: dict = field(default_factory=dict)

    @property
    def max_mean_ratio(self) -> float:
        return float(self.mean_ratio.max()) if len(self.mean_ratio) else 1.0

    @property
    def argmax_pair(self):
        return self.pairs[int(np.argmax(self.mean_ratio))] if self.pairs else None

    def to_json(self, metric: MetricSpace | None = None) -> dict:
        lab = (lambda i: metric.labels[i]) if metric is not None else (lambda i: i)
        return {
            "samples": self.samples,
            "seed": self.seed,
            "max_mean_ratio": self.max_mean_ratio,
            "min_contraction": float(self.min_contraction.min()),
            "max_expansion": float(self.max_expansion.max()),
            "pairs": [{"a": lab(a), "b": lab(b), "d": float(dd), "mean_ratio": float(mr),
                       "stderr": float(se)}
                      for (a, b), dd, mr, se in zip(self.pairs, self.d, self.mean_ratio, self.stderr)],
            "per_sample_max_expansion": [float(v) for v in self.max_expansion],
            "per_sample_min_contraction": [float(v) for v in self.min_contraction],
            "config": self.config,
        }

    def to_csv(self, metric: MetricSpace | None = None) -> str:
        lab = (lambda i: metric.labels[i]) if metric is not None else (lambda i: i)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["a", "b", "d", "mean_ratio", "stderr"])
        for (a, b), dd, mr, se in zip(self.pairs, self.d, self.mean_ratio, self.stderr):
            w.writerow([lab(a), lab(b), repr(float(dd)), repr(float(mr)), repr(float(se))])
        return buf.getvalue()


def estimate_distortion(sampler: EmbeddingSampler, m: MetricSpace, samples: int, seed=None,
                        points: Sequence[int] | None = None, jobs: int = 1) -> DistortionReport:
    """Per-pair mean ratio E[d_alpha] / d over ``samples`` seeded draws."""
    if samples < 2:
        raise ValueError("need at least two samples")
    pts = sorted(points) if points is not None else list(sampler.points)
    iu = np.triu_indices(len(pts), 1)
    base = m.dist[np.ix_(pts, pts)][iu]

    def draw(i):
        try:
            e = sampler.sample(derive(seed, i))
        except errors.OutlierHstError:
            raise
        except Exception as exc:  # noqa: BLE001
            raise errors.SamplerFailure(f"sample {i} failed: {exc}") from exc
        return e.distance_matrix(pts)[iu]

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(draw, range(samples)))
    else:
        rows = [draw(i) for i in range(samples)]
    D = np.array(rows)
    if D.shape[1] == 0:
        ratios = np.ones((samples, 0))
    else:
        ratios = D / base
    mean = ratios.mean(axis=0)
    se = ratios.std(axis=0, ddof=1) / math.sqrt(samples)
    mx = ratios.max(axis=1) if ratios.shape[1] else np.ones(samples)
    mn = ratios.min(axis=1) if ratios.shape[1] else np.ones(samples)
    pairs = [(pts[a], pts[b]) for a, b in zip(*iu)]
    return DistortionReport(pts, pairs, base, mean, se, mx, mn, samples,
                            seed if isinstance(seed, (int, type(None))) else str(seed),
                            sampler.config())


# --- exhaustive oracle -------------------------------------------------------------

@dataclass
class BruteForceResult:
    outliers: tuple | None
    tried: int


def brute_force_best_outliers(m: MetricSpace, c: float, max_k: int, zeta: float = DEFAULT_ZETA,
                              method: str = "auto") -> BruteForceResult:
    """Smallest K (lexicographically first among its size) whose pinned LP is feasible."""
    if m.n > BRUTE_FORCE_MAX_N:
        raise errors.TooLarge(f"n={m.n} > {BRUTE_FORCE_MAX_N} for exhaustive search", n=m.n)
    tried = 0
    for size in range(0, min(max_k, m.n) + 1):
        model = build_lp(m, c, size, zeta)
        for K in combinations(range(m.n), size):
            tried += 1
            try:
                solve(model.with_fixed(delta_pins(model, K)), method)
            except errors.Infeasible:
                continue
            return BruteForceResult(K, tried)
    return BruteForceResult(None, tried)


# --- bound formulas ----------------------------------------------------------------

def harmonic(k: int) -> float:
    return float(sum(1.0 / i for i in range(1, k + 1)))


def nested_expansion_bound(c_s: float, c_x: float, k: int) -> float:
    return (125 * c_s + 116 * c_x) * harmonic(k)


def nested_all_pairs_bound(c_s: float, k: int, zeta: float = DEFAULT_ZETA) -> float:
    lk = math.log2(max(k, 2))
    return zeta * (c_s * lk + lk * lk)


def rounding_pair_bound(c: float, k: int, delta_j: float, delta_jp: float,
                        zeta: float = DEFAULT_ZETA) -> float:
    return 8 * (4 + zeta * log2k_sq(k) * (delta_j + delta_jp)) * c


def frt_bound(n: int) -> float:
    return 8 * math.log(n) + 4


def outlier_count_bound(eps: float, k: int, v: float, zeta: float = DEFAULT_ZETA) -> float:
    """(16 zeta / eps) * log^2 k * v: the thresholding count bound v / delta*."""
    return 16 * zeta / eps * log2k_sq(k) * v


# --- planted instances -------------------------------------------------------------

@dataclass
class Planted:
    metric: MetricSpace
    core: list
    far: list
    core_embedding: HstEmbedding


def planted_instance(n_core: int, n_far: int, seed=None, far: float | None = None) -> Planted:
    """A random 2-HST metric plus ``n_far`` points at distance about ``far`` from everything."""
    rng = make_rng(seed)
    tree = random_hst(range(n_core), int(rng.integers(2**31)))
    core_d = tree.distance_matrix(list(range(n_core)))
    diam = float(core_d.max()) if n_core > 1 else 1.0
    F = 4.0 * max(diam, 1.0) if far is None else float(far)
    noise = rng.random(n_far) * 0.5
    n = n_core + n_far
    d = np.zeros((n, n))
    d[:n_core, :n_core] = core_d
    for a in range(n_far):
        p = n_core + a
        d[p, :n_core] = d[:n_core, p] = F + noise[a]
        for b in range(a + 1, n_far):
            q = n_core + b
            d[p, q] = d[q, p] = F + (noise[a] + noise[b]) / 2
    labels = [f"h{i}" for i in range(n_core)] + [f"f{a}" for a in range(n_far)]
    metric = validate(d, labels)
    core = list(range(n_core))
    return Planted(metric, core, list(range(n_core, n)), ultrametric_to_hst(metric, core))
