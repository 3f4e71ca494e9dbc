"""File formats: metrics (JSON matrix, CSV matrix, edge list), subsets, weights, demands, requests."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from . import errors
from .metric import MetricSpace, from_graph, validate


def metric_to_json(m: MetricSpace) -> dict:
    return {"labels": list(m.labels), "dist": m.dist.tolist(), "scale": m.scale}


def metric_from_json(obj: dict) -> MetricSpace:
    if "edges" in obj:
        return from_graph([(e[0], e[1], *e[2:3]) for e in obj["edges"]])
    if "dist" not in obj:
        raise errors.NotSquareMatrix("metric JSON needs a 'dist' matrix or an 'edges' list")
    m = validate(obj["dist"], obj.get("labels"))
    scale = float(obj.get("scale", 1.0))
    return MetricSpace(m.labels, m.dist, m.scale * scale) if scale != 1.0 else m


def metric_to_csv(m: MetricSpace) -> str:
    lines = [",".join([""] + list(m.labels))]
    for lab, row in zip(m.labels, m.dist):
        lines.append(",".join([lab] + [repr(float(v)) for v in row]))
    return "\n".join(lines) + "\n"


def metric_from_csv(text: str) -> MetricSpace:
    rows = [r for r in csv.reader(text.splitlines()) if r]
    header = rows[0]
    labeled = header[0].strip() == ""
    if labeled:
        labels = [h.strip() for h in header[1:]]
        d = [[float(v) for v in r[1:]] for r in rows[1:]]
    else:
        d = [[float(v) for v in r] for r in rows]
        labels = None
    return validate(np.array(d), labels)


def edges_from_text(text: str) -> list[tuple]:
    edges = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) not in (2, 3):
            raise errors.NotSquareMatrix(f"bad edge line {line!r}")
        edges.append((parts[0], parts[1], float(parts[2]) if len(parts) == 3 else 1.0))
    return edges


def load_metric(path: str | Path) -> MetricSpace:
    p = Path(path)
    text = p.read_text()
    suffix = p.suffix.lower()
    if suffix == ".json":
        return metric_from_json(json.loads(text))
    if suffix == ".csv":
        return metric_from_csv(text)
    return from_graph(edges_from_text(text))


def load_labels(path: str | Path) -> list[str]:
    text = Path(path).read_text()
    if text.lstrip().startswith("["):
        return [str(v) for v in json.loads(text)]
    return [l.strip() for l in text.replace(",", "\n").splitlines() if l.strip()]


def load_subset(path: str | Path, m: MetricSpace) -> list[int]:
    return sorted(m.index(l) for l in load_labels(path))


def load_weights(path: str | Path, m: MetricSpace) -> np.ndarray:
    text = Path(path).read_text()
    w = np.zeros(m.n)
    if text.lstrip().startswith("{"):
        items = json.loads(text).items()
    else:
        items = [l.split() for l in text.splitlines() if l.strip()]
    for lab, val in items:
        w[m.index(lab)] = float(val)
    return w


def load_demands(path: str | Path, m: MetricSpace) -> np.ndarray:
    """Pair demands as JSON ``{"demands": [[a, b, r], ...]}`` or lines ``a b r``."""
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        triples = json.loads(text)["demands"]
    else:
        triples = [l.split() for l in text.splitlines() if l.strip() and not l.startswith("#")]
    D = np.zeros((m.n, m.n))
    for a, b, r in triples:
        i, j = m.index(a), m.index(b)
        D[min(i, j), max(i, j)] += float(r)
    return D


def load_requests(path: str | Path, m: MetricSpace):
    from .apps import RequestSet
    return RequestSet.from_json(json.loads(Path(path).read_text()), m)


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_default) + "\n"


def _default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")
