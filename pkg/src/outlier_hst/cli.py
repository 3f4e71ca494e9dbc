"""Command-line entry point: ``outlier-hst <command> ...``.

Exit codes: 0 success, 1 domain error (JSON on stderr), 2 usage error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import errors
from . import io as fio
from ._random import derive, fresh_seed
from .apps import McctInstance, app_outer_loop, mcct_outlier
from .evaluate import estimate_distortion, planted_instance
from .frt import FixedSampler, FrtSampler, frt_sample
from .hst import to_json, ultrametric_to_hst
from .metric import compose, gen_expander_clique, random_euclidean, validate
from .nested import DEFAULT_ZETA, Assortment, NestedSampler, nested_compose
from .rounding import outlier_embed


class UsageError(Exception):
    pass


def _seed(args) -> int:
    if args.seed is None:
        args.seed = fresh_seed()
        print(f"seed: {args.seed}", file=sys.stderr)
    return args.seed


def _emit(args, payload: dict | str):
    text = payload if isinstance(payload, str) else fio.dumps(payload)
    if getattr(args, "out", None):
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out")}


def _ks(text):
    if text is None:
        return None
    out = []
    for part in text.split(","):
        if "-" in part:
            a, b = part.split("-")
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(int(part))
    return out


def _s_sampler(m, s, kind):
    if kind == "identity":
        return FixedSampler(ultrametric_to_hst(m, s))
    return FrtSampler(m, s)


# --- commands ---------------------------------------------------------------------

def cmd_validate(args):
    m = fio.load_metric(args.metric)
    _emit(args, {**fio.metric_to_json(m), "n": m.n, "diameter": m.diameter})


def cmd_gen(args):
    seed = _seed(args)
    if args.kind == "expander-clique":
        m = gen_expander_clique(args.n, seed)
    elif args.kind == "composition":
        outer = random_euclidean(args.outer, derive(seed, 0))
        blocks = [random_euclidean(args.inner, derive(seed, 1, i)) for i in range(args.outer)]
        m = compose(outer, blocks, args.beta)
    else:
        m = planted_instance(args.n - args.far, args.far, seed).metric
    _emit(args, {**fio.metric_to_json(m), "config": _config(args)})


def cmd_embed(args):
    seed = _seed(args)
    m = fio.load_metric(args.metric)
    if args.kind == "frt":
        e = frt_sample(m, seed)
        _emit(args, {"hst": to_json(e), "config": _config(args)})
        return
    if not args.subset:
        raise UsageError("embed nested needs --subset")
    s = fio.load_subset(args.subset, m)
    if not s:
        raise errors.EmptyS("subset file lists no points")
    a = Assortment(m, s, _s_sampler(m, s, args.s_sampler))
    e, trace = nested_compose(a, seed, args.partition_seed)
    _emit(args, {"hst": to_json(e), "trace": trace.to_json(m), "config": _config(args)})


def cmd_outlier_embed(args):
    seed = _seed(args)
    m = fio.load_metric(args.metric)
    w = fio.load_weights(args.weights, m) if args.weights else None
    res = outlier_embed(m, args.c, args.eps, w, seed, _ks(args.ks), args.zeta, args.method, args.jobs)
    out = res.to_json()
    out["config"] = {**out["config"], **_config(args)}
    if args.samples:
        out["samples"] = [to_json(e) for e in res.sampler.samples(args.samples, seed)]
        out["stats"]["fallbacks"] = res.sampler.fallbacks
    _emit(args, out)


def cmd_evaluate(args):
    seed = _seed(args)
    m = fio.load_metric(args.metric)
    points = None
    if args.sampler == "frt":
        sampler = FrtSampler(m)
    elif args.sampler == "nested":
        if not args.subset:
            raise UsageError("--sampler nested needs --subset")
        s = fio.load_subset(args.subset, m)
        sampler = NestedSampler(Assortment(m, s, _s_sampler(m, s, args.s_sampler)))
    else:
        res = outlier_embed(m, args.c, args.eps, seed=seed, zeta=args.zeta, method=args.method,
                            jobs=args.jobs)
        sampler = res.sampler
        points = res.outliers.complement().members
    rep = estimate_distortion(sampler, m, args.samples, seed, points, args.jobs)
    if args.format == "csv":
        _emit(args, rep.to_csv(m))
    else:
        _emit(args, {**rep.to_json(m), "config": {**rep.config, **_config(args)}})


def cmd_mcct(args):
    m = fio.load_metric(args.metric)
    D = fio.load_demands(args.demands, m)
    res = mcct_outlier(McctInstance(m, D, args.k), args.method)
    _emit(args, {**res.to_json(m), "k": args.k, "bound_outliers": 3 * args.k,
                 "config": _config(args)})


def cmd_app(args):
    seed = _seed(args)
    m = fio.load_metric(args.metric)
    reqs = fio.load_requests(args.requests, m)
    out = app_outer_loop(m, reqs, args.problem, eps=args.eps, seed=seed, zeta=args.zeta,
                         method=args.method, ks=_ks(args.ks))
    out["config"] = {**out["config"], **_config(args)}
    _emit(args, out)


# --- parser -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="outlier-hst", description="Outlier embeddings into 2-HSTs")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--out", help="write output here instead of stdout")
        if seed:
            sp.add_argument("--seed", type=int, help="master seed (drawn and printed if omitted)")

    def lp_opts(sp):
        sp.add_argument("--zeta", type=float, default=DEFAULT_ZETA)
        sp.add_argument("--method", choices=["auto", "simplex", "highs"], default="auto")

    sp = sub.add_parser("validate", help="check metric axioms and normalize")
    sp.add_argument("metric")
    common(sp, seed=False)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("gen", help="generate a metric")
    sp.add_argument("kind", choices=["composition", "expander-clique", "planted"])
    sp.add_argument("--n", type=int, default=16)
    sp.add_argument("--outer", type=int, default=3)
    sp.add_argument("--inner", type=int, default=3)
    sp.add_argument("--beta", type=float, default=2.0)
    sp.add_argument("--far", type=int, default=2)
    common(sp)
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("embed", help="draw one HST embedding")
    sp.add_argument("kind", choices=["frt", "nested"])
    sp.add_argument("metric")
    sp.add_argument("--subset", help="file with the labels of S")
    sp.add_argument("--s-sampler", choices=["frt", "identity"], default="frt")
    sp.add_argument("--partition-seed", type=int)
    sp.add_argument("--zeta", type=float, default=DEFAULT_ZETA)
    common(sp)
    sp.set_defaults(func=cmd_embed)

    sp = sub.add_parser("outlier-embed", help="LP-based outlier embedding")
    sp.add_argument("metric")
    sp.add_argument("--c", type=float, required=True)
    sp.add_argument("--eps", type=float, default=1.0)
    sp.add_argument("--weights")
    sp.add_argument("--samples", type=int, default=0)
    sp.add_argument("--ks", help="k values, e.g. 1-5 or 1,2,4")
    sp.add_argument("--jobs", type=int, default=1)
    lp_opts(sp)
    common(sp)
    sp.set_defaults(func=cmd_outlier_embed)

    sp = sub.add_parser("evaluate", help="Monte-Carlo distortion report")
    sp.add_argument("metric")
    sp.add_argument("--sampler", choices=["frt", "nested", "outlier"], default="frt")
    sp.add_argument("--samples", type=int, default=100)
    sp.add_argument("--subset")
    sp.add_argument("--s-sampler", choices=["frt", "identity"], default="frt")
    sp.add_argument("--c", type=float, default=1.0)
    sp.add_argument("--eps", type=float, default=1.0)
    sp.add_argument("--format", choices=["json", "csv"], default="json")
    sp.add_argument("--jobs", type=int, default=1)
    lp_opts(sp)
    common(sp)
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("mcct", help="outlier MCCT on an ultrametric")
    sp.add_argument("metric")
    sp.add_argument("--demands", required=True)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--method", choices=["auto", "simplex", "highs"], default="auto")
    common(sp, seed=False)
    sp.set_defaults(func=cmd_mcct)

    sp = sub.add_parser("app", help="buy-at-bulk or dial-a-ride outer loop")
    sp.add_argument("problem", choices=["buy-at-bulk", "dial-a-ride"])
    sp.add_argument("metric")
    sp.add_argument("--requests", required=True)
    sp.add_argument("--eps", type=float, default=1.0)
    sp.add_argument("--ks", help="k values for the weighted LP loop")
    lp_opts(sp)
    common(sp)
    sp.set_defaults(func=cmd_app)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"outlier-hst: error: {exc}", file=sys.stderr)
        return 2
    except errors.OutlierHstError as exc:
        print(json.dumps(exc.to_dict(), default=str), file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
