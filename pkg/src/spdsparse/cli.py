"""Command-line interface: ``spdsparse <command> ...``.

Exit codes: 0 success, 2 usage or validation error, 3 solver truncation
when ``--strict`` is given.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .bench import CSV_HEADER, crossover, run_bench, scaling_fit
from .coding import SolverConfig, code_batch, predict_batch
from .data import Dictionary, load_dataset, load_dictionary, save_dataset, save_dictionary
from .descriptors import DEFAULT_EPS, image_dataset, skeleton_dataset
from .errors import SpdError
from .kernels import KernelKind, KernelSpec, gram
from .learning import LearnConfig, learn
from .synth import SynthSpec, gen_synth, split_train_test

EXIT_USAGE = 2
EXIT_TRUNCATED = 3
REPORT_SCHEMA = "report/1"


class UsageError(Exception):
    pass


def _write_json(doc, path) -> None:
    text = json.dumps(doc, indent=2, sort_keys=False)
    if path in (None, "-"):
        sys.stdout.write(text + "\n")
    else:
        Path(path).write_text(text + "\n", encoding="utf-8")


def _kernel(args, dim: int) -> KernelSpec:
    return KernelSpec(KernelKind.parse(args.kernel), args.beta, dim)


def _nonempty(ds, what: str):
    if len(ds) == 0:
        raise UsageError(f"{what} contains no matrices")
    return ds


def _finish(truncated: int, strict: bool) -> int:
    if truncated:
        print(f"warning: {truncated} sparse code(s) hit the step budget", file=sys.stderr)
        if strict:
            return EXIT_TRUNCATED
    return 0


def cmd_synth(args) -> int:
    spec = SynthSpec(
        args.classes, args.per_class, args.dim, args.spread, args.separation, args.seed
    )
    ds = gen_synth(spec)
    if args.train_per_class is not None:
        train, test = split_train_test(ds, args.train_per_class)
        save_dataset(train, args.out)
        if args.test_out:
            save_dataset(test, args.test_out)
    else:
        save_dataset(ds, args.out)
    return 0


def cmd_code(args) -> int:
    d = load_dictionary(args.dict)
    queries = _nonempty(load_dataset(args.input), "input")
    if queries.dim != d.dim:
        raise UsageError(f"input n={queries.dim} does not match dictionary n={d.dim}")
    cache = gram(d, _kernel(args, d.dim))
    codes = code_batch(queries.items, cache, SolverConfig(args.lam, args.max_steps), args.threads)
    _write_json([c.to_json() for c in codes], args.out)
    return _finish(sum(c.truncated for c in codes), args.strict)


def cmd_learn(args) -> int:
    train = _nonempty(load_dataset(args.train), "training set")
    init = {"random": "random_subset", "kmeans": "intrinsic_kmeans"}[args.init]
    cfg = LearnConfig(
        n_atoms=args.atoms,
        iters=args.iters,
        kernel=_kernel(args, train.dim),
        lam=args.lam,
        init=init,
        seed=args.seed,
        workers=args.threads,
        max_steps=args.max_steps,
    )
    d, trace = learn(train, cfg)
    save_dictionary(d, args.out)
    trace_path = args.trace or str(Path(args.out).with_suffix("")) + ".trace.json"
    doc = {
        "config": {
            "atoms": cfg.n_atoms,
            "iters": cfg.iters,
            "kernel": cfg.kernel.kind.value,
            "beta": cfg.kernel.beta,
            "lambda": cfg.lam,
            "init": cfg.init,
            "seed": cfg.seed,
        },
        **trace.to_json(),
    }
    _write_json(doc, trace_path)
    if trace.no_improvement:
        print("warning: energy did not decrease", file=sys.stderr)
    return _finish(trace.truncated, args.strict)


def build_report(dictionary: Dictionary, queries, predictions, config: dict, timings: dict) -> dict:
    true = list(queries.labels) if queries.labels is not None else None
    pred = [p.label for p in predictions]
    classes = sorted(set(dictionary.labels) | set(true or []))
    index = {c: i for i, c in enumerate(classes)}
    confusion = np.zeros((len(classes), len(classes)), dtype=int)
    accuracy = None
    if true is not None:
        for t, p in zip(true, pred):
            confusion[index[t], index[p]] += 1
        accuracy = float(np.trace(confusion) / len(true))
    return {
        "schema": REPORT_SCHEMA,
        "accuracy": accuracy,
        "classes": classes,
        "confusion": confusion.tolist(),
        "per_query": [
            {
                "index": i,
                "true": None if true is None else true[i],
                "predicted": p.label,
                "residuals": p.residuals,
                "iterations": p.code.iterations,
                "truncated": p.code.truncated,
            }
            for i, p in enumerate(predictions)
        ],
        "timings_ms": timings,
        "config": config,
    }


def cmd_classify(args) -> int:
    t0 = time.perf_counter()
    d = load_dictionary(args.dict)
    if d.labels is None:
        raise UsageError("classification needs a labeled dictionary")
    queries = _nonempty(load_dataset(args.query), "query set")
    if queries.dim != d.dim:
        raise UsageError(f"query n={queries.dim} does not match dictionary n={d.dim}")
    spec = _kernel(args, d.dim)
    t1 = time.perf_counter()
    cache = gram(d, spec)
    t2 = time.perf_counter()
    preds = predict_batch(queries.items, cache, SolverConfig(args.lam, args.max_steps), args.threads)
    t3 = time.perf_counter()
    timings = {
        "load": (t1 - t0) * 1e3,
        "gram": (t2 - t1) * 1e3,
        "coding": (t3 - t2) * 1e3,
    }
    config = {"kernel": spec.kind.value, "beta": spec.beta, "lambda": args.lam, "atoms": len(d)}
    report = build_report(d, queries, preds, config, timings)
    _write_json(report, args.out)
    if report["accuracy"] is not None:
        print(f"accuracy {report['accuracy']:.4f}", file=sys.stderr)
    return _finish(sum(p.code.truncated for p in preds), args.strict)


def cmd_bench(args) -> int:
    if args.reps < 1:
        raise UsageError("--reps must be at least 1")
    kinds = (
        [KernelKind.JEFFREY, KernelKind.STEIN]
        if args.kernel == "both"
        else [KernelKind.parse(args.kernel)]
    )
    rows = run_bench(args.dims, args.atoms, kinds, args.reps, args.seed)
    out = sys.stdout if args.out in (None, "-") else open(args.out, "w", newline="")
    try:
        w = csv.writer(out)
        w.writerow(CSV_HEADER)
        for r in rows:
            w.writerow(r.csv_fields())
    finally:
        if out is not sys.stdout:
            out.close()
    for kind in kinds:
        for n in args.dims:
            if len(args.atoms) >= 3:
                _, _, r2 = scaling_fit(rows, kind.value, n)
                print(f"cross_gram {kind.value} n={n}: linear fit R^2 = {r2:.4f}", file=sys.stderr)
    if len(kinds) == 2:
        print(f"J/S divergence crossover (from scratch): n = {crossover(rows)}", file=sys.stderr)
    return 0


def cmd_covdesc(args) -> int:
    if args.mode == "texture":
        ds = image_dataset(args.input, tuple(args.block), args.eps)
    else:
        ds = skeleton_dataset(args.input, args.eps)
    save_dataset(ds, args.out)
    return 0


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a list of integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spdsparse", description="Sparse coding and dictionary learning on SPD matrices."
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def kernel_opts(p):
        p.add_argument("--kernel", choices=["j", "s", "jeffrey", "stein"], default="s")
        p.add_argument("--beta", type=float, default=0.5)
        p.add_argument("--lambda", dest="lam", type=float, default=0.1)
        p.add_argument("--threads", type=int, default=None, help="worker threads (default: $THREADS or all cores)")
        p.add_argument("--max-steps", type=int, default=None, help="solver step budget per code (default: 100 N)")
        p.add_argument("--strict", action="store_true", help="exit 3 if any code hits the step budget")

    p = sub.add_parser("synth", help="generate a labeled synthetic SPD dataset")
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--per-class", type=int, default=20)
    p.add_argument("--dim", type=int, default=5)
    p.add_argument("--spread", type=float, default=0.2)
    p.add_argument("--separation", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-per-class", type=int, default=None)
    p.add_argument("--test-out", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("code", help="sparse-code matrices against a dictionary")
    p.add_argument("--dict", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", default="-")
    kernel_opts(p)
    p.set_defaults(func=cmd_code)

    p = sub.add_parser("learn", help="learn a dictionary")
    p.add_argument("--train", required=True)
    p.add_argument("--atoms", type=int, required=True)
    p.add_argument("--iters", type=int, default=10)
    p.add_argument("--init", choices=["random", "kmeans"], default="random")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--trace", default=None, help="trace file (default: <out>.trace.json)")
    kernel_opts(p)
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("classify", help="residual-error classification with a labeled dictionary")
    p.add_argument("--dict", required=True)
    p.add_argument("--query", required=True)
    p.add_argument("--out", default="-")
    kernel_opts(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("bench", help="time divergences and cross-Gram construction")
    p.add_argument("--dims", type=_int_list, default=[5, 10, 20, 40])
    p.add_argument("--atoms", type=_int_list, default=[50, 100, 200, 400, 800])
    p.add_argument("--kernel", choices=["j", "s", "jeffrey", "stein", "both"], default="both")
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("covdesc", help="extract region covariance descriptors")
    p.add_argument("--input", required=True)
    p.add_argument("--mode", choices=["texture", "skeleton"], default="texture")
    p.add_argument("--block", type=int, nargs=2, metavar=("H", "W"), default=[32, 32])
    p.add_argument("--eps", type=float, default=DEFAULT_EPS)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_covdesc)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (SpdError, UsageError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
