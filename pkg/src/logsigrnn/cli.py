"""Command-line interface.

Subcommands cover the whole pipeline: basis inspection, signature and
log-signature features (plus the latter's vector-Jacobian product for
external autodiff integrations), path transforms, SDE data generation,
training, evaluation, the scenario experiment grid, and plotting.

Exit codes: 0 ok, 2 usage, 3 data problem, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .exceptions import NotLieElementError, ShapeMismatchError, TrainingDivergedError
from .lyndon import lyndon_words
from .paths import (
    Path,
    accumulate,
    downsample,
    drop_points,
    make_partition,
    read_path_csv,
    time_incorporate,
    write_path_csv,
)
from .features import logsig_sequence, logsig_sequence_vjp, signature
from . import nn
from .sde import gen_dataset, load_dataset, write_dataset
from .experiment import ExperimentSpec, plot_metrics, read_results, run_experiment, write_results

__all__ = ["main"]


def _write_matrix(rows: np.ndarray, stream) -> None:
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    for row in rows:
        stream.write(",".join(repr(float(v)) for v in row) + "\n")


def _read_matrix(path: str) -> np.ndarray:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    return np.asarray([[float(v) for v in ln.split(",")] for ln in lines])


def _input_path(args) -> Path:
    if args.input and args.input != "-":
        return read_path_csv(args.input)
    return read_path_csv(sys.stdin)


def _cmd_basis(args) -> int:
    basis = lyndon_words(args.width, args.depth)
    per_grade = [
        sum(1 for w in basis.words if len(w) == n) for n in range(1, args.depth + 1)
    ]
    doc = {
        "width": args.width,
        "depth": args.depth,
        "d_ls": basis.dim,
        "per_grade": per_grade,
        "words": [list(w) for w in basis.words],
    }
    json.dump(doc, sys.stdout)
    sys.stdout.write("\n")
    return 0


def _cmd_sig(args) -> int:
    x = _input_path(args)
    _write_matrix(signature(x, args.depth).flatten()[None, :], sys.stdout)
    return 0


def _cmd_logsig(args) -> int:
    x = _input_path(args)
    D = make_partition(x, args.segments)
    _write_matrix(logsig_sequence(x, D, args.depth).features, sys.stdout)
    return 0


def _cmd_logsig_vjp(args) -> int:
    x = _input_path(args)
    D = make_partition(x, args.segments)
    upstream = _read_matrix(args.upstream)
    grad = logsig_sequence_vjp(x, D, args.depth, upstream)
    _write_matrix(grad, sys.stdout)
    return 0


def _cmd_transform(args) -> int:
    x = _input_path(args)
    for op in args.op or []:
        name, _, arg = op.partition(":")
        if name in ("time_incorporate", "time"):
            x = time_incorporate(x)
        elif name == "accumulate":
            x = accumulate(x)
        elif name == "drop":
            x = drop_points(x, float(arg), seed=args.seed)
        elif name == "downsample":
            x = downsample(x, int(arg))
        else:
            raise ShapeMismatchError(f"unknown transform {op!r}")
    write_path_csv(x, sys.stdout)
    return 0


def _cmd_gen_sde(args) -> int:
    train, test = gen_dataset(args.count, args.steps, args.T, args.seed, args.split)
    meta = {
        "count": args.count,
        "steps": args.steps,
        "T": args.T,
        "seed": args.seed,
        "split": args.split,
    }
    write_dataset(args.out, train, test, meta)
    print(f"wrote {len(train)} train + {len(test)} test samples to {args.out}")
    return 0


def _cmd_train(args) -> int:
    with open(args.config) as fh:
        cfg = nn.ModelConfig(**json.load(fh))
    train_ds, test_ds = load_dataset(args.data)
    params, metrics = nn.train(cfg, train_ds, test_ds)
    nn.save_checkpoint(args.out, cfg, params)
    metrics_path = args.metrics or (os.path.splitext(args.out)[0] + ".metrics.csv")
    metrics.to_csv(metrics_path)
    print(
        json.dumps(
            {
                "final_train_mse": metrics.final_train_mse,
                "final_test_mse": metrics.final_test_mse,
                "seconds": round(metrics.wall_clock_seconds, 3),
                "model": args.out,
                "metrics": metrics_path,
            }
        )
    )
    return 0


def _cmd_eval(args) -> int:
    cfg, params = nn.load_checkpoint(args.model)
    train_ds, test_ds = load_dataset(args.data)
    ds = train_ds if args.split == "train" else test_ds
    paths = ds.paths
    if args.drop > 0:
        paths = [drop_points(x, args.drop, seed=args.seed + i) for i, x in enumerate(paths)]
    pred = nn.predict(cfg, params, paths)
    print(
        json.dumps(
            {"split": args.split, "n": len(paths), "mse": nn.mse(pred, ds.targets)}
        )
    )
    return 0


def _cmd_experiment(args) -> int:
    spec = ExperimentSpec.from_json(args.spec)
    if args.out:
        spec.out_dir = args.out
    rows, histories = run_experiment(spec)
    csv_path = write_results(rows, spec.out_dir, histories)
    with open(os.path.join(spec.out_dir, "table.txt")) as fh:
        sys.stdout.write(fh.read())
    print(f"results: {csv_path}")
    return 0


def _cmd_plot(args) -> int:
    rows = read_results(args.results)
    run_dir = args.runs or os.path.join(os.path.dirname(args.results), "runs")
    written = plot_metrics(rows, args.out, run_dir=run_dir)
    for path in written:
        print(path)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="logsigrnn",
        description="Log-signature features and recurrent models on paths.",
    )
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("basis", help="Lyndon words and log-signature dims as JSON")
    q.add_argument("--width", type=int, required=True)
    q.add_argument("--depth", type=int, required=True)
    q.set_defaults(func=_cmd_basis)

    q = sub.add_parser("sig", help="flat truncated signature of a path CSV")
    q.add_argument("--depth", type=int, required=True)
    q.add_argument("--input", default="-", help="path CSV (default: stdin)")
    q.set_defaults(func=_cmd_sig)

    q = sub.add_parser("logsig", help="per-segment log-signature matrix as CSV")
    q.add_argument("--depth", type=int, required=True)
    q.add_argument("--segments", type=int, required=True)
    q.add_argument("--input", default="-")
    q.set_defaults(func=_cmd_logsig)

    q = sub.add_parser(
        "logsig-vjp",
        help="gradient of <upstream, logsig features> w.r.t. the path values",
    )
    q.add_argument("--depth", type=int, required=True)
    q.add_argument("--segments", type=int, required=True)
    q.add_argument("--upstream", required=True, help="CSV with the N x d_ls upstream matrix")
    q.add_argument("--input", default="-")
    q.set_defaults(func=_cmd_logsig_vjp)

    q = sub.add_parser("transform", help="apply named path transforms in order")
    q.add_argument(
        "--op",
        action="append",
        help="time_incorporate | accumulate | drop:RATIO | downsample:STEPS",
    )
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--input", default="-")
    q.set_defaults(func=_cmd_transform)

    q = sub.add_parser("gen-sde", help="simulate the benchmark SDE dataset")
    q.add_argument("--count", type=int, default=2000)
    q.add_argument("--steps", type=int, default=5000)
    q.add_argument("--T", type=float, default=10.0)
    q.add_argument("--seed", type=int, default=7)
    q.add_argument("--split", type=float, default=0.8)
    q.add_argument("--out", required=True)
    q.set_defaults(func=_cmd_gen_sde)

    q = sub.add_parser("train", help="train a model from a JSON config")
    q.add_argument("--config", required=True)
    q.add_argument("--data", required=True)
    q.add_argument("--out", required=True)
    q.add_argument("--metrics")
    q.set_defaults(func=_cmd_train)

    q = sub.add_parser("eval", help="evaluate a checkpoint on a dataset split")
    q.add_argument("--model", required=True)
    q.add_argument("--data", required=True)
    q.add_argument("--split", choices=("train", "test"), default="test")
    q.add_argument("--drop", type=float, default=0.0, help="drop ratio applied at eval time")
    q.add_argument("--seed", type=int, default=0)
    q.set_defaults(func=_cmd_eval)

    q = sub.add_parser("experiment", help="run the scenario/model grid")
    q.add_argument("--spec", required=True)
    q.add_argument("--out")
    q.set_defaults(func=_cmd_experiment)

    q = sub.add_parser("plot", help="plots + raw CSV from a results table")
    q.add_argument("--results", required=True)
    q.add_argument("--out", required=True)
    q.add_argument("--runs", help="directory of per-run metrics CSVs")
    q.set_defaults(func=_cmd_plot)
    return p


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, IsADirectoryError, NotADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (json.JSONDecodeError, ShapeMismatchError) as exc:
        print(f"error: bad input data: {exc}", file=sys.stderr)
        return 3
    except (NotLieElementError, TrainingDivergedError, FloatingPointError) as exc:
        print(f"error: numeric failure: {exc}", file=sys.stderr)
        return 4
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
