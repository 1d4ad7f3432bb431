"""``smartexec`` command line: analyze, gen-data, train, predict, bench.

Exit status is 0 on success, 2 for usage or input errors (bad flags, missing
or malformed files, untrainable data) and 1 for anything unexpected.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from smartexec.bench import harness
from smartexec.bench.kernels import KERNELS
from smartexec.executor import resolve_chunk_fraction
from smartexec.learning.data import (
    BINARY_CLASSES, CHUNK_CLASSES, PREFETCH_CLASSES, Dataset, DatasetError,
    read_dataset, train_test_split,
)
from smartexec.learning.logistic import (
    TrainConfig, TrainingError, accuracy, train_binary_irls, train_multinomial_newton,
)
from smartexec.learning.normalize import fit_normalizer
from smartexec.learning.weights import WeightsBundle, WeightsFormatError, load_weights, save_weights
from smartexec.loopir import (
    FEATURE_NAMES, DynamicFeatures, LoopSpecError, analyze_statement, make_feature_vector,
    parse_loop_spec,
)

log = logging.getLogger("smartexec")

EXIT_OK, EXIT_INTERNAL, EXIT_USAGE = 0, 1, 2
DIMENSION_CHOICES = ("policy", "chunk", "prefetch", "all")


class UsageError(Exception):
    pass


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _int_list(text: str) -> tuple[int, ...]:
    try:
        values = tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {text!r}") from None
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError("values must be >= 1")
    return values


def _read_spec(path: str):
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"loop spec not found: {path}")
    try:
        return analyze_statement(parse_loop_spec(p.read_text(encoding="utf-8")))
    except LoopSpecError as exc:
        raise UsageError(f"{path}: {exc}") from None


def _load_bundle(path: str | None) -> WeightsBundle:
    if path is None:
        raise UsageError("--weights is required")
    if not Path(path).is_file():
        raise UsageError(f"weights file not found: {path}")
    return load_weights(path)


def _clock(path: str | None):
    if path is None:
        return harness.WallClock()
    if not Path(path).is_file():
        raise UsageError(f"fake-clock table not found: {path}")
    return harness.FakeClock.from_csv(path)


def _kernel_list(names) -> list[str]:
    names = [n for n in names if n]
    if not names:
        raise UsageError(f"no kernels given; available: {', '.join(KERNELS)}")
    unknown = [n for n in names if n not in KERNELS]
    if unknown:
        raise UsageError(f"unknown kernel {', '.join(unknown)}; available: {', '.join(KERNELS)}")
    return names


def _dimensions(choice: str) -> tuple[str, ...]:
    return harness.DIMENSIONS if choice == "all" else (choice,)


def _emit_json(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


# --------------------------------------------------------------------------
# Subcommands

def cmd_analyze(args) -> int:
    s = _read_spec(args.spec)
    x = make_feature_vector(s, DynamicFeatures(args.threads, args.iterations))
    vector = [int(v) for v in x]
    if args.json:
        _emit_json({"static": s.as_dict(), "feature_names": list(FEATURE_NAMES),
                    "feature_vector": vector})
        return EXIT_OK
    for name, value in s.as_dict().items():
        print(f"{name:<20} {value}")
    print("feature vector       [" + ", ".join(map(str, vector)) + "]")
    return EXIT_OK


def cmd_gen_data(args) -> int:
    kernels = _kernel_list(args.kernels.split(","))
    make_grid = harness.small_grid if args.grid == "small" else harness.default_grid
    grid = make_grid(kernels, args.thread_grid) if args.thread_grid else make_grid(kernels)
    for item in args.sizes or []:
        name, _, values = item.partition("=")
        if name not in grid.sizes:
            raise UsageError(f"--sizes names kernel {name!r} which is not being swept")
        try:
            grid.sizes[name] = _int_list(values)
        except argparse.ArgumentTypeError as exc:
            raise UsageError(f"--sizes {item}: {exc}") from None
    if args.reps < harness.MIN_REPS:
        raise UsageError(f"--reps must be at least {harness.MIN_REPS}")
    clock = _clock(args.fake_clock)
    out = Path(args.out or "data")

    def progress(res):
        log.info("%s n=%d threads=%d -> %s", res.kernel, res.n, res.threads,
                 " ".join(f"{d}={l}" for d, l in res.labels.items()))

    datasets, results = harness.generate_training_data(
        grid, args.reps, clock, args.seed, out, progress)
    print(f"swept {len(results)} of {len(grid)} cells; wrote "
          + ", ".join(f"{out / harness.DATASET_FILES[d]} ({len(datasets[d])} rows)"
                      for d in harness.DIMENSIONS))
    return EXIT_OK


def _read_datasets(data_dir: Path) -> dict[str, Dataset]:
    classes = {"policy": BINARY_CLASSES, "chunk": CHUNK_CLASSES, "prefetch": PREFETCH_CLASSES}
    out = {}
    for dim, fname in harness.DATASET_FILES.items():
        path = data_dir / fname
        if not path.is_file():
            raise UsageError(f"dataset not found: {path}")
        out[dim] = read_dataset(path, classes[dim])
    return out


def cmd_train(args) -> int:
    if args.data is None:
        raise UsageError("--data is required")
    if not 0.0 < args.split <= 1.0:
        raise UsageError("--split must be in (0, 1]")
    datasets = _read_datasets(Path(args.data))
    splits = {dim: train_test_split(d, args.split, args.seed) for dim, d in datasets.items()}
    # one normalizer for the whole bundle, fitted on every training row
    normalizer = fit_normalizer(np.vstack([tr.X for tr, _ in splits.values()]))
    cfg = TrainConfig(max_iters=args.max_iters)
    models = {}
    for dim, (train, _) in splits.items():
        try:
            if dim == "policy":
                models[dim] = train_binary_irls(train, cfg, normalizer)
            else:
                models[dim] = train_multinomial_newton(train, cfg, normalizer)
        except TrainingError as exc:
            raise UsageError(f"{dim} model: {exc}") from None
    bundle = WeightsBundle(models["policy"], models["chunk"], models["prefetch"])
    out = Path(args.out or "weights.dat")
    save_weights(bundle, out)

    report = {}
    for dim, (train, test) in splits.items():
        report[dim] = {"train_rows": len(train), "test_rows": 0 if test is None else len(test),
                       "held_out_accuracy": None if test is None else accuracy(models[dim], test)}
    if args.json:
        _emit_json({"weights": str(out), "models": report})
        return EXIT_OK
    for dim, r in report.items():
        acc = r["held_out_accuracy"]
        shown = "no held-out" if acc is None else f"held-out accuracy {acc:.4f} ({r['test_rows']} rows)"
        print(f"{dim:<9} trained on {r['train_rows']} rows, {shown}")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_predict(args) -> int:
    bundle = _load_bundle(args.weights)
    s = _read_spec(args.spec)
    x = make_feature_vector(s, DynamicFeatures(args.threads, args.iterations))
    p_cls, p_par = bundle.policy_model.predict(x)
    c_cls, c_probs = bundle.chunk_model.predict(x)
    f_cls, f_probs = bundle.prefetch_model.predict(x)
    result = {
        "policy": BINARY_CLASSES[p_cls],
        "policy_probabilities": {"seq": 1.0 - p_par, "par": p_par},
        "chunk_class": CHUNK_CLASSES[c_cls],
        "chunk_size": resolve_chunk_fraction(float(CHUNK_CLASSES[c_cls]), args.iterations),
        "chunk_probabilities": dict(zip(CHUNK_CLASSES, map(float, c_probs))),
        "prefetch_distance": int(PREFETCH_CLASSES[f_cls]),
        "prefetch_probabilities": dict(zip(PREFETCH_CLASSES, map(float, f_probs))),
    }
    if args.json:
        _emit_json(result)
        return EXIT_OK
    fmt = lambda probs: " ".join(f"{k}:{v:.4f}" for k, v in probs.items())
    print(f"policy             {result['policy']}   ({fmt(result['policy_probabilities'])})")
    print(f"chunk size         {result['chunk_size']} iterations (class {result['chunk_class']})"
          f"   ({fmt(result['chunk_probabilities'])})")
    print(f"prefetch distance  {result['prefetch_distance']} cache lines"
          f"   ({fmt(result['prefetch_probabilities'])})")
    return EXIT_OK


def cmd_bench(args) -> int:
    kernels = _kernel_list(args.kernels)
    bundle = _load_bundle(args.weights)
    if args.reps < harness.MIN_REPS:
        raise UsageError(f"--reps must be at least {harness.MIN_REPS}")
    sizes = {k: args.iterations for k in kernels} if args.iterations else None
    rows = harness.evaluate(bundle, kernels, args.threads, sizes, _dimensions(args.dimension),
                            args.reps, _clock(args.fake_clock), args.seed)
    print(harness.format_report(rows))
    if args.out:
        harness.write_report_csv(rows, args.out)
        print(f"wrote {args.out}")
    return EXIT_OK


# --------------------------------------------------------------------------
# Parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=harness.DEFAULT_SEED,
                        help="seed for data initialization and shuffling (default 42)")
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress")

    parser = argparse.ArgumentParser(prog="smartexec",
                                     description="Learned loop-execution parameters.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", parents=[common], help="static features of a loop spec")
    p.add_argument("spec")
    p.add_argument("--threads", type=_positive_int, default=1)
    p.add_argument("--iterations", type=_positive_int, default=1)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("gen-data", parents=[common], help="sweep kernels and write datasets")
    p.add_argument("--out", help="output directory (default ./data)")
    p.add_argument("--kernels", default=",".join(KERNELS), help="comma-separated kernel names")
    p.add_argument("--grid", choices=("default", "small"), default="default")
    p.add_argument("--thread-grid", type=_int_list, help="comma-separated thread counts")
    p.add_argument("--sizes", action="append", metavar="KERNEL=N,N,...",
                   help="override one kernel's size list (repeatable)")
    p.add_argument("--reps", type=int, default=harness.MIN_REPS)
    p.add_argument("--fake-clock", help="CSV of configuration-keyed timings")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", parents=[common], help="train the three models")
    p.add_argument("--data", help="directory holding policy/chunk/prefetch CSVs")
    p.add_argument("--out", help="weights file to write (default ./weights.dat)")
    p.add_argument("--split", type=float, default=0.8, help="training fraction (default 0.8)")
    p.add_argument("--max-iters", type=_positive_int, default=TrainConfig.max_iters)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", parents=[common], help="decisions for one loop")
    p.add_argument("spec")
    p.add_argument("--weights")
    p.add_argument("--threads", type=_positive_int, default=1)
    p.add_argument("--iterations", type=_positive_int, default=1)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("bench", parents=[common], help="adaptive vs fixed settings")
    p.add_argument("kernels", nargs="+", metavar="KERNEL")
    p.add_argument("--weights")
    p.add_argument("--threads", type=_positive_int, default=1)
    p.add_argument("--iterations", type=_positive_int,
                   help="parallel-loop trip count (default: each kernel's evaluation size)")
    p.add_argument("--dimension", choices=DIMENSION_CHOICES, default="all")
    p.add_argument("--reps", type=int, default=harness.MIN_REPS)
    p.add_argument("--fake-clock", help="CSV of configuration-keyed timings")
    p.add_argument("--out", help="report CSV path")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (UsageError, LoopSpecError, WeightsFormatError, DatasetError, TrainingError,
            harness.ChecksumMismatch, KeyError, ValueError, OSError) as exc:
        print(f"smartexec {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL if isinstance(exc, harness.ChecksumMismatch) else EXIT_USAGE
    except Exception as exc:  # pragma: no cover - reported, not hidden
        log.exception("internal error")
        print(f"smartexec {args.command}: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
