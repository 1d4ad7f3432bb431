"""Training-data sweep and adaptive-vs-fixed evaluation.

Every decision dimension has a fixed candidate set:

* ``policy``   -- ``seq`` and ``par`` (default chunking)
* ``chunk``    -- the four chunk fractions, all under ``par``
* ``prefetch`` -- the five prefetch distances in cache lines, under ``par``

A sweep cell (kernel, size, threads) times every candidate and labels each
dimension with the candidate of smallest median time.  Timing goes through a
clock object so that a :class:`FakeClock` can replace wall time with table
lookups and make the whole pipeline deterministic.
"""

from __future__ import annotations

import csv
import fnmatch
import logging
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from smartexec.bench.kernels import KERNELS, KernelSpec, checksum
from smartexec.executor import (
    Adaptive, AdaptiveChunk, DefaultChunk, FixedLines, LoopContext, Par, ParIf,
    Prefetcher, Seq, StaticChunk, prefetching_distance_determination,
    resolve_chunk_fraction, seq_par,
)
from smartexec.learning.data import (
    BINARY_CLASSES, CHUNK_CLASSES, PREFETCH_CLASSES, Dataset, write_dataset,
)
from smartexec.learning.weights import WeightsBundle
from smartexec.loopir import DynamicFeatures, make_feature_vector

log = logging.getLogger(__name__)

DIMENSIONS = ("policy", "chunk", "prefetch")
CANDIDATES = {"policy": BINARY_CLASSES, "chunk": CHUNK_CLASSES, "prefetch": PREFETCH_CLASSES}
DATASET_FILES = {"policy": "policy.csv", "chunk": "chunk.csv", "prefetch": "prefetch.csv"}
ADAPTIVE = "adaptive"
MIN_REPS = 5
DEFAULT_THREADS = (1, 2, 3, 4, 5, 6, 7, 8)
DEFAULT_SEED = 42


class ChecksumMismatch(RuntimeError):
    pass


# --------------------------------------------------------------------------
# Clocks

class WallClock:
    """Monotonic wall time of the timed callable."""

    fake = False

    def time(self, fn: Callable[[], object], key: tuple) -> float:
        t0 = time.perf_counter()
        fn()
        return time.perf_counter() - t0


@dataclass
class FakeClock:
    """Configuration-keyed constant timings.

    Rules are ``(kernel, dimension, config, threads, size, seconds)``; the
    first five fields are glob patterns (``*`` matches anything) and the
    first matching rule wins.
    """

    rules: list[tuple[tuple[str, ...], float]]
    fake = True

    def lookup(self, key: tuple) -> float:
        fields = tuple(str(k) for k in key)
        for pattern, seconds in self.rules:
            if all(fnmatch.fnmatchcase(f, p) for f, p in zip(fields, pattern)):
                return seconds
        raise KeyError(f"fake clock has no entry for {','.join(fields)}")

    def time(self, fn, key: tuple) -> float:
        return self.lookup(key)

    @classmethod
    def from_csv(cls, path) -> "FakeClock":
        rules = []
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
        header = ["kernel", "dimension", "config", "threads", "size", "seconds"]
        if not rows or [h.strip() for h in rows[0]] != header:
            raise ValueError(f"{path}: header must be {','.join(header)}")
        for lineno, row in enumerate(rows[1:], start=2):
            if len(row) != 6:
                raise ValueError(f"{path}: rule {lineno} needs 6 fields")
            seconds = float(row[5])
            if not seconds > 0:
                raise ValueError(f"{path}: rule {lineno} time must be positive")
            rules.append((tuple(f.strip() for f in row[:5]), seconds))
        return cls(rules)


# --------------------------------------------------------------------------
# Configurations and measurements

@dataclass(frozen=True)
class Config:
    dimension: str
    label: str                      # candidate class name or "adaptive"
    policy: object
    chunk: object
    predicted: str | None = None    # adaptive only: the label the model chose


@dataclass(frozen=True)
class Measurement:
    kernel: str
    dimension: str
    config: str
    threads: int
    n: int
    median_s: float
    repetitions: int
    checksum: str
    predicted: str | None = None


@dataclass
class SweepResult:
    kernel: str
    n: int
    threads: int
    features: np.ndarray
    measurements: list[Measurement]
    labels: dict[str, str] = field(default_factory=dict)


def fixed_configs(kernel: KernelSpec, size: int, threads: int,
                  dimensions: Iterable[str] = DIMENSIONS) -> list[Config]:
    out = []
    elem = kernel.element_bytes(size)
    for dim in dimensions:
        for label in CANDIDATES[dim]:
            if dim == "policy":
                policy = Seq() if label == "seq" else Par(threads)
                out.append(Config(dim, label, policy, DefaultChunk()))
            elif dim == "chunk":
                out.append(Config(dim, label, Par(threads),
                                  StaticChunk(resolve_chunk_fraction(float(label), size))))
            else:
                out.append(Config(dim, label, Prefetcher(Par(threads), FixedLines(int(label)), elem),
                                  DefaultChunk()))
    return out


def adaptive_configs(bundle: WeightsBundle, kernel: KernelSpec, size: int, threads: int,
                     dimensions: Iterable[str] = DIMENSIONS) -> list[Config]:
    """The smart-executor setting per dimension, with the label its model picks."""
    x = make_feature_vector(kernel.static_features(size), DynamicFeatures(threads, size))
    elem = kernel.element_bytes(size)
    out = []
    for dim in dimensions:
        if dim == "policy":
            predicted = seq_par(bundle.policy_model, x)
            out.append(Config(dim, ADAPTIVE, ParIf(bundle.policy_model), DefaultChunk(), predicted))
        elif dim == "chunk":
            cls, _ = bundle.chunk_model.predict(x)
            out.append(Config(dim, ADAPTIVE, Par(threads), AdaptiveChunk(bundle.chunk_model),
                              CHUNK_CLASSES[cls]))
        else:
            predicted = str(prefetching_distance_determination(bundle.prefetch_model, x))
            out.append(Config(dim, ADAPTIVE,
                              Prefetcher(Par(threads), Adaptive(bundle.prefetch_model), elem),
                              DefaultChunk(), predicted))
    return out


def measure_configs(kernel: KernelSpec, size: int, threads: int, configs: Sequence[Config],
                    reps: int = MIN_REPS, clock=None, seed: int = DEFAULT_SEED) -> list[Measurement]:
    """Time every configuration; all outputs must match the sequential reference.

    One untimed warm-up run per configuration also produces its checksum.  The
    timed repetitions go round-robin over the configurations so slow drift in
    machine state is spread evenly; each run is still strictly sequential.
    """
    if reps < MIN_REPS:
        raise ValueError(f"need at least {MIN_REPS} repetitions")
    clock = clock or WallClock()
    prob = kernel.make(size, seed)
    static = kernel.static_features(size)

    def ctx_for(containers):
        return LoopContext(static, threads, containers)

    def run(cfg):
        state = kernel.prepare(prob)
        return lambda: kernel.execute(prob, state, cfg.policy, cfg.chunk, ctx_for)

    reference = checksum(*run(Config("reference", "seq", Seq(), DefaultChunk()))())
    sums = []
    for cfg in configs:
        sums.append(checksum(*run(cfg)()))
        if sums[-1] != reference:
            raise ChecksumMismatch(
                f"{kernel.name} n={size} threads={threads} {cfg.dimension}={cfg.label}: "
                f"checksum {sums[-1]} != reference {reference}")

    times = [[] for _ in configs]
    for _ in range(reps):
        for i, cfg in enumerate(configs):
            label = cfg.predicted if (clock.fake and cfg.label == ADAPTIVE) else cfg.label
            key = (kernel.name, cfg.dimension, label, threads, size)
            thunk = None if clock.fake else run(cfg)
            times[i].append(clock.time(thunk, key))
    return [
        Measurement(kernel.name, cfg.dimension, cfg.label, threads, size,
                    statistics.median(t), reps, sums[i], cfg.predicted)
        for i, (cfg, t) in enumerate(zip(configs, times))
    ]


def winning_labels(measurements: Iterable[Measurement]) -> dict[str, str]:
    """Argmin of median time per dimension; ties keep the earlier candidate."""
    best: dict[str, Measurement] = {}
    for m in measurements:
        if m.config == ADAPTIVE:
            continue
        if m.dimension not in best or m.median_s < best[m.dimension].median_s:
            best[m.dimension] = m
    return {dim: m.config for dim, m in best.items()}


# --------------------------------------------------------------------------
# Sweep

@dataclass
class Grid:
    kernels: tuple[str, ...]
    sizes: dict[str, tuple[int, ...]]
    threads: tuple[int, ...]

    def cells(self):
        for k in self.kernels:
            for size in self.sizes[k]:
                for t in self.threads:
                    yield k, size, t

    def __len__(self):
        return sum(len(self.sizes[k]) for k in self.kernels) * len(self.threads)


def default_grid(kernels: Sequence[str] | None = None,
                 threads: Sequence[int] = DEFAULT_THREADS) -> Grid:
    kernels = tuple(kernels) if kernels is not None else tuple(KERNELS)
    return Grid(kernels, {k: KERNELS[k].sizes for k in kernels}, tuple(threads))


SMALL_SIZES = {
    "stream": (1_000, 100_000, 1_000_000),
    "stencil": (8, 45, 128),
    "matmul": (16, 64, 256),
}


def small_grid(kernels: Sequence[str] | None = None,
               threads: Sequence[int] = (1, 2, 4, 8)) -> Grid:
    """A quick grid for smoke runs: three sizes per kernel."""
    kernels = tuple(kernels) if kernels is not None else tuple(KERNELS)
    return Grid(kernels, {k: SMALL_SIZES[k] for k in kernels}, tuple(threads))


def generate_training_data(grid: Grid, reps: int = MIN_REPS, clock=None,
                           seed: int = DEFAULT_SEED, out_dir=None,
                           progress: Callable[[SweepResult], None] | None = None):
    """Sweep ``grid`` and return ``({dimension: Dataset}, [SweepResult])``.

    With ``out_dir`` the three datasets are also written there as CSV files.
    """
    if not grid.kernels:
        raise ValueError("no kernels to sweep")
    unknown = [k for k in grid.kernels if k not in KERNELS]
    if unknown:
        raise ValueError(f"unknown kernel(s): {', '.join(unknown)}")
    rows = {dim: ([], []) for dim in DIMENSIONS}
    results = []
    for name, size, threads in grid.cells():
        kernel = KERNELS[name]
        try:
            ms = measure_configs(kernel, size, threads, fixed_configs(kernel, size, threads),
                                 reps, clock, seed)
        except ChecksumMismatch as exc:
            log.error("cell aborted: %s", exc)
            continue
        x = make_feature_vector(kernel.static_features(size), DynamicFeatures(threads, size))
        res = SweepResult(name, size, threads, x, ms, winning_labels(ms))
        results.append(res)
        for dim in DIMENSIONS:
            rows[dim][0].append(x)
            rows[dim][1].append(CANDIDATES[dim].index(res.labels[dim]))
        if progress:
            progress(res)
    if not results:
        raise RuntimeError("sweep produced no rows")

    datasets = {}
    for dim in DIMENSIONS:
        X, y = rows[dim]
        datasets[dim] = Dataset(np.array(X), np.array(y), CANDIDATES[dim])
        if len(set(y)) < 2:
            log.warning("%s dataset has a single label (%s); its model is untrainable",
                        dim, CANDIDATES[dim][y[0]])
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for dim, data in datasets.items():
            write_dataset(data, out_dir / DATASET_FILES[dim])
    return datasets, results


# --------------------------------------------------------------------------
# Evaluation

@dataclass(frozen=True)
class ReportRow:
    kernel: str
    dimension: str
    config: str
    median_s: float
    speedup_vs_adaptive: float
    predicted: str | None = None

    @property
    def config_label(self) -> str:
        return f"{self.config}:{self.predicted}" if self.predicted else self.config


def evaluate(bundle: WeightsBundle, kernels: Sequence[str], threads: int,
             sizes: dict[str, int] | None = None, dimensions: Sequence[str] = DIMENSIONS,
             reps: int = MIN_REPS, clock=None, seed: int = DEFAULT_SEED) -> list[ReportRow]:
    """Time each fixed candidate and the adaptive setting for every kernel/dimension.

    ``speedup_vs_adaptive`` is fixed median / adaptive median (1.0 on the
    adaptive row itself).
    """
    for m in (bundle.chunk_model, bundle.prefetch_model):
        if len(m.class_names) < 2:
            raise ValueError("bundle is missing model classes")
    rows = []
    for name in kernels:
        kernel = KERNELS[name]
        size = (sizes or {}).get(name, kernel.eval_size)
        # each dimension's adaptive run sits next to its fixed candidates in the round
        configs = []
        for dim in dimensions:
            configs += fixed_configs(kernel, size, threads, (dim,))
            configs += adaptive_configs(bundle, kernel, size, threads, (dim,))
        ms = measure_configs(kernel, size, threads, configs, reps, clock, seed)
        for dim in dimensions:
            dim_ms = [m for m in ms if m.dimension == dim]
            adaptive = next(m for m in dim_ms if m.config == ADAPTIVE)
            for m in dim_ms:
                rows.append(ReportRow(name, dim, m.config, m.median_s,
                                      m.median_s / adaptive.median_s, m.predicted))
    return rows


REPORT_COLUMNS = ("kernel", "dimension", "config", "median_s", "speedup_vs_adaptive")


def write_report_csv(rows: Sequence[ReportRow], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in rows:
            w.writerow([r.kernel, r.dimension, r.config_label,
                        f"{r.median_s:.9g}", f"{r.speedup_vs_adaptive:.6f}"])


def format_report(rows: Sequence[ReportRow]) -> str:
    header = f"{'kernel':<9} {'dimension':<9} {'config':<16} {'median_s':>12} {'speedup':>9}"
    lines = [header, "-" * len(header)]
    for r in rows:
        lines.append(f"{r.kernel:<9} {r.dimension:<9} {r.config_label:<16} "
                     f"{r.median_s:>12.6g} {r.speedup_vs_adaptive:>9.3f}")
    return "\n".join(lines)


def adaptive_regret(rows: Sequence[ReportRow]) -> dict[tuple[str, str], float]:
    """Adaptive median divided by the best fixed median, per (kernel, dimension)."""
    out = {}
    keys = dict.fromkeys((r.kernel, r.dimension) for r in rows)
    for key in keys:
        group = [r for r in rows if (r.kernel, r.dimension) == key]
        adaptive = next(r for r in group if r.config == ADAPTIVE)
        best = min(r.median_s for r in group if r.config != ADAPTIVE)
        out[key] = adaptive.median_s / best
    return out
