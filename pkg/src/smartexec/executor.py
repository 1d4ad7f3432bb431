"""Parallel for-each over integer ranges with model-driven smart policies.

Policies::

    Seq()                                run on the calling thread, ascending
    Par(threads)                         chunks pulled from a shared queue
    ParIf(model)                         seq_par() picks Seq or Par per dispatch
    Prefetcher(base, distance, bytes)    memory-touch hints ahead of execution

Chunk parameters are ``StaticChunk(size)``, ``AdaptiveChunk(model)`` and
``DefaultChunk()`` (``ceil(n / threads)``).  Every model consulted by a
dispatch is evaluated once, before any iteration runs.
"""

from __future__ import annotations

import math
import queue
import threading
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence, Union

import numpy as np

from smartexec.learning.data import BINARY_CLASSES, CHUNK_CLASSES, PREFETCH_CLASSES
from smartexec.loopir import DynamicFeatures, StaticFeatures, make_feature_vector

CACHE_LINE_BYTES = 64

SEQUENTIAL = "seq"
PARALLEL = "par"


# --------------------------------------------------------------------------
# Policies and chunk parameters

@dataclass(frozen=True)
class Seq:
    pass


@dataclass(frozen=True)
class Par:
    threads: int

    def __post_init__(self):
        if self.threads < 1:
            raise ValueError("Par needs at least one thread")


@dataclass(frozen=True)
class ParIf:
    model: Any  # BinaryModel or anything with .predict(x) -> (class, p)


@dataclass(frozen=True)
class FixedLines:
    lines: int

    def __post_init__(self):
        if self.lines < 1:
            raise ValueError("prefetch distance must be >= 1 cache line")


@dataclass(frozen=True)
class Adaptive:
    model: Any  # MultinomialModel over PREFETCH_CLASSES


@dataclass(frozen=True)
class Prefetcher:
    base: Union[Seq, Par, ParIf]
    distance: Union[FixedLines, Adaptive]
    element_bytes: int = 8

    def __post_init__(self):
        if isinstance(self.base, Prefetcher):
            raise TypeError("a Prefetcher cannot wrap another Prefetcher")
        if self.element_bytes < 1:
            raise ValueError("element_bytes must be positive")


ExecutionPolicy = Union[Seq, Par, ParIf, Prefetcher]


@dataclass(frozen=True)
class StaticChunk:
    size: int

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("chunk size must be >= 1")


@dataclass(frozen=True)
class AdaptiveChunk:
    model: Any  # MultinomialModel over CHUNK_CLASSES


@dataclass(frozen=True)
class DefaultChunk:
    pass


ChunkParameter = Union[StaticChunk, AdaptiveChunk, DefaultChunk]


@dataclass
class LoopContext:
    """What a dispatch knows about its loop: static features, worker count, containers."""

    static_features: StaticFeatures = field(default_factory=StaticFeatures)
    threads: int = 1
    containers: Sequence[Any] = ()

    def __post_init__(self):
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    def feature_vector(self, n: int) -> np.ndarray:
        return make_feature_vector(self.static_features, DynamicFeatures(self.threads, max(n, 1)))


# --------------------------------------------------------------------------
# Decision functions

def seq_par(model, features) -> str:
    """``"par"`` when the binary model predicts class 1, else ``"seq"``."""
    cls, _ = model.predict(features)
    return PARALLEL if BINARY_CLASSES[cls] == "par" else SEQUENTIAL


def resolve_chunk_fraction(fraction: float, n: int) -> int:
    return min(n, max(1, int(round(fraction * n))))


def chunk_size_determination(model, features) -> int:
    """Chunk size in iterations for the loop described by ``features``."""
    cls, _ = model.predict(features)
    n = int(features[2])
    return resolve_chunk_fraction(float(CHUNK_CLASSES[cls]), n)


def prefetching_distance_determination(model, features) -> int:
    cls, _ = model.predict(features)
    return int(PREFETCH_CLASSES[cls])


def distance_in_elements(lines: int, element_bytes: int) -> int:
    return max(1, lines * CACHE_LINE_BYTES // element_bytes)


# --------------------------------------------------------------------------
# Chunk plans and the worker pool

def plan_chunks(n: int, chunk: int) -> list[tuple[int, int]]:
    """Half-open intervals covering ``[0, n)``; all but the last are ``chunk`` long."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if chunk < 1:
        raise ValueError("chunk must be >= 1")
    return [(lo, min(lo + chunk, n)) for lo in range(0, n, chunk)]


class _Job:
    def __init__(self, plan, task):
        self.pending = deque(plan)
        self.task = task
        self.lock = threading.Lock()
        self.errors: list[BaseException] = []
        self.active = 0
        self.done = threading.Condition(self.lock)

    def run(self):
        with self.lock:
            self.active += 1
        try:
            while True:
                with self.lock:
                    if self.errors or not self.pending:
                        return
                    interval = self.pending.popleft()
                try:
                    self.task(interval)
                except BaseException as exc:  # noqa: BLE001 - re-raised by execute()
                    with self.lock:
                        self.errors.append(exc)
                        self.pending.clear()
        finally:
            with self.lock:
                self.active -= 1
                self.done.notify_all()

    def wait(self):
        # A helper that picks the job up late finds the queue empty and leaves,
        # so only helpers already inside run() are waited for.
        with self.lock:
            while self.active:
                self.done.wait()


class ThreadPool:
    """Long-lived worker threads draining per-dispatch chunk queues.

    The dispatching thread works on its own job too, so nested or concurrent
    dispatches always make progress.
    """

    def __init__(self, max_workers: int | None = None):
        self.max_workers = max_workers
        self._queue: queue.SimpleQueue = queue.SimpleQueue()
        self._workers: list[threading.Thread] = []
        self._lock = threading.Lock()

    def _ensure_workers(self, n: int):
        if self.max_workers is not None:
            n = min(n, self.max_workers)
        with self._lock:
            while len(self._workers) < n:
                t = threading.Thread(target=self._worker, daemon=True,
                                     name=f"smartexec-{len(self._workers)}")
                t.start()
                self._workers.append(t)

    def _worker(self):
        while True:
            item = self._queue.get()
            if item is None:
                return
            item.run()

    def execute(self, plan, threads: int, task: Callable[[tuple[int, int]], Any]) -> None:
        """Run ``task`` once per interval of ``plan`` on up to ``threads`` workers."""
        if threads < 1:
            raise ValueError("threads must be >= 1")
        job = _Job(plan, task)
        helpers = min(threads, len(plan)) - 1
        if helpers > 0:
            self._ensure_workers(helpers)
        for _ in range(helpers):
            self._queue.put(job)
        job.run()
        job.wait()
        if job.errors:
            raise job.errors[0]

    def shutdown(self):
        with self._lock:
            for _ in self._workers:
                self._queue.put(None)
            self._workers.clear()


_default_pool: ThreadPool | None = None
_default_lock = threading.Lock()


def default_pool() -> ThreadPool:
    global _default_pool
    with _default_lock:
        if _default_pool is None:
            _default_pool = ThreadPool()
        return _default_pool


def pool_execute(plan, threads: int, task, pool: ThreadPool | None = None) -> None:
    (pool or default_pool()).execute(plan, threads, task)


# --------------------------------------------------------------------------
# Prefetch hints

class TouchSink:
    """Default hint sink: reads the elements so their cache lines get loaded."""

    def touch(self, container, start: int, stop: int, step: int) -> None:
        view = container[start:stop:step]
        if isinstance(view, np.ndarray):
            np.add.reduce(view, axis=None)
        else:
            for _ in view:
                pass


class RecordingSink:
    """Collects every hinted ``(container_index, element_index)``; for tests."""

    def __init__(self, containers=()):
        self._ids = {id(c): i for i, c in enumerate(containers)}
        self.hints: list[tuple[int, int]] = []
        self._lock = threading.Lock()

    def touch(self, container, start, stop, step):
        cid = self._ids.get(id(container), -1)
        with self._lock:
            self.hints.extend((cid, j) for j in range(start, stop, step))


# --------------------------------------------------------------------------
# Dispatch

@dataclass(frozen=True)
class Dispatch:
    """Resolved configuration of one loop dispatch."""

    mode: str                  # "seq" or "par"
    threads: int
    chunk: int                 # resolved chunk size (n when sequential)
    prefetch_lines: int | None
    prefetch_elements: int | None


def resolve_dispatch(policy: ExecutionPolicy, chunk: ChunkParameter, n: int,
                     ctx: LoopContext | None = None) -> Dispatch:
    """Evaluate every model the policy and chunk parameter need, exactly once."""
    prefetch_lines = prefetch_elems = None
    base = policy
    if isinstance(policy, Prefetcher):
        base = policy.base
        if isinstance(policy.distance, FixedLines):
            prefetch_lines = policy.distance.lines
        else:
            ctx = _need_ctx(ctx, "adaptive prefetching")
            prefetch_lines = prefetching_distance_determination(
                policy.distance.model, ctx.feature_vector(n))
        prefetch_elems = distance_in_elements(prefetch_lines, policy.element_bytes)

    if isinstance(base, ParIf):
        ctx = _need_ctx(ctx, "par_if")
        if seq_par(base.model, ctx.feature_vector(n)) == PARALLEL:
            base = Par(ctx.threads)
        else:
            base = Seq()

    if isinstance(base, Seq):
        return Dispatch(SEQUENTIAL, 1, max(n, 1), prefetch_lines, prefetch_elems)
    if not isinstance(base, Par):
        raise TypeError(f"unsupported policy {policy!r}")

    threads = base.threads
    if n == 0:
        size = 1
    elif isinstance(chunk, StaticChunk):
        size = min(chunk.size, n)
    elif isinstance(chunk, AdaptiveChunk):
        feat_ctx = ctx if ctx is not None else LoopContext(threads=threads)
        size = chunk_size_determination(chunk.model, feat_ctx.feature_vector(n))
    elif isinstance(chunk, DefaultChunk):
        size = math.ceil(n / threads)
    else:
        raise TypeError(f"unsupported chunk parameter {chunk!r}")
    return Dispatch(PARALLEL, threads, size, prefetch_lines, prefetch_elems)


def _need_ctx(ctx, what):
    if ctx is None:
        raise ValueError(f"{what} needs a LoopContext with the loop's features")
    return ctx


def _run(dispatch: Dispatch, n: int, run_interval, pool):
    if dispatch.mode == SEQUENTIAL:
        if n:
            run_interval((0, n))
        return
    pool_execute(plan_chunks(n, dispatch.chunk), dispatch.threads, run_interval, pool)


def for_each_range(policy: ExecutionPolicy, chunk: ChunkParameter, n: int,
                   body: Callable[[int], Any], ctx: LoopContext | None = None, *,
                   pool: ThreadPool | None = None, sink=None) -> Dispatch:
    """Invoke ``body(i)`` exactly once for every ``i`` in ``[0, n)``.

    ``body`` must tolerate concurrent calls for distinct indices.  Under a
    Prefetcher, each index ``i`` is preceded by a touch of element ``i + d``
    of every container in ``ctx.containers`` (skipped once past ``n``).
    Returns the resolved :class:`Dispatch`.
    """
    dispatch = resolve_dispatch(policy, chunk, n, ctx)
    containers = ctx.containers if ctx is not None else ()
    dist = dispatch.prefetch_elements
    if dist is not None and containers:
        sink = sink or TouchSink()

        def run_interval(iv):
            for i in range(*iv):
                j = i + dist
                if j < n:
                    for c in containers:
                        sink.touch(c, j, j + 1, 1)
                body(i)
    else:
        def run_interval(iv):
            for i in range(*iv):
                body(i)

    _run(dispatch, n, run_interval, pool)
    return dispatch


def for_each_chunk(policy: ExecutionPolicy, chunk: ChunkParameter, n: int,
                   body: Callable[[int, int], Any], ctx: LoopContext | None = None, *,
                   pool: ThreadPool | None = None, sink=None) -> Dispatch:
    """Like :func:`for_each_range` but ``body(lo, hi)`` handles a whole interval.

    This is the form vectorized kernels use.  Prefetch hints for an interval
    cover ``[lo + d, hi + d)`` clipped to ``n``, one touch per cache line.
    """
    dispatch = resolve_dispatch(policy, chunk, n, ctx)
    containers = ctx.containers if ctx is not None else ()
    dist = dispatch.prefetch_elements
    if dist is not None and containers:
        sink = sink or TouchSink()
        elem_bytes = policy.element_bytes
        stride = max(1, CACHE_LINE_BYTES // elem_bytes)

        def run_interval(iv):
            lo, hi = iv
            start, stop = lo + dist, min(hi + dist, n)
            if start < stop:
                for c in containers:
                    sink.touch(c, start, stop, stride)
            body(lo, hi)
    else:
        def run_interval(iv):
            body(*iv)

    _run(dispatch, n, run_interval, pool)
    return dispatch
