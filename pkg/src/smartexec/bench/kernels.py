"""Benchmark kernels: fused Stream, 2D Jacobi stencil and row-parallel matmul.

Each kernel is driven through :func:`smartexec.executor.for_each_chunk` with a
body that handles a whole interval of the parallel loop.  Every output element
is produced by the same arithmetic in the same order whatever the chunking,
so all executor configurations give bit-identical results.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Any, Callable

import numpy as np

from smartexec.executor import DefaultChunk, LoopContext, Seq, for_each_chunk
from smartexec.loopir import StaticFeatures, analyze_statement, parse_loop_spec

STREAM_SCALAR = 3.0


def checksum(*arrays: np.ndarray) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()[:16]


def loop_spec_text(name: str) -> str:
    """Source of a shipped ``.loop`` file (``stream`` or ``stencil``)."""
    return resources.files("smartexec.bench").joinpath("specs", f"{name}.loop").read_text("utf-8")


def matmul_loop_spec(k: int, p: int) -> str:
    """Loop spec for one row of ``C = A @ B`` with ``A`` m x k and ``B`` k x p."""
    return (
        "# one parallel iteration per row i of C\n"
        "loop N {\n"
        "    fvar a; fvar b; fvar c; fvar s;\n"
        f"    loop {p} {{\n"
        "        fassign s = 0.0;\n"
        f"        loop {k} {{\n"
        "            fassign s = s + a[kk] * b[kk];\n"
        "        }\n"
        "        fassign c[j] = s;\n"
        "    }\n"
        "}\n"
    )


@lru_cache(maxsize=None)
def _features_of(text: str) -> StaticFeatures:
    return analyze_statement(parse_loop_spec(text))


# --------------------------------------------------------------------------
# Plain kernels

def kernel_stream(a, b, c, k: float = STREAM_SCALAR, policy=Seq(), chunk=DefaultChunk(),
                  ctx: LoopContext | None = None, **kw):
    """One fused pass: c = a; b = k*c; c = a + b; a = b + k*c, per index, in place."""
    n = len(a)

    def body(lo, hi):
        s = slice(lo, hi)
        c[s] = a[s]
        np.multiply(k, c[s], out=b[s])
        np.add(a[s], b[s], out=c[s])
        np.add(b[s], k * c[s], out=a[s])

    for_each_chunk(policy, chunk, n, body, ctx, **kw)
    return a, b, c


def stencil_sweep(old, new, policy=Seq(), chunk=DefaultChunk(), ctx=None, **kw):
    """One Jacobi sweep from ``old`` into ``new``; the loop runs over interior rows."""
    H = old.shape[0]

    def body(lo, hi):
        for r in range(lo + 1, hi + 1):
            acc = old[r, 1:-1] + old[r - 1, 1:-1]
            acc += old[r + 1, 1:-1]
            acc += old[r, :-2]
            acc += old[r, 2:]
            np.divide(acc, 5.0, out=new[r, 1:-1])

    for_each_chunk(policy, chunk, H - 2, body, ctx, **kw)


def kernel_stencil2d(grid, sweeps: int, policy=Seq(), chunk=DefaultChunk(), ctx=None, **kw):
    """Run ``sweeps`` double-buffered five-point updates; boundary values stay fixed."""
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 2 or min(grid.shape) < 3:
        raise ValueError("stencil grid must be at least 3 x 3")
    old, new = grid.copy(), grid.copy()
    for _ in range(sweeps):
        stencil_sweep(old, new, policy, chunk, ctx, **kw)
        old, new = new, old
    return old


def kernel_matmul(A, B, policy=Seq(), chunk=DefaultChunk(), ctx=None, out=None, **kw):
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.shape[1] != B.shape[0]:
        raise ValueError(f"shape mismatch {A.shape} x {B.shape}")
    C = np.empty((A.shape[0], B.shape[1])) if out is None else out

    def body(lo, hi):
        for i in range(lo, hi):
            np.dot(A[i], B, out=C[i])

    for_each_chunk(policy, chunk, A.shape[0], body, ctx, **kw)
    return C


# --------------------------------------------------------------------------
# Harness view of the kernels

@dataclass
class Problem:
    """Initial data for one kernel instance; runs work on copies made by ``prepare``."""

    n: int                       # parallel-loop trip count
    inputs: dict[str, np.ndarray]
    params: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class KernelSpec:
    name: str
    element_bytes: Callable[[int], int]
    spec_text: Callable[[int], str]
    make: Callable[[int, int], Problem]
    prepare: Callable[[Problem], dict]
    execute: Callable[..., list]
    sizes: tuple[int, ...]
    eval_size: int

    def static_features(self, size: int) -> StaticFeatures:
        return _features_of(self.spec_text(size))


def _stream_make(size: int, seed: int) -> Problem:
    rng = np.random.default_rng(seed)
    return Problem(size, {"a": rng.random(size), "b": np.zeros(size), "c": np.zeros(size)},
                   {"k": STREAM_SCALAR})


def _stream_execute(prob, st, policy, chunk, ctx_for, **kw):
    a, b, c = st["a"], st["b"], st["c"]
    kernel_stream(a, b, c, prob.params["k"], policy, chunk, ctx_for([a, b, c]), **kw)
    return [a, b, c]


def _stencil_make(size: int, seed: int) -> Problem:
    # size = number of interior rows; the width matches the 100-column spec.
    rng = np.random.default_rng(seed)
    grid = rng.random((size + 2, 102))
    grid[0, :] = 1.0
    grid[-1, :] = 0.0
    return Problem(size, {"grid": grid}, {"sweeps": 10})


def _stencil_prepare(prob):
    return {"old": prob.inputs["grid"].copy(), "new": prob.inputs["grid"].copy()}


def _stencil_execute(prob, st, policy, chunk, ctx_for, **kw):
    old, new = st["old"], st["new"]
    for _ in range(prob.params["sweeps"]):
        stencil_sweep(old, new, policy, chunk, ctx_for([old, new]), **kw)
        old, new = new, old
    return [old]


def _matmul_make(size: int, seed: int) -> Problem:
    rng = np.random.default_rng(seed)
    return Problem(size, {"A": rng.random((size, size)), "B": rng.random((size, size))})


def _matmul_execute(prob, st, policy, chunk, ctx_for, **kw):
    A, B, C = prob.inputs["A"], prob.inputs["B"], st["C"]
    kernel_matmul(A, B, policy, chunk, ctx_for([A, C]), out=C, **kw)
    return [C]


def _copy_inputs(prob):
    return {k: v.copy() for k, v in prob.inputs.items()}


KERNELS: dict[str, KernelSpec] = {
    "stream": KernelSpec(
        "stream", element_bytes=lambda size: 8,
        spec_text=lambda size: loop_spec_text("stream"),
        make=_stream_make, prepare=_copy_inputs, execute=_stream_execute,
        sizes=(1_000, 2_000, 5_000, 10_000, 20_000, 50_000, 100_000, 200_000,
               300_000, 500_000, 700_000, 1_000_000, 1_500_000),
        eval_size=1_000_000,
    ),
    "stencil": KernelSpec(
        "stencil", element_bytes=lambda size: 102 * 8,
        spec_text=lambda size: loop_spec_text("stencil"),
        make=_stencil_make, prepare=_stencil_prepare, execute=_stencil_execute,
        sizes=(8, 16, 24, 32, 45, 64, 96, 128, 160, 192, 256, 320, 384),
        eval_size=45,
    ),
    "matmul": KernelSpec(
        "matmul", element_bytes=lambda size: 8 * size,
        spec_text=lambda size: matmul_loop_spec(size, size),
        make=_matmul_make, prepare=lambda prob: {"C": np.empty((prob.n, prob.n))},
        execute=_matmul_execute,
        sizes=(16, 24, 32, 48, 64, 96, 128, 160, 192, 224, 256, 320, 384),
        eval_size=256,
    ),
}
