import numpy as np
import pytest

from _fakeclock import FAKE_SIZES, FAKE_THREADS, winner, write_fake_clock
from smartexec.bench import (
    ADAPTIVE, KERNELS, FakeClock, Grid, adaptive_regret, checksum, evaluate, format_report,
    generate_training_data, kernel_matmul, kernel_stencil2d, kernel_stream, measure_configs,
    write_report_csv,
)
from smartexec.bench.harness import (
    ChecksumMismatch, Config, Measurement, default_grid, fixed_configs, winning_labels,
)
from smartexec.executor import DefaultChunk, LoopContext, Par, Seq, StaticChunk
from smartexec.learning import load_weights, zero_bundle


# -- kernels ---------------------------------------------------------------

def test_stream_single_element_hand_trace():
    a, b, c = kernel_stream(np.array([1.0]), np.zeros(1), np.zeros(1), k=2.0)
    assert (a[0], b[0], c[0]) == (8.0, 2.0, 3.0)


def test_stream_zero_stays_zero():
    a, b, c = kernel_stream(np.zeros(50), np.zeros(50), np.zeros(50), k=7.0, policy=Par(3))
    assert not a.any() and not b.any() and not c.any()


def test_stencil_center_update():
    g = np.zeros((3, 3))
    g[1, 1] = 5.0
    assert kernel_stencil2d(g, 1)[1, 1] == 1.0


def test_stencil_uniform_fixed_point():
    g = np.full((12, 9), 3.25)
    np.testing.assert_array_equal(kernel_stencil2d(g, 7, Par(4), StaticChunk(2)), g)


def test_stencil_rejects_small_grid():
    with pytest.raises(ValueError):
        kernel_stencil2d(np.zeros((2, 5)), 1)


def test_matmul_hand_and_identity():
    A = np.array([[1.0, 2.0], [3.0, 4.0]])
    B = np.array([[5.0, 6.0], [7.0, 8.0]])
    np.testing.assert_array_equal(kernel_matmul(A, B), [[19, 22], [43, 50]])
    M = np.random.default_rng(0).random((5, 5))
    np.testing.assert_array_equal(kernel_matmul(np.eye(5), M, Par(2), StaticChunk(2)), M)
    with pytest.raises(ValueError):
        kernel_matmul(np.ones((2, 3)), np.ones((2, 3)))


@pytest.mark.parametrize("name, size", [("stream", 10_000), ("stencil", 30), ("matmul", 40)])
def test_parallel_matches_sequential_checksum(name, size):
    k = KERNELS[name]
    prob = k.make(size, 42)
    ctx = lambda c: LoopContext(k.static_features(size), 4, c)
    ref = checksum(*k.execute(prob, k.prepare(prob), Seq(), DefaultChunk(), ctx))
    for cfg in fixed_configs(k, size, 4):
        assert checksum(*k.execute(prob, k.prepare(prob), cfg.policy, cfg.chunk, ctx)) == ref


def test_kernel_static_features():
    assert KERNELS["stream"].static_features(10).total_ops == 8
    assert KERNELS["stencil"].static_features(45).comparison_ops == 301
    assert KERNELS["matmul"].static_features(4).deepest_loop_level == 2


# -- measurement and labels ------------------------------------------------

def test_measurements_need_five_reps():
    with pytest.raises(ValueError):
        measure_configs(KERNELS["stream"], 100, 1, [], reps=4)


def test_checksum_mismatch_detected():
    k = KERNELS["stream"]
    bad = Config("policy", "par", Par(2), DefaultChunk())
    broken = k.__class__(**{**k.__dict__, "execute": _corrupting_execute(k.execute)})
    with pytest.raises(ChecksumMismatch):
        measure_configs(broken, 100, 2, [bad])


def _corrupting_execute(execute):
    def run(prob, st, policy, chunk, ctx_for, **kw):
        out = execute(prob, st, policy, chunk, ctx_for, **kw)
        if not isinstance(policy, Seq):
            out[0][0] += 1.0
        return out
    return run


def test_winning_labels_argmin_with_ties():
    ms = [Measurement("k", "policy", "seq", 1, 10, 2.0, 5, "x"),
          Measurement("k", "policy", "par", 1, 10, 1.0, 5, "x"),
          Measurement("k", "chunk", "0.001", 1, 10, 1.0, 5, "x"),
          Measurement("k", "chunk", "0.01", 1, 10, 1.0, 5, "x"),
          Measurement("k", "chunk", ADAPTIVE, 1, 10, 0.1, 5, "x")]
    assert winning_labels(ms) == {"policy": "par", "chunk": "0.001"}


def test_median_is_order_invariant():
    clock = FakeClock([(("*",) * 5, 1.0)])
    samples = iter([3.0, 1.0, 2.0, 5.0, 4.0])
    clock.time = lambda fn, key: next(samples)
    ms = measure_configs(KERNELS["stream"], 100, 1, fixed_configs(KERNELS["stream"], 100, 1, ("policy",))[:1],
                         clock=clock)
    assert ms[0].median_s == 3.0


def test_fake_clock_rules(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("kernel,dimension,config,threads,size,seconds\n"
                 "stream,policy,seq,*,*,2\n# comment\nstream,policy,*,*,*,1\n")
    clock = FakeClock.from_csv(p)
    assert clock.lookup(("stream", "policy", "seq", 4, 100)) == 2.0
    assert clock.lookup(("stream", "policy", "par", 4, 100)) == 1.0
    with pytest.raises(KeyError):
        clock.lookup(("matmul", "policy", "par", 4, 100))
    p.write_text("kernel,dimension,config,threads,size,seconds\nstream,policy,seq,*,*,0\n")
    with pytest.raises(ValueError):
        FakeClock.from_csv(p)
    p.write_text("bad header\n")
    with pytest.raises(ValueError):
        FakeClock.from_csv(p)


def _fake_grid():
    return Grid(tuple(FAKE_SIZES), dict(FAKE_SIZES), FAKE_THREADS)


def test_fake_clock_labels_match_injected_argmin(tmp_path):
    clock = FakeClock.from_csv(write_fake_clock(tmp_path / "clock.csv"))
    datasets, results = generate_training_data(_fake_grid(), clock=clock, out_dir=tmp_path)
    assert len(results) == len(_fake_grid()) == 36
    for res in results:
        idx = FAKE_SIZES[res.kernel].index(res.n)
        for dim in ("policy", "chunk", "prefetch"):
            assert res.labels[dim] == winner(dim, idx, res.threads)
    for dim, data in datasets.items():
        assert len(data) == 36 and len(set(data.y)) == data.n_classes
    assert sorted(p.name for p in tmp_path.glob("*.csv")) == \
        ["chunk.csv", "clock.csv", "policy.csv", "prefetch.csv"]


def test_generate_rejects_bad_kernels():
    with pytest.raises(ValueError):
        generate_training_data(Grid((), {}, (1,)))
    with pytest.raises(ValueError):
        generate_training_data(Grid(("nope",), {"nope": (1,)}, (1,)))


def test_default_grid_has_300_plus_rows():
    grid = default_grid()
    assert len(grid) >= 300
    assert len(list(grid.cells())) == len(grid)
    for k in grid.kernels:
        assert KERNELS[k].eval_size in grid.sizes[k]


def test_single_label_dataset_warns(tmp_path, caplog):
    clock = FakeClock([(("*", "*", "seq", "*", "*"), 1.0), (("*",) * 5, 2.0)])
    grid = Grid(("stream",), {"stream": (100, 200)}, (1,))
    generate_training_data(grid, clock=clock)
    assert "single label" in caplog.text


# -- evaluation ------------------------------------------------------------

def test_evaluate_with_fake_clock(tmp_path):
    clock = FakeClock.from_csv(write_fake_clock(tmp_path / "clock.csv"))
    bundle = zero_bundle()   # predicts seq, 0.001, 1
    rows = evaluate(bundle, ["stream"], 8, {"stream": 100000}, clock=clock)
    assert len(rows) == (2 + 1) + (4 + 1) + (5 + 1)
    by = {(r.dimension, r.config): r for r in rows}
    assert by[("policy", ADAPTIVE)].predicted == "seq"
    assert by[("policy", ADAPTIVE)].median_s == by[("policy", "seq")].median_s
    # chunk winner at size index 2 with 8 threads is 0.50, three classes from the prediction
    assert by[("chunk", "0.50")].speedup_vs_adaptive == pytest.approx(1.0 / 1.3)
    regret = adaptive_regret(rows)
    assert regret[("stream", "chunk")] == pytest.approx(1.3)
    out = tmp_path / "report.csv"
    write_report_csv(rows, out)
    lines = out.read_text().splitlines()
    assert lines[0] == "kernel,dimension,config,median_s,speedup_vs_adaptive"
    assert "stream,policy,adaptive:seq,0.0011,1.000000" in lines
    assert "adaptive:0.001" in format_report(rows)


def test_evaluate_single_dimension():
    clock = FakeClock([(("*",) * 5, 1.0)])
    rows = evaluate(zero_bundle(), ["matmul"], 2, {"matmul": 16}, ("chunk",), clock=clock)
    assert [r.config for r in rows] == ["0.001", "0.01", "0.10", "0.50", ADAPTIVE]


def test_adaptive_equals_best_when_prediction_right(tmp_path):
    # a bundle whose chunk model always picks class "0.01"
    from smartexec.learning import MultinomialModel, WeightsBundle
    b = zero_bundle()
    W = np.zeros((4, 7))
    W[1, 0] = 5.0
    chunk = MultinomialModel(W, b.chunk_model.class_names, b.normalizer)
    bundle = WeightsBundle(b.policy_model, chunk, b.prefetch_model)
    clock = FakeClock([(("*", "chunk", "0.01", "*", "*"), 1.0), (("*",) * 5, 2.0)])
    rows = evaluate(bundle, ["stream"], 4, {"stream": 1000}, ("chunk",), clock=clock)
    regret = adaptive_regret(rows)
    assert regret[("stream", "chunk")] == 1.0
