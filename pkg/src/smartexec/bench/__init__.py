from smartexec.bench.harness import (
    ADAPTIVE, CANDIDATES, DIMENSIONS, ChecksumMismatch, FakeClock, Grid, Measurement,
    ReportRow, SweepResult, WallClock, adaptive_regret, default_grid, evaluate,
    format_report, generate_training_data, small_grid, measure_configs, winning_labels,
    write_report_csv,
)
from smartexec.bench.kernels import (
    KERNELS, KernelSpec, checksum, kernel_matmul, kernel_stencil2d, kernel_stream,
    loop_spec_text, matmul_loop_spec,
)

__all__ = [
    "ADAPTIVE", "CANDIDATES", "DIMENSIONS", "ChecksumMismatch", "FakeClock", "Grid",
    "Measurement", "ReportRow", "SweepResult", "WallClock", "adaptive_regret",
    "default_grid", "evaluate", "format_report", "generate_training_data",
    "measure_configs", "small_grid", "winning_labels", "write_report_csv",
    "KERNELS", "KernelSpec", "checksum", "kernel_matmul", "kernel_stencil2d",
    "kernel_stream", "loop_spec_text", "matmul_loop_spec",
]
