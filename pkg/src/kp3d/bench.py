"""FLOP accounting and wall-time comparison of dense per-pixel regression vs
sparse top-K gather-and-regress.

FLOPs count one multiply plus one add as 2 operations. Timings use a monotonic
clock and run single-threaded by contract; the sparse path is only timed after
it has been shown to produce the same values as dense-then-gather.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BenchConfig:
    height: int = 384
    width: int = 1280
    channels: int = 64  # D
    outputs: int = 8  # R
    k: int = 100
    repetitions: int = 30
    warmup: int = 5
    seed: int = 0

    def __post_init__(self):
        if min(self.height, self.width, self.channels, self.outputs) < 1 or self.k < 0:
            raise ValueError("dimensions must be positive (k may be zero)")
        if self.repetitions < 10:
            raise ValueError("repetitions must be >= 10")


@dataclass(frozen=True)
class BenchReport:
    flops_dense: int
    flops_sparse: int
    flop_ratio: float
    gather_touches: int
    dense_times: tuple[float, float, float]  # p10, median, p90 seconds
    sparse_times: tuple[float, float, float]
    speedup: float


def flops_dense(cfg: BenchConfig) -> int:
    """1x1 convolution over the full quarter-resolution regression map."""
    return 2 * (cfg.height // 4) * (cfg.width // 4) * cfg.channels * cfg.outputs


def flops_sparse(cfg: BenchConfig) -> int:
    """Linear head over the K x 3D embedding; the gather itself is memory
    traffic, reported separately as K * 3D touches."""
    return 2 * cfg.k * 3 * cfg.channels * cfg.outputs


def gather_touches(cfg: BenchConfig) -> int:
    return cfg.k * 3 * cfg.channels


def _percentiles(samples: list[float]) -> tuple[float, float, float]:
    p10, p50, p90 = np.percentile(samples, [10, 50, 90])
    return float(p10), float(p50), float(p90)


def _time_repeated(fn, warmup: int, repetitions: int) -> list[float]:
    for _ in range(warmup):
        fn()
    samples = []
    for _ in range(repetitions):
        start = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - start)
    return samples


def time_compare(cfg: BenchConfig = BenchConfig(), assert_speedup: float | None = None) -> BenchReport:
    """Measure dense vs sparse regression wall time on random data.

    Raises if the two paths disagree at the gathered indices (correctness gate)
    or, when `assert_speedup` is set, if the measured sparse speedup at the
    median falls below it.
    """
    rng = np.random.default_rng(cfg.seed)
    h4, w4 = cfg.height // 4, cfg.width // 4
    dense_features = rng.normal(size=(h4 * w4, cfg.channels))
    embedding = rng.normal(size=(cfg.k, 3 * cfg.channels))
    head_dense = rng.normal(size=(cfg.channels, cfg.outputs))
    head_sparse = rng.normal(size=(3 * cfg.channels, cfg.outputs))
    bias = rng.normal(size=cfg.outputs)

    # correctness gate: sparse single-scale gather-then-regress must equal
    # dense-then-gather at the same indices
    idx = rng.integers(0, h4 * w4, size=max(cfg.k, 1))
    gate_dense = (dense_features @ head_dense + bias)[idx]
    gate_sparse = dense_features[idx] @ head_dense + bias
    if not np.allclose(gate_dense, gate_sparse, rtol=0.0, atol=1e-12):
        raise RuntimeError("correctness gate failed: sparse and dense paths disagree")

    dense_samples = _time_repeated(
        lambda: dense_features @ head_dense + bias, cfg.warmup, cfg.repetitions
    )
    sparse_samples = _time_repeated(
        lambda: embedding @ head_sparse + bias, cfg.warmup, cfg.repetitions
    )
    dense_p = _percentiles(dense_samples)
    sparse_p = _percentiles(sparse_samples)
    speedup = dense_p[1] / sparse_p[1] if sparse_p[1] > 0 else float("inf")
    fd, fs = flops_dense(cfg), flops_sparse(cfg)
    report = BenchReport(
        flops_dense=fd,
        flops_sparse=fs,
        flop_ratio=fd / fs if fs else float("inf"),
        gather_touches=gather_touches(cfg),
        dense_times=dense_p,
        sparse_times=sparse_p,
        speedup=speedup,
    )
    if assert_speedup is not None and speedup < assert_speedup:
        raise RuntimeError(
            f"measured speedup {speedup:.2f}x below required {assert_speedup:.2f}x"
        )
    return report


def report_csv(cfg: BenchConfig, report: BenchReport) -> str:
    header = (
        "H,W,D,R,K,flops_dense,flops_sparse,flop_ratio,"
        "dense_p10,dense_median,dense_p90,sparse_p10,sparse_median,sparse_p90,speedup"
    )
    row = (
        f"{cfg.height},{cfg.width},{cfg.channels},{cfg.outputs},{cfg.k},"
        f"{report.flops_dense},{report.flops_sparse},{report.flop_ratio:.6g},"
        f"{report.dense_times[0]:.3e},{report.dense_times[1]:.3e},{report.dense_times[2]:.3e},"
        f"{report.sparse_times[0]:.3e},{report.sparse_times[1]:.3e},{report.sparse_times[2]:.3e},"
        f"{report.speedup:.3f}"
    )
    return header + "\n" + row + "\n"


def report_summary(cfg: BenchConfig, report: BenchReport) -> str:
    return (
        f"dense 1x1 regression: {report.flops_dense:,} FLOPs, "
        f"median {report.dense_times[1] * 1e3:.3f} ms\n"
        f"sparse top-{cfg.k} regression: {report.flops_sparse:,} FLOPs "
        f"(+{report.gather_touches:,} gather touches), "
        f"median {report.sparse_times[1] * 1e3:.3f} ms\n"
        f"flop ratio {report.flop_ratio:.1f}x, measured speedup {report.speedup:.1f}x\n"
    )
