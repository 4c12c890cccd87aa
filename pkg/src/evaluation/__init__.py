"""分离质量评估与基准测试"""

from .metrics import (
    bss_decomposition,
    source_scores,
    sdr_sir,
    mer,
    mer_per_frequency,
    aggregate_scores,
)
from .bench import Benchmark, BenchResult, BenchRow, TrialResult, make_mixture

__all__ = [
    "bss_decomposition",
    "source_scores",
    "sdr_sir",
    "mer",
    "mer_per_frequency",
    "aggregate_scores",
    "Benchmark",
    "BenchResult",
    "BenchRow",
    "TrialResult",
    "make_mixture",
]
