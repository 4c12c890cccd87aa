"""多次随机试验的方法对比：均值 ± 标准差表格与逐频对数似然"""

from pathlib import Path
from typing import Optional, Union

import numpy as np
import structlog
from pydantic import BaseModel, Field

from ..audio import draw_mix_spec, gen_mixture, gen_synthetic_sources, select_sources
from ..config import ExperimentConfig
from ..errors import ConfigError
from ..models import GroundTruth, Method, SourceScores
from ..storage import reports
from ..visualization import plot_loglik_per_frequency
from .metrics import aggregate_scores

logger = structlog.get_logger()

MIX_ROW = "mix"


def make_mixture(
    config: ExperimentConfig,
    source_seed: int,
    mix_seed: int,
) -> tuple[np.ndarray, GroundTruth, list[str]]:
    """按配置生成一个混合信号：语料模式随机选文件，否则合成重尾源

    返回 (混合信号, 真值, 选中的文件列表)。
    """
    synthetic = config.synthetic
    chosen: list[str] = []
    if config.inputs:
        sources, chosen = select_sources(
            config.inputs, config.n_sources, source_seed, synthetic.duration, config.stft.sample_rate
        )
    else:
        sources = gen_synthetic_sources(
            config.n_sources,
            synthetic.duration,
            alpha_list=synthetic.alphas,
            seed=source_seed,
            sample_rate=config.stft.sample_rate,
            window_length=config.stft.window_length,
            hop=config.stft.hop,
            alpha_range=None if synthetic.alphas is not None else synthetic.alpha_range,
            envelope=synthetic.envelope,
        )
    mixture, truth = gen_mixture(list(sources), draw_mix_spec(config.n_sources, mix_seed))
    return mixture, truth, chosen


class TrialResult(BaseModel):
    """单次试验中各方法的分数与逐频对数似然"""
    trial: int
    seed: int
    scores: dict[str, list[SourceScores]] = Field(default_factory=dict)
    loglik: dict[str, list[float]] = Field(default_factory=dict)
    fallbacks: dict[str, int] = Field(default_factory=dict)


class BenchRow(BaseModel):
    """表格中的一行（单位 dB，缺失为 None）"""
    method: str
    sdr: tuple[Optional[float], Optional[float]]
    sir: tuple[Optional[float], Optional[float]]
    sar: tuple[Optional[float], Optional[float]]
    mer: tuple[Optional[float], Optional[float]]

    def to_csv_row(self) -> dict:
        row = {"method": self.method}
        for metric in ("sdr", "sir", "sar", "mer"):
            mean, std = getattr(self, metric)
            row[f"{metric}_mean"] = "" if mean is None else f"{mean:.4f}"
            row[f"{metric}_std"] = "" if std is None else f"{std:.4f}"
        return row


class BenchResult(BaseModel):
    """整个基准测试的结果"""
    n_trials: int
    n_sources: int
    rows: list[BenchRow]
    loglik: dict[str, list[float]] = Field(default_factory=dict)  # 各试验平均的逐频对数似然
    trials: list[TrialResult] = Field(default_factory=list)


class Benchmark:
    """按配置运行 n_trials 次试验，每次对所有方法分离同一个混合信号"""

    def __init__(self, config: ExperimentConfig, methods: Optional[list[Method]] = None):
        self.config = config
        self.methods = list(methods if methods is not None else config.bench.methods)
        if not self.methods:
            raise ConfigError("基准测试至少需要一个方法")
        if config.bench.n_trials < 1:
            raise ConfigError(f"试验次数必须为正: {config.bench.n_trials}")
        if config.n_sources < 2:
            raise ConfigError(f"混合至少需要两个源: {config.n_sources}")

    def _trial_seeds(self) -> list[tuple[int, int]]:
        """每次试验的 (源种子, 混合种子)"""
        children = np.random.SeedSequence(self.config.seed).spawn(self.config.bench.n_trials)
        return [tuple(int(v) for v in child.generate_state(2)) for child in children]

    def make_trial(self, source_seed: int, mix_seed: int) -> tuple[np.ndarray, GroundTruth]:
        """生成一次试验的混合信号与真值"""
        mixture, truth, _ = make_mixture(self.config, source_seed, mix_seed)
        return mixture, truth

    def run_trial(self, trial: int, source_seed: int, mix_seed: int) -> TrialResult:
        # 避免循环导入：分离流程依赖评估模块
        from ..separation import SeparationPipeline

        mixture, truth = self.make_trial(source_seed, mix_seed)
        result = TrialResult(trial=trial, seed=source_seed)
        trial_config = self.config.model_copy(update={"seed": mix_seed})
        for method in self.methods:
            outcome = SeparationPipeline(trial_config, method).run(mixture, truth)
            result.scores[method.value] = outcome.report.scores
            if MIX_ROW not in result.scores:
                result.scores[MIX_ROW] = outcome.report.baseline_scores
            if outcome.report.loglik_per_frequency:
                result.loglik[method.value] = outcome.report.loglik_per_frequency
            result.fallbacks[method.value] = len(outcome.report.fallback_frequencies)
        logger.info("bench_trial_done", trial=trial, methods=[m.value for m in self.methods])
        return result

    def run(self) -> BenchResult:
        trials = [
            self.run_trial(i, source_seed, mix_seed)
            for i, (source_seed, mix_seed) in enumerate(self._trial_seeds())
        ]
        row_names = [MIX_ROW] + [m.value for m in self.methods]
        rows = []
        for name in row_names:
            pooled = [score for t in trials for score in t.scores.get(name, [])]
            summary = aggregate_scores(pooled)
            rows.append(BenchRow(
                method=name,
                sdr=summary["sdr_db"],
                sir=summary["sir_db"],
                sar=summary["sar_db"],
                mer=summary["mer_db"],
            ))

        loglik = {}
        for method in self.methods:
            curves = [t.loglik[method.value] for t in trials if method.value in t.loglik]
            if curves:
                loglik[method.value] = np.mean(np.array(curves), axis=0).tolist()
        return BenchResult(
            n_trials=len(trials),
            n_sources=self.config.n_sources,
            rows=rows,
            loglik=loglik,
            trials=trials,
        )

    def write(self, result: BenchResult, output_dir: Union[str, Path]) -> list[Path]:
        """写出 table.csv、table.md、每个方法的逐频对数似然与对比图"""
        output_dir = Path(output_dir)
        written = [
            reports.write_csv([row.to_csv_row() for row in result.rows], output_dir / "table.csv"),
        ]
        table_rows = [
            {
                "method": row.method,
                "sdr": reports.format_cell(*row.sdr),
                "sir": reports.format_cell(*row.sir),
                "sar": reports.format_cell(*row.sar),
                "mer": reports.format_cell(*row.mer),
            }
            for row in result.rows
        ]
        written.append(reports.write_markdown_table(
            table_rows, output_dir / "table.md", "分离质量对比", result.n_trials, result.n_sources
        ))
        for method, curve in result.loglik.items():
            written.append(reports.write_loglik_csv(curve, output_dir / f"loglik_{method}.csv"))
        chart = plot_loglik_per_frequency(result.loglik, str(output_dir / "loglik.png"))
        if chart:
            written.append(Path(chart))
        written.append(reports.write_yaml(
            {"config": self.config.to_dict(), **result.model_dump(mode="json", exclude={"trials"})},
            output_dir / "bench.yaml",
        ))
        logger.info("bench_written", output_dir=str(output_dir), files=len(written))
        return written
