"""逐频拟合 -> 聚类 -> 掩码 -> 合成 -> 评估的分离流程"""

import asyncio
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field

from ..audio import istft, load_wav, stft, write_wav
from ..config import ExperimentConfig
from ..errors import ConfigError, DataError, NumericalError, SeparationError
from ..estimators import clompr_fit, compute_sketch, default_n_frequencies, draw_frequencies, em_fit
from ..estimators.em import VARIANCE_FLOOR_RATIO, per_frequency_loglik, ppca_update
from ..evaluation.metrics import mer, source_scores
from ..models import (
    ComponentParams,
    FrequencyFit,
    GroundTruth,
    MaskSet,
    Method,
    MixtureParams,
    SeparationReport,
    SourceScores,
    Spectrogram,
)
from ..storage import reports
from .masking import aligned_steering, apply_masks, cluster, observations_for_fit, oracle_mask, oracle_permute

logger = structlog.get_logger()


class SeparationOutcome(BaseModel):
    """一次分离的全部产物"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    estimates: np.ndarray  # (K, M, N) 时域源图像估计
    masks: MaskSet
    fits: list[FrequencyFit] = Field(default_factory=list)
    perms: Optional[np.ndarray] = None  # (F, K)
    report: SeparationReport


def _fallback_theta(data: np.ndarray) -> MixtureParams:
    """单成分高斯拟合（主导特征向量 + 残差方差）"""
    M = data.shape[1]
    if data.shape[0] and np.any(data):
        scatter = data.T @ data.conj() / data.shape[0]
        trace = float(np.real(np.trace(scatter)))
        a, sigma2 = ppca_update(scatter, max(VARIANCE_FLOOR_RATIO * trace / M, np.finfo(float).tiny))
        if np.linalg.norm(a) > 0:
            return MixtureParams(components=[ComponentParams(a=a, alpha=2.0, sigma2=sigma2, pi=1.0)])
    a = np.zeros(M, dtype=np.complex128)
    a[0] = 1.0
    return MixtureParams(components=[ComponentParams(a=a, alpha=2.0, sigma2=1.0, pi=1.0)])


def frequency_seeds(seed: int, n_frequencies: int) -> list[int]:
    """每个频点独立的子种子，与调度顺序无关"""
    children = np.random.SeedSequence(seed).spawn(n_frequencies)
    return [int(child.generate_state(1)[0]) for child in children]


class SeparationPipeline:
    """按配置的方法对一个混合信号做逐频聚类分离"""

    def __init__(self, config: ExperimentConfig, method: Optional[Method] = None):
        self.config = config
        self.method = Method(method or config.method)
        self.n_sources = config.n_sources

    def fit_frequency(self, data: np.ndarray, f: int, seed: int) -> FrequencyFit:
        """拟合单个频点；失败时抛出异常"""
        method = self.method
        if method in (Method.EM, Method.SAWADA):
            result = em_fit(data, self.config.em_options(seed, normalize_observations=method is Method.SAWADA))
            return FrequencyFit(f=f, theta=result.theta, method=method, cov_scale=method.cov_scale)

        if method.uses_sketch:
            J = self.config.sketch.n_frequencies or default_n_frequencies(self.n_sources, data.shape[1])
            design = draw_frequencies(data, J, seed, self.config.sketch.subsample_size)
            sketch = compute_sketch(data, design)
            result = clompr_fit(sketch, design, self.config.fit_options(seed, alpha_locked=method is Method.CF_GMM))
            return FrequencyFit(
                f=f,
                theta=result.theta,
                method=method,
                cov_scale=method.cov_scale,
                objective=result.objective,
            )

        raise ConfigError(f"方法 {method.value} 不做逐频拟合")

    def _fit_or_fallback(self, data: np.ndarray, f: int, seed: int) -> FrequencyFit:
        try:
            fit = self.fit_frequency(data, f, seed)
        except (DataError, NumericalError, ValueError, np.linalg.LinAlgError) as e:
            logger.warning("frequency_fit_failed", f=f, method=self.method.value, error=str(e))
            fit = FrequencyFit(
                f=f,
                theta=_fallback_theta(data),
                method=self.method,
                cov_scale=self.method.cov_scale,
                fallback=True,
                error=str(e),
            )
        loglik = per_frequency_loglik(observations_for_fit(data, fit), fit.theta, fit.cov_scale)
        return fit.model_copy(update={"loglik": loglik})

    async def fit_all_frequencies_async(self, spec: Spectrogram) -> list[FrequencyFit]:
        """并发拟合所有频点，最多 workers 个同时运行"""
        seeds = frequency_seeds(self.config.seed, spec.n_frequencies)
        semaphore = asyncio.Semaphore(self.config.workers)

        async def fit_one(f: int) -> FrequencyFit:
            async with semaphore:
                return await asyncio.to_thread(self._fit_or_fallback, spec.frequency_data(f), f, seeds[f])

        tasks = [fit_one(f) for f in range(spec.n_frequencies)]
        return list(await asyncio.gather(*tasks))

    def fit_all_frequencies(self, spec: Spectrogram) -> list[FrequencyFit]:
        """对每个频点独立拟合混合模型"""
        if not self.method.is_blind:
            raise ConfigError("理想掩码方法不做逐频拟合")
        if not np.any(spec.values):
            raise DataError("数据尺度退化 (degenerate data scale)")

        if self.config.workers <= 1:
            seeds = frequency_seeds(self.config.seed, spec.n_frequencies)
            fits = [self._fit_or_fallback(spec.frequency_data(f), f, seeds[f]) for f in range(spec.n_frequencies)]
        else:
            fits = asyncio.run(self.fit_all_frequencies_async(spec))

        fallbacks = [fit.f for fit in fits if fit.fallback]
        logger.info(
            "frequency_fits_done",
            method=self.method.value,
            n_frequencies=len(fits),
            fallbacks=len(fallbacks),
        )
        return fits

    def _stft(self, signal: np.ndarray) -> Spectrogram:
        settings = self.config.stft
        return stft(signal, settings.window_length, settings.hop, settings.sample_rate)

    def _score(
        self,
        estimates: np.ndarray,
        truth: GroundTruth,
        fits: Sequence[FrequencyFit],
        perms: Optional[np.ndarray],
    ) -> list[SourceScores]:
        filter_length = self.config.metrics.filter_length
        steering_hat = steering_true = None
        if fits and perms is not None and truth.spec is not None:
            steering_hat = aligned_steering(fits, perms)
            steering_true = truth.steering_vectors(self.config.stft.window_length)

        scores = []
        for k in range(truth.n_sources):
            score = source_scores(estimates[k], truth.images, k, filter_length)
            if steering_hat is not None:
                value = mer(steering_hat[k], steering_true[k])
                score = score.model_copy(update={"mer_db": value if np.isfinite(value) else None})
            scores.append(score)
        return scores

    def baseline_scores(self, mixture: np.ndarray, truth: GroundTruth) -> list[SourceScores]:
        """直接把混合信号当作每个源的估计"""
        filter_length = self.config.metrics.filter_length
        return [source_scores(mixture, truth.images, k, filter_length) for k in range(truth.n_sources)]

    def run(self, mixture: np.ndarray, truth: Optional[GroundTruth] = None) -> SeparationOutcome:
        """分离一个 (M, N) 混合信号；提供真值时做排列对齐与评估"""
        mixture = np.atleast_2d(np.asarray(mixture, dtype=np.float64))
        if truth is not None and truth.n_sources != self.n_sources:
            raise ConfigError(f"真值源数 {truth.n_sources} 与 n_sources {self.n_sources} 不一致")
        spec = self._stft(mixture)

        fits: list[FrequencyFit] = []
        truth_specs = [self._stft(image) for image in truth.images] if truth is not None else None
        if self.method is Method.ORACLE:
            if truth_specs is None:
                raise ConfigError("oracle 方法需要提供真值")
            masks = oracle_mask(truth_specs)
        else:
            fits = self.fit_all_frequencies(spec)
            masks = cluster(spec, fits, self.n_sources)

        masked = apply_masks(spec, masks)
        if not np.array_equal(sum(m.values for m in masked), spec.values):
            raise NumericalError("掩码输出之和不等于混合频谱")

        perms = None
        if truth_specs is not None and self.method.is_blind:
            perms, masked = oracle_permute(masked, truth_specs)
        estimates = np.stack([istft(m) for m in masked])

        report = SeparationReport(
            method=self.method.value,
            n_sources=self.n_sources,
            loglik_per_frequency=[fit.loglik for fit in fits],
            fallback_frequencies=[fit.f for fit in fits if fit.fallback],
            fits=[fit.to_dict() for fit in fits],
            config=self.config.to_dict(),
        )
        if truth is not None:
            report = report.model_copy(update={
                "scores": self._score(estimates, truth, fits, perms),
                "baseline_scores": self.baseline_scores(mixture, truth),
            })
        logger.info("separation_done", method=self.method.value, n_sources=self.n_sources)
        return SeparationOutcome(estimates=estimates, masks=masks, fits=fits, perms=perms, report=report)

    def separate(
        self,
        mixture_path: Union[str, Path],
        output_dir: Union[str, Path],
        truth_dir: Optional[Union[str, Path]] = None,
    ) -> SeparationReport:
        """读取混合 WAV，写出估计的源图像与报告；失败时不留下部分输出"""
        mixture, rate = load_wav(mixture_path)
        if rate != self.config.stft.sample_rate:
            raise DataError(f"采样率 {rate} Hz 与配置 {self.config.stft.sample_rate} Hz 不一致")
        truth = reports.load_truth(truth_dir, self.n_sources, rate) if truth_dir is not None else None

        outcome = self.run(mixture, truth)
        output_dir = Path(output_dir)
        written: list[Path] = []
        try:
            for k, estimate in enumerate(outcome.estimates, start=1):
                written.append(write_wav(output_dir / f"estimate_{k}.wav", estimate, rate))
            report = outcome.report.model_copy(update={"outputs": [p.name for p in written]})
            written.append(reports.save_report(report, output_dir / "report.yaml"))
        except (OSError, SeparationError):
            for path in written:
                path.unlink(missing_ok=True)
            raise
        return report


def fit_all_frequencies(spec: Spectrogram, method: Method, config: ExperimentConfig) -> list[FrequencyFit]:
    """对频谱图的每个频点拟合混合模型"""
    return SeparationPipeline(config, method).fit_all_frequencies(spec)


def separate(
    mixture_path: Union[str, Path],
    config: ExperimentConfig,
    truth_dir: Optional[Union[str, Path]] = None,
    output_dir: Optional[Union[str, Path]] = None,
) -> SeparationReport:
    """按配置的方法分离一个混合 WAV 文件"""
    pipeline = SeparationPipeline(config)
    return pipeline.separate(mixture_path, output_dir or config.output_dir, truth_dir)
