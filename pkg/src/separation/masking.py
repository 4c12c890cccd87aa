"""二值掩码：逐频聚类、掩码应用、理想掩码与排列对齐"""

from itertools import permutations
from typing import Optional, Sequence

import numpy as np
import structlog

from ..errors import ConfigError, ShapeError
from ..estimators import component_log_scores
from ..models import FrequencyFit, MaskSet, Spectrogram

logger = structlog.get_logger()

# 穷举排列的上限（8! = 40320）
MAX_PERMUTATION_SOURCES = 8


def observations_for_fit(data: np.ndarray, fit: FrequencyFit) -> np.ndarray:
    """拟合所用的观测空间：Sawada 模式下为归一化观测（零向量保持为零，行数不变）"""
    if not fit.method.normalizes_observations:
        return data
    norms = np.linalg.norm(data, axis=1, keepdims=True)
    return data / np.where(norms > 0, norms, 1.0)


def cluster(spec: Spectrogram, fits: Sequence[FrequencyFit], n_sources: Optional[int] = None) -> MaskSet:
    """z(f, t) = argmax_k [log pi_k + log N_c(x(f,t); 0, c (a_k a_k* + sigma2_k I))]

    并列时取编号最小的成分（argmax 的默认行为）。
    """
    if len(fits) != spec.n_frequencies:
        raise ShapeError(f"拟合数 {len(fits)} 与频点数 {spec.n_frequencies} 不一致")
    K = n_sources or max(fit.theta.K for fit in fits)
    labels = np.zeros((spec.n_frequencies, spec.n_frames), dtype=np.int64)
    for fit in fits:
        if fit.theta.K > K:
            raise ShapeError(f"频点 {fit.f} 的成分数 {fit.theta.K} 超过源数 {K}")
        data = observations_for_fit(spec.frequency_data(fit.f), fit)
        scores = component_log_scores(data, fit.theta, fit.cov_scale)
        labels[fit.f] = np.argmax(scores, axis=1)
    return MaskSet(labels=labels, n_sources=K)


def apply_masks(spec: Spectrogram, masks: MaskSet) -> list[Spectrogram]:
    """y_k(f, t) = x(f, t) 若 z(f, t) = k，否则为 0

    每个时频点只复制到一个输出，其余输出为精确的 0，因此各估计之和逐位等于 x。
    """
    if masks.labels.shape != (spec.n_frequencies, spec.n_frames):
        raise ShapeError(
            f"掩码形状 {masks.labels.shape} 与频谱图 {(spec.n_frequencies, spec.n_frames)} 不一致"
        )
    estimates = []
    for k in range(masks.n_sources):
        values = np.where(masks.mask(k)[None, :, :], spec.values, 0)
        estimates.append(spec.with_values(values))
    return estimates


def _stack_values(spectrograms: Sequence[Spectrogram]) -> np.ndarray:
    return np.stack([s.values for s in spectrograms])  # (K, M, F, T)


def oracle_mask(truth: Sequence[Spectrogram]) -> MaskSet:
    """理想二值掩码：z(f, t) = argmax_k ||y_k(f, t)||^2"""
    if not truth:
        raise ConfigError("理想掩码需要真值")
    energy = np.sum(np.abs(_stack_values(truth)) ** 2, axis=1)  # (K, F, T)
    return MaskSet(labels=np.argmax(energy, axis=0), n_sources=len(truth))


def permutation_costs(estimates: Sequence[Spectrogram], truth: Sequence[Spectrogram]) -> np.ndarray:
    """C[f, k, j] = sum_{m,t} |y_hat_j(f, t) - y_k(f, t)|^2"""
    est = _stack_values(estimates)
    ref = _stack_values(truth)
    if est.shape[1:] != ref.shape[1:]:
        raise ShapeError(f"估计形状 {est.shape[1:]} 与真值形状 {ref.shape[1:]} 不一致")
    K = ref.shape[0]
    costs = np.empty((ref.shape[2], K, est.shape[0]))
    for k in range(K):
        for j in range(est.shape[0]):
            costs[:, k, j] = np.sum(np.abs(est[j] - ref[k]) ** 2, axis=(0, 2))
    return costs


def oracle_permute(
    estimates: Sequence[Spectrogram],
    truth: Sequence[Spectrogram],
) -> tuple[np.ndarray, list[Spectrogram]]:
    """逐频穷举排列，使估计与真值的总平方误差最小

    返回 (perms, 重排后的估计)；perms[f, k] 为分配给源 k 的估计编号。
    总误差相同时取字典序最小的排列。
    """
    K = len(truth)
    if len(estimates) != K:
        raise ShapeError(f"估计数 {len(estimates)} 与真值数 {K} 不一致")
    if K > MAX_PERMUTATION_SOURCES:
        raise ConfigError(f"源数 {K} 超过穷举排列上限 {MAX_PERMUTATION_SOURCES}")

    costs = permutation_costs(estimates, truth)
    candidates = np.array(list(permutations(range(K))))  # (K!, K)，字典序
    totals = costs[:, np.arange(K)[None, :], candidates].sum(axis=2)  # (F, K!)
    perms = candidates[np.argmin(totals, axis=1)]  # (F, K)

    est = _stack_values(estimates)
    frequencies = np.arange(est.shape[2])
    aligned = []
    for k in range(K):
        values = est[perms[:, k], :, frequencies, :]  # (F, M, T)
        aligned.append(estimates[0].with_values(np.transpose(values, (1, 0, 2))))
    logger.debug("oracle_permutation_done", n_sources=K, n_frequencies=len(frequencies))
    return perms, aligned


def aligned_steering(fits: Sequence[FrequencyFit], perms: np.ndarray) -> np.ndarray:
    """按排列重排拟合的导向矢量，形状 (K, F, M)；缺失成分为 NaN"""
    n_frequencies, K = perms.shape
    M = fits[0].theta.M
    steering = np.full((K, n_frequencies, M), np.nan, dtype=np.complex128)
    for fit in fits:
        for k in range(K):
            j = perms[fit.f, k]
            if j < fit.theta.K:
                steering[k, fit.f] = fit.theta.components[j].a
    return steering
