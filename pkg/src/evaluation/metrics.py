"""分离质量评估：SDR / SIR / SAR（投影分解）与导向矢量的 MER"""

from typing import Optional, Sequence

import numpy as np
import structlog
from scipy import fft, linalg
from scipy.signal import fftconvolve

from ..errors import ShapeError
from ..models import SourceScores

logger = structlog.get_logger()

DB_CAP = 100.0
DEFAULT_FILTER_LENGTH = 32


def _safe_db(numerator: float, denominator: float) -> float:
    """10 log10(num / den)，截断到 ±100 dB"""
    if denominator <= numerator * 1e-10:
        return DB_CAP
    if numerator <= denominator * 1e-10:
        return -DB_CAP
    return float(np.clip(10.0 * np.log10(numerator / denominator), -DB_CAP, DB_CAP))


def _solve(gram: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Gram 方程组；奇异时改用岭回归（1e-10 trace）"""
    try:
        return linalg.solve(gram, rhs, assume_a="pos")
    except linalg.LinAlgError:
        ridge = 1e-10 * np.trace(gram)
        logger.debug("projection_gram_singular", ridge=ridge)
        return linalg.solve(gram + ridge * np.eye(gram.shape[0]), rhs, assume_a="sym")


def _project(references: np.ndarray, target: np.ndarray, filter_length: int) -> np.ndarray:
    """把 target 投影到所有参考信号的 filter_length 个时移张成的子空间

    references: (R, N)；target: (N,)；返回长度 N + L - 1 的投影。
    Gram 矩阵由 FFT 互相关得到。
    """
    n_refs, length = references.shape
    L = filter_length
    n_fft = fft.next_fast_len(length + L - 1, real=True)
    ref_spectra = fft.rfft(references, n_fft, axis=1)
    target_spectrum = fft.rfft(target, n_fft)

    # G[(i,a),(j,b)] = sum_n r_i[n] r_j[n + a - b]
    lags = (np.arange(L)[:, None] - np.arange(L)[None, :]) % n_fft
    gram = np.empty((n_refs * L, n_refs * L))
    for i in range(n_refs):
        for j in range(i, n_refs):
            corr = fft.irfft(ref_spectra[i].conj() * ref_spectra[j], n_fft)
            block = corr[lags]
            gram[i * L:(i + 1) * L, j * L:(j + 1) * L] = block
            gram[j * L:(j + 1) * L, i * L:(i + 1) * L] = block.T

    # D[(i,a)] = sum_n r_i[n] e[n + a]
    rhs = np.concatenate([
        fft.irfft(ref_spectra[i].conj() * target_spectrum, n_fft)[:L] for i in range(n_refs)
    ])
    coefs = _solve(gram, rhs).reshape(n_refs, L)
    projection = np.zeros(length + L - 1)
    for i in range(n_refs):
        projection += fftconvolve(coefs[i], references[i])
    return projection


def bss_decomposition(
    estimate: np.ndarray,
    truths: np.ndarray,
    target_index: int,
    filter_length: int = DEFAULT_FILTER_LENGTH,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """估计 = s_target + e_interf + e_artif，各分量形状 (M, N + L - 1)

    每个通道投影到目标真值（所有通道）的时移子空间得到 s_target，
    投影到全部真值的时移子空间后减去 s_target 得到 e_interf。
    """
    estimate = np.atleast_2d(np.asarray(estimate, dtype=np.float64))
    truths = np.asarray(truths, dtype=np.float64)
    if truths.ndim == 2:
        truths = truths[:, None, :]
    if filter_length < 1:
        raise ShapeError(f"滤波器长度必须为正: {filter_length}")
    if truths.shape[1:] != estimate.shape:
        raise ShapeError(f"估计形状 {estimate.shape} 与真值形状 {truths.shape[1:]} 不一致")
    K, M, N = truths.shape
    target_refs = truths[target_index]
    all_refs = truths.reshape(K * M, N)

    padded = np.pad(estimate, ((0, 0), (0, filter_length - 1)))
    s_target = np.stack([_project(target_refs, estimate[m], filter_length) for m in range(M)])
    p_all = np.stack([_project(all_refs, estimate[m], filter_length) for m in range(M)])
    return s_target, p_all - s_target, padded - p_all


def source_scores(
    estimate: np.ndarray,
    truths: np.ndarray,
    target_index: int,
    filter_length: int = DEFAULT_FILTER_LENGTH,
) -> SourceScores:
    """SDR、SIR、SAR"""
    s_target, e_interf, e_artif = bss_decomposition(estimate, truths, target_index, filter_length)
    target_energy = float(np.sum(s_target ** 2))
    return SourceScores(
        source=target_index,
        sdr_db=_safe_db(target_energy, float(np.sum((e_interf + e_artif) ** 2))),
        sir_db=_safe_db(target_energy, float(np.sum(e_interf ** 2))),
        sar_db=_safe_db(float(np.sum((s_target + e_interf) ** 2)), float(np.sum(e_artif ** 2))),
    )


def sdr_sir(
    estimate: np.ndarray,
    truths: np.ndarray,
    target_index: int,
    filter_length: int = DEFAULT_FILTER_LENGTH,
) -> tuple[float, float]:
    """(SDR, SIR)，单位 dB"""
    scores = source_scores(estimate, truths, target_index, filter_length)
    return scores.sdr_db, scores.sir_db


def mer_per_frequency(a_hat: np.ndarray, a_true: np.ndarray) -> np.ndarray:
    """每个频点的 10 log10(||P_a a_hat||^2 / ||(I - P_a) a_hat||^2)，无效频点为 NaN"""
    a_hat = np.atleast_2d(np.asarray(a_hat, dtype=np.complex128))
    a_true = np.atleast_2d(np.asarray(a_true, dtype=np.complex128))
    if a_hat.shape != a_true.shape:
        raise ShapeError(f"估计导向矢量形状 {a_hat.shape} 与真值形状 {a_true.shape} 不一致")
    values = np.full(a_hat.shape[0], np.nan)
    for f, (est, ref) in enumerate(zip(a_hat, a_true)):
        ref_energy = float(np.real(np.vdot(ref, ref)))
        est_energy = float(np.real(np.vdot(est, est)))
        if not (np.isfinite(ref_energy) and np.isfinite(est_energy)) or ref_energy <= 0 or est_energy <= 0:
            continue
        projected = abs(np.vdot(ref, est)) ** 2 / ref_energy
        values[f] = _safe_db(projected, max(est_energy - projected, 0.0))
    return values


def mer(a_hat: np.ndarray, a_true: np.ndarray) -> float:
    """源的 MER：各有效频点的均值"""
    values = mer_per_frequency(a_hat, a_true)
    finite = values[np.isfinite(values)]
    return float(finite.mean()) if finite.size else float("nan")


def aggregate_scores(scores: Sequence[SourceScores]) -> dict[str, tuple[Optional[float], Optional[float]]]:
    """各指标的均值与标准差（忽略缺失值）"""
    summary = {}
    for metric in ("sdr_db", "sir_db", "sar_db", "mer_db"):
        values = np.array(
            [getattr(s, metric) for s in scores if getattr(s, metric) is not None], dtype=float
        )
        values = values[np.isfinite(values)]
        if values.size:
            summary[metric] = (float(values.mean()), float(values.std()))
        else:
            summary[metric] = (None, None)
    return summary
