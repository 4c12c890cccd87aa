"""无回声立体声混合的生成，以及合成的重尾测试源"""

from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import structlog

from ..distributions import sample_sas_complex
from ..errors import ConfigError, DataError
from ..models import GroundTruth, MAX_DELAY, MAX_GAIN_RATIO, MixSpec, Spectrogram
from .stft import DEFAULT_HOP, DEFAULT_SAMPLE_RATE, DEFAULT_WINDOW_LENGTH, _padding, istft
from .wav import load_wav

logger = structlog.get_logger()

N_CHANNELS = 2
SOURCE_PEAK = 0.25


def draw_mix_spec(n_sources: int, seed: int) -> MixSpec:
    """随机纯增益与时延：第一通道增益为 1，第二通道在 ±5 dB 内对数均匀；
    通道间时延差在 [-20, 20] 内均匀取整，较早的通道时延归零"""
    if n_sources < 2:
        raise ConfigError(f"混合至少需要两个源: {n_sources}")
    rng = np.random.default_rng(seed)
    gains, delays = [], []
    for _ in range(n_sources):
        ratio_db = rng.uniform(-5.0, 5.0)
        gains.append([1.0, float(min(10 ** (ratio_db / 20), MAX_GAIN_RATIO))])
        shift = int(rng.integers(-MAX_DELAY, MAX_DELAY + 1))
        delays.append([max(-shift, 0), max(shift, 0)])
    return MixSpec(n_sources=n_sources, gains=gains, delays=delays, seed=seed)


def _equal_length(sources: Sequence[np.ndarray]) -> np.ndarray:
    """短的源在末尾补零"""
    arrays = [np.asarray(s, dtype=np.float64).ravel() for s in sources]
    length = max(a.size for a in arrays)
    return np.stack([np.pad(a, (0, length - a.size)) for a in arrays])


def gen_mixture(sources: Sequence[np.ndarray], spec: MixSpec) -> tuple[np.ndarray, GroundTruth]:
    """y_km[n] = g_km s_k[n - d_km]，mixture = sum_k y_k"""
    if len(sources) < 2:
        raise ConfigError(f"混合至少需要两个源: {len(sources)}")
    if len(sources) != spec.n_sources:
        raise ConfigError(f"源数 {len(sources)} 与混合规格 {spec.n_sources} 不一致")
    signals = _equal_length(sources)
    K, length = signals.shape
    images = np.zeros((K, N_CHANNELS, length))
    for k in range(K):
        for m in range(N_CHANNELS):
            delay = spec.delays[k][m]
            if delay < length:
                images[k, m, delay:] = spec.gains[k][m] * signals[k, :length - delay]
    mixture = images.sum(axis=0)
    return mixture, GroundTruth(images=images, spec=spec)


def spectral_envelope(n_frequencies: int) -> np.ndarray:
    """随频率缓慢衰减的幅度包络，近似自然音频的谱倾斜"""
    return 1.0 / np.sqrt(1.0 + np.arange(n_frequencies) / 32.0)


def synthetic_source_coefficients(
    n_frames: int,
    alphas: np.ndarray,
    rng: np.random.Generator,
    envelope: bool = True,
) -> np.ndarray:
    """逐频点独立同分布的复 SaS 系数，形状 (F, n_frames)；alphas 给出每个频点的 alpha"""
    n_frequencies = len(alphas)
    coefficients = np.stack([sample_sas_complex(float(a), n_frames, rng) for a in alphas])
    if envelope:
        coefficients *= spectral_envelope(n_frequencies)[:, None]
    return coefficients


def gen_synthetic_sources(
    n_sources: int,
    duration: float,
    alpha_list: Optional[Sequence[float]] = None,
    seed: int = 0,
    sample_rate: int = DEFAULT_SAMPLE_RATE,
    window_length: int = DEFAULT_WINDOW_LENGTH,
    hop: int = DEFAULT_HOP,
    alpha_range: Optional[tuple[float, float]] = None,
    envelope: bool = True,
) -> np.ndarray:
    """合成 K 个单声道源，形状 (K, N)

    每个源的 STFT 系数逐频点服从复 SaS 分布：alpha_list 给出每个源的 alpha，
    或由 alpha_range 为每个 (源, 频点) 均匀抽取 alpha。
    """
    if alpha_list is None and alpha_range is None:
        raise ConfigError("需要提供 alpha_list 或 alpha_range")
    if alpha_list is not None and len(alpha_list) != n_sources:
        raise ConfigError(f"alpha_list 长度 {len(alpha_list)} 与源数 {n_sources} 不一致")
    length = int(round(duration * sample_rate))
    if length < window_length:
        raise ConfigError(f"时长 {duration}s 太短，至少需要一个窗长")

    rng = np.random.default_rng(seed)
    n_frequencies = window_length // 2 + 1
    _, _, n_frames = _padding(length, window_length, hop)
    sources = np.zeros((n_sources, length))
    for k in range(n_sources):
        if alpha_range is not None:
            alphas = rng.uniform(alpha_range[0], alpha_range[1], n_frequencies)
        else:
            alphas = np.full(n_frequencies, float(alpha_list[k]))
        coefficients = synthetic_source_coefficients(n_frames, alphas, rng, envelope)
        spec = Spectrogram(
            values=coefficients[None],
            sample_rate=sample_rate,
            window_length=window_length,
            hop=hop,
            length=length,
        )
        signal = istft(spec)[0]
        sources[k] = SOURCE_PEAK * signal / np.max(np.abs(signal))
    logger.debug("synthetic_sources_generated", n_sources=n_sources, samples=length, seed=seed)
    return sources


def select_sources(
    paths: Sequence[Union[str, Path]],
    n_sources: int,
    seed: int,
    duration: Optional[float] = None,
    sample_rate: int = DEFAULT_SAMPLE_RATE,
) -> tuple[np.ndarray, list[str]]:
    """从用户提供的 WAV 列表中随机选出 K 个，转为单声道并裁剪到统一时长"""
    if len(paths) < n_sources:
        raise ConfigError(f"输入文件数 {len(paths)} 少于源数 {n_sources}")
    rng = np.random.default_rng(seed)
    picks = sorted(rng.choice(len(paths), size=n_sources, replace=False).tolist())
    chosen = [str(paths[i]) for i in picks]

    signals = []
    for path in chosen:
        matrix, rate = load_wav(path)
        if rate != sample_rate:
            raise DataError(f"{path} 的采样率 {rate} Hz 与配置 {sample_rate} Hz 不一致")
        signals.append(matrix.mean(axis=0))
    signals = _equal_length(signals)
    if duration is not None:
        length = int(round(duration * sample_rate))
        signals = np.pad(signals[:, :length], ((0, 0), (0, max(0, length - signals.shape[1]))))
    logger.info("sources_selected", files=chosen)
    return signals, chosen
