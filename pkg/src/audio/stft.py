"""短时傅里叶分析与合成

默认 16 kHz 下 64 ms 周期 Hamming 窗、75% 重叠（窗长 1024，帧移 256）。
两端各补 window_length - hop 个零，使每个样本恰好被 window_length / hop 帧覆盖；
合成端用加权重叠相加并除以窗平方和。
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import get_window

from ..errors import ConfigError, DataError, ShapeError
from ..models import Spectrogram

DEFAULT_WINDOW_LENGTH = 1024
DEFAULT_HOP = 256
DEFAULT_SAMPLE_RATE = 16000


def analysis_window(window_length: int) -> np.ndarray:
    """周期 Hamming 窗"""
    return get_window("hamming", window_length, fftbins=True)


def _check_settings(window_length: int, hop: int):
    if window_length < 2 or window_length % 2:
        raise ConfigError(f"window_length 必须为正偶数: {window_length}")
    if hop < 1 or window_length % hop:
        raise ConfigError(f"hop ({hop}) 必须整除 window_length ({window_length})")


def _padding(length: int, window_length: int, hop: int) -> tuple[int, int, int]:
    """返回 (前补零, 后补零, 帧数)"""
    front = window_length - hop
    padded = length + 2 * front
    n_frames = int(np.ceil((padded - window_length) / hop)) + 1
    back = front + (n_frames - 1) * hop + window_length - padded
    return front, back, n_frames


def stft(
    signal: np.ndarray,
    window_length: int = DEFAULT_WINDOW_LENGTH,
    hop: int = DEFAULT_HOP,
    sample_rate: int = DEFAULT_SAMPLE_RATE,
) -> Spectrogram:
    """多通道信号 (通道, 样本) 的单边 STFT"""
    _check_settings(window_length, hop)
    signal = np.atleast_2d(np.asarray(signal, dtype=np.float64))
    if signal.ndim != 2:
        raise ShapeError(f"信号必须是 (通道, 样本) 矩阵，实际维度 {signal.ndim}")
    length = signal.shape[1]
    if length < window_length:
        raise DataError(f"信号长度 {length} 小于窗长 {window_length}")

    front, back, n_frames = _padding(length, window_length, hop)
    padded = np.pad(signal, ((0, 0), (front, back)))
    frames = sliding_window_view(padded, window_length, axis=-1)[:, ::hop, :]
    spectrum = np.fft.rfft(frames * analysis_window(window_length), axis=-1)
    return Spectrogram(
        values=np.transpose(spectrum, (0, 2, 1)),
        sample_rate=sample_rate,
        window_length=window_length,
        hop=hop,
        length=length,
    )


def istft(spec: Spectrogram) -> np.ndarray:
    """加权重叠相加合成，返回 (通道, 样本) 实信号"""
    window_length, hop = spec.window_length, spec.hop
    front, back, n_frames = _padding(spec.length, window_length, hop)
    if spec.n_frames != n_frames:
        raise ShapeError(f"帧数 {spec.n_frames} 与信号长度 {spec.length} 不一致（应为 {n_frames}）")

    window = analysis_window(window_length)
    frames = np.fft.irfft(np.transpose(spec.values, (0, 2, 1)), n=window_length, axis=-1) * window
    total = (n_frames - 1) * hop + window_length
    output = np.zeros((spec.n_channels, total))
    norm = np.zeros(total)
    for i in range(n_frames):
        start = i * hop
        output[:, start:start + window_length] += frames[:, i, :]
        norm[start:start + window_length] += window ** 2
    output[:, norm > 0] /= norm[norm > 0]
    return output[:, front:front + spec.length]


def window_energy_gain(window_length: int = DEFAULT_WINDOW_LENGTH, hop: int = DEFAULT_HOP) -> float:
    """重叠窗平方和（每个样本上为常数）"""
    return float(np.sum(analysis_window(window_length) ** 2) / hop)


def spectral_energy(spec: Spectrogram) -> float:
    """单边谱按 Parseval 加权的总能量（等于所有加窗帧的时域能量之和）"""
    weights = np.full(spec.n_frequencies, 2.0)
    weights[0] = 1.0
    weights[-1] = 1.0  # 窗长为偶数，最后一个频点是 Nyquist
    power = np.abs(spec.values) ** 2
    return float(np.sum(weights[None, :, None] * power) / spec.window_length)
