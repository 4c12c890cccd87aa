"""WAV 读写（RIFF，16 位 PCM，单声道或立体声）"""

from pathlib import Path
from typing import Union

import numpy as np
import structlog
from scipy.io import wavfile

from ..errors import DataError, ShapeError

logger = structlog.get_logger()

PCM16_SCALE = 32768.0


def load_wav(path: Union[str, Path]) -> tuple[np.ndarray, int]:
    """读取 WAV，返回 ((通道, 样本) 矩阵，采样率)，样本缩放到 [-1, 1)"""
    path = Path(path)
    if not path.exists():
        raise DataError(f"WAV 文件不存在: {path}")
    try:
        rate, samples = wavfile.read(path)
    except (ValueError, EOFError, OSError) as e:
        raise DataError(f"无法解析 WAV 文件 {path}（RIFF 头或数据块损坏）: {e}") from e
    if samples.dtype != np.int16:
        raise DataError(f"WAV 文件 {path} 的 fmt 块编码不受支持: {samples.dtype}，仅支持 16 位 PCM")
    matrix = np.atleast_2d(samples.T).astype(np.float64) / PCM16_SCALE
    logger.debug("wav_loaded", path=str(path), channels=matrix.shape[0], samples=matrix.shape[1], rate=rate)
    return matrix, int(rate)


def to_pcm16(signal: np.ndarray) -> np.ndarray:
    """量化到 16 位整数（截断到可表示范围）"""
    return np.clip(np.round(np.asarray(signal) * PCM16_SCALE), -32768, 32767).astype(np.int16)


def write_wav(path: Union[str, Path], matrix: np.ndarray, rate: int) -> Path:
    """写入 16 位 PCM WAV；matrix 为 (通道, 样本) 或一维单声道"""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    if matrix.ndim != 2 or matrix.shape[0] not in (1, 2):
        raise ShapeError(f"仅支持单声道或立体声，实际形状 {matrix.shape}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    clipped = int(np.sum((matrix >= 1.0) | (matrix < -1.0)))
    if clipped:
        logger.warning("wav_samples_clipped", path=str(path), count=clipped)
    pcm = to_pcm16(matrix)
    wavfile.write(path, rate, pcm[0] if pcm.shape[0] == 1 else pcm.T)
    return path
