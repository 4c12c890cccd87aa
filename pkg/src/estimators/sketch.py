"""随机频率设计与经验特征函数草图"""

from typing import Optional

import numpy as np
import structlog

from ..errors import DataError, ShapeError
from ..models import FrequencyDesign, Sketch

logger = structlog.get_logger()

DEFAULT_SUBSAMPLE = 5000
_CHUNK_ROWS = 4096


def default_n_frequencies(K: int, M: int) -> int:
    """默认草图长度：每个实自由参数 10 个采样"""
    return 10 * K * (2 * M + 3)


def _as_data(data: np.ndarray) -> np.ndarray:
    data = np.asarray(data, dtype=np.complex128)
    if data.ndim == 1:
        data = data[:, None]
    if data.ndim != 2 or data.shape[0] == 0:
        raise DataError("数据为空，无法生成频率设计")
    return data


def data_radius_scale(
    data: np.ndarray,
    rng: np.random.Generator,
    subsample_size: int = DEFAULT_SUBSAMPLE,
) -> float:
    """s = sqrt(mean ||x||^2 / (2M))，在至多 subsample_size 个样本上估计"""
    T, M = data.shape
    if T > subsample_size:
        rows = np.sort(rng.choice(T, size=subsample_size, replace=False))
        data = data[rows]
    energy = np.sum(np.abs(data) ** 2, axis=1)
    return float(np.sqrt(np.mean(energy) / (2 * M)))


def draw_frequencies(
    data: np.ndarray,
    J: int,
    seed: int,
    subsample_size: int = DEFAULT_SUBSAMPLE,
) -> FrequencyDesign:
    """按数据尺度抽取 J 个随机频率向量

    w_j = (r_j / s) u_j，u_j 在复单位球面上均匀分布，r_j = |n_j|，n_j 为标准正态。
    """
    data = _as_data(data)
    if J < 1:
        raise DataError(f"频率数 J 必须为正: {J}")
    rng = np.random.default_rng(seed)
    scale = data_radius_scale(data, rng, subsample_size)
    if not scale > 0 or not np.isfinite(scale):
        raise DataError("数据尺度退化 (degenerate data scale)")

    M = data.shape[1]
    directions = rng.standard_normal((J, M)) + 1j * rng.standard_normal((J, M))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = np.abs(rng.standard_normal(J))
    omegas = (radii / scale)[:, None] * directions

    logger.debug("frequencies_drawn", J=J, M=M, radius_scale=scale, seed=seed)
    return FrequencyDesign(omegas=omegas, radius_scale=scale, seed=seed)


def compute_sketch(data: np.ndarray, design: FrequencyDesign) -> Sketch:
    """y_j = (1/T) sum_t exp(i Re(w_j* x_t))，分块单遍累加"""
    data = _as_data(data)
    if data.shape[1] != design.M:
        raise ShapeError(f"数据维度 {data.shape[1]} 与频率设计维度 {design.M} 不一致")

    total = np.zeros(design.J, dtype=np.complex128)
    conj_omegas = design.omegas.conj().T  # (M, J)
    for start in range(0, data.shape[0], _CHUNK_ROWS):
        phases = np.real(data[start:start + _CHUNK_ROWS] @ conj_omegas)
        total += np.exp(1j * phases).sum(axis=0)
    y = total / data.shape[0]
    return Sketch(y=y, n_samples=int(data.shape[0]))


def merge_sketches(sketches: list[Sketch]) -> Sketch:
    """按样本数加权合并草图，等价于对拼接数据求草图"""
    if not sketches:
        raise DataError("没有可合并的草图")
    counts = np.array([s.n_samples for s in sketches], dtype=float)
    stacked = np.stack([s.y for s in sketches])
    y = (counts[:, None] * stacked).sum(axis=0) / counts.sum()
    return Sketch(y=y, n_samples=int(counts.sum()))


def sketch_data(
    data: np.ndarray,
    J: int,
    seed: int,
    subsample_size: Optional[int] = None,
) -> tuple[FrequencyDesign, Sketch]:
    """抽取频率并计算草图"""
    design = draw_frequencies(data, J, seed, subsample_size or DEFAULT_SUBSAMPLE)
    return design, compute_sketch(data, design)
