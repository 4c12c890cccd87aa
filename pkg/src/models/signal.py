"""信号相关数据模型：频谱图、混合规格、真值"""

from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..errors import DataError

# 两通道增益差不超过 5 dB，时延不超过 20 个样本
MAX_GAIN_RATIO = 10 ** (5 / 20)
MAX_DELAY = 20


class Spectrogram(BaseModel):
    """复数 STFT 张量，索引顺序为 (通道, 频率, 帧)"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    values: np.ndarray
    sample_rate: int = 16000
    window_length: int = 1024
    hop: int = 256
    length: int  # 原始时域样本数，用于合成时裁剪

    @field_validator("values", mode="before")
    @classmethod
    def _coerce_values(cls, value):
        return np.asarray(value, dtype=np.complex128)

    @model_validator(mode="after")
    def _check_shape(self) -> "Spectrogram":
        if self.values.ndim != 3:
            raise ValueError(f"频谱图必须是三维张量，实际维度 {self.values.ndim}")
        if self.window_length % self.hop != 0:
            raise ValueError("hop 必须整除 window_length")
        if self.values.shape[1] != self.window_length // 2 + 1:
            raise ValueError(
                f"频点数 {self.values.shape[1]} 与窗长 {self.window_length} 不一致"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("频谱图含非有限值")
        return self

    @property
    def n_channels(self) -> int:
        return int(self.values.shape[0])

    @property
    def n_frequencies(self) -> int:
        return int(self.values.shape[1])

    @property
    def n_frames(self) -> int:
        return int(self.values.shape[2])

    def frequency_data(self, f: int) -> np.ndarray:
        """频点 f 上的观测 x(f, t)，形状 (T, M)"""
        return self.values[:, f, :].T

    def with_values(self, values: np.ndarray) -> "Spectrogram":
        """相同 STFT 设置、不同数值的频谱图"""
        return Spectrogram(
            values=values,
            sample_rate=self.sample_rate,
            window_length=self.window_length,
            hop=self.hop,
            length=self.length,
        )


class MixSpec(BaseModel):
    """无回声立体声混合规格：每个源每个通道的增益与整数时延"""
    n_sources: int = Field(ge=2)
    gains: list[list[float]]
    delays: list[list[int]]
    seed: int = 0

    @model_validator(mode="after")
    def _check_constraints(self) -> "MixSpec":
        if len(self.gains) != self.n_sources or len(self.delays) != self.n_sources:
            raise ValueError("增益 / 时延的数量与源数不一致")
        for k, (gain, delay) in enumerate(zip(self.gains, self.delays)):
            if len(gain) != 2 or len(delay) != 2:
                raise ValueError(f"源 {k} 必须恰好有两个通道")
            if min(gain) <= 0:
                raise ValueError(f"源 {k} 的增益必须为正")
            if max(gain) / min(gain) > MAX_GAIN_RATIO * (1 + 1e-12):
                raise ValueError(f"源 {k} 的通道增益差超过 5 dB")
            if not all(0 <= d <= MAX_DELAY for d in delay):
                raise ValueError(f"源 {k} 的时延超出 [0, {MAX_DELAY}]")
            if min(delay) != 0:
                raise ValueError(f"源 {k} 必须有一个通道时延为 0")
        return self

    @property
    def gain_matrix(self) -> np.ndarray:
        return np.asarray(self.gains, dtype=float)

    @property
    def delay_matrix(self) -> np.ndarray:
        return np.asarray(self.delays, dtype=int)


class GroundTruth(BaseModel):
    """真实源图像 y_k 及混合规格"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    images: np.ndarray  # (K, M, N)
    spec: Optional[MixSpec] = None  # 从文件加载的真值可能没有混合规格

    @field_validator("images", mode="before")
    @classmethod
    def _coerce_images(cls, value):
        return np.asarray(value, dtype=np.float64)

    @property
    def n_sources(self) -> int:
        return int(self.images.shape[0])

    def mixture(self) -> np.ndarray:
        return self.images.sum(axis=0)

    def steering_vectors(self, window_length: int) -> np.ndarray:
        """每个单边频点上的真实导向矢量 a_k(f)，形状 (K, F, M)"""
        if self.spec is None:
            raise DataError("缺少混合规格，无法计算真实导向矢量")
        freqs = np.arange(window_length // 2 + 1)
        gains = self.spec.gain_matrix  # (K, M)
        delays = self.spec.delay_matrix
        phase = np.exp(
            -2j * np.pi * freqs[None, :, None] * delays[:, None, :] / window_length
        )
        return gains[:, None, :] * phase
