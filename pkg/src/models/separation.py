"""分离流程与评估结果数据模型"""

from enum import Enum
from typing import Any, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .mixture import MixtureParams


class Method(str, Enum):
    """逐频聚类方法"""
    EM = "em"              # 高斯混合 EM
    SAWADA = "sawada"      # 观测归一化后的 EM
    CF_GMM = "cf-gmm"      # 特征函数匹配，alpha 固定为 2
    CF_ALPHA = "cf-alpha"  # 特征函数匹配，alpha-stable 原子
    ORACLE = "oracle"      # 理想二值掩码（需真值）

    @property
    def is_blind(self) -> bool:
        return self is not Method.ORACLE

    @property
    def uses_sketch(self) -> bool:
        return self in (Method.CF_GMM, Method.CF_ALPHA)

    @property
    def normalizes_observations(self) -> bool:
        return self is Method.SAWADA

    @property
    def cov_scale(self) -> float:
        """聚类时使用的协方差尺度：EM 直接拟合协方差，CF 方法与特征函数约定一致"""
        return 4.0 if self.uses_sketch else 1.0


class FrequencyFit(BaseModel):
    """单个频点的拟合结果"""
    f: int
    theta: MixtureParams
    method: Method
    cov_scale: float = 1.0
    objective: Optional[float] = None
    loglik: Optional[float] = None
    fallback: bool = False
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "f": self.f,
            "method": self.method.value,
            "cov_scale": self.cov_scale,
            "objective": self.objective,
            "loglik": self.loglik,
            "fallback": self.fallback,
            "error": self.error,
            "theta": self.theta.to_dict(),
        }


class MaskSet(BaseModel):
    """每个时频点恰好一个标签 z(f, t)（0 起始的成分编号）"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    labels: np.ndarray  # (F, T)
    n_sources: int

    @model_validator(mode="after")
    def _check_labels(self) -> "MaskSet":
        if self.labels.ndim != 2:
            raise ValueError("标签必须是 (F, T) 矩阵")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.n_sources):
            raise ValueError("标签超出 [0, K) 范围")
        return self

    def mask(self, k: int) -> np.ndarray:
        return self.labels == k


class SourceScores(BaseModel):
    """单个源的评估分数（dB）"""
    source: int
    sdr_db: float
    sir_db: float
    sar_db: Optional[float] = None
    mer_db: Optional[float] = None


class SeparationReport(BaseModel):
    """一次分离运行的报告"""
    method: str
    n_sources: int
    scores: list[SourceScores] = Field(default_factory=list)
    baseline_scores: list[SourceScores] = Field(default_factory=list)  # 直接用混合信号
    loglik_per_frequency: list[float] = Field(default_factory=list)
    fallback_frequencies: list[int] = Field(default_factory=list)
    fits: list[dict] = Field(default_factory=list)
    outputs: list[str] = Field(default_factory=list)
    config: dict[str, Any] = Field(default_factory=dict)

    def to_dict(self) -> dict:
        return self.model_dump(mode="json")
