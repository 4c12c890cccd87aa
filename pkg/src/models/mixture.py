"""混合模型参数数据模型"""

from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

# 估计路径中 alpha 的下限，避免极重尾带来的数值退化
ALPHA_MIN = 0.2
ALPHA_MAX = 2.0


def _as_complex_vector(value) -> np.ndarray:
    """把列表 / [实部, 虚部] 对 / ndarray 统一为一维复数向量"""
    if isinstance(value, np.ndarray):
        return np.asarray(value, dtype=np.complex128).ravel()
    arr = np.asarray(value)
    # YAML 中复数以 [re, im] 对存储
    if arr.ndim == 2 and arr.shape[1] == 2 and not np.iscomplexobj(arr):
        return (arr[:, 0] + 1j * arr[:, 1]).astype(np.complex128)
    return arr.astype(np.complex128).ravel()


def complex_to_pairs(values: np.ndarray) -> list:
    """复数数组转为 [re, im] 列表，便于 YAML 序列化"""
    flat = np.asarray(values, dtype=np.complex128)
    if flat.ndim == 1:
        return [[float(v.real), float(v.imag)] for v in flat]
    return [complex_to_pairs(row) for row in flat]


class ComponentParams(BaseModel):
    """单个混合成分：导向矢量 a、特征指数 alpha、残差方差 sigma2、权重 pi"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    a: np.ndarray
    alpha: float
    sigma2: float
    pi: float = 1.0

    @field_validator("a", mode="before")
    @classmethod
    def _coerce_a(cls, value):
        return _as_complex_vector(value)

    @field_validator("a")
    @classmethod
    def _check_a(cls, value: np.ndarray) -> np.ndarray:
        if value.size == 0:
            raise ValueError("导向矢量不能为空")
        if not np.all(np.isfinite(value)):
            raise ValueError("导向矢量含非有限值")
        if np.linalg.norm(value) <= 0:
            raise ValueError("导向矢量范数必须为正")
        return value

    @field_validator("alpha")
    @classmethod
    def _check_alpha(cls, value: float) -> float:
        if not (0.0 < value <= ALPHA_MAX):
            raise ValueError(f"alpha 必须在 (0, 2] 内: {value}")
        return float(value)

    @field_validator("sigma2")
    @classmethod
    def _check_sigma2(cls, value: float) -> float:
        if not (value > 0 and np.isfinite(value)):
            raise ValueError(f"sigma2 必须为正: {value}")
        return float(value)

    @field_validator("pi")
    @classmethod
    def _check_pi(cls, value: float) -> float:
        if not (0.0 <= value <= 1.0):
            raise ValueError(f"pi 必须在 [0, 1] 内: {value}")
        return float(value)

    @property
    def n_channels(self) -> int:
        return int(self.a.size)

    def to_dict(self) -> dict:
        """转换为可序列化的字典"""
        return {
            "a": complex_to_pairs(self.a),
            "alpha": self.alpha,
            "sigma2": self.sigma2,
            "pi": self.pi,
        }


class MixtureParams(BaseModel):
    """某一频点上的完整混合模型 theta_f"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    components: list[ComponentParams]

    @model_validator(mode="after")
    def _check_mixture(self) -> "MixtureParams":
        if not self.components:
            raise ValueError("混合模型至少需要一个成分")
        sizes = {c.n_channels for c in self.components}
        if len(sizes) != 1:
            raise ValueError(f"成分的通道数不一致: {sorted(sizes)}")
        total = sum(c.pi for c in self.components)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"权重之和必须为 1，实际为 {total}")
        return self

    @property
    def K(self) -> int:
        return len(self.components)

    @property
    def M(self) -> int:
        return self.components[0].n_channels

    @property
    def weights(self) -> np.ndarray:
        return np.array([c.pi for c in self.components])

    @property
    def steering(self) -> np.ndarray:
        """(K, M) 导向矢量矩阵"""
        return np.stack([c.a for c in self.components])

    @property
    def alphas(self) -> np.ndarray:
        return np.array([c.alpha for c in self.components])

    @property
    def sigma2s(self) -> np.ndarray:
        return np.array([c.sigma2 for c in self.components])

    @classmethod
    def from_arrays(
        cls,
        steering: np.ndarray,
        alphas,
        sigma2s,
        weights,
    ) -> "MixtureParams":
        """由数组构造；weights 会被归一化"""
        weights = np.asarray(weights, dtype=float)
        weights = weights / weights.sum()
        K = len(weights)
        alphas = np.broadcast_to(np.asarray(alphas, dtype=float), (K,))
        sigma2s = np.broadcast_to(np.asarray(sigma2s, dtype=float), (K,))
        return cls(components=[
            ComponentParams(a=steering[k], alpha=alphas[k], sigma2=sigma2s[k], pi=weights[k])
            for k in range(K)
        ])

    def to_dict(self) -> dict:
        return {"components": [c.to_dict() for c in self.components]}


class AtomParams(BaseModel):
    """CL-OMPR 中的一个原子（未加权的成分）"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    a: np.ndarray
    alpha: float = 2.0
    log_sigma2: float = 0.0
    alpha_locked: bool = False  # CF-GMM 模式：alpha 固定为 2

    @field_validator("a", mode="before")
    @classmethod
    def _coerce_a(cls, value):
        return _as_complex_vector(value)

    @model_validator(mode="after")
    def _check_atom(self) -> "AtomParams":
        if not (ALPHA_MIN <= self.alpha <= ALPHA_MAX):
            raise ValueError(f"原子的 alpha 必须在 [0.2, 2] 内: {self.alpha}")
        if self.alpha_locked and self.alpha != ALPHA_MAX:
            raise ValueError("alpha_locked 原子的 alpha 必须等于 2")
        if not np.isfinite(self.log_sigma2):
            raise ValueError("log_sigma2 必须有限")
        return self

    @property
    def sigma2(self) -> float:
        return float(np.exp(self.log_sigma2))

    @property
    def n_channels(self) -> int:
        return int(self.a.size)

    def to_component(self, pi: float = 1.0) -> ComponentParams:
        return ComponentParams(a=self.a, alpha=self.alpha, sigma2=self.sigma2, pi=pi)


class FitOptions(BaseModel):
    """CL-OMPR 拟合选项"""
    K: int = Field(ge=1)
    n_outer_iterations: Optional[int] = Field(default=None, ge=1)  # None 表示 2K
    n_inits_per_atom: int = Field(default=5, ge=1)
    max_gradient_steps: int = Field(default=300, ge=1)
    tolerance: float = Field(default=1e-8, gt=0)
    seed: int = 0
    alpha_locked: bool = False

    @property
    def outer_iterations(self) -> int:
        return self.n_outer_iterations or 2 * self.K


class EmOptions(BaseModel):
    """EM 拟合选项"""
    K: int = Field(ge=1)
    n_restarts: int = Field(default=10, ge=1)
    max_iterations: int = Field(default=200, ge=1)
    loglik_tolerance: float = Field(default=1e-7, gt=0)
    seed: int = 0
    normalize_observations: bool = False  # Sawada 模式


class ClomprResult(BaseModel):
    """CL-OMPR 输出"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    theta: MixtureParams
    weights: np.ndarray  # 未归一化的 beta
    objective: float
    objective_trace: list[float] = Field(default_factory=list)


class EmResult(BaseModel):
    """EM 输出"""
    theta: MixtureParams
    loglik: float
    history: list[float] = Field(default_factory=list)
    n_iterations: int = 0
    n_collapsed: int = 0
