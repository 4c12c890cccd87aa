"""草图（经验特征函数采样）数据模型"""

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from .mixture import _as_complex_vector, complex_to_pairs


class FrequencyDesign(BaseModel):
    """随机频率设计 Lambda：J 个 M 维复频率向量"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    omegas: np.ndarray  # (J, M)
    radius_scale: float
    seed: int

    @field_validator("omegas", mode="before")
    @classmethod
    def _coerce_omegas(cls, value):
        arr = np.asarray(value)
        if not np.iscomplexobj(arr) and arr.ndim == 3 and arr.shape[2] == 2:
            arr = arr[..., 0] + 1j * arr[..., 1]
        return np.atleast_2d(arr.astype(np.complex128))

    @model_validator(mode="after")
    def _check_design(self) -> "FrequencyDesign":
        if self.omegas.ndim != 2 or self.omegas.shape[0] < 1:
            raise ValueError("频率设计至少需要一个频率向量")
        if not np.all(np.isfinite(self.omegas)):
            raise ValueError("频率向量含非有限值")
        if not self.radius_scale > 0:
            raise ValueError("radius_scale 必须为正")
        return self

    @property
    def J(self) -> int:
        return int(self.omegas.shape[0])

    @property
    def M(self) -> int:
        return int(self.omegas.shape[1])

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "radius_scale": self.radius_scale,
            "omegas": complex_to_pairs(self.omegas),
        }


class Sketch(BaseModel):
    """长度为 J 的经验特征函数向量 y"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    y: np.ndarray
    n_samples: int

    @field_validator("y", mode="before")
    @classmethod
    def _coerce_y(cls, value):
        return _as_complex_vector(value)

    @model_validator(mode="after")
    def _check_sketch(self) -> "Sketch":
        if self.n_samples < 1:
            raise ValueError("草图至少需要汇总一个样本")
        if np.any(np.abs(self.y) > 1.0 + 1e-12):
            raise ValueError("草图分量的模必须不超过 1")
        return self

    @property
    def J(self) -> int:
        return int(self.y.size)

    def to_dict(self) -> dict:
        return {"n_samples": self.n_samples, "y": complex_to_pairs(self.y)}
