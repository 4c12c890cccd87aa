"""复对称 alpha-stable 与圆对称复高斯的基础运算

特征函数约定：E[exp(i Re(w* x))]。在该约定下单位尺度的复 SaS 变量
特征函数为 exp(-|w|^alpha)，协方差为 C 的复高斯为 exp(-w* C w / 4)。
"""

from typing import Union

import numpy as np

from ..errors import DomainError, ShapeError
from ..models import ComponentParams, MixtureParams

ArrayLike = Union[float, np.ndarray]


def _check_alpha(alpha: float):
    if not (0.0 < alpha <= 2.0) or not np.isfinite(alpha):
        raise DomainError(f"alpha 必须在 (0, 2] 内: {alpha}")


def sas_scalar_cf(omega_abs: ArrayLike, alpha: float) -> ArrayLike:
    """标量复 SaS 的特征函数 exp(-|w|^alpha)"""
    _check_alpha(alpha)
    omega_abs = np.asarray(omega_abs, dtype=float)
    if np.any(omega_abs < 0) or not np.all(np.isfinite(omega_abs)):
        raise DomainError("omega_abs 必须为非负有限值")
    result = np.exp(-(omega_abs ** alpha))
    return float(result) if result.ndim == 0 else result


def _omega_matrix(omega: np.ndarray, M: int) -> tuple[np.ndarray, bool]:
    """把单个向量或 (J, M) 矩阵统一为矩阵，并返回是否为单个向量"""
    omega = np.asarray(omega, dtype=np.complex128)
    single = omega.ndim == 1
    omega = np.atleast_2d(omega)
    if omega.shape[-1] != M:
        raise ShapeError(f"频率向量维度 {omega.shape[-1]} 与通道数 {M} 不一致")
    return omega, single


def component_cf(params: ComponentParams, omega: np.ndarray) -> ArrayLike:
    """成分特征函数 exp(-|a* w|^alpha - sigma2 ||w||^2)

    omega 可以是单个 M 维向量，也可以是 (J, M) 矩阵（逐行求值）。
    """
    omega, single = _omega_matrix(omega, params.n_channels)
    projection = np.abs(omega @ params.a.conj())
    energy = np.sum(np.abs(omega) ** 2, axis=1)
    values = np.exp(-(projection ** params.alpha) - params.sigma2 * energy)
    return float(values[0]) if single else values


def mixture_cf(theta: MixtureParams, omega: np.ndarray) -> ArrayLike:
    """混合特征函数 sum_k pi_k psi_k(w)"""
    omega, single = _omega_matrix(omega, theta.M)
    values = sum(c.pi * component_cf(c, omega) for c in theta.components)
    return float(values[0]) if single else values


def _positive_stable(beta: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """完全正偏的 beta-stable 变量（0 < beta < 1），拉普拉斯变换为 exp(-s^beta)

    Chambers-Mallows-Stuck 采样（Kanter 表示）。
    """
    u = rng.uniform(0.0, np.pi, size=n)
    w = rng.exponential(1.0, size=n)
    return (
        np.sin(beta * u) / np.sin(u) ** (1.0 / beta)
        * (np.sin((1.0 - beta) * u) / w) ** ((1.0 - beta) / beta)
    )


def sample_sas_complex(alpha: float, n: int, rng_seed: Union[int, np.random.Generator]) -> np.ndarray:
    """采样 n 个单位尺度的复对称 alpha-stable 变量

    亚高斯构造 s = sqrt(A) g：g 的实部与虚部方差均为 2，
    A 为 alpha/2-stable 正变量。alpha = 2 时直接返回圆对称高斯。
    """
    _check_alpha(alpha)
    if n < 1:
        raise DomainError(f"样本数必须为正: {n}")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)

    gaussian = np.sqrt(2.0) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    if alpha == 2.0:
        return gaussian
    scale = _positive_stable(alpha / 2.0, n, rng)
    return np.sqrt(scale) * gaussian


def gaussian_logpdf(
    x: np.ndarray,
    a: np.ndarray,
    sigma2: float,
    cov_scale: float = 1.0,
) -> ArrayLike:
    """圆对称复高斯 N_c(x; 0, C) 的对数密度，C = cov_scale (a a* + sigma2 I)

    利用秩一修正的行列式与逆矩阵公式，不做一般矩阵分解。
    x 可以是单个 M 维向量或 (T, M) 矩阵。
    """
    if not sigma2 > 0:
        raise DomainError(f"sigma2 必须为正: {sigma2}")
    if not cov_scale > 0:
        raise DomainError(f"cov_scale 必须为正: {cov_scale}")
    a = np.asarray(a, dtype=np.complex128).ravel()
    M = a.size
    x = np.asarray(x, dtype=np.complex128)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[-1] != M:
        raise ShapeError(f"观测维度 {x.shape[-1]} 与导向矢量维度 {M} 不一致")

    a_energy = float(np.real(np.vdot(a, a)))
    denom = sigma2 + a_energy
    # det(C) = c^M sigma2^(M-1) (sigma2 + ||a||^2)
    log_det = M * np.log(cov_scale) + (M - 1) * np.log(sigma2) + np.log(denom)
    x_energy = np.sum(np.abs(x) ** 2, axis=1)
    projection = np.abs(x @ a.conj()) ** 2
    quad = (x_energy - projection / denom) / (cov_scale * sigma2)
    values = -M * np.log(np.pi) - log_det - quad
    return float(values[0]) if single else values
