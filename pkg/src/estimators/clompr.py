"""CL-OMPR：由草图估计 alpha-stable 混合模型

求解 min ||y - sum_k beta_k psi_k||^2，psi_k 为成分特征函数在频率设计上的取值。
复数草图按 (实部, 虚部) 堆叠为 2J 维实向量；原子特征函数为实数，虚部行恒为 0。

内部在归一化坐标下优化：频率乘以 radius_scale，导向矢量与 sigma2 相应缩放，
使各参数量级接近 1。
"""

import numpy as np
import structlog
from scipy import optimize
from scipy.special import expit

from ..errors import DataError, NumericalError, ShapeError
from ..models import (
    ALPHA_MAX,
    ALPHA_MIN,
    AtomParams,
    ClomprResult,
    FitOptions,
    FrequencyDesign,
    MixtureParams,
    Sketch,
)

logger = structlog.get_logger()

ALPHA_SPAN = ALPHA_MAX - ALPHA_MIN
INIT_ALPHA = 1.8
INIT_SIGMA2_RATIO = 0.1
# 归一化坐标下的参数范围：导向矢量每个实分量、alpha 的 logit、log(sigma2)
A_BOUND = 4.0
ALPHA_LOGIT_BOUNDS = (-6.0, 6.0)
LOG_SIGMA2_BOUNDS = (-20.0, 1.0)
_BOUND_SLACK = 1e-6


class _NonFiniteObjective(Exception):
    """优化过程中出现非有限目标值"""


def _cf_values(
    a: np.ndarray,
    alpha: float,
    sigma2: float,
    omegas: np.ndarray,
    energy: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """返回 (psi, c, g)，c = a* w，g = |c|"""
    c = omegas @ a.conj()
    g = np.abs(c)
    psi = np.exp(-(g ** alpha) - sigma2 * energy)
    return psi, c, g


def _cf_gradient(
    a: np.ndarray,
    alpha: float,
    sigma2: float,
    omegas: np.ndarray,
    energy: np.ndarray,
    cotangent: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, float, float]:
    """<cotangent, psi> 对 (Re a, Im a, alpha, log sigma2) 的解析梯度"""
    psi, c, g = _cf_values(a, alpha, sigma2, omegas, energy)
    weighted = cotangent * psi
    positive = g > 0
    safe_g = np.where(positive, g, 1.0)

    # d(g^alpha)/d(Re a_m) = alpha g^(alpha-2) Re(conj(c) w_m)，虚部同理取 Im
    coef = np.where(positive, -weighted * alpha * safe_g ** (alpha - 2.0), 0.0)
    z = c.conj()[:, None] * omegas
    grad_re = z.real.T @ coef
    grad_im = z.imag.T @ coef

    # g -> 0 时 g^alpha log g -> 0
    g_log = np.where(positive, safe_g ** alpha * np.log(safe_g), 0.0)
    grad_alpha = float(-np.sum(weighted * g_log))
    grad_log_sigma2 = float(-np.sum(weighted * sigma2 * energy))
    return grad_re, grad_im, grad_alpha, grad_log_sigma2


def _check_design(atom: AtomParams, design: FrequencyDesign):
    if atom.n_channels != design.M:
        raise ShapeError(f"原子维度 {atom.n_channels} 与频率设计维度 {design.M} 不一致")


def atom_cf_vector(atom: AtomParams, design: FrequencyDesign) -> np.ndarray:
    """原子在频率设计上的特征函数向量，长度 J"""
    _check_design(atom, design)
    energy = np.sum(np.abs(design.omegas) ** 2, axis=1)
    psi, _, _ = _cf_values(atom.a, atom.alpha, atom.sigma2, design.omegas, energy)
    return psi


def atom_gradient(
    atom: AtomParams,
    design: FrequencyDesign,
    cotangent: np.ndarray,
) -> np.ndarray:
    """<cotangent, atom_cf_vector> 的梯度

    返回长度 2M + 2 的向量，顺序为 (Re a, Im a, alpha, log_sigma2)；
    alpha_locked 时 alpha 分量为 0。
    """
    _check_design(atom, design)
    cotangent = np.asarray(cotangent, dtype=float)
    if cotangent.shape != (design.J,):
        raise ShapeError(f"余切向量长度 {cotangent.shape} 与 J = {design.J} 不一致")
    energy = np.sum(np.abs(design.omegas) ** 2, axis=1)
    grad_re, grad_im, grad_alpha, grad_log_sigma2 = _cf_gradient(
        atom.a, atom.alpha, atom.sigma2, design.omegas, energy, cotangent
    )
    if atom.alpha_locked:
        grad_alpha = 0.0
    return np.concatenate([grad_re, grad_im, [grad_alpha, grad_log_sigma2]])


def nnls(atoms_matrix: np.ndarray, target: np.ndarray) -> np.ndarray:
    """非负最小二乘 min ||target - A beta||，beta >= 0（Lawson-Hanson 有效集法）"""
    atoms_matrix = np.asarray(atoms_matrix, dtype=float)
    target = np.asarray(target, dtype=float)
    if atoms_matrix.ndim != 2 or atoms_matrix.shape[1] == 0:
        return np.zeros(0)
    if atoms_matrix.shape[0] != target.size:
        raise ShapeError(f"原子矩阵行数 {atoms_matrix.shape[0]} 与目标长度 {target.size} 不一致")
    weights, _ = optimize.nnls(atoms_matrix, target)
    return weights


def hard_threshold(atoms_matrix: np.ndarray, target: np.ndarray, K: int) -> list[int]:
    """保留 K 个原子的编号（升序）

    在列归一化的原子矩阵上求非负最小二乘并按权重排序，范数很小的退化原子
    不会因为未归一化的大权重挤掉真实原子。权重相同时保留较早加入的原子。
    """
    atoms_matrix = np.asarray(atoms_matrix, dtype=float)
    norms = np.linalg.norm(atoms_matrix, axis=0)
    normalized = atoms_matrix / np.where(norms > 0, norms, np.inf)
    beta = nnls(normalized, target)
    return sorted(int(i) for i in np.argsort(-beta, kind="stable")[:K])


class _AtomSpace:
    """归一化坐标下单个原子的参数化

    参数向量为 [Re a, Im a, u, v]（alpha 锁定时省略 u），
    alpha = 0.2 + 1.8 sigmoid(u)，sigma2 = exp(v)。
    """

    def __init__(self, omegas: np.ndarray, alpha_locked: bool):
        self.omegas = omegas
        self.energy = np.sum(np.abs(omegas) ** 2, axis=1)
        self.M = omegas.shape[1]
        self.alpha_locked = alpha_locked
        self.size = 2 * self.M + (1 if alpha_locked else 2)

    def unpack(self, theta: np.ndarray) -> tuple[np.ndarray, float, float, float]:
        """返回 (a, alpha, sigma2, dalpha/du)"""
        M = self.M
        a = theta[:M] + 1j * theta[M:2 * M]
        if self.alpha_locked:
            alpha, slope = ALPHA_MAX, 0.0
        else:
            s = expit(theta[2 * M])
            alpha, slope = ALPHA_MIN + ALPHA_SPAN * s, ALPHA_SPAN * s * (1.0 - s)
        return a, float(alpha), float(np.exp(theta[-1])), float(slope)

    def pack(self, a: np.ndarray, alpha: float, sigma2: float) -> np.ndarray:
        parts = [a.real, a.imag]
        if not self.alpha_locked:
            p = np.clip((alpha - ALPHA_MIN) / ALPHA_SPAN, 1e-12, 1.0 - 1e-12)
            parts.append([np.clip(np.log(p / (1.0 - p)), *ALPHA_LOGIT_BOUNDS)])
        parts.append([np.clip(np.log(sigma2), *LOG_SIGMA2_BOUNDS)])
        return np.concatenate(parts)

    def bounds(self) -> list[tuple[float, float]]:
        bounds = [(-A_BOUND, A_BOUND)] * (2 * self.M)
        if not self.alpha_locked:
            bounds.append(ALPHA_LOGIT_BOUNDS)
        bounds.append(LOG_SIGMA2_BOUNDS)
        return bounds

    def on_bound(self, theta: np.ndarray) -> bool:
        """导向矢量分量或 sigma2 贴在上界：原子退化为过宽或过平的形状"""
        a_part = np.abs(theta[:2 * self.M])
        return bool(
            np.any(a_part >= A_BOUND - _BOUND_SLACK)
            or theta[-1] >= LOG_SIGMA2_BOUNDS[1] - _BOUND_SLACK
        )

    def cf(self, theta: np.ndarray) -> np.ndarray:
        a, alpha, sigma2, _ = self.unpack(theta)
        psi, _, _ = _cf_values(a, alpha, sigma2, self.omegas, self.energy)
        return psi

    def gradient(self, theta: np.ndarray, cotangent: np.ndarray) -> np.ndarray:
        a, alpha, sigma2, slope = self.unpack(theta)
        grad_re, grad_im, grad_alpha, grad_v = _cf_gradient(
            a, alpha, sigma2, self.omegas, self.energy, cotangent
        )
        parts = [grad_re, grad_im]
        if not self.alpha_locked:
            parts.append([grad_alpha * slope])
        parts.append([grad_v])
        return np.concatenate(parts)

    def initial(self, rng: np.random.Generator) -> np.ndarray:
        a = (rng.standard_normal(self.M) + 1j * rng.standard_normal(self.M)) / np.sqrt(2.0)
        alpha = ALPHA_MAX if self.alpha_locked else INIT_ALPHA
        return self.pack(a, alpha, INIT_SIGMA2_RATIO)

    def to_atom(self, theta: np.ndarray, scale: float) -> AtomParams:
        """转换回原始坐标"""
        a, alpha, sigma2, _ = self.unpack(theta)
        return AtomParams(
            a=a * scale,
            alpha=min(max(alpha, ALPHA_MIN), ALPHA_MAX),
            log_sigma2=float(np.log(sigma2) + 2.0 * np.log(scale)),
            alpha_locked=self.alpha_locked,
        )


class ClomprSolver:
    """CL-OMPR 求解器（单个频点）"""

    def __init__(self, sketch: Sketch, design: FrequencyDesign, opts: FitOptions):
        if sketch.J != design.J:
            raise ShapeError(f"草图长度 {sketch.J} 与频率设计长度 {design.J} 不一致")
        if np.allclose(sketch.y, 0.0):
            raise DataError("草图全为零，无法拟合")
        self.sketch = sketch
        self.design = design
        self.opts = opts
        self.scale = design.radius_scale
        self.space = _AtomSpace(design.omegas * self.scale, opts.alpha_locked)
        self.target_re = sketch.y.real
        self.target_im_energy = float(np.sum(sketch.y.imag ** 2))
        self.rng = np.random.default_rng(opts.seed)

    # 目标函数
    # ========

    def objective(self, psi_matrix: np.ndarray, weights: np.ndarray) -> float:
        residual = self.target_re - psi_matrix @ weights
        return float(residual @ residual) + self.target_im_energy

    def _atom_matrix(self, support: list[np.ndarray]) -> np.ndarray:
        if not support:
            return np.zeros((self.design.J, 0))
        return np.stack([self.space.cf(theta) for theta in support], axis=1)

    def _weights(self, psi_matrix: np.ndarray) -> np.ndarray:
        """2J 维实堆叠上的非负最小二乘"""
        stacked = np.vstack([psi_matrix, np.zeros_like(psi_matrix)])
        target = np.concatenate([self.target_re, self.sketch.y.imag])
        return nnls(stacked, target)

    # 步骤 1：与残差最相关的新原子
    # ============================

    def _correlation_fun_grad(self, theta: np.ndarray, residual_re: np.ndarray):
        psi = self.space.cf(theta)
        norm = np.linalg.norm(psi)
        if not np.isfinite(norm) or norm <= 0:
            raise _NonFiniteObjective("原子特征函数范数退化")
        inner = float(psi @ residual_re)
        value = -inner / norm
        cotangent = -(residual_re / norm - inner * psi / norm ** 3)
        grad = self.space.gradient(theta, cotangent)
        if not (np.isfinite(value) and np.all(np.isfinite(grad))):
            raise _NonFiniteObjective("相关度目标非有限")
        return value, grad

    def _search(self, residual_re: np.ndarray, inits: range) -> list[tuple[float, np.ndarray]]:
        candidates = []
        for init in inits:
            theta0 = self.space.initial(self.rng)
            try:
                sol = optimize.minimize(
                    self._correlation_fun_grad,
                    x0=theta0,
                    args=(residual_re,),
                    method="L-BFGS-B",
                    jac=True,
                    bounds=self.space.bounds(),
                    options={"maxiter": self.opts.max_gradient_steps},
                )
            except _NonFiniteObjective as e:
                logger.debug("atom_init_failed", init=init, error=str(e))
                continue
            if np.isfinite(sol.fun):
                candidates.append((float(sol.fun), sol.x))
        return candidates

    def find_atom(self, residual: np.ndarray) -> np.ndarray:
        """多次随机初始化，保留相关度最高的原子（平局取最早的初始化）

        停在导向矢量或 sigma2 上界的解不予采用；若全部初始化都停在边界，
        再补做一轮初始化，仍然没有内部解时才退而取边界上的最优解。
        """
        residual_re = residual.real
        n_inits = self.opts.n_inits_per_atom
        candidates = self._search(residual_re, range(n_inits))
        interior = [c for c in candidates if not self.space.on_bound(c[1])]
        if not interior:
            logger.debug("atom_on_bound_reinit", inits=n_inits)
            candidates += self._search(residual_re, range(n_inits, 2 * n_inits))
            interior = [c for c in candidates if not self.space.on_bound(c[1])]
        pool = interior or candidates
        if not pool:
            raise NumericalError(f"{n_inits} 次原子初始化全部失败")
        best_value, best_theta = pool[0]
        for value, theta in pool[1:]:
            if value < best_value:
                best_value, best_theta = value, theta
        return best_theta

    # 步骤 5：所有原子与权重的联合下降
    # ================================

    def _joint_fun_grad(self, params: np.ndarray, n_atoms: int):
        size = self.space.size
        thetas = params[:n_atoms * size].reshape(n_atoms, size)
        weights = params[n_atoms * size:]
        psi_matrix = np.stack([self.space.cf(theta) for theta in thetas], axis=1)
        residual = self.target_re - psi_matrix @ weights
        value = float(residual @ residual) + self.target_im_energy
        grads = [self.space.gradient(theta, -2.0 * weights[k] * residual) for k, theta in enumerate(thetas)]
        grads.append(-2.0 * psi_matrix.T @ residual)
        grad = np.concatenate(grads)
        if not (np.isfinite(value) and np.all(np.isfinite(grad))):
            raise _NonFiniteObjective("联合目标非有限")
        return value, grad

    def joint_descent(
        self,
        support: list[np.ndarray],
        weights: np.ndarray,
    ) -> tuple[list[np.ndarray], np.ndarray, list[float]]:
        """目标非有限时抛出 _NonFiniteObjective，由调用方换新的原子初始化重试"""
        n_atoms = len(support)
        size = self.space.size
        params0 = np.concatenate([np.concatenate(support), weights])
        bounds = self.space.bounds() * n_atoms + [(0.0, None)] * n_atoms
        trace = [self._joint_fun_grad(params0, n_atoms)[0]]

        def record(xk):
            trace.append(self._joint_fun_grad(xk, n_atoms)[0])

        sol = optimize.minimize(
            self._joint_fun_grad,
            x0=params0,
            args=(n_atoms,),
            method="L-BFGS-B",
            jac=True,
            bounds=bounds,
            callback=record,
            options={
                "maxiter": self.opts.max_gradient_steps,
                "ftol": self.opts.tolerance,
                "gtol": 1e-12,
            },
        )
        if not np.isfinite(sol.fun):
            raise _NonFiniteObjective("联合目标非有限")
        if sol.fun > trace[0]:
            return support, weights, trace
        thetas = sol.x[:n_atoms * size].reshape(n_atoms, size)
        new_weights = np.maximum(sol.x[n_atoms * size:], 0.0)
        return [theta.copy() for theta in thetas], new_weights, trace

    # 主循环
    # ======

    def _grow_support(
        self,
        support: list[np.ndarray],
        residual: np.ndarray,
    ) -> tuple[list[np.ndarray], np.ndarray, list[float]]:
        """步骤 (i)-(v)；联合下降出现非有限目标时丢弃新原子重新初始化"""
        K = self.opts.K
        for attempt in range(self.opts.n_inits_per_atom):
            # (i) + (ii) 加入新原子
            candidate = support + [self.find_atom(residual)]

            # (iii) 硬阈值：保留归一化权重最大的 K 个原子，实现替换
            if len(candidate) > K:
                psi_matrix = self._atom_matrix(candidate)
                keep = hard_threshold(psi_matrix, self.target_re, K)
                candidate = [candidate[i] for i in keep]

            # (iv) 非负最小二乘求权重
            weights = self._weights(self._atom_matrix(candidate))

            # (v) 联合梯度下降
            try:
                return self.joint_descent(candidate, weights)
            except _NonFiniteObjective as e:
                logger.warning(
                    "joint_descent_non_finite",
                    attempt=attempt,
                    n_atoms=len(candidate),
                    error=str(e),
                )
        raise NumericalError(f"联合下降在 {self.opts.n_inits_per_atom} 次原子初始化后仍不收敛")

    def fit(self) -> ClomprResult:
        y = self.sketch.y
        support: list[np.ndarray] = []
        weights = np.zeros(0)
        residual = y.copy()
        trace: list[float] = []

        for iteration in range(self.opts.outer_iterations):
            support, weights, trace = self._grow_support(support, residual)

            # (vi) 更新残差
            psi_matrix = self._atom_matrix(support)
            residual = y - psi_matrix @ weights
            logger.debug(
                "clompr_iteration",
                iteration=iteration,
                support=len(support),
                objective=self.objective(psi_matrix, weights),
            )

        total = float(weights.sum())
        if not total > 0 or not np.isfinite(total):
            raise NumericalError("CL-OMPR 得到的权重全为零")

        atoms = [self.space.to_atom(theta, self.scale) for theta in support]
        pis = weights / total
        theta = MixtureParams(components=[
            atom.to_component(pi=float(pi)) for atom, pi in zip(atoms, pis)
        ])
        objective = self.objective(self._atom_matrix(support), weights)
        return ClomprResult(theta=theta, weights=weights, objective=objective, objective_trace=trace)


def clompr_fit(sketch: Sketch, design: FrequencyDesign, opts: FitOptions) -> ClomprResult:
    """由草图拟合 K 成分混合模型"""
    return ClomprSolver(sketch, design, opts).fit()
