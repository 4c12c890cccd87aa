"""高斯特例的 EM 估计（单因子概率 PCA 混合），以及观测归一化的 Sawada 变体"""

from typing import Optional

import numpy as np
import structlog
from scipy.special import logsumexp

from ..distributions import gaussian_logpdf
from ..errors import DataError, NumericalError
from ..models import EmOptions, EmResult, MixtureParams

logger = structlog.get_logger()

# 方差下限相对于 trace(S)/M 的比例
VARIANCE_FLOOR_RATIO = 1e-8


def _as_data(data: np.ndarray) -> np.ndarray:
    data = np.asarray(data, dtype=np.complex128)
    if data.ndim == 1:
        data = data[:, None]
    return data


def component_log_scores(
    data: np.ndarray,
    theta: MixtureParams,
    cov_scale: float = 1.0,
    weights: Optional[np.ndarray] = None,
) -> np.ndarray:
    """log pi_k + log N_c(x_t; 0, cov_scale (a_k a_k* + sigma2_k I))，形状 (T, K)

    weights 用于覆盖模型中的先验（不要求归一化）。
    """
    data = _as_data(data)
    priors = theta.weights if weights is None else np.asarray(weights, dtype=float)
    with np.errstate(divide="ignore"):
        log_priors = np.log(priors)
    scores = np.empty((data.shape[0], theta.K))
    for k, component in enumerate(theta.components):
        scores[:, k] = log_priors[k] + gaussian_logpdf(data, component.a, component.sigma2, cov_scale)
    return scores


def responsibilities(data: np.ndarray, theta: MixtureParams, cov_scale: float = 1.0) -> np.ndarray:
    """后验概率 gamma_tk，每行和为 1"""
    scores = component_log_scores(data, theta, cov_scale)
    return np.exp(scores - logsumexp(scores, axis=1, keepdims=True))


def per_frequency_loglik(data: np.ndarray, theta: MixtureParams, cov_scale: float = 1.0) -> float:
    """sum_t log sum_k pi_k N_c(x_t; 0, cov_scale (a_k a_k* + sigma2_k I))"""
    data = _as_data(data)
    if data.shape[0] == 0:
        return 0.0
    return float(logsumexp(component_log_scores(data, theta, cov_scale), axis=1).sum())


def normalize_observations(data: np.ndarray) -> np.ndarray:
    """x_t / ||x_t||，丢弃零向量"""
    data = _as_data(data)
    norms = np.linalg.norm(data, axis=1)
    keep = norms > 0
    return data[keep] / norms[keep, None]


def _log_prob(data, steering, sigma2s, pis) -> np.ndarray:
    with np.errstate(divide="ignore"):
        log_pis = np.log(pis)
    return np.stack(
        [log_pis[k] + gaussian_logpdf(data, steering[k], sigma2s[k]) for k in range(len(pis))],
        axis=1,
    )


def ppca_update(scatter: np.ndarray, floor: float) -> tuple[np.ndarray, float]:
    """单因子概率 PCA 的 M 步：由加权协方差 S 求 (a, sigma2)"""
    M = scatter.shape[0]
    eigvals, eigvecs = np.linalg.eigh(scatter)
    if M > 1:
        sigma2 = float(np.sum(eigvals[:-1]) / (M - 1))
    else:
        sigma2 = floor
    sigma2 = max(sigma2, floor)
    a = eigvecs[:, -1] * np.sqrt(max(eigvals[-1] - sigma2, floor))
    return a, sigma2


class _EmRun:
    """一次从随机初始化开始的 EM"""

    def __init__(self, data: np.ndarray, opts: EmOptions, rng: np.random.Generator):
        self.data = data
        self.opts = opts
        T, M = data.shape
        K = opts.K
        picks = rng.choice(T, size=K, replace=T < K)
        energy = float(np.mean(np.sum(np.abs(data) ** 2, axis=1)))
        self.floor = max(VARIANCE_FLOOR_RATIO * energy / M, np.finfo(float).tiny)
        self.steering = data[picks].copy()
        self.sigma2s = np.full(K, max(0.1 * energy / M, self.floor))
        self.pis = np.full(K, 1.0 / K)

    def m_step(self, gamma: np.ndarray):
        T = self.data.shape[0]
        counts = gamma.sum(axis=0)
        self.pis = counts / T
        for k, count in enumerate(counts):
            if count <= 1e-12:
                continue
            scatter = (self.data.T * gamma[:, k]) @ self.data.conj() / count
            floor = max(VARIANCE_FLOOR_RATIO * float(np.real(np.trace(scatter))) / scatter.shape[0], self.floor)
            self.steering[k], self.sigma2s[k] = ppca_update(scatter, floor)

    def run(self) -> tuple[float, list[float], int]:
        history: list[float] = []
        converged = False
        iteration = 0
        for iteration in range(1, self.opts.max_iterations + 1):
            log_prob = _log_prob(self.data, self.steering, self.sigma2s, self.pis)
            norm = logsumexp(log_prob, axis=1)
            loglik = float(norm.sum())
            if not np.isfinite(loglik):
                raise NumericalError("EM 对数似然非有限")
            history.append(loglik)
            if len(history) > 1 and abs(loglik - history[-2]) <= self.opts.loglik_tolerance * abs(history[-2]):
                converged = True
                break
            self.m_step(np.exp(log_prob - norm[:, None]))

        if not converged:
            loglik = float(logsumexp(_log_prob(self.data, self.steering, self.sigma2s, self.pis), axis=1).sum())
            if not np.isfinite(loglik):
                raise NumericalError("EM 对数似然非有限")
            history.append(loglik)
        return history[-1], history, iteration

    def theta(self) -> MixtureParams:
        return MixtureParams.from_arrays(self.steering, 2.0, self.sigma2s, self.pis)


def em_fit(data: np.ndarray, opts: EmOptions) -> EmResult:
    """多次重启的 EM，返回对数似然最高的一次"""
    data = _as_data(data)
    if opts.normalize_observations:
        data = normalize_observations(data)
    if data.shape[0] == 0:
        raise DataError("EM 需要至少一个观测")
    if not np.any(data):
        raise DataError("数据尺度退化 (degenerate data scale)")

    seeds = np.random.SeedSequence(opts.seed).spawn(opts.n_restarts)
    best: Optional[EmResult] = None
    collapsed = 0
    for restart, seed in enumerate(seeds):
        run = _EmRun(data, opts, np.random.default_rng(seed))
        try:
            loglik, history, n_iterations = run.run()
            theta = run.theta()
        except (NumericalError, ValueError) as e:
            collapsed += 1
            logger.warning("em_restart_collapsed", restart=restart, error=str(e))
            continue
        logger.debug("em_restart_done", restart=restart, loglik=loglik, iterations=n_iterations)
        if best is None or loglik > best.loglik:
            best = EmResult(theta=theta, loglik=loglik, history=history, n_iterations=n_iterations)

    if best is None:
        raise NumericalError(f"EM 的 {opts.n_restarts} 次重启全部塌缩")
    return best.model_copy(update={"n_collapsed": collapsed})
