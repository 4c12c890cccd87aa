"""CL-OMPR 测试"""

from itertools import permutations, product

import numpy as np
import pytest

from src.distributions import component_cf, mixture_cf, sample_sas_complex
from src.errors import DataError, NumericalError, ShapeError
from src.estimators import (
    ClomprSolver,
    atom_cf_vector,
    atom_gradient,
    clompr_fit,
    default_n_frequencies,
    hard_threshold,
    nnls,
    sketch_data,
)
from src.estimators import clompr as clompr_module
from src.estimators.clompr import A_BOUND, LOG_SIGMA2_BOUNDS, _AtomSpace
from src.models import ALPHA_MAX, AtomParams, FitOptions, FrequencyDesign, MixtureParams, Sketch


def _design(J: int, M: int = 2, seed: int = 0, scale: float = 1.0) -> FrequencyDesign:
    rng = np.random.default_rng(seed)
    directions = rng.standard_normal((J, M)) + 1j * rng.standard_normal((J, M))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = np.abs(rng.standard_normal(J))
    return FrequencyDesign(omegas=(radii / scale)[:, None] * directions, radius_scale=scale, seed=seed)


def _random_atom(rng: np.random.Generator, alpha: float, locked: bool = False) -> AtomParams:
    a = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    return AtomParams(a=a, alpha=alpha, log_sigma2=rng.uniform(-3, 0), alpha_locked=locked)


def _correlation(a_hat: np.ndarray, a: np.ndarray) -> float:
    return abs(np.vdot(a_hat, a)) / (np.linalg.norm(a_hat) * np.linalg.norm(a))


def _best_pairing(theta_hat: MixtureParams, theta: MixtureParams) -> list[int]:
    """按导向矢量相关度的最优配对：返回 theta 中第 k 个成分对应的估计编号"""
    K = theta.K
    best, best_score = None, -np.inf
    for perm in permutations(range(theta_hat.K), K):
        score = sum(
            _correlation(theta_hat.components[perm[k]].a, theta.components[k].a) for k in range(K)
        )
        if score > best_score:
            best, best_score = list(perm), score
    return best


def _separated_steering(rng: np.random.Generator, K: int, max_correlation: float = 0.8) -> np.ndarray:
    """两两相关度低于 max_correlation 的随机导向矢量"""
    while True:
        steering = rng.standard_normal((K, 2)) + 1j * rng.standard_normal((K, 2))
        if all(
            _correlation(steering[i], steering[j]) < max_correlation
            for i in range(K) for j in range(i + 1, K)
        ):
            return steering


def _analytic_sketch(theta: MixtureParams, design: FrequencyDesign) -> Sketch:
    return Sketch(y=mixture_cf(theta, design.omegas).astype(complex), n_samples=1)


class TestAtomCf:
    """原子特征函数与梯度测试"""

    def test_matches_component_cf(self):
        """测试与成分特征函数一致"""
        rng = np.random.default_rng(0)
        atom = _random_atom(rng, 1.3)
        design = _design(20)
        np.testing.assert_allclose(
            atom_cf_vector(atom, design), component_cf(atom.to_component(), design.omegas)
        )

    def _finite_difference(self, atom: AtomParams, design: FrequencyDesign, cotangent: np.ndarray) -> np.ndarray:
        M = atom.n_channels
        h = 1e-6

        def value(re, im, alpha, log_sigma2):
            perturbed = AtomParams(a=re + 1j * im, alpha=alpha, log_sigma2=log_sigma2)
            return float(cotangent @ atom_cf_vector(perturbed, design))

        base = [atom.a.real.copy(), atom.a.imag.copy(), atom.alpha, atom.log_sigma2]
        grad = np.zeros(2 * M + 2)
        for part in range(2):
            for m in range(M):
                plus = [p.copy() if isinstance(p, np.ndarray) else p for p in base]
                minus = [p.copy() if isinstance(p, np.ndarray) else p for p in base]
                plus[part][m] += h
                minus[part][m] -= h
                grad[part * M + m] = (value(*plus) - value(*minus)) / (2 * h)
        for idx, slot in ((2, 2 * M), (3, 2 * M + 1)):
            plus, minus = list(base), list(base)
            plus[idx] += h
            minus[idx] -= h
            grad[slot] = (value(*plus) - value(*minus)) / (2 * h)
        return grad

    def test_gradient_matches_finite_differences(self):
        """测试 200 个随机实例上每个偏导数与中心差分一致（含 alpha 接近 0.2 与 2 的原子）"""
        failures = []
        for instance in range(200):
            rng = np.random.default_rng(instance)
            alpha = [
                rng.uniform(0.201, 0.25),
                rng.uniform(1.95, 1.999),
                rng.uniform(0.3, 1.9),
            ][instance % 3]
            atom = _random_atom(rng, alpha)
            design = _design(15, seed=instance + 1000)
            cotangent = rng.standard_normal(design.J)
            analytic = atom_gradient(atom, design, cotangent)
            numeric = self._finite_difference(atom, design, cotangent)
            if np.any(np.abs(analytic - numeric) > 1e-4 * np.abs(numeric) + 1e-7):
                failures.append(instance)
        assert failures == []

    def test_locked_alpha_slot_is_zero(self):
        """测试 alpha 锁定时梯度的 alpha 分量为 0"""
        rng = np.random.default_rng(1)
        atom = _random_atom(rng, 2.0, locked=True)
        design = _design(10)
        grad = atom_gradient(atom, design, np.ones(design.J))
        assert grad.shape == (6,)
        assert grad[4] == 0.0

    def test_cotangent_length(self):
        """测试余切向量长度不一致"""
        rng = np.random.default_rng(2)
        with pytest.raises(ShapeError):
            atom_gradient(_random_atom(rng, 1.5), _design(10), np.ones(9))


class TestNnls:
    """非负最小二乘测试"""

    def test_exact_nonnegative_solution(self):
        """测试可精确表示的目标"""
        rng = np.random.default_rng(0)
        A = rng.random((20, 3))
        beta = np.array([0.5, 0.0, 2.0])
        np.testing.assert_allclose(nnls(A, A @ beta), beta, atol=1e-10)

    def test_clips_negative_direction(self):
        """测试负系数被截断为 0"""
        A = np.eye(2)
        weights = nnls(A, np.array([1.0, -1.0]))
        np.testing.assert_allclose(weights, [1.0, 0.0])

    def test_empty_dictionary(self):
        """测试空字典"""
        assert nnls(np.zeros((4, 0)), np.ones(4)).size == 0

    @pytest.mark.parametrize("seed", range(20))
    def test_matches_active_set_enumeration(self, seed):
        """测试 6x3 随机实例的目标值等于枚举所有支撑集得到的最优值"""
        rng = np.random.default_rng(seed)
        A = rng.standard_normal((6, 3))
        target = rng.standard_normal(6)

        best = float(target @ target)
        for mask in product([False, True], repeat=3):
            columns = [i for i in range(3) if mask[i]]
            if not columns:
                continue
            coef, *_ = np.linalg.lstsq(A[:, columns], target, rcond=None)
            if np.all(coef >= 0):
                residual = target - A[:, columns] @ coef
                best = min(best, float(residual @ residual))

        weights = nnls(A, target)
        residual = target - A @ weights
        assert np.all(weights >= 0)
        assert float(residual @ residual) == pytest.approx(best, abs=1e-8)


class TestHardThreshold:
    """硬阈值测试"""

    def test_ranks_by_normalized_weights(self):
        """测试范数很小的原子不会因未归一化的大权重挤掉真实原子"""
        atoms = np.diag([1.0, 1.0, 0.01])
        target = np.array([1.0, 0.8, 0.05])
        # 未归一化的权重为 [1, 0.8, 5]
        np.testing.assert_allclose(nnls(atoms, target), [1.0, 0.8, 5.0])
        assert hard_threshold(atoms, target, 2) == [0, 1]

    def test_tie_keeps_earlier_atoms(self):
        """测试权重相同时保留较早加入的原子"""
        assert hard_threshold(np.eye(3), np.ones(3), 2) == [0, 1]

    def test_zero_column_dropped(self):
        """测试全零列被优先剔除"""
        atoms = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]])
        assert hard_threshold(atoms, np.array([1.0, 0.5, 0.0]), 2) == [1, 2]


class TestAtomSpace:
    """归一化参数空间测试"""

    def setup_method(self):
        self.space = _AtomSpace(_design(10).omegas, alpha_locked=False)

    def test_all_parameters_bounded(self):
        """测试导向矢量、alpha 与 sigma2 都有有限边界"""
        bounds = self.space.bounds()
        assert len(bounds) == self.space.size
        assert all(np.isfinite(low) and np.isfinite(high) for low, high in bounds)
        assert _AtomSpace(_design(10).omegas, alpha_locked=True).size == 5

    def test_on_bound(self):
        """测试导向矢量或 sigma2 贴上界时判为退化，sigma2 贴下界不算"""
        interior = self.space.pack(np.array([0.5 + 0.1j, -1.0j]), 1.5, 0.1)
        assert not self.space.on_bound(interior)
        wide = interior.copy()
        wide[1] = -A_BOUND
        assert self.space.on_bound(wide)
        flat = interior.copy()
        flat[-1] = LOG_SIGMA2_BOUNDS[1]
        assert self.space.on_bound(flat)
        sharp = interior.copy()
        sharp[-1] = LOG_SIGMA2_BOUNDS[0]
        assert not self.space.on_bound(sharp)


class TestClomprFit:
    """CL-OMPR 拟合测试"""

    def test_single_component_recovery(self):
        """测试无噪声解析草图下单成分的恢复"""
        theta = MixtureParams.from_arrays(np.array([[1.0, 0.5 + 0.5j]]), 1.5, 0.1, [1.0])
        design = _design(200, seed=7)
        result = clompr_fit(_analytic_sketch(theta, design), design, FitOptions(K=1, seed=0))
        component = result.theta.components[0]
        assert _correlation(component.a, theta.components[0].a) > 0.999
        assert component.alpha == pytest.approx(1.5, abs=0.1)
        assert component.sigma2 == pytest.approx(0.1, rel=0.25)
        assert result.objective < 1e-3

    def test_alpha_locked(self):
        """测试 alpha 锁定时所有成分的 alpha 为 2"""
        theta = MixtureParams.from_arrays(np.array([[1.0, 1j], [1.0, -1.0]]), 2.0, 0.05, [0.5, 0.5])
        design = _design(140, seed=3)
        result = clompr_fit(
            _analytic_sketch(theta, design),
            design,
            FitOptions(K=2, seed=1, alpha_locked=True, max_gradient_steps=100),
        )
        assert result.theta.K == 2
        assert all(c.alpha == 2.0 for c in result.theta.components)
        assert result.theta.weights.sum() == pytest.approx(1.0)

    def test_fitted_atoms_inside_bounds(self):
        """测试拟合得到的原子不会发散到极大的导向矢量或退化的 sigma2"""
        rng = np.random.default_rng(5)
        theta = MixtureParams.from_arrays(_separated_steering(rng, 2), [1.3, 1.7], [0.1, 0.15], [0.6, 0.4])
        design = _design(140, seed=11)
        sketch = _analytic_sketch(theta, design)
        result = clompr_fit(sketch, design, FitOptions(K=2, seed=2, max_gradient_steps=100))
        scale = design.radius_scale
        for component in result.theta.components:
            assert np.all(np.abs(component.a.real) <= A_BOUND * scale + 1e-9)
            assert np.all(np.abs(component.a.imag) <= A_BOUND * scale + 1e-9)
            assert component.alpha < ALPHA_MAX
            assert component.sigma2 <= np.exp(LOG_SIGMA2_BOUNDS[1]) * scale ** 2 * (1 + 1e-9)
        assert result.objective <= float(np.sum(np.abs(sketch.y) ** 2)) + 1e-12

    def test_objective_trace_recorded(self):
        """测试记录联合下降的目标函数轨迹且不上升"""
        theta = MixtureParams.from_arrays(np.array([[1.0, 0.3]]), 1.2, 0.2, [1.0])
        design = _design(100, seed=9)
        result = clompr_fit(_analytic_sketch(theta, design), design, FitOptions(K=1, seed=4))
        assert len(result.objective_trace) >= 1
        assert result.objective_trace[-1] <= result.objective_trace[0] + 1e-12
        assert result.weights.shape == (1,)
        assert np.all(result.weights >= 0)

    def test_non_finite_descent_retried(self, monkeypatch):
        """测试联合下降出现非有限目标时换新的原子初始化重试"""
        theta = MixtureParams.from_arrays(np.array([[1.0, 0.3]]), 1.4, 0.1, [1.0])
        design = _design(60, seed=2)
        original = ClomprSolver._joint_fun_grad
        calls = []

        def flaky(solver, params, n_atoms):
            calls.append(n_atoms)
            if len(calls) == 1:
                raise clompr_module._NonFiniteObjective("联合目标非有限")
            return original(solver, params, n_atoms)

        monkeypatch.setattr(ClomprSolver, "_joint_fun_grad", flaky)
        result = clompr_fit(
            _analytic_sketch(theta, design), design, FitOptions(K=1, seed=0, max_gradient_steps=50)
        )
        assert len(calls) > 1
        assert np.isfinite(result.objective)
        assert result.theta.K == 1

    def test_non_finite_descent_exhausted(self, monkeypatch):
        """测试所有原子初始化都导致非有限目标时报错"""
        theta = MixtureParams.from_arrays(np.array([[1.0, 0.3]]), 1.4, 0.1, [1.0])
        design = _design(60, seed=2)

        def broken(solver, params, n_atoms):
            raise clompr_module._NonFiniteObjective("联合目标非有限")

        monkeypatch.setattr(ClomprSolver, "_joint_fun_grad", broken)
        with pytest.raises(NumericalError):
            clompr_fit(
                _analytic_sketch(theta, design),
                design,
                FitOptions(K=1, seed=0, n_inits_per_atom=2, max_gradient_steps=20),
            )

    def test_zero_sketch(self):
        """测试全零草图"""
        design = _design(10)
        with pytest.raises(DataError):
            clompr_fit(Sketch(y=np.zeros(10), n_samples=1), design, FitOptions(K=1))

    def test_length_mismatch(self):
        """测试草图与频率设计长度不一致"""
        with pytest.raises(ShapeError):
            clompr_fit(Sketch(y=np.ones(9), n_samples=1), _design(10), FitOptions(K=1))

    @pytest.mark.slow
    @pytest.mark.parametrize("K", [1, 2, 3])
    def test_analytic_recovery_rate(self, K):
        """测试 20 个随机实例中至少 18 个恢复所有成分"""
        successes = 0
        for instance in range(20):
            rng = np.random.default_rng(1000 * K + instance)
            steering = _separated_steering(rng, K)
            alphas = rng.uniform(1.1, 1.9, K)
            sigma2s = rng.uniform(0.05, 0.2, K)
            weights = rng.uniform(0.5, 1.0, K)
            theta = MixtureParams.from_arrays(steering, alphas, sigma2s, weights)
            design = _design(200, seed=instance)
            result = clompr_fit(_analytic_sketch(theta, design), design, FitOptions(K=K, seed=instance))
            pairing = _best_pairing(result.theta, theta)
            ok = all(
                _correlation(result.theta.components[pairing[k]].a, theta.components[k].a) > 0.999
                and abs(result.theta.components[pairing[k]].alpha - theta.components[k].alpha) <= 0.05
                and abs(result.theta.components[pairing[k]].sigma2 / theta.components[k].sigma2 - 1) <= 0.1
                for k in range(K)
            )
            successes += ok
        assert successes >= 18


class TestGaussianData:
    """CF-GMM 在高斯采样数据上的恢复"""

    STEERING = np.array([[1.0, 0.5j], [0.3, 1.0 - 0.2j]])

    def _sample(self, T: int, seed: int, sigma2: float = 0.01) -> np.ndarray:
        """每个样本来自一个成分：x = a_z s + sigma n，s 与 n 的特征函数为 exp(-|w|^2)"""
        rng = np.random.default_rng(seed)
        steering = self.STEERING / np.linalg.norm(self.STEERING, axis=1, keepdims=True)
        labels = rng.integers(0, 2, T)
        sources = sample_sas_complex(2.0, T, rng)
        noise = np.stack([sample_sas_complex(2.0, T, rng) for _ in range(2)], axis=1)
        return sources[:, None] * steering[labels] + np.sqrt(sigma2) * noise

    @pytest.mark.slow
    def test_cf_gmm_steering_recovery(self):
        """测试 T = 20000、K = 2 时导向矢量相关度超过 0.99"""
        steering = self.STEERING / np.linalg.norm(self.STEERING, axis=1, keepdims=True)
        truth = MixtureParams.from_arrays(steering, 2.0, 0.01, [0.5, 0.5])
        successes = 0
        for seed in range(10):
            data = self._sample(20000, seed)
            design, sketch = sketch_data(data, default_n_frequencies(2, 2), seed=seed)
            result = clompr_fit(sketch, design, FitOptions(K=2, seed=seed, alpha_locked=True))
            pairing = _best_pairing(result.theta, truth)
            successes += all(
                _correlation(result.theta.components[pairing[k]].a, steering[k]) > 0.99 for k in range(2)
            )
        assert successes >= 9
