"""Models 单元测试

测试 src/models/ 下的 Pydantic 模型
"""

import numpy as np
import pytest

from src.models import (
    AtomParams,
    ComponentParams,
    FitOptions,
    FrequencyDesign,
    FrequencyFit,
    MaskSet,
    Method,
    MixtureParams,
    SeparationReport,
    Sketch,
    SourceScores,
    Spectrogram,
    complex_to_pairs,
)


class TestComponentParams:
    """ComponentParams 模型测试"""

    def test_creation(self):
        """测试创建"""
        component = ComponentParams(a=[1.0, 1j], alpha=1.5, sigma2=0.1, pi=0.4)
        assert component.n_channels == 2
        assert component.a.dtype == np.complex128
        assert component.pi == 0.4

    def test_pairs_coerced(self):
        """测试 [实部, 虚部] 对转为复数"""
        component = ComponentParams(a=[[1.0, 0.0], [0.0, 2.0]], alpha=2.0, sigma2=1.0)
        np.testing.assert_array_equal(component.a, [1.0, 2j])

    @pytest.mark.parametrize(
        "field,value",
        [("alpha", 0.0), ("alpha", 2.1), ("sigma2", 0.0), ("sigma2", float("inf")), ("pi", 1.5)],
    )
    def test_invalid_values(self, field, value):
        """测试非法取值"""
        params = {"a": [1.0, 0.0], "alpha": 1.5, "sigma2": 0.1, "pi": 1.0}
        params[field] = value
        with pytest.raises(ValueError):
            ComponentParams(**params)

    def test_zero_steering(self):
        """测试零导向矢量"""
        with pytest.raises(ValueError):
            ComponentParams(a=[0.0, 0.0], alpha=1.5, sigma2=0.1)

    def test_to_dict(self):
        """测试序列化"""
        data = ComponentParams(a=[1.0, 1j], alpha=1.5, sigma2=0.1).to_dict()
        assert data["a"] == [[1.0, 0.0], [0.0, 1.0]]
        assert ComponentParams(**data).alpha == 1.5


class TestMixtureParams:
    """MixtureParams 模型测试"""

    def test_from_arrays_normalizes(self):
        """测试权重归一化"""
        theta = MixtureParams.from_arrays(np.eye(2), [1.2, 1.8], 0.1, [1.0, 3.0])
        assert theta.K == 2 and theta.M == 2
        np.testing.assert_allclose(theta.weights, [0.25, 0.75])
        np.testing.assert_allclose(theta.alphas, [1.2, 1.8])
        np.testing.assert_allclose(theta.sigma2s, [0.1, 0.1])
        assert theta.steering.shape == (2, 2)

    def test_weights_must_sum_to_one(self):
        """测试权重之和"""
        component = ComponentParams(a=[1.0], alpha=2.0, sigma2=1.0, pi=0.5)
        with pytest.raises(ValueError):
            MixtureParams(components=[component])

    def test_channel_mismatch(self):
        """测试通道数不一致"""
        with pytest.raises(ValueError):
            MixtureParams(components=[
                ComponentParams(a=[1.0], alpha=2.0, sigma2=1.0, pi=0.5),
                ComponentParams(a=[1.0, 0.0], alpha=2.0, sigma2=1.0, pi=0.5),
            ])

    def test_empty(self):
        """测试空混合"""
        with pytest.raises(ValueError):
            MixtureParams(components=[])

    def test_round_trip_dict(self):
        """测试字典往返"""
        theta = MixtureParams.from_arrays(np.array([[1.0, 0.5j]]), 1.3, 0.2, [1.0])
        restored = MixtureParams(**theta.to_dict())
        np.testing.assert_allclose(restored.steering, theta.steering)


class TestAtomParams:
    """AtomParams 模型测试"""

    def test_sigma2(self):
        """测试 sigma2 = exp(log_sigma2)"""
        atom = AtomParams(a=[1.0, 0.0], alpha=1.5, log_sigma2=np.log(0.2))
        assert atom.sigma2 == pytest.approx(0.2)
        component = atom.to_component(pi=1.0)
        assert component.sigma2 == pytest.approx(0.2)

    def test_alpha_bounds(self):
        """测试估计路径中的 alpha 下限"""
        with pytest.raises(ValueError):
            AtomParams(a=[1.0], alpha=0.1)

    def test_locked_requires_two(self):
        """测试锁定 alpha 必须为 2"""
        with pytest.raises(ValueError):
            AtomParams(a=[1.0], alpha=1.5, alpha_locked=True)
        assert AtomParams(a=[1.0], alpha=2.0, alpha_locked=True).alpha_locked

    def test_outer_iterations_default(self):
        """测试默认外层迭代次数为 2K"""
        assert FitOptions(K=3).outer_iterations == 6
        assert FitOptions(K=3, n_outer_iterations=4).outer_iterations == 4


class TestSketchModels:
    """草图模型测试"""

    def test_design_from_pairs(self):
        """测试频率设计从 [实部, 虚部] 对恢复"""
        omegas = np.array([[1.0 + 2j, -1j]])
        design = FrequencyDesign(**FrequencyDesign(omegas=omegas, radius_scale=2.0, seed=1).to_dict())
        np.testing.assert_array_equal(design.omegas, omegas)
        assert design.J == 1 and design.M == 2

    def test_design_invalid(self):
        """测试非法频率设计"""
        with pytest.raises(ValueError):
            FrequencyDesign(omegas=np.ones((2, 2)), radius_scale=0.0, seed=0)
        with pytest.raises(ValueError):
            FrequencyDesign(omegas=np.full((2, 2), np.nan), radius_scale=1.0, seed=0)

    def test_sketch_modulus(self):
        """测试草图分量的模不超过 1"""
        with pytest.raises(ValueError):
            Sketch(y=[1.5], n_samples=1)
        sketch = Sketch(**Sketch(y=[0.5j, 1.0], n_samples=10).to_dict())
        np.testing.assert_array_equal(sketch.y, [0.5j, 1.0])


class TestSignalModels:
    """信号模型测试"""

    def test_spectrogram_frequency_count(self):
        """测试频点数与窗长一致"""
        with pytest.raises(ValueError):
            Spectrogram(values=np.zeros((2, 5, 3)), window_length=16, hop=4, length=10)
        spec = Spectrogram(values=np.zeros((2, 9, 3)), window_length=16, hop=4, length=10)
        assert spec.frequency_data(0).shape == (3, 2)

    def test_spectrogram_finite(self):
        """测试非有限值"""
        values = np.zeros((1, 9, 2), dtype=complex)
        values[0, 0, 0] = np.nan
        with pytest.raises(ValueError):
            Spectrogram(values=values, window_length=16, hop=4, length=10)


class TestSeparationModels:
    """分离结果模型测试"""

    def test_method_properties(self):
        """测试方法属性"""
        assert not Method.ORACLE.is_blind
        assert Method.CF_ALPHA.uses_sketch and Method.CF_GMM.uses_sketch
        assert not Method.SAWADA.uses_sketch
        assert Method.SAWADA.normalizes_observations
        assert Method.CF_GMM.cov_scale == 4.0
        assert Method.EM.cov_scale == 1.0
        assert Method("cf-alpha") is Method.CF_ALPHA

    def test_mask_set(self):
        """测试掩码"""
        masks = MaskSet(labels=np.array([[0, 1], [1, 1]]), n_sources=2)
        np.testing.assert_array_equal(masks.mask(1), [[False, True], [True, True]])

    def test_frequency_fit_to_dict(self):
        """测试逐频拟合序列化"""
        theta = MixtureParams.from_arrays(np.eye(2), 2.0, 0.1, [1.0, 1.0])
        fit = FrequencyFit(f=4, theta=theta, method=Method.EM, loglik=-10.0)
        data = fit.to_dict()
        assert data["f"] == 4 and data["method"] == "em"
        assert data["fallback"] is False
        assert len(data["theta"]["components"]) == 2

    def test_report_to_dict(self):
        """测试报告序列化"""
        report = SeparationReport(
            method="oracle",
            n_sources=2,
            scores=[SourceScores(source=0, sdr_db=10.0, sir_db=20.0)],
        )
        data = report.to_dict()
        assert data["scores"][0]["mer_db"] is None
        assert SeparationReport(**data) == report


def test_complex_to_pairs_nested():
    """测试二维复数数组转换"""
    assert complex_to_pairs(np.array([[1 + 2j], [3j]])) == [[[1.0, 2.0]], [[0.0, 3.0]]]
