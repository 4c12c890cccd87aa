"""草图测试"""

import numpy as np
import pytest

from src.errors import DataError, ShapeError
from src.estimators import (
    compute_sketch,
    default_n_frequencies,
    draw_frequencies,
    merge_sketches,
    sketch_data,
)
from src.models import FrequencyDesign


def _gaussian_data(T: int, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """协方差为 a a* + 0.1 I 的复高斯数据"""
    rng = np.random.default_rng(seed)
    a = np.array([1.0, 0.6 - 0.3j])
    s = (rng.standard_normal(T) + 1j * rng.standard_normal(T)) / np.sqrt(2)
    noise = np.sqrt(0.1 / 2) * (rng.standard_normal((T, 2)) + 1j * rng.standard_normal((T, 2)))
    cov = np.outer(a, a.conj()) + 0.1 * np.eye(2)
    return s[:, None] * a[None, :] + noise, cov


class TestFrequencyDesign:
    """随机频率设计测试"""

    def test_default_size(self):
        """测试默认草图长度"""
        assert default_n_frequencies(3, 2) == 210
        assert default_n_frequencies(1, 1) == 50

    def test_shape_and_determinism(self):
        """测试形状与可复现性"""
        data, _ = _gaussian_data(1000)
        first = draw_frequencies(data, 50, seed=3)
        second = draw_frequencies(data, 50, seed=3)
        assert first.omegas.shape == (50, 2)
        assert first.J == 50 and first.M == 2
        np.testing.assert_array_equal(first.omegas, second.omegas)
        assert first.radius_scale > 0

    def test_scale_follows_data(self):
        """测试数据放大 10 倍时频率缩小 10 倍"""
        data, _ = _gaussian_data(1000)
        small = draw_frequencies(data, 20, seed=1)
        large = draw_frequencies(10 * data, 20, seed=1)
        assert large.radius_scale == pytest.approx(10 * small.radius_scale)
        np.testing.assert_allclose(large.omegas, small.omegas / 10)

    def test_degenerate_data(self):
        """测试全零数据"""
        with pytest.raises(DataError, match="degenerate data scale"):
            draw_frequencies(np.zeros((100, 2)), 10, seed=0)

    def test_empty_data(self):
        """测试空数据"""
        with pytest.raises(DataError):
            draw_frequencies(np.zeros((0, 2)), 10, seed=0)

    def test_invalid_size(self):
        """测试 J 非正"""
        data, _ = _gaussian_data(100)
        with pytest.raises(DataError):
            draw_frequencies(data, 0, seed=0)


class TestSketch:
    """经验特征函数测试"""

    def test_modulus_bounded(self):
        """测试每个分量的模不超过 1"""
        data, _ = _gaussian_data(2000)
        design, sketch = sketch_data(data, 100, seed=0)
        assert sketch.J == design.J == 100
        assert np.all(np.abs(sketch.y) <= 1.0 + 1e-12)
        assert sketch.n_samples == 2000

    def test_zero_frequency(self):
        """测试零频率处草图为 1"""
        data, _ = _gaussian_data(100)
        design = FrequencyDesign(omegas=np.zeros((1, 2)), radius_scale=1.0, seed=0)
        assert compute_sketch(data, design).y[0] == pytest.approx(1.0)

    def test_matches_gaussian_cf(self):
        """测试复高斯数据的草图接近 exp(-w* C w / 4)"""
        data, cov = _gaussian_data(40000, seed=2)
        design, sketch = sketch_data(data, 30, seed=5)
        expected = np.exp(-0.25 * np.real(np.einsum("jm,mn,jn->j", design.omegas.conj(), cov, design.omegas)))
        assert np.max(np.abs(sketch.y - expected)) < 0.03

    def test_merge_equals_concatenation(self):
        """测试按样本数加权合并等价于拼接数据"""
        data, _ = _gaussian_data(3000, seed=4)
        design = draw_frequencies(data, 40, seed=0)
        merged = merge_sketches([compute_sketch(data[:1000], design), compute_sketch(data[1000:], design)])
        whole = compute_sketch(data, design)
        np.testing.assert_allclose(merged.y, whole.y, atol=1e-12)
        assert merged.n_samples == 3000

    def test_merge_empty(self):
        """测试合并空列表"""
        with pytest.raises(DataError):
            merge_sketches([])

    def test_dimension_mismatch(self):
        """测试维度不一致"""
        data, _ = _gaussian_data(100)
        design = FrequencyDesign(omegas=np.ones((5, 3)), radius_scale=1.0, seed=0)
        with pytest.raises(ShapeError):
            compute_sketch(data, design)
