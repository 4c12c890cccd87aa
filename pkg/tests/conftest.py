"""测试公共夹具"""

import copy

import pytest

from src.config import build_config

# 小窗长、短时长，让完整流程在测试中足够快
SMALL_CONFIG = {
    "n_sources": 2,
    "seed": 0,
    "workers": 1,
    "stft": {"sample_rate": 16000, "window_length": 64, "hop": 16},
    "sketch": {"n_frequencies": 40, "subsample_size": 2000},
    "clompr": {"n_inits_per_atom": 2, "max_gradient_steps": 40},
    "em": {"n_restarts": 2, "max_iterations": 30},
    "metrics": {"filter_length": 8},
    "synthetic": {"duration": 0.5},
    "bench": {"n_trials": 2, "methods": ["em", "oracle"]},
    "logging": {"level": "WARNING", "json": False},
}


def _merge(base: dict, overrides: dict) -> dict:
    merged = copy.deepcopy(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


@pytest.fixture
def small_config():
    """返回按需覆盖字段的小规模配置工厂"""
    def factory(**overrides):
        return build_config(_merge(SMALL_CONFIG, overrides), use_env=False)
    return factory
