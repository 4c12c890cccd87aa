"""配置管理模块"""

import os
from pathlib import Path
from typing import Any, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, EnvSettingsSource, SettingsConfigDict, SettingsError

from .errors import ConfigError
from .models import EmOptions, FitOptions, Method


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class StftConfig(_Section):
    """STFT 配置"""
    sample_rate: int = Field(default=16000, gt=0)
    window_length: int = Field(default=1024, ge=2)
    hop: int = Field(default=256, ge=1)

    @model_validator(mode="after")
    def _check_hop(self) -> "StftConfig":
        if self.window_length % 2:
            raise ValueError(f"window_length 必须为偶数: {self.window_length}")
        if self.window_length % self.hop:
            raise ValueError(f"hop ({self.hop}) 必须整除 window_length ({self.window_length})")
        return self


class SketchConfig(_Section):
    """草图配置"""
    n_frequencies: Optional[int] = Field(default=None, ge=1)  # None 表示 10 K (2M + 3)
    subsample_size: int = Field(default=5000, ge=1)


class ClomprConfig(_Section):
    """CL-OMPR 配置"""
    n_outer_iterations: Optional[int] = Field(default=None, ge=1)  # None 表示 2K
    n_inits_per_atom: int = Field(default=5, ge=1)
    max_gradient_steps: int = Field(default=300, ge=1)
    tolerance: float = Field(default=1e-8, gt=0)


class EmConfig(_Section):
    """EM 配置"""
    n_restarts: int = Field(default=10, ge=1)
    max_iterations: int = Field(default=200, ge=1)
    loglik_tolerance: float = Field(default=1e-7, gt=0)


class MetricsConfig(_Section):
    """评估配置"""
    filter_length: int = Field(default=32, ge=1)


class SyntheticConfig(_Section):
    """合成源配置"""
    duration: float = Field(default=10.0, gt=0)
    alphas: Optional[list[float]] = None  # 每个源一个 alpha
    alpha_range: Optional[tuple[float, float]] = (1.2, 1.6)  # 每个 (源, 频点) 均匀抽取
    envelope: bool = True

    @model_validator(mode="after")
    def _check_alphas(self) -> "SyntheticConfig":
        values = list(self.alphas or []) + list(self.alpha_range or [])
        if any(not 0 < a <= 2 for a in values):
            raise ValueError("alpha 必须位于 (0, 2]")
        if self.alpha_range is not None and self.alpha_range[0] > self.alpha_range[1]:
            raise ValueError(f"alpha_range 上下界颠倒: {self.alpha_range}")
        if self.alphas is None and self.alpha_range is None:
            raise ValueError("需要 alphas 或 alpha_range")
        return self


class BenchConfig(_Section):
    """基准测试配置"""
    n_trials: int = Field(default=10, ge=1)
    methods: list[Method] = Field(
        default_factory=lambda: [Method.EM, Method.SAWADA, Method.CF_GMM, Method.CF_ALPHA, Method.ORACLE]
    )

    @field_validator("methods")
    @classmethod
    def _non_empty(cls, value: list[Method]) -> list[Method]:
        if not value:
            raise ValueError("methods 不能为空")
        return list(dict.fromkeys(value))


class LoggingConfig(_Section):
    """日志配置"""
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    level: str = "INFO"
    json_format: bool = Field(default=True, alias="json")

    @field_validator("level")
    @classmethod
    def _check_level(cls, value: str) -> str:
        value = value.upper()
        if value not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            raise ValueError(f"未知日志级别: {value}")
        return value


class ExperimentConfig(BaseSettings):
    """实验配置"""
    model_config = SettingsConfigDict(
        env_prefix="ALPHA_BSS_",
        env_nested_delimiter="__",
        extra="forbid",
    )

    inputs: list[str] = Field(default_factory=list)  # 语料 WAV；为空时使用合成源
    n_sources: int = Field(default=3, ge=1)
    method: Method = Method.CF_ALPHA
    seed: int = 0
    output_dir: str = "output"
    workers: int = Field(default=1, ge=1)

    stft: StftConfig = Field(default_factory=StftConfig)
    sketch: SketchConfig = Field(default_factory=SketchConfig)
    clompr: ClomprConfig = Field(default_factory=ClomprConfig)
    em: EmConfig = Field(default_factory=EmConfig)
    metrics: MetricsConfig = Field(default_factory=MetricsConfig)
    synthetic: SyntheticConfig = Field(default_factory=SyntheticConfig)
    bench: BenchConfig = Field(default_factory=BenchConfig)
    logging: LoggingConfig = Field(default_factory=LoggingConfig)

    @classmethod
    def settings_customise_sources(
        cls, settings_cls, init_settings, env_settings, dotenv_settings, file_secret_settings
    ):
        # 环境变量由 build_config 显式合并
        return (init_settings,)

    @model_validator(mode="after")
    def _check_synthetic(self) -> "ExperimentConfig":
        if self.synthetic.alphas is not None and len(self.synthetic.alphas) != self.n_sources:
            raise ValueError(
                f"synthetic.alphas 长度 {len(self.synthetic.alphas)} 与 n_sources {self.n_sources} 不一致"
            )
        return self

    def fit_options(self, seed: int, alpha_locked: bool = False) -> FitOptions:
        return FitOptions(
            K=self.n_sources,
            n_outer_iterations=self.clompr.n_outer_iterations,
            n_inits_per_atom=self.clompr.n_inits_per_atom,
            max_gradient_steps=self.clompr.max_gradient_steps,
            tolerance=self.clompr.tolerance,
            seed=seed,
            alpha_locked=alpha_locked,
        )

    def em_options(self, seed: int, normalize_observations: bool = False) -> EmOptions:
        return EmOptions(
            K=self.n_sources,
            n_restarts=self.em.n_restarts,
            max_iterations=self.em.max_iterations,
            loglik_tolerance=self.em.loglik_tolerance,
            seed=seed,
            normalize_observations=normalize_observations,
        )

    def to_dict(self) -> dict:
        """完整的已解析配置（写入报告）"""
        return self.model_dump(mode="json", by_alias=True)


def _expand_env_vars(value):
    """递归展开环境变量"""
    if isinstance(value, str):
        if value.startswith("${") and value.endswith("}"):
            env_var = value[2:-1]
            return os.environ.get(env_var, "")
        return value
    elif isinstance(value, dict):
        return {k: _expand_env_vars(v) for k, v in value.items()}
    elif isinstance(value, list):
        return [_expand_env_vars(item) for item in value]
    return value


def _describe(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        location = ".".join(str(p) for p in item["loc"]) or "<root>"
        parts.append(f"{location}: {item['msg']}")
    return "; ".join(parts)


def env_overrides() -> dict[str, Any]:
    """读取 ALPHA_BSS_ 前缀的环境变量，嵌套字段以 __ 分隔"""
    try:
        return EnvSettingsSource(ExperimentConfig)()
    except SettingsError as e:
        raise ConfigError(f"环境变量无法解析: {e}") from e


def _deep_merge(base: dict[str, Any], override: dict[str, Any]) -> dict[str, Any]:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def build_config(data: dict[str, Any], use_env: bool = True) -> ExperimentConfig:
    """校验配置字典，校验失败转为 ConfigError

    use_env 为 True 时环境变量覆盖 data 中的同名字段；为 False 时完全不读取环境变量。
    """
    if use_env:
        data = _deep_merge(data, env_overrides())
    try:
        return ExperimentConfig(**data)
    except ValidationError as e:
        raise ConfigError(f"配置无效: {_describe(e)}") from e


def _resolve_path(config_path: Optional[Union[str, Path]]) -> Optional[Path]:
    if config_path is None:
        config_path = Path(__file__).parent.parent / "config"
    config_path = Path(config_path)
    if config_path.is_dir():
        candidate = config_path / "config.yaml"
        if not candidate.exists():
            candidate = config_path / "config.example.yaml"
        return candidate if candidate.exists() else None
    if not config_path.exists():
        raise ConfigError(f"配置文件不存在: {config_path}")
    return config_path


def load_config(config_path: Optional[Union[str, Path]] = None) -> ExperimentConfig:
    """加载配置文件（目录或 YAML 文件路径）"""
    path = _resolve_path(config_path)
    config_data = {}
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as f:
                config_data = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigError(f"无法解析配置文件 {path}: {e}") from e
    if not isinstance(config_data, dict):
        raise ConfigError(f"配置文件顶层必须是映射: {path}")

    # 展开环境变量
    config_data = _expand_env_vars(config_data)
    return build_config(config_data)


def apply_overrides(config: ExperimentConfig, overrides: dict[str, Any]) -> ExperimentConfig:
    """按点号路径覆盖字段（如 em.n_restarts），值为 None 的项忽略"""
    data = config.model_dump(by_alias=True)
    for dotted, value in overrides.items():
        if value is None:
            continue
        target = data
        *parents, leaf = dotted.split(".")
        for key in parents:
            if not isinstance(target.get(key), dict):
                raise ConfigError(f"未知配置段: {dotted}")
            target = target[key]
        target[leaf] = value
    return build_config(data, use_env=False)


# 全局配置实例
_config: Optional[ExperimentConfig] = None


def get_config() -> ExperimentConfig:
    """获取全局配置实例"""
    global _config
    if _config is None:
        _config = load_config()
    return _config


def reload_config(config_path: Optional[Union[str, Path]] = None) -> ExperimentConfig:
    """重新加载配置"""
    global _config
    _config = load_config(config_path)
    return _config
