"""报告与实验产物的持久化：YAML 报告、混合规格、草图、CSV 与 Markdown 表格"""

import csv
from pathlib import Path
from typing import Any, Optional, Sequence, Union

import numpy as np
import structlog
import yaml
from jinja2 import Environment, FileSystemLoader, StrictUndefined
from pydantic import ValidationError

from ..audio import load_wav
from ..errors import DataError
from ..models import FrequencyDesign, GroundTruth, MixSpec, SeparationReport, Sketch

logger = structlog.get_logger()

PathLike = Union[str, Path]

_TEMPLATE_DIR = Path(__file__).parent / "templates"


def write_yaml(data: Any, path: PathLike) -> Path:
    """写入 YAML（保持字段顺序，不含时间戳）"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(data, f, sort_keys=False, allow_unicode=True)
    return path


def read_yaml(path: PathLike) -> dict:
    path = Path(path)
    if not path.exists():
        raise DataError(f"文件不存在: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        raise DataError(f"无法解析 {path}: {e}") from e
    if not isinstance(data, dict):
        raise DataError(f"{path} 的顶层必须是映射")
    return data


def save_report(report: SeparationReport, path: PathLike) -> Path:
    path = write_yaml(report.to_dict(), path)
    logger.info("report_saved", path=str(path))
    return path


def load_report(path: PathLike) -> SeparationReport:
    try:
        return SeparationReport(**read_yaml(path))
    except ValidationError as e:
        raise DataError(f"报告格式无效 {path}: {e}") from e


def save_mix_spec(spec: MixSpec, path: PathLike) -> Path:
    return write_yaml(spec.model_dump(), path)


def load_mix_spec(path: PathLike) -> MixSpec:
    try:
        return MixSpec(**read_yaml(path))
    except ValidationError as e:
        raise DataError(f"混合规格无效 {path}: {e}") from e


def save_sketch(design: FrequencyDesign, sketch: Sketch, path: PathLike, frequency: Optional[int] = None) -> Path:
    """导出一个频点的频率设计与草图，供 fit 子命令复现"""
    data = {"frequency": frequency, "design": design.to_dict(), "sketch": sketch.to_dict()}
    return write_yaml(data, path)


def load_sketch(path: PathLike) -> tuple[FrequencyDesign, Sketch]:
    data = read_yaml(path)
    try:
        design = FrequencyDesign(**data["design"])
        sketch = Sketch(**data["sketch"])
    except (KeyError, TypeError, ValidationError) as e:
        raise DataError(f"草图文件格式无效 {path}: {e}") from e
    if design.J != sketch.J:
        raise DataError(f"草图长度 {sketch.J} 与频率数 {design.J} 不一致")
    return design, sketch


def load_truth(truth_dir: PathLike, n_sources: int, sample_rate: int) -> GroundTruth:
    """读取 truth_1.wav ... truth_K.wav，以及可选的 mixspec.yaml"""
    truth_dir = Path(truth_dir)
    images = []
    for k in range(1, n_sources + 1):
        matrix, rate = load_wav(truth_dir / f"truth_{k}.wav")
        if rate != sample_rate:
            raise DataError(f"truth_{k}.wav 的采样率 {rate} Hz 与混合信号 {sample_rate} Hz 不一致")
        images.append(matrix)
    if len({image.shape for image in images}) != 1:
        raise DataError("各真值图像的形状不一致")
    spec_path = truth_dir / "mixspec.yaml"
    spec = load_mix_spec(spec_path) if spec_path.exists() else None
    return GroundTruth(images=np.stack(images), spec=spec)


def format_cell(mean: Optional[float], std: Optional[float]) -> str:
    """均值 ± 标准差，缺失时为 N/A"""
    if mean is None or std is None:
        return "N/A"
    return f"{mean:.2f} ± {std:.2f}"


def write_csv(rows: Sequence[dict], path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fieldnames = list(rows[0].keys()) if rows else []
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return path


def render_markdown_table(rows: Sequence[dict], title: str, n_trials: int, n_sources: int) -> str:
    """用模板渲染基准表；rows 中每项含 method 与 sdr/sir/sar/mer 的格式化文本"""
    env = Environment(
        loader=FileSystemLoader(str(_TEMPLATE_DIR)),
        undefined=StrictUndefined,
        keep_trailing_newline=True,
    )
    template = env.get_template("table.md.j2")
    return template.render(title=title, rows=rows, n_trials=n_trials, n_sources=n_sources)


def write_markdown_table(
    rows: Sequence[dict],
    path: PathLike,
    title: str,
    n_trials: int,
    n_sources: int,
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_markdown_table(rows, title, n_trials, n_sources), encoding="utf-8")
    return path


def write_loglik_csv(loglik: Sequence[float], path: PathLike) -> Path:
    """单个方法的逐频对数似然：列 f, loglik"""
    rows = [{"f": f, "loglik": repr(float(value))} for f, value in enumerate(loglik)]
    return write_csv(rows, path)
