"""Alpha-stable BSS - 主程序入口"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, Optional

# 确保可以找到 src 包（支持直接运行此文件）
if __name__ == "__main__":
    sys.path.insert(0, str(Path(__file__).parent.parent))

import numpy as np
import structlog
import yaml

try:
    # 作为模块运行: python -m src.main
    from .audio import load_wav, stft, write_wav
    from .config import ExperimentConfig, LoggingConfig, apply_overrides, get_config, reload_config
    from .errors import ConfigError, DataError, SeparationError
    from .estimators import clompr_fit, default_n_frequencies, sketch_data
    from .evaluation import Benchmark, make_mixture
    from .models import Method
    from .separation import SeparationPipeline, frequency_seeds
    from .storage import load_sketch, save_mix_spec, save_sketch, write_yaml
except ImportError:
    # 直接运行: python src/main.py
    from src.audio import load_wav, stft, write_wav
    from src.config import ExperimentConfig, LoggingConfig, apply_overrides, get_config, reload_config
    from src.errors import ConfigError, DataError, SeparationError
    from src.estimators import clompr_fit, default_n_frequencies, sketch_data
    from src.evaluation import Benchmark, make_mixture
    from src.models import Method
    from src.separation import SeparationPipeline, frequency_seeds
    from src.storage import load_sketch, save_mix_spec, save_sketch, write_yaml

logger = structlog.get_logger()

# 写盘前把峰值压到这个值以下，避免 16 位量化削波
MAX_OUTPUT_PEAK = 0.99


def configure_logging(config: LoggingConfig):
    """配置 structlog：日志写到 stderr，stdout 留给命令输出"""
    renderer = structlog.processors.JSONRenderer() if config.json_format else structlog.dev.ConsoleRenderer()
    structlog.configure(
        processors=[
            structlog.stdlib.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            renderer,
        ],
        wrapper_class=structlog.make_filtering_bound_logger(getattr(logging, config.level)),
        logger_factory=structlog.PrintLoggerFactory(file=sys.stderr),
        cache_logger_on_first_use=False,
    )


def cmd_mix(config: ExperimentConfig, args: argparse.Namespace) -> int:
    """生成混合信号、各源真实图像与混合规格"""
    if config.n_sources < 2:
        raise ConfigError(f"混合至少需要两个源: {config.n_sources}")
    source_seed, mix_seed = (int(v) for v in np.random.SeedSequence(config.seed).generate_state(2))
    mixture, truth, chosen = make_mixture(config, source_seed, mix_seed)

    peak = max(float(np.max(np.abs(mixture))), float(np.max(np.abs(truth.images))))
    scale = MAX_OUTPUT_PEAK / peak if peak > MAX_OUTPUT_PEAK else 1.0
    if scale < 1.0:
        logger.info("mixture_rescaled", scale=scale)

    output_dir = Path(config.output_dir)
    rate = config.stft.sample_rate
    write_wav(output_dir / "mixture.wav", mixture * scale, rate)
    for k, image in enumerate(truth.images, start=1):
        write_wav(output_dir / f"truth_{k}.wav", image * scale, rate)
    save_mix_spec(truth.spec, output_dir / "mixspec.yaml")
    write_yaml({"config": config.to_dict(), "sources": chosen, "scale": scale}, output_dir / "mix.yaml")

    print(f"✅ 已生成 {config.n_sources} 个源的混合信号: {output_dir / 'mixture.wav'}")
    return 0


def cmd_separate(config: ExperimentConfig, args: argparse.Namespace) -> int:
    """分离混合信号；提供真值目录时输出评估分数"""
    if not args.mixture:
        raise ConfigError("separate 需要 --mixture")
    pipeline = SeparationPipeline(config)
    report = pipeline.separate(args.mixture, config.output_dir, args.truth_dir)

    print(f"✅ 分离完成 ({report.method})，输出目录: {config.output_dir}")
    for score in report.scores:
        mer = "N/A" if score.mer_db is None else f"{score.mer_db:.2f}"
        print(f"  源 {score.source + 1}: SDR {score.sdr_db:.2f} dB  SIR {score.sir_db:.2f} dB  MER {mer}")
    if report.fallback_frequencies:
        print(f"⚠️  {len(report.fallback_frequencies)} 个频点使用了单成分回退")
    return 0


def cmd_bench(config: ExperimentConfig, args: argparse.Namespace) -> int:
    """多次试验的方法对比"""
    benchmark = Benchmark(config)
    print(f"🔍 运行 {config.bench.n_trials} 次试验，方法: {', '.join(m.value for m in benchmark.methods)}")
    result = benchmark.run()
    written = benchmark.write(result, config.output_dir)
    for path in written:
        if path.name == "table.md":
            print(path.read_text(encoding="utf-8"))
    print(f"✅ 基准测试完成，结果已写入: {config.output_dir}")
    return 0


def cmd_sketch(config: ExperimentConfig, args: argparse.Namespace) -> int:
    """导出单个频点的草图（调试）"""
    if not args.mixture:
        raise ConfigError("sketch 需要 --mixture")
    mixture, rate = load_wav(args.mixture)
    if rate != config.stft.sample_rate:
        raise DataError(f"采样率 {rate} Hz 与配置 {config.stft.sample_rate} Hz 不一致")
    spec = stft(mixture, config.stft.window_length, config.stft.hop, rate)
    if not 0 <= args.frequency < spec.n_frequencies:
        raise ConfigError(f"频点编号 {args.frequency} 超出 [0, {spec.n_frequencies})")

    data = spec.frequency_data(args.frequency)
    J = config.sketch.n_frequencies or default_n_frequencies(config.n_sources, data.shape[1])
    seed = frequency_seeds(config.seed, spec.n_frequencies)[args.frequency]
    design, sketch = sketch_data(data, J, seed, config.sketch.subsample_size)

    output = Path(args.output or Path(config.output_dir) / f"sketch_f{args.frequency}.yaml")
    save_sketch(design, sketch, output, frequency=args.frequency)
    print(f"✅ 频点 {args.frequency} 的草图 (J = {J}) 已写入: {output}")
    return 0


def cmd_fit(config: ExperimentConfig, args: argparse.Namespace) -> int:
    """从导出的草图拟合单个频点（调试）"""
    if not args.sketch:
        raise ConfigError("fit 需要 --sketch")
    if not config.method.uses_sketch:
        raise ConfigError(f"fit 只支持 cf-gmm / cf-alpha，实际为 {config.method.value}")
    design, sketch = load_sketch(args.sketch)
    opts = config.fit_options(config.seed, alpha_locked=config.method is Method.CF_GMM)
    result = clompr_fit(sketch, design, opts)

    output = Path(args.output or Path(config.output_dir) / "fit.yaml")
    write_yaml(
        {
            "method": config.method.value,
            "objective": result.objective,
            "objective_trace": result.objective_trace,
            "weights": [float(w) for w in result.weights],
            "theta": result.theta.to_dict(),
            "config": config.to_dict(),
        },
        output,
    )
    print(f"✅ 拟合完成，目标函数 {result.objective:.3e}，结果已写入: {output}")
    for k, component in enumerate(result.theta.components, start=1):
        print(f"  成分 {k}: pi={component.pi:.3f} alpha={component.alpha:.3f} sigma2={component.sigma2:.3e}")
    return 0


COMMANDS: dict[str, Callable[[ExperimentConfig, argparse.Namespace], int]] = {
    "mix": cmd_mix,
    "separate": cmd_separate,
    "bench": cmd_bench,
    "sketch": cmd_sketch,
    "fit": cmd_fit,
}


def _parse_assignment(text: str) -> tuple[str, object]:
    if "=" not in text:
        raise ConfigError(f"--set 需要 key=value 形式: {text}")
    key, value = text.split("=", 1)
    return key.strip(), yaml.safe_load(value)


def parse_args(argv: Optional[list[str]] = None) -> argparse.Namespace:
    """解析命令行参数"""
    parser = argparse.ArgumentParser(
        description="Alpha-stable BSS - 逐频聚类的盲源分离实验工具",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
示例:
  alpha-bss mix -K 3 --seed 1 -o out/trial1              # 生成合成混合信号
  alpha-bss separate --mixture out/trial1/mixture.wav \\
      --truth-dir out/trial1 --method cf-alpha -o out/sep  # 分离并评估
  alpha-bss bench --trials 10 --methods em cf-gmm cf-alpha oracle
  alpha-bss sketch --mixture mix.wav -f 100 -J 200       # 导出单个频点的草图
  alpha-bss fit --sketch out/sketch_f100.yaml -K 3       # 从草图拟合
  alpha-bss bench --set em.n_restarts=3 --set synthetic.duration=5
        """
    )

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", "-c", type=str, default=None, help="配置文件或配置目录")
    common.add_argument("--seed", type=int, default=None, help="随机种子")
    common.add_argument("--n-sources", "-K", type=int, default=None, help="源数 K")
    common.add_argument(
        "--method", "-m",
        type=str,
        choices=[m.value for m in Method],
        default=None,
        help="逐频聚类方法",
    )
    common.add_argument("--output-dir", "-o", type=str, default=None, help="输出目录")
    common.add_argument("--workers", "-j", type=int, default=None, help="并发拟合的频点数")
    common.add_argument("--n-frequencies", "-J", type=int, default=None, help="草图长度 J")
    common.add_argument("--filter-length", "-L", type=int, default=None, help="评估投影的滤波器长度")
    common.add_argument("--duration", type=float, default=None, help="合成源时长（秒）")
    common.add_argument("--inputs", nargs="+", default=None, help="语料 WAV 文件（不提供时使用合成源）")
    common.add_argument("--log-level", type=str, default=None, help="日志级别")
    common.add_argument(
        "--set",
        dest="assignments",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="覆盖任意配置项，如 em.n_restarts=3",
    )

    subparsers = parser.add_subparsers(dest="command", required=True, help="子命令")

    subparsers.add_parser("mix", parents=[common], help="生成混合信号与真值")

    separate_parser = subparsers.add_parser("separate", parents=[common], help="分离混合信号")
    separate_parser.add_argument("--mixture", type=str, help="混合信号 WAV")
    separate_parser.add_argument("--truth-dir", type=str, default=None, help="真值目录（truth_k.wav 与 mixspec.yaml）")

    bench_parser = subparsers.add_parser("bench", parents=[common], help="多次试验的方法对比")
    bench_parser.add_argument("--trials", type=int, default=None, help="试验次数")
    bench_parser.add_argument(
        "--methods",
        nargs="+",
        choices=[m.value for m in Method],
        default=None,
        help="参与对比的方法",
    )

    sketch_parser = subparsers.add_parser("sketch", parents=[common], help="导出单个频点的草图（调试）")
    sketch_parser.add_argument("--mixture", type=str, help="混合信号 WAV")
    sketch_parser.add_argument("--frequency", "-f", type=int, required=True, help="频点编号")
    sketch_parser.add_argument("--output", type=str, default=None, help="输出文件")

    fit_parser = subparsers.add_parser("fit", parents=[common], help="从导出的草图拟合（调试）")
    fit_parser.add_argument("--sketch", type=str, help="草图文件")
    fit_parser.add_argument("--output", type=str, default=None, help="输出文件")

    return parser.parse_args(argv)


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """配置文件 + 命令行覆盖"""
    # 加载配置
    if args.config:
        config = reload_config(Path(args.config))
    else:
        config = get_config()

    overrides = {
        "seed": args.seed,
        "n_sources": args.n_sources,
        "method": args.method,
        "output_dir": args.output_dir,
        "workers": args.workers,
        "inputs": args.inputs,
        "sketch.n_frequencies": args.n_frequencies,
        "metrics.filter_length": args.filter_length,
        "synthetic.duration": args.duration,
        "logging.level": args.log_level,
        "bench.n_trials": getattr(args, "trials", None),
        "bench.methods": getattr(args, "methods", None),
    }
    overrides.update(_parse_assignment(item) for item in args.assignments)
    return apply_overrides(config, overrides)


def main(argv: Optional[list[str]] = None) -> int:
    """主入口，返回退出码：0 成功，2 配置错误，3 数据错误，4 数值失败"""
    args = parse_args(argv)
    try:
        config = resolve_config(args)
        configure_logging(config.logging)
        logger.info("command_started", command=args.command, method=config.method.value, seed=config.seed)
        return COMMANDS[args.command](config, args)
    except SeparationError as e:
        logger.error("command_failed", command=args.command, error=str(e), exit_code=e.exit_code)
        print(f"❌ {e}", file=sys.stderr)
        return e.exit_code
    except KeyboardInterrupt:
        print("\n👋 已中断", file=sys.stderr)
        return 130
    except Exception as e:
        logger.exception("unexpected_error", command=args.command, error=str(e))
        print(f"❌ 未预期的错误: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
