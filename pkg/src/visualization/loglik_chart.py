"""Log-likelihood Chart - 逐频对数似然对比折线图"""

import matplotlib
matplotlib.use('Agg')  # 使用无界面后端

import matplotlib.pyplot as plt
from typing import Dict, Sequence
import os


def plot_loglik_per_frequency(
    curves: Dict[str, Sequence[float]],
    output_path: str = "output/loglik.png",
    title: str = "各频点的数据对数似然",
    figsize: tuple = (10, 5)
) -> str:
    """
    生成各方法逐频对数似然的对比折线图

    Args:
        curves: {method: [频点 0 的对数似然, 频点 1 的对数似然, ...]}
        output_path: 输出文件路径
        title: 图表标题
        figsize: 图表尺寸

    Returns:
        生成的图片路径；没有数据时返回空字符串
    """
    curves = {name: values for name, values in curves.items() if len(values)}
    if not curves:
        return ""

    # 设置中文字体
    plt.rcParams['font.sans-serif'] = ['Arial Unicode MS', 'SimHei', 'DejaVu Sans']
    plt.rcParams['axes.unicode_minus'] = False
    plt.rcParams['svg.hashsalt'] = 'loglik'

    fig, ax = plt.subplots(figsize=figsize)

    colors = ['#3b82f6', '#10b981', '#f59e0b', '#ef4444', '#8b5cf6', '#ec4899', '#06b6d4', '#84cc16']

    for idx, (method, values) in enumerate(curves.items()):
        ax.plot(range(len(values)), values, linewidth=1.2,
                color=colors[idx % len(colors)], label=method)

    ax.set_title(title, fontsize=14, fontweight='bold', pad=10)
    ax.set_xlabel('频点编号', fontsize=10)
    ax.set_ylabel('对数似然', fontsize=10)
    ax.grid(True, linestyle='--', alpha=0.3)
    ax.legend(loc='lower left', fontsize=8, framealpha=0.9)

    plt.tight_layout()

    # 确保输出目录存在
    os.makedirs(os.path.dirname(output_path) or '.', exist_ok=True)

    # 不写入创建时间，保证同样的数据生成同样的文件
    plt.savefig(output_path, dpi=120, bbox_inches='tight',
                facecolor='white', edgecolor='none', metadata={'Software': None})
    plt.close(fig)

    return output_path
