"""可视化"""

from .loglik_chart import plot_loglik_per_frequency

__all__ = ["plot_loglik_per_frequency"]
