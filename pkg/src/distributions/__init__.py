"""分布基础运算"""

from .alpha_stable import (
    sas_scalar_cf,
    component_cf,
    mixture_cf,
    sample_sas_complex,
    gaussian_logpdf,
)

__all__ = ["sas_scalar_cf", "component_cf", "mixture_cf", "sample_sas_complex", "gaussian_logpdf"]
