"""逐频聚类的二值掩码分离"""

from .masking import (
    cluster,
    apply_masks,
    oracle_mask,
    oracle_permute,
    aligned_steering,
)
from .pipeline import SeparationPipeline, SeparationOutcome, fit_all_frequencies, frequency_seeds, separate

__all__ = [
    "cluster",
    "apply_masks",
    "oracle_mask",
    "oracle_permute",
    "aligned_steering",
    "SeparationPipeline",
    "SeparationOutcome",
    "fit_all_frequencies",
    "frequency_seeds",
    "separate",
]
