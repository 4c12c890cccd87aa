"""逐频混合模型估计：草图、CL-OMPR、EM"""

from .sketch import (
    default_n_frequencies,
    draw_frequencies,
    compute_sketch,
    merge_sketches,
    sketch_data,
)
from .clompr import atom_cf_vector, atom_gradient, nnls, hard_threshold, clompr_fit, ClomprSolver
from .em import (
    em_fit,
    per_frequency_loglik,
    responsibilities,
    component_log_scores,
    normalize_observations,
)

__all__ = [
    "default_n_frequencies",
    "draw_frequencies",
    "compute_sketch",
    "merge_sketches",
    "sketch_data",
    "atom_cf_vector",
    "atom_gradient",
    "nnls",
    "hard_threshold",
    "clompr_fit",
    "ClomprSolver",
    "em_fit",
    "per_frequency_loglik",
    "responsibilities",
    "component_log_scores",
    "normalize_observations",
]
