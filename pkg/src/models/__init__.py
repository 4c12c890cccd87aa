# Models package for alpha-stable source separation

from .mixture import (
    ALPHA_MIN,
    ALPHA_MAX,
    ComponentParams,
    MixtureParams,
    AtomParams,
    FitOptions,
    EmOptions,
    ClomprResult,
    EmResult,
    complex_to_pairs,
)
from .sketch import FrequencyDesign, Sketch
from .signal import Spectrogram, MixSpec, GroundTruth, MAX_GAIN_RATIO, MAX_DELAY
from .separation import (
    Method,
    FrequencyFit,
    MaskSet,
    SourceScores,
    SeparationReport,
)

__all__ = [
    # Mixture models
    "ALPHA_MIN",
    "ALPHA_MAX",
    "ComponentParams",
    "MixtureParams",
    "AtomParams",
    "FitOptions",
    "EmOptions",
    "ClomprResult",
    "EmResult",
    "complex_to_pairs",
    # Sketch models
    "FrequencyDesign",
    "Sketch",
    # Signal models
    "Spectrogram",
    "MixSpec",
    "GroundTruth",
    "MAX_GAIN_RATIO",
    "MAX_DELAY",
    # Separation models
    "Method",
    "FrequencyFit",
    "MaskSet",
    "SourceScores",
    "SeparationReport",
]
