"""音频：STFT、WAV 读写、混合生成"""

from .stft import stft, istft, spectral_energy, window_energy_gain, analysis_window
from .wav import load_wav, write_wav
from .mixsim import (
    draw_mix_spec,
    gen_mixture,
    gen_synthetic_sources,
    synthetic_source_coefficients,
    select_sources,
)

__all__ = [
    "stft",
    "istft",
    "spectral_energy",
    "window_energy_gain",
    "analysis_window",
    "load_wav",
    "write_wav",
    "draw_mix_spec",
    "gen_mixture",
    "gen_synthetic_sources",
    "synthetic_source_coefficients",
    "select_sources",
]
