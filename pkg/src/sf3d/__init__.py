"""Spatial features for target-speaker processing on microphone arrays."""

from .geometry import (
    MicArrayGeometry,
    SpeakerLocation3D,
    cartesian_to_location,
    pair_distances,
    speaker_to_cartesian,
)
from .spatial_features import (
    assemble_complex_input,
    compute_ipd,
    compute_sf,
    compute_tpd_1d,
    compute_tpd_3d,
    sf_contrast,
    steering_vector,
)
from .stft import ComplexSpectrogram, StftConfig, forward_stft, inverse_stft

__version__ = "0.1.0"

__all__ = [
    "ComplexSpectrogram",
    "MicArrayGeometry",
    "SpeakerLocation3D",
    "StftConfig",
    "assemble_complex_input",
    "cartesian_to_location",
    "compute_ipd",
    "compute_sf",
    "compute_tpd_1d",
    "compute_tpd_3d",
    "forward_stft",
    "inverse_stft",
    "pair_distances",
    "sf_contrast",
    "speaker_to_cartesian",
    "steering_vector",
]
