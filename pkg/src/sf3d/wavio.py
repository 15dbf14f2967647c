"""Multi-channel WAV read/write (16-bit PCM or 32-bit float, little-endian)."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.io import wavfile

PCM16 = "pcm16"
FLOAT32 = "float32"


def write_wav(path, samples, sample_rate_hz: float, fmt: str = FLOAT32) -> None:
    """Write ``samples`` shaped [channels, n] as an interleaved WAV file.

    ``pcm16`` clips to [-1, 1] before quantizing.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2:
        raise ValueError(f"expected [channels, samples], got shape {x.shape}")
    if fmt == PCM16:
        data = np.round(np.clip(x, -1.0, 1.0) * 32767.0).astype("<i2")
    elif fmt == FLOAT32:
        data = x.astype("<f4")
    else:
        raise ValueError(f"unknown WAV format {fmt!r}")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    wavfile.write(str(path), int(round(sample_rate_hz)), np.ascontiguousarray(data.T))


def read_wav(path) -> tuple[np.ndarray, int]:
    """Read a WAV file as float64 ``[channels, samples]`` and its sample rate.

    16-bit PCM is scaled by 1/32767 so that ``write_wav``/``read_wav`` with
    ``pcm16`` round-trips to within one quantization step.
    """
    rate, data = wavfile.read(str(path))
    if data.dtype == np.int16:
        x = data.astype(np.float64) / 32767.0
    elif data.dtype == np.float32 or data.dtype == np.float64:
        x = data.astype(np.float64)
    else:
        raise ValueError(f"unsupported WAV sample type {data.dtype}")
    if x.ndim == 1:
        x = x[:, None]
    return np.ascontiguousarray(x.T), int(rate)
