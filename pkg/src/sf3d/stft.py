"""Multi-channel STFT analysis and least-squares overlap-add synthesis."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

WindowName = Literal["hann", "sqrt_hann"]


@dataclass(frozen=True)
class StftConfig:
    """STFT framing. Defaults are a 25 ms window and 10 ms hop at 16 kHz."""

    sample_rate_hz: float = 16000.0
    win_length_samples: int = 400
    hop_samples: int = 160
    fft_size: int = 512
    window: WindowName = "sqrt_hann"

    def __post_init__(self):
        if not self.sample_rate_hz > 0:
            raise ValueError("sample rate must be positive")
        if not 1 <= self.hop_samples <= self.win_length_samples <= self.fft_size:
            raise ValueError("need 1 <= hop <= win_length <= fft_size")
        n = self.fft_size
        if n & (n - 1):
            raise ValueError(f"fft_size must be a power of two, got {n}")
        if self.window not in ("hann", "sqrt_hann"):
            raise ValueError(f"unknown window {self.window!r}")

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1

    def bin_frequencies(self) -> np.ndarray:
        """Center frequency in Hz of each one-sided bin; Nyquist is the last bin."""
        return np.arange(self.n_bins) * self.sample_rate_hz / (2 * (self.n_bins - 1))

    def analysis_window(self) -> np.ndarray:
        # periodic Hann
        n = np.arange(self.win_length_samples)
        hann = 0.5 - 0.5 * np.cos(2 * np.pi * n / self.win_length_samples)
        return np.sqrt(hann) if self.window == "sqrt_hann" else hann

    def n_frames(self, n_samples: int) -> int:
        if n_samples < self.win_length_samples:
            raise ValueError(
                f"signal of {n_samples} samples is shorter than one window "
                f"({self.win_length_samples})"
            )
        extra = n_samples - self.win_length_samples
        return 1 + -(-extra // self.hop_samples)


@dataclass(frozen=True, eq=False)
class ComplexSpectrogram:
    """One-sided complex spectrogram indexed ``[channel, bin, frame]``."""

    data: np.ndarray
    config: StftConfig
    n_samples: int | None = None

    def __post_init__(self):
        if self.data.ndim != 3:
            raise ValueError(f"expected [M, F, T] data, got shape {self.data.shape}")
        if self.data.shape[1] != self.config.n_bins:
            raise ValueError(
                f"bin count {self.data.shape[1]} does not match fft_size {self.config.fft_size}"
            )
        if not np.all(np.isfinite(self.data)):
            raise ValueError("spectrogram contains non-finite values")

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_bins(self) -> int:
        return self.data.shape[1]

    @property
    def n_frames(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape


def _as_multichannel(wave) -> np.ndarray:
    x = np.asarray(wave)
    if x.dtype == object:
        lengths = {len(ch) for ch in wave}
        if len(lengths) > 1:
            raise ValueError(f"channels have mismatched lengths {sorted(lengths)}")
        x = np.asarray([np.asarray(ch, dtype=np.float64) for ch in wave])
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.size == 0:
        raise ValueError("expected a non-empty [channels, samples] signal")
    return x


def _frame(x: np.ndarray, cfg: StftConfig) -> np.ndarray:
    """Frames of shape [M, T, win], zero-padding the final partial frame."""
    n_frames = cfg.n_frames(x.shape[1])
    total = (n_frames - 1) * cfg.hop_samples + cfg.win_length_samples
    padded = np.zeros((x.shape[0], total))
    padded[:, : x.shape[1]] = x
    view = np.lib.stride_tricks.sliding_window_view(padded, cfg.win_length_samples, axis=1)
    return view[:, :: cfg.hop_samples]


def forward_stft(wave, cfg: StftConfig | None = None) -> ComplexSpectrogram:
    """Multi-channel STFT.

    Frame ``t`` covers samples ``[t * hop, t * hop + win_length)``. The window
    sits at the start of each FFT buffer and the remainder is zero padded.
    There is no centering or reflection padding.
    """
    cfg = cfg or StftConfig()
    x = _as_multichannel(wave)
    frames = _frame(x, cfg) * cfg.analysis_window()
    spec = np.fft.rfft(frames, n=cfg.fft_size, axis=-1)
    return ComplexSpectrogram(np.ascontiguousarray(spec.transpose(0, 2, 1)), cfg, x.shape[1])


def inverse_stft(spec: ComplexSpectrogram, n_samples: int | None = None) -> np.ndarray:
    """Least-squares overlap-add inverse of :func:`forward_stft`.

    Each frame is windowed again and the overlap-added result is divided by
    the summed squared window, which inverts the analysis exactly wherever
    that sum is nonzero.
    """
    cfg = spec.config
    if spec.n_bins != cfg.n_bins:
        raise ValueError("spectrogram does not match its config")
    win = cfg.analysis_window()
    frames = np.fft.irfft(spec.data.transpose(0, 2, 1), n=cfg.fft_size, axis=-1)
    frames = frames[..., : cfg.win_length_samples] * win

    n_ch, n_frames = spec.n_channels, spec.n_frames
    total = (n_frames - 1) * cfg.hop_samples + cfg.win_length_samples
    out = np.zeros((n_ch, total))
    norm = np.zeros(total)
    for t in range(n_frames):
        s = t * cfg.hop_samples
        out[:, s : s + cfg.win_length_samples] += frames[:, t]
        norm[s : s + cfg.win_length_samples] += win**2
    nz = norm > 1e-10
    out[:, nz] /= norm[nz]

    n_samples = n_samples or spec.n_samples or total
    if n_samples > total:
        out = np.pad(out, ((0, 0), (0, n_samples - total)))
    return out[:, :n_samples]
