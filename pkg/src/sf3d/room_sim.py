"""Shoebox image-source simulation and oracle dominance masks."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.signal import fftconvolve

from .geometry import MicArrayGeometry, SpeakerLocation3D
from .stft import ComplexSpectrogram

SPEED_OF_SOUND = 343.0
SINC_TAPS = 81
SINC_HALF = SINC_TAPS // 2
UNASSIGNED = -1

# Small and large living-room shoeboxes, meters.
ROOM_PRESETS = {
    "small": (3.2, 2.56, 2.54),
    "large": (5.2, 4.2, 2.8),
}


class InfeasibleAbsorptionError(ValueError):
    """Raised when no wall absorption below 1 can produce the requested RT60."""


def rotation_z(yaw_rad: float) -> np.ndarray:
    c, s = np.cos(yaw_rad), np.sin(yaw_rad)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


@dataclass(eq=False)
class Source:
    position: np.ndarray
    signal: np.ndarray

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64)
        self.signal = np.asarray(self.signal, dtype=np.float64)
        if self.position.shape != (3,):
            raise ValueError("source position must be a 3-vector")
        if self.signal.ndim != 1:
            raise ValueError("source signal must be mono")


@dataclass(eq=False)
class SceneConfig:
    """A shoebox room with sources and a placed microphone array.

    The array's camera frame is mapped into the room by a yaw rotation about
    the vertical axis followed by a translation to ``array_center``.
    """

    room_dims: tuple[float, float, float]
    sources: list[Source]
    array: MicArrayGeometry
    array_center: np.ndarray
    array_yaw_rad: float = 0.0
    rt60_s: float = 0.0
    max_image_order: int = 0
    noise_snr_db: float | None = None
    sample_rate_hz: float = 16000.0
    seed: int = 0
    c: float = SPEED_OF_SOUND

    def __post_init__(self):
        self.room_dims = tuple(float(v) for v in self.room_dims)
        self.array_center = np.asarray(self.array_center, dtype=np.float64)
        if len(self.room_dims) != 3 or min(self.room_dims) <= 0:
            raise ValueError("room dimensions must be three positive lengths")
        if self.rt60_s < 0:
            raise ValueError("rt60 must be non-negative")
        if self.max_image_order < 0:
            raise ValueError("image order must be non-negative")
        if not self.sources:
            raise ValueError("scene needs at least one source")
        for k, src in enumerate(self.sources):
            if not self._inside(src.position):
                raise ValueError(f"source {k} at {src.position.tolist()} is outside the room")
        for m, p in enumerate(self.mic_positions):
            if not self._inside(p):
                raise ValueError(f"microphone {m} at {p.tolist()} is outside the room")

    def _inside(self, p) -> bool:
        return bool(np.all(p > 0) and np.all(p < np.asarray(self.room_dims)))

    @property
    def n_mics(self) -> int:
        return self.array.n_mics

    @property
    def n_samples(self) -> int:
        return max(len(s.signal) for s in self.sources)

    @property
    def mic_positions(self) -> np.ndarray:
        """Microphone positions in room coordinates, shape (M, 3)."""
        rot = rotation_z(self.array_yaw_rad)
        return self.array.mic_positions @ rot.T + self.array_center

    def room_point(self, loc: SpeakerLocation3D) -> np.ndarray:
        """Room coordinates of a location given relative to the camera."""
        return rotation_z(self.array_yaw_rad) @ self.array.to_camera(loc) + self.array_center

    def source_location(self, k: int) -> SpeakerLocation3D:
        """Location of source ``k`` relative to the camera."""
        rel = rotation_z(self.array_yaw_rad).T @ (self.sources[k].position - self.array_center)
        return self.array.locate(rel)

    def replace(self, **changes) -> "SceneConfig":
        kwargs = {f: getattr(self, f) for f in self.__dataclass_fields__}
        kwargs.update(changes)
        return SceneConfig(**kwargs)


@dataclass(frozen=True, eq=False)
class Rir:
    """Impulse response from one source to one mic.

    ``taps[n]`` is the response ``n`` samples after emission;
    ``delay_offset_samples`` is the direct-path delay rounded to a sample.
    """

    taps: np.ndarray
    delay_offset_samples: int
    source_index: int
    mic_index: int


@dataclass(frozen=True, eq=False)
class DominanceMask:
    """Per-bin index of the strongest source, or ``UNASSIGNED`` below the floor."""

    labels: np.ndarray
    energy_floor_db: float

    @property
    def n_unassigned(self) -> int:
        return int(np.sum(self.labels == UNASSIGNED))


def sabine_absorption(room_dims, rt60_s: float) -> float:
    """Uniform wall absorption coefficient from Sabine's formula."""
    lx, ly, lz = room_dims
    volume = lx * ly * lz
    surface = 2 * (lx * ly + lx * lz + ly * lz)
    alpha = 0.161 * volume / (surface * rt60_s)
    if alpha >= 1.0:
        raise InfeasibleAbsorptionError(
            f"RT60 of {rt60_s} s needs absorption {alpha:.3f} >= 1 in this room"
        )
    return alpha


def reflection_coefficient(room_dims, rt60_s: float) -> float:
    if rt60_s == 0:
        return 0.0
    return float(np.sqrt(1.0 - sabine_absorption(room_dims, rt60_s)))


def image_sources(room_dims, source, max_order: int) -> tuple[np.ndarray, np.ndarray]:
    """Mirror images of ``source`` with at most ``max_order`` reflections.

    Along each axis, image index ``u`` places the image at ``u L + x`` for even
    ``u`` and ``(u + 1) L - x`` for odd ``u``, after ``|u|`` reflections.

    Returns
    -------
    positions : (K, 3) array
    orders : (K,) int array, the total reflection count of each image
    """
    rng = np.arange(-max_order, max_order + 1)
    u = np.array(np.meshgrid(rng, rng, rng, indexing="ij")).reshape(3, -1).T
    orders = np.abs(u).sum(axis=1)
    keep = orders <= max_order
    u, orders = u[keep], orders[keep]
    dims = np.asarray(room_dims, dtype=np.float64)
    src = np.asarray(source, dtype=np.float64)
    even = (u % 2) == 0
    pos = np.where(even, u * dims + src, (u + 1) * dims - src)
    return pos, orders


def _sinc_kernel(delays: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Tap indices and Hann-windowed sinc weights for fractional delays."""
    centre = np.round(delays).astype(int)
    offsets = np.arange(-SINC_HALF, SINC_HALF + 1)
    idx = centre[:, None] + offsets
    x = idx - delays[:, None]
    win = 0.5 * (1.0 + np.cos(np.pi * x / (SINC_HALF + 1)))
    return idx, np.sinc(x) * win


def _accumulate(delays: np.ndarray, gains: np.ndarray, length: int | None = None) -> np.ndarray:
    idx, kern = _sinc_kernel(delays)
    w = kern * gains[:, None]
    ok = idx >= 0
    if length is None:
        length = int(idx.max()) + 1
    ok &= idx < length
    return np.bincount(idx[ok], weights=w[ok], minlength=length)


def simulate_rir(scene: SceneConfig, source_idx: int, mic_idx: int, max_order: int | None = None) -> Rir:
    """Image-source impulse response for one (source, mic) pair.

    Each image contributes ``beta^n / (4 pi d)`` at delay ``d / c`` samples,
    ``n`` being its reflection count and ``beta = sqrt(1 - alpha)`` with
    ``alpha`` from Sabine's formula. An RT60 of zero gives the direct path
    only.
    """
    order = scene.max_image_order if max_order is None else max_order
    beta = reflection_coefficient(scene.room_dims, scene.rt60_s)
    if beta == 0.0:
        order = 0
    src = scene.sources[source_idx].position
    mic = scene.mic_positions[mic_idx]
    pos, orders = image_sources(scene.room_dims, src, order)
    dist = np.linalg.norm(pos - mic, axis=1)
    delays = dist / scene.c * scene.sample_rate_hz
    gains = beta ** orders.astype(np.float64) / (4 * np.pi * dist)
    taps = _accumulate(delays, gains)
    direct = float(np.linalg.norm(src - mic)) / scene.c * scene.sample_rate_hz
    return Rir(taps, int(round(direct)), source_idx, mic_idx)


def simulate_rirs(scene: SceneConfig) -> list[list[Rir]]:
    """All impulse responses, indexed ``[source][mic]``."""
    return [
        [simulate_rir(scene, k, m) for m in range(scene.n_mics)]
        for k in range(len(scene.sources))
    ]


def _padded_signal(scene: SceneConfig, k: int) -> np.ndarray:
    sig = scene.sources[k].signal
    n = scene.n_samples
    return sig if len(sig) == n else np.pad(sig, (0, n - len(sig)))


def render_images(scene: SceneConfig, rirs: Sequence[Sequence[Rir]] | None = None) -> np.ndarray:
    """Per-source reverberant images at every mic, shape (K, M, N).

    Outputs are truncated to the scene length ``N``.
    """
    rirs = simulate_rirs(scene) if rirs is None else rirs
    n = scene.n_samples
    out = np.zeros((len(scene.sources), scene.n_mics, n))
    for k in range(len(scene.sources)):
        sig = _padded_signal(scene, k)
        for m in range(scene.n_mics):
            taps = rirs[k][m].taps
            if len(taps) > n:
                raise ValueError(
                    f"signal of {n} samples is shorter than the {len(taps)}-tap RIR "
                    f"for source {k}, mic {m}"
                )
            out[k, m] = fftconvolve(sig, taps)[:n]
    return out


def add_noise(mixture: np.ndarray, snr_db: float, seed: int, ref_mic: int = 0) -> np.ndarray:
    """Add independent white Gaussian noise to every channel.

    Each channel's noise is rescaled so that its empirical power is the
    reference mic's mixture power divided by ``10^(snr/10)``.
    """
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(mixture.shape)
    p_sig = np.mean(mixture[ref_mic] ** 2)
    if p_sig == 0:
        return mixture.copy()
    target = p_sig / 10 ** (snr_db / 10)
    noise *= np.sqrt(target / np.mean(noise**2, axis=1, keepdims=True))
    return mixture + noise


def render_scene(scene: SceneConfig, rirs: Sequence[Sequence[Rir]] | None = None) -> np.ndarray:
    """Reverberant mixture at every mic, shape (M, N)."""
    mix = render_images(scene, rirs).sum(axis=0)
    if scene.noise_snr_db is not None:
        mix = add_noise(mix, scene.noise_snr_db, scene.seed)
    return mix


def render_anechoic(scene: SceneConfig) -> np.ndarray:
    """Free-field mixture: exact propagation delay and ``1/(4 pi d)`` per source."""
    if scene.rt60_s != 0:
        raise ValueError("render_anechoic needs rt60 = 0")
    return render_scene(scene)


def measured_snr_db(clean: np.ndarray, noisy: np.ndarray) -> float:
    noise = noisy - clean
    return float(10 * np.log10(np.mean(clean**2) / np.mean(noise**2)))


def dominance_mask(
    per_source_specs: Sequence[ComplexSpectrogram],
    floor_db: float = -20.0,
    ref_channel: int = 0,
) -> DominanceMask:
    """Label each bin with its loudest source.

    Bins whose summed power is more than ``-floor_db`` dB below the loudest
    bin are left unassigned.
    """
    if not per_source_specs:
        raise ValueError("need at least one source spectrogram")
    shapes = {s.data.shape for s in per_source_specs}
    if len(shapes) > 1:
        raise ValueError(f"source spectrograms have different shapes: {sorted(shapes)}")
    power = np.stack([np.abs(s.data[ref_channel]) ** 2 for s in per_source_specs])
    total = power.sum(axis=0)
    peak = total.max()
    labels = np.argmax(power, axis=0)
    if peak > 0:
        labeled = total >= peak * 10 ** (floor_db / 10)
    else:
        labeled = np.zeros_like(total, dtype=bool)
    labels = np.where(labeled, labels, UNASSIGNED)
    return DominanceMask(labels, floor_db)


def schroeder_curve(taps: np.ndarray) -> np.ndarray:
    """Backward-integrated energy decay in dB, 0 dB at the first sample."""
    energy = np.cumsum(np.asarray(taps, dtype=np.float64)[::-1] ** 2)[::-1]
    with np.errstate(divide="ignore"):
        return 10 * np.log10(energy / energy[0])


def estimate_rt60(taps: np.ndarray, sample_rate_hz: float, start_db: float = -5.0, stop_db: float = -25.0) -> float:
    """RT60 extrapolated from a line fit to the Schroeder curve.

    The default -5 to -25 dB range is the usual T20 estimate.
    """
    edc = schroeder_curve(taps)
    sel = (edc <= start_db) & (edc >= stop_db)
    if sel.sum() < 2:
        raise ValueError("decay curve does not span the fitting range")
    t = np.nonzero(sel)[0] / sample_rate_hz
    slope, _ = np.polyfit(t, edc[sel], 1)
    return float(-60.0 / slope)


def direct_to_reverberant_ratio(scene: SceneConfig, source_idx: int = 0, mic_idx: int = 0) -> float:
    """Direct-path energy over reflected energy, in dB."""
    full = simulate_rir(scene, source_idx, mic_idx).taps
    direct = simulate_rir(scene, source_idx, mic_idx, max_order=0).taps
    direct = np.pad(direct, (0, len(full) - len(direct)))
    rev = full - direct
    return float(10 * np.log10(np.sum(direct**2) / np.sum(rev**2)))


def speech_like_signal(duration_s: float, sample_rate_hz: float, seed: int) -> np.ndarray:
    """Voiced, syllable-gated harmonic signal with unit RMS.

    A stand-in for speech: a drifting fundamental between 100 and 250 Hz with
    a falling harmonic envelope, gated on and off at syllable rate, so that
    two such signals are sparse against each other in the T-F plane.
    """
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * sample_rate_hz))
    t = np.arange(n) / sample_rate_hz
    f0 = rng.uniform(100.0, 250.0) * (
        1.0 + 0.08 * np.sin(2 * np.pi * rng.uniform(0.5, 2.0) * t + rng.uniform(0, 2 * np.pi))
    )
    phase = 2 * np.pi * np.cumsum(f0) / sample_rate_hz
    n_harm = int(sample_rate_hz / 2 / f0.max())
    formants = rng.uniform(300.0, 3500.0, size=3)
    sig = np.zeros(n)
    for h in range(1, n_harm + 1):
        fh = h * f0.mean()
        weight = sum(np.exp(-0.5 * ((fh - fc) / 250.0) ** 2) for fc in formants)
        amp = (0.2 + weight) / h**0.5
        sig += amp * np.sin(h * phase + rng.uniform(0, 2 * np.pi))

    env = np.zeros(n)
    pos = 0
    while pos < n:
        seg = int(rng.uniform(0.08, 0.3) * sample_rate_hz)
        if rng.random() < 0.65:
            env[pos : pos + seg] = np.hanning(seg)[: n - pos]
        pos += seg
    sig = sig * env + 0.003 * rng.standard_normal(n)
    return sig / np.sqrt(np.mean(sig**2))
