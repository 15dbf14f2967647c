"""Interchannel and target-dependent phase differences and the spatial feature.

Phase conventions
-----------------
For a pair ``(m1, m2)`` the observed phase difference is
``IPD = arg(Y[m1] * conj(Y[m2]))``. A source at distance ``d_m`` from mic
``m`` delays it by ``d_m / c``, so an ideal source gives
``IPD = 2 pi f (d_m2 - d_m1) / c``, which is what the TPD functions return.
The spatial feature at a T-F bin is the pairwise cosine similarity
``sum_p cos(TPD_p - IPD_p)``, optionally divided by the pair count.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .geometry import (
    MicArrayGeometry,
    SpeakerLocation3D,
    UnsupportedGeometryError,
    mic_distances,
)
from .stft import ComplexSpectrogram, StftConfig

SPEED_OF_SOUND = 343.0
SILENCE_FLOOR = 1e-12


class UndefinedContrastError(ValueError):
    """Raised when a dominance class needed for the contrast has no bins."""


class PhaseKind(str, Enum):
    IPD = "IPD"
    TPD1D = "TPD1D"
    TPD3D = "TPD3D"


def wrap_phase(x):
    """Wrap angles to (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(x, dtype=np.float64), 2 * np.pi)


@dataclass(frozen=True, eq=False)
class PhaseMap:
    """Wrapped phase values ``[pair, bin, frame]``.

    ``valid`` marks bins where the phase is defined; IPD bins with either
    magnitude under the silence floor are ``False`` and hold 0.
    """

    values: np.ndarray
    kind: PhaseKind
    pairs: tuple[tuple[int, int], ...]
    valid: np.ndarray | None = None

    def __post_init__(self):
        if self.values.ndim != 3 or self.values.shape[0] != len(self.pairs):
            raise ValueError(
                f"phase values {self.values.shape} do not match {len(self.pairs)} pairs"
            )

    @property
    def shape(self):
        return self.values.shape


@dataclass(frozen=True, eq=False)
class SpatialFeatureMap:
    """Spatial feature values ``[bin, frame]``."""

    values: np.ndarray
    normalized: bool = True
    valid: np.ndarray | None = None

    @property
    def shape(self):
        return self.values.shape


@dataclass(frozen=True, eq=False)
class ComplexInputTensor:
    """Covariance and steering outer products, ``[2 M^2, F, T]`` complex.

    Channel ``i * M + j`` of the first block is ``Phi_ij``; the second block
    holds ``v_i conj(v_j)`` in the same order.
    """

    data: np.ndarray
    n_mics: int

    def __post_init__(self):
        if self.data.ndim != 3 or self.data.shape[0] != 2 * self.n_mics**2:
            raise ValueError(
                f"expected {2 * self.n_mics**2} channels, got shape {self.data.shape}"
            )

    @property
    def covariance(self) -> np.ndarray:
        """Covariance block as ``[M, M, F, T]``."""
        m = self.n_mics
        return self.data[: m * m].reshape(m, m, *self.data.shape[1:])

    @property
    def steering(self) -> np.ndarray:
        m = self.n_mics
        return self.data[m * m :].reshape(m, m, *self.data.shape[1:])


def _check_pairs(pairs, n_channels):
    pairs = tuple((int(a), int(b)) for a, b in pairs)
    for a, b in pairs:
        if not (0 <= a < n_channels and 0 <= b < n_channels) or a == b:
            raise ValueError(f"invalid pair ({a}, {b}) for {n_channels} channels")
    return pairs


def compute_ipd(spec: ComplexSpectrogram, pairs) -> PhaseMap:
    pairs = _check_pairs(pairs, spec.n_channels)
    y = spec.data
    idx1 = [a for a, _ in pairs]
    idx2 = [b for _, b in pairs]
    cross = y[idx1] * np.conj(y[idx2])
    mag = np.abs(y)
    valid = (mag[idx1] >= SILENCE_FLOOR) & (mag[idx2] >= SILENCE_FLOOR)
    ipd = np.where(valid, wrap_phase(np.angle(cross)), 0.0)
    return PhaseMap(ipd, PhaseKind.IPD, pairs, valid)


def _tile_frames(per_bin: np.ndarray, n_frames: int) -> np.ndarray:
    return np.repeat(per_bin[:, :, None], n_frames, axis=2)


def compute_tpd_3d(
    geom: MicArrayGeometry,
    loc: SpeakerLocation3D,
    cfg: StftConfig,
    n_frames: int,
    c: float = SPEED_OF_SOUND,
) -> PhaseMap:
    """TPD from the exact speaker-to-mic distances.

    ``TPD_p(k) = wrap(2 pi f_k (d_m2 - d_m1) / c)`` with ``f_k`` the physical
    bin frequency, repeated over frames.
    """
    d = mic_distances(geom, loc)
    idx = np.array(geom.pairs)
    path_diff = d[idx[:, 1]] - d[idx[:, 0]]
    omega = 2 * np.pi * cfg.bin_frequencies()
    tpd = wrap_phase(np.outer(path_diff, omega) / c)
    return PhaseMap(_tile_frames(tpd, n_frames), PhaseKind.TPD3D, geom.pairs)


def compute_tpd_1d(
    geom: MicArrayGeometry,
    azimuth_rad: float,
    cfg: StftConfig,
    n_frames: int,
    c: float = SPEED_OF_SOUND,
) -> PhaseMap:
    """Plane-wave TPD from azimuth alone, for arrays on a line.

    A plane wave from angle ``az`` off the axis reaches mic ``m`` early by
    ``x_m cos(az) / c``, so the pair path difference is
    ``(x_m1 - x_m2) cos(az)``.
    """
    if not geom.is_collinear():
        raise UnsupportedGeometryError("1D TPD needs all microphones on the array axis")
    x = geom.axial_coordinates
    idx = np.array(geom.pairs)
    path_diff = (x[idx[:, 0]] - x[idx[:, 1]]) * np.cos(azimuth_rad)
    omega = 2 * np.pi * cfg.bin_frequencies()
    tpd = wrap_phase(np.outer(path_diff, omega) / c)
    return PhaseMap(_tile_frames(tpd, n_frames), PhaseKind.TPD1D, geom.pairs)


def embed(phase) -> np.ndarray:
    """Unit-circle embedding ``[cos, sin]`` stacked on the last axis."""
    phase = np.asarray(phase)
    return np.stack([np.cos(phase), np.sin(phase)], axis=-1)


def compute_sf(ipd: PhaseMap, tpd: PhaseMap, normalize: bool = True) -> SpatialFeatureMap:
    if ipd.shape != tpd.shape:
        raise ValueError(f"IPD shape {ipd.shape} does not match TPD shape {tpd.shape}")
    if ipd.pairs != tpd.pairs:
        raise ValueError("IPD and TPD were computed for different pairs")
    sf = np.sum(np.cos(tpd.values - ipd.values), axis=0)
    if normalize:
        sf = sf / len(ipd.pairs)
    valid = None if ipd.valid is None else np.all(ipd.valid, axis=0)
    return SpatialFeatureMap(sf, normalize, valid)


def steering_vector(
    geom: MicArrayGeometry,
    loc: SpeakerLocation3D,
    cfg: StftConfig,
    c: float = SPEED_OF_SOUND,
) -> np.ndarray:
    """Relative transfer phases ``[M, F]`` with mic 0 as reference.

    ``v[m, k] = exp(-j 2 pi f_k (d_m - d_0) / c)``, i.e. the phase an
    anechoic observation at mic ``m`` has relative to mic 0.
    """
    d = mic_distances(geom, loc)
    omega = 2 * np.pi * cfg.bin_frequencies()
    return np.exp(-1j * np.outer(d - d[0], omega) / c)


def assemble_complex_input(
    spec: ComplexSpectrogram,
    geom: MicArrayGeometry,
    loc: SpeakerLocation3D,
    smoothing: float = 0.0,
    c: float = SPEED_OF_SOUND,
) -> ComplexInputTensor:
    """Stack the spatial covariance and the steering outer product.

    ``Phi(f, t) = (1 - smoothing) y yᴴ + smoothing Phi(f, t - 1)``, starting
    from zero before the first frame.
    """
    if spec.n_channels != geom.n_mics:
        raise ValueError(f"spectrogram has {spec.n_channels} channels, array has {geom.n_mics}")
    if not 0.0 <= smoothing < 1.0:
        raise ValueError("smoothing must lie in [0, 1)")
    y = spec.data
    m, n_bins, n_frames = y.shape
    inst = y[:, None] * np.conj(y[None, :])  # [M, M, F, T]
    if smoothing > 0:
        phi = np.empty_like(inst)
        prev = np.zeros(inst.shape[:3], dtype=inst.dtype)
        for t in range(n_frames):
            prev = (1.0 - smoothing) * inst[..., t] + smoothing * prev
            phi[..., t] = prev
    else:
        phi = inst
    v = steering_vector(geom, loc, spec.config, c)
    outer = v[:, None, :] * np.conj(v[None, :, :])  # [M, M, F]
    outer = np.broadcast_to(outer[..., None], (m, m, n_bins, n_frames))
    data = np.concatenate([phi.reshape(m * m, n_bins, n_frames), outer.reshape(m * m, n_bins, n_frames)])
    return ComplexInputTensor(data, m)


def sf_contrast(sf: SpatialFeatureMap, mask, target: int = 0) -> float:
    """Mean SF over target-dominated bins minus mean SF over interferer bins.

    ``mask`` is a :class:`~sf3d.room_sim.DominanceMask` (or any object with a
    ``labels`` array); unassigned bins (label < 0) and bins where the SF is
    flagged invalid are ignored.
    """
    labels = np.asarray(mask.labels)
    if labels.shape != sf.values.shape:
        raise ValueError(f"mask shape {labels.shape} does not match SF shape {sf.values.shape}")
    usable = labels >= 0
    if sf.valid is not None:
        usable &= sf.valid
    tgt = usable & (labels == target)
    intf = usable & (labels != target)
    if not tgt.any() or not intf.any():
        raise UndefinedContrastError("contrast needs at least one target and one interferer bin")
    return float(sf.values[tgt].mean() - sf.values[intf].mean())


def mean_sf(sf: SpatialFeatureMap, bins: np.ndarray) -> float:
    """Mean SF over a boolean selection of bins, skipping invalid ones."""
    sel = np.asarray(bins, dtype=bool)
    if sf.valid is not None:
        sel = sel & sf.valid
    if not sel.any():
        raise ValueError("no bins selected")
    return float(sf.values[sel].mean())
