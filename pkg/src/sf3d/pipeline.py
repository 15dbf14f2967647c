"""Scene → spectrogram → spatial feature → contrast, end to end."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import spatial_features as sfeat
from .geometry import SpeakerLocation3D
from .room_sim import DominanceMask, SceneConfig, add_noise, dominance_mask, render_images
from .stft import ComplexSpectrogram, StftConfig, forward_stft


@dataclass
class FeatureResult:
    spec: ComplexSpectrogram
    ipd: sfeat.PhaseMap
    tpd: sfeat.PhaseMap
    sf: sfeat.SpatialFeatureMap
    mask: DominanceMask
    contrast: float | None
    mean_sf: float


def tpd_for(kind: str, scene: SceneConfig, loc: SpeakerLocation3D, cfg: StftConfig, n_frames: int):
    if kind == "3d":
        return sfeat.compute_tpd_3d(scene.array, loc, cfg, n_frames, scene.c)
    if kind == "1d":
        return sfeat.compute_tpd_1d(scene.array, loc.azimuth_rad, cfg, n_frames, scene.c)
    raise ValueError(f"unknown TPD kind {kind!r}")


def analyze(
    scene: SceneConfig,
    mixture: np.ndarray,
    images: np.ndarray,
    target: int = 0,
    tpd: str = "3d",
    normalize: bool = True,
    floor_db: float = -20.0,
    cfg: StftConfig | None = None,
    location: SpeakerLocation3D | None = None,
) -> FeatureResult:
    """Spatial feature of ``target`` on ``mixture`` scored against oracle images.

    ``images`` are the per-source reverberant images, shape (K, M, N).
    ``location`` overrides the target's true location (e.g. a jittered one).
    ``mean_sf`` averages the SF over bins of the dominance mask that are
    assigned; with a single source that is every bin above the floor.
    """
    cfg = cfg or StftConfig(sample_rate_hz=scene.sample_rate_hz)
    spec = forward_stft(mixture, cfg)
    loc = location or scene.source_location(target)
    ipd = sfeat.compute_ipd(spec, scene.array.pairs)
    tpd_map = tpd_for(tpd, scene, loc, cfg, spec.n_frames)
    sf = sfeat.compute_sf(ipd, tpd_map, normalize)
    mask = dominance_mask([forward_stft(img, cfg) for img in images], floor_db)
    contrast = None
    if len(images) > 1:
        try:
            contrast = sfeat.sf_contrast(sf, mask, target)
        except sfeat.UndefinedContrastError:
            contrast = None
    mean = sfeat.mean_sf(sf, mask.labels >= 0)
    return FeatureResult(spec, ipd, tpd_map, sf, mask, contrast, mean)


def analyze_scene(scene: SceneConfig, **kwargs) -> FeatureResult:
    """Render ``scene`` (noise-free images plus the full mixture) and analyze it."""
    images = render_images(scene)
    mixture = images.sum(axis=0)
    if scene.noise_snr_db is not None:
        mixture = add_noise(mixture, scene.noise_snr_db, scene.seed)
    return analyze(scene, mixture, images, **kwargs)
