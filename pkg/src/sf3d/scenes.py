"""Scene construction: JSON scene files, presets and randomized test scenarios.

Scene JSON::

    {
      "room_dims": [5.2, 4.2, 2.8],
      "rt60_s": 0.6, "max_image_order": 12,
      "sample_rate_hz": 16000, "seed": 0, "noise_snr_db": null,
      "array": {"mic_positions": [[x, y, z], ...], "pairs": [[0, 1], ...],
                "center": [2.6, 2.1, 1.2], "yaw_deg": 0},
      "sources": [
        {"location": {"azimuth_deg": 60, "elevation_deg": 0, "distance_m": 1.5},
         "signal": {"type": "speech_like", "seed": 1, "duration_s": 3.0}},
        {"position": [1.0, 3.0, 1.5], "signal": {"type": "wav", "path": "x.wav"}}
      ]
    }

A source is placed either by ``position`` (room coordinates) or by
``location`` relative to the camera. Signals are ``speech_like``, ``noise``,
``zeros`` or ``wav`` (relative paths resolve against the scene file).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import MicArrayGeometry, SpeakerLocation3D
from .room_sim import ROOM_PRESETS, SceneConfig, Source, rotation_z, speech_like_signal
from .wavio import read_wav

DEFAULT_CENTER = (2.6, 2.1, 1.2)


def default_array() -> MicArrayGeometry:
    """Four-mic linear array, 10 cm spacing, adjacent pairs plus the outer pair."""
    return MicArrayGeometry.linear(4, 0.10, pairs=[(0, 1), (1, 2), (2, 3), (0, 3)])


def _signal_from_spec(spec: dict, fs: float, n_default: int | None, base: Path) -> np.ndarray:
    kind = spec.get("type", "speech_like")
    duration = spec.get("duration_s")
    n = int(round(duration * fs)) if duration is not None else n_default
    if kind == "speech_like":
        return speech_like_signal(n / fs, fs, int(spec.get("seed", 0)))
    if kind == "noise":
        return np.random.default_rng(int(spec.get("seed", 0))).standard_normal(n)
    if kind == "zeros":
        return np.zeros(n)
    if kind == "wav":
        path = Path(spec["path"])
        x, rate = read_wav(path if path.is_absolute() else base / path)
        if rate != int(round(fs)):
            raise ValueError(f"{path} is sampled at {rate} Hz, scene uses {fs}")
        return x[int(spec.get("channel", 0))]
    raise ValueError(f"unknown signal type {kind!r}")


def scene_from_dict(d: dict, base_dir=".") -> SceneConfig:
    base = Path(base_dir)
    fs = float(d.get("sample_rate_hz", 16000.0))
    room = d.get("room_dims", d.get("room", "large"))
    room = ROOM_PRESETS[room] if isinstance(room, str) else tuple(room)
    arr = d.get("array", {})
    geom = MicArrayGeometry.from_dict(arr) if "mic_positions" in arr else default_array()
    center = np.asarray(arr.get("center", DEFAULT_CENTER), dtype=np.float64)
    yaw = np.deg2rad(float(arr.get("yaw_deg", 0.0)))
    n_default = int(round(float(d.get("duration_s", 3.0)) * fs))

    sources = []
    for s in d["sources"]:
        if "position" in s:
            pos = np.asarray(s["position"], dtype=np.float64)
        else:
            loc = s["location"]
            sl = SpeakerLocation3D.from_degrees(
                loc["azimuth_deg"], loc.get("elevation_deg", 0.0), loc["distance_m"]
            )
            pos = rotation_z(yaw) @ geom.to_camera(sl) + center
        sig = _signal_from_spec(s.get("signal", {}), fs, n_default, base)
        sources.append(Source(pos, sig))

    return SceneConfig(
        room_dims=room,
        sources=sources,
        array=geom,
        array_center=center,
        array_yaw_rad=yaw,
        rt60_s=float(d.get("rt60_s", 0.0)),
        max_image_order=int(d.get("max_image_order", 0)),
        noise_snr_db=d.get("noise_snr_db"),
        sample_rate_hz=fs,
        seed=int(d.get("seed", 0)),
        c=float(d.get("c", 343.0)),
    )


def load_scene(path, seed: int | None = None) -> SceneConfig:
    path = Path(path)
    d = json.loads(path.read_text())
    if seed is not None:
        d["seed"] = seed
    return scene_from_dict(d, path.parent)


def _loc_dict(az_deg, el_deg, dist):
    return {"azimuth_deg": az_deg, "elevation_deg": el_deg, "distance_m": dist}


def preset(name: str, duration_s: float = 3.0, seed: int = 0) -> dict:
    """Scene dictionaries for the built-in scenarios.

    ``anechoic-single``: one speaker, free field.
    ``weak`` / ``strong``: the same two-speaker scene at RT60 0 and 0.6 s.
    """
    array = default_array().to_dict()
    array.update(center=list(DEFAULT_CENTER), yaw_deg=0.0)
    target = {"location": _loc_dict(60.0, 5.0, 1.4), "signal": {"type": "speech_like", "seed": 2 * seed + 1}}
    interferer = {"location": _loc_dict(115.0, 0.0, 1.7), "signal": {"type": "speech_like", "seed": 2 * seed + 2}}
    base = {
        "room_dims": list(ROOM_PRESETS["large"]),
        "sample_rate_hz": 16000,
        "duration_s": duration_s,
        "seed": seed,
        "array": array,
        "rt60_s": 0.0,
        "max_image_order": 0,
    }
    if name == "anechoic-single":
        return {**base, "sources": [target]}
    if name == "weak":
        return {**base, "sources": [target, interferer]}
    if name == "strong":
        return {**base, "rt60_s": 0.6, "max_image_order": 12, "sources": [target, interferer]}
    raise ValueError(f"unknown preset {name!r}; choose from {PRESET_NAMES}")


PRESET_NAMES = ("anechoic-single", "weak", "strong")


@dataclass
class Scenario:
    """A rendered-ready scene with the target's true location."""

    scene: SceneConfig
    target: SpeakerLocation3D
    interferer: SpeakerLocation3D | None = None


def _fits(scene_dims, center, yaw, geom, loc, margin=0.3) -> bool:
    p = rotation_z(yaw) @ geom.to_camera(loc) + center
    return bool(np.all(p > margin) and np.all(p < np.asarray(scene_dims) - margin))


def two_speaker_scenario(
    seed: int,
    rt60_s: float = 0.0,
    separation_deg: tuple[float, float] = (30.0, 60.0),
    max_image_order: int = 12,
    duration_s: float = 2.0,
    geom: MicArrayGeometry | None = None,
) -> Scenario:
    """Random two-speaker scene with azimuth separation drawn from ``separation_deg``."""
    rng = np.random.default_rng(seed)
    geom = geom or default_array()
    room = ROOM_PRESETS["large"]
    center = np.array(DEFAULT_CENTER)
    while True:
        az_t = rng.uniform(40.0, 140.0)
        sep = rng.uniform(*separation_deg) * rng.choice([-1.0, 1.0])
        az_i = az_t + sep
        if not 10.0 <= az_i <= 170.0:
            continue
        tgt = SpeakerLocation3D.from_degrees(az_t, rng.uniform(-10, 15), rng.uniform(1.0, 1.8))
        intf = SpeakerLocation3D.from_degrees(az_i, rng.uniform(-10, 15), rng.uniform(1.0, 1.8))
        if _fits(room, center, 0.0, geom, tgt) and _fits(room, center, 0.0, geom, intf):
            break
    return _build(seed, rng, geom, room, center, tgt, intf, rt60_s, max_image_order, duration_s)


def close_speaker_scenario(seed: int, mode: str, interferer_side: str = "axis", duration_s: float = 2.0) -> Scenario:
    """Anechoic pair 10 degrees apart in azimuth, separated in elevation or distance.

    ``mode="elevation"``: the target sits 20 degrees higher than the interferer.
    ``mode="distance"``: the interferer is twice as far as the target.

    The target azimuth stays 25-65 degrees off the array axis (either end): at
    broadside a linear array sees neither elevation nor the axial component
    of the near-field curvature.

    ``interferer_side="axis"`` puts the interferer 10 degrees closer to the
    array axis than the target. An azimuth-only TPD then errs towards the
    interferer, which is the case where azimuth alone cannot tell the two
    apart. With ``"outer"`` the azimuth-only error points away from the
    interferer instead.
    """
    if interferer_side not in ("axis", "outer"):
        raise ValueError(f"interferer_side must be 'axis' or 'outer', got {interferer_side!r}")
    rng = np.random.default_rng(seed)
    geom = default_array()
    room = ROOM_PRESETS["large"]
    center = np.array(DEFAULT_CENTER)
    az_t = rng.uniform(25.0, 65.0)
    az_i = az_t - 10.0 if interferer_side == "axis" else az_t + 10.0
    if rng.random() < 0.5:
        az_t, az_i = 180.0 - az_t, 180.0 - az_i
    if mode == "elevation":
        d = rng.uniform(1.0, 1.5)
        el = rng.uniform(-5.0, 5.0)
        tgt = SpeakerLocation3D.from_degrees(az_t, el + 20.0, d)
        intf = SpeakerLocation3D.from_degrees(az_i, el, d)
    elif mode == "distance":
        d = rng.uniform(0.4, 0.6)
        el = rng.uniform(-5.0, 5.0)
        tgt = SpeakerLocation3D.from_degrees(az_t, el, d)
        intf = SpeakerLocation3D.from_degrees(az_i, el, 2.0 * d)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return _build(seed, rng, geom, room, center, tgt, intf, 0.0, 0, duration_s)


def single_speaker_scenario(seed: int, duration_s: float = 3.0, geom: MicArrayGeometry | None = None) -> Scenario:
    rng = np.random.default_rng(seed)
    geom = geom or default_array()
    room = ROOM_PRESETS["large"]
    center = np.array(DEFAULT_CENTER)
    tgt = SpeakerLocation3D.from_degrees(rng.uniform(20, 160), rng.uniform(-15, 25), rng.uniform(0.8, 1.8))
    fs = 16000.0
    sig = speech_like_signal(duration_s, fs, int(rng.integers(2**31)))
    scene = SceneConfig(room, [Source(rotation_z(0.0) @ geom.to_camera(tgt) + center, sig)], geom, center, seed=seed)
    return Scenario(scene, scene.source_location(0))


def _build(seed, rng, geom, room, center, tgt, intf, rt60_s, order, duration_s) -> Scenario:
    fs = 16000.0
    sigs = [speech_like_signal(duration_s, fs, int(rng.integers(2**31))) for _ in range(2)]
    sources = [Source(geom.to_camera(loc) + center, s) for loc, s in zip((tgt, intf), sigs)]
    scene = SceneConfig(
        room, sources, geom, center,
        rt60_s=rt60_s, max_image_order=order if rt60_s > 0 else 0,
        sample_rate_hz=fs, seed=seed,
    )
    return Scenario(scene, scene.source_location(0), scene.source_location(1))
