"""Array, camera and speaker geometry.

The camera sits at the centroid of the microphone array. Speaker locations are
given as (azimuth, elevation, distance) relative to the camera, with azimuth
measured from the array axis in the horizontal plane, so that the cosine of
the angle between the speaker direction and the array axis is
``cos(azimuth) * cos(elevation)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

COLLINEAR_TOL = 1e-9
MIN_MIC_SEPARATION = 1e-6


class UnsupportedGeometryError(ValueError):
    """Raised when an operation needs a geometry the array does not have."""


def _axis_frame(axis: np.ndarray) -> np.ndarray:
    """Orthonormal basis (rows) whose first row is ``axis``.

    The third row is world-up projected off the axis, so for the default
    ``+x`` axis the frame is the identity.
    """
    e1 = axis / np.linalg.norm(axis)
    up = np.array([0.0, 0.0, 1.0])
    if abs(e1 @ up) > 0.99:
        up = np.array([0.0, 1.0, 0.0])
    e3 = up - (up @ e1) * e1
    e3 /= np.linalg.norm(e3)
    e2 = np.cross(e3, e1)
    return np.stack([e1, e2, e3])


@dataclass(frozen=True)
class SpeakerLocation3D:
    azimuth_rad: float
    elevation_rad: float
    distance_m: float

    def __post_init__(self):
        if not self.distance_m > 0:
            raise ValueError(f"distance must be positive, got {self.distance_m}")
        if not -1e-12 <= self.azimuth_rad <= np.pi + 1e-12:
            raise ValueError(f"azimuth must lie in [0, pi], got {self.azimuth_rad}")
        if abs(self.elevation_rad) > np.pi / 2 + 1e-12:
            raise ValueError(f"elevation must lie in [-pi/2, pi/2], got {self.elevation_rad}")

    @classmethod
    def from_degrees(cls, azimuth_deg: float, elevation_deg: float, distance_m: float):
        return cls(np.deg2rad(azimuth_deg), np.deg2rad(elevation_deg), distance_m)


@dataclass(frozen=True, eq=False)
class MicArrayGeometry:
    """Microphone positions in the camera frame.

    Parameters
    ----------
    mic_positions : array_like, shape (M, 3)
        Positions in meters. They are recentered so that the microphone
        centroid (the camera) is the origin.
    pairs : sequence of (int, int), optional
        Microphone pairs used for phase differences. Defaults to all
        adjacent pairs ``(0, 1), (1, 2), ...``.
    array_axis : array_like, shape (3,), optional
        Direction azimuth is measured from. Defaults to ``+x``.
    """

    mic_positions: np.ndarray
    pairs: tuple[tuple[int, int], ...] = ()
    array_axis: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))

    def __post_init__(self):
        pos = np.array(self.mic_positions, dtype=np.float64)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ValueError(f"mic_positions must have shape (M, 3), got {pos.shape}")
        n_mics = pos.shape[0]
        if n_mics < 2:
            raise ValueError("need at least 2 microphones")
        if not np.all(np.isfinite(pos)):
            raise ValueError("mic_positions must be finite")
        sep = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=-1)
        sep[np.diag_indices(n_mics)] = np.inf
        if sep.min() <= MIN_MIC_SEPARATION:
            raise ValueError("two microphones coincide")
        pos = pos - pos.mean(axis=0)

        pairs = self.pairs or tuple((i, i + 1) for i in range(n_mics - 1))
        pairs = tuple((int(a), int(b)) for a, b in pairs)
        for a, b in pairs:
            if not (0 <= a < n_mics and 0 <= b < n_mics) or a == b:
                raise ValueError(f"invalid microphone pair ({a}, {b}) for {n_mics} mics")

        axis = np.array(self.array_axis, dtype=np.float64)
        if axis.shape != (3,) or np.linalg.norm(axis) == 0:
            raise ValueError("array_axis must be a nonzero 3-vector")
        axis = axis / np.linalg.norm(axis)

        pos.setflags(write=False)
        axis.setflags(write=False)
        object.__setattr__(self, "mic_positions", pos)
        object.__setattr__(self, "pairs", pairs)
        object.__setattr__(self, "array_axis", axis)

    @property
    def n_mics(self) -> int:
        return self.mic_positions.shape[0]

    @property
    def n_pairs(self) -> int:
        return len(self.pairs)

    @property
    def camera_position(self) -> np.ndarray:
        return np.zeros(3)

    @property
    def frame(self) -> np.ndarray:
        """Rotation (rows = axes) from camera coordinates to the axis frame."""
        return _axis_frame(self.array_axis)

    @property
    def local_positions(self) -> np.ndarray:
        """Mic positions in the axis frame (array axis along the first coordinate)."""
        return self.mic_positions @ self.frame.T

    @property
    def camera_distances(self) -> np.ndarray:
        """Distance from the camera to each microphone."""
        return np.linalg.norm(self.mic_positions, axis=1)

    @property
    def axial_coordinates(self) -> np.ndarray:
        """Signed coordinate of each microphone along the array axis."""
        return self.mic_positions @ self.array_axis

    def is_collinear(self, tol: float = COLLINEAR_TOL) -> bool:
        """True if every microphone lies on the array axis through the camera."""
        off_axis = self.local_positions[:, 1:]
        return bool(np.all(np.abs(off_axis) <= tol))

    def to_camera(self, loc: SpeakerLocation3D) -> np.ndarray:
        """Speaker position in camera coordinates."""
        return speaker_to_cartesian(loc) @ self.frame

    def locate(self, point) -> SpeakerLocation3D:
        """Location of a camera-coordinate point relative to this array."""
        return cartesian_to_location(self.frame @ np.asarray(point, dtype=np.float64))

    def to_dict(self) -> dict:
        return {
            "mic_positions": self.mic_positions.tolist(),
            "pairs": [list(p) for p in self.pairs],
            "array_axis": self.array_axis.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MicArrayGeometry":
        kwargs = {"mic_positions": d["mic_positions"]}
        if d.get("pairs"):
            kwargs["pairs"] = tuple(tuple(p) for p in d["pairs"])
        if d.get("array_axis") is not None:
            kwargs["array_axis"] = np.asarray(d["array_axis"], dtype=np.float64)
        return cls(**kwargs)

    @classmethod
    def from_json(cls, path) -> "MicArrayGeometry":
        return cls.from_dict(json.loads(Path(path).read_text()))

    @classmethod
    def linear(cls, n_mics: int, spacing_m: float, pairs: Sequence[tuple[int, int]] = ()):
        """Uniform linear array along ``+x`` centered on the camera."""
        x = (np.arange(n_mics) - (n_mics - 1) / 2) * spacing_m
        pos = np.stack([x, np.zeros(n_mics), np.zeros(n_mics)], axis=1)
        return cls(pos, tuple(pairs))


def speaker_to_cartesian(loc: SpeakerLocation3D) -> np.ndarray:
    """Camera-centred Cartesian point, array axis along ``x``."""
    ca, sa = np.cos(loc.azimuth_rad), np.sin(loc.azimuth_rad)
    ce, se = np.cos(loc.elevation_rad), np.sin(loc.elevation_rad)
    return loc.distance_m * np.array([ce * ca, ce * sa, se])


def cartesian_to_location(point) -> SpeakerLocation3D:
    """Inverse of :func:`speaker_to_cartesian`.

    Points with a negative ``y`` component are folded onto ``y >= 0``: the
    azimuth convention covers only [0, pi], which is all a linear array can
    distinguish. At the poles the azimuth is 0.
    """
    p = np.asarray(point, dtype=np.float64)
    if p.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {p.shape}")
    r = float(np.linalg.norm(p))
    if r == 0 or not np.isfinite(r):
        raise ValueError("cannot locate a zero-length or non-finite vector")
    elevation = float(np.arcsin(np.clip(p[2] / r, -1.0, 1.0)))
    horiz = float(np.hypot(p[0], p[1]))
    azimuth = float(np.arctan2(abs(p[1]), p[0])) if horiz > 0 else 0.0
    return SpeakerLocation3D(azimuth, elevation, r)


def pair_distances(geom: MicArrayGeometry, loc: SpeakerLocation3D) -> np.ndarray:
    """Speaker-to-microphone distances for every configured pair.

    Uses the law of cosines between the camera-to-mic and camera-to-speaker
    vectors. For a mic on the array axis the projection term reduces to the
    signed axial coordinate times ``cos(az) * cos(el)``; mics off the axis use
    their full projection onto the speaker direction.

    Returns
    -------
    np.ndarray, shape (P, 2)
        ``[d_m1, d_m2]`` per pair, in meters.
    """
    d = mic_distances(geom, loc)
    idx = np.array(geom.pairs, dtype=int)
    return d[idx]


def mic_distances(geom: MicArrayGeometry, loc: SpeakerLocation3D) -> np.ndarray:
    """Speaker distance to every microphone, shape (M,)."""
    unit = speaker_to_cartesian(SpeakerLocation3D(loc.azimuth_rad, loc.elevation_rad, 1.0))
    proj = geom.local_positions @ unit  # signed d_om * cos(angle)
    d_om_sq = np.sum(geom.local_positions**2, axis=1)
    d_o = loc.distance_m
    sq = d_om_sq + d_o**2 - 2.0 * d_o * proj
    return np.sqrt(np.maximum(sq, 0.0))
