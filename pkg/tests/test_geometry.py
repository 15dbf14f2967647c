import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sf3d.geometry import (
    MicArrayGeometry,
    SpeakerLocation3D,
    cartesian_to_location,
    mic_distances,
    pair_distances,
    speaker_to_cartesian,
)


def euclid(a, b):
    return math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))


def cart(az, el, d):
    return (d * math.cos(el) * math.cos(az), d * math.cos(el) * math.sin(az), d * math.sin(el))


locations = st.builds(
    SpeakerLocation3D,
    st.floats(0.0, math.pi),
    st.floats(-math.pi / 2 + 1e-3, math.pi / 2 - 1e-3),
    st.floats(0.05, 20.0),
)


# ---------------------------------------------------------------- conversions


def test_on_axis_speaker():
    np.testing.assert_allclose(speaker_to_cartesian(SpeakerLocation3D(0.0, 0.0, 2.0)), [2, 0, 0])


def test_broadside_speaker():
    np.testing.assert_allclose(
        speaker_to_cartesian(SpeakerLocation3D(math.pi / 2, 0.0, 3.0)), [0, 3, 0], atol=1e-15
    )


def test_oblique_speaker_matches_trig():
    p = speaker_to_cartesian(SpeakerLocation3D(math.pi / 6, math.pi / 18, 2.0))
    assert np.linalg.norm(p) == pytest.approx(2.0, abs=1e-12)
    assert p[0] == pytest.approx(2 * math.cos(math.pi / 6) * math.cos(math.pi / 18), abs=1e-12)


def test_cartesian_to_location_on_axis():
    loc = cartesian_to_location([2.0, 0.0, 0.0])
    assert (loc.azimuth_rad, loc.elevation_rad, loc.distance_m) == (0.0, 0.0, 2.0)


def test_pole_tie_break():
    loc = cartesian_to_location([0.0, 0.0, 1.0])
    assert loc.azimuth_rad == 0.0
    assert loc.elevation_rad == pytest.approx(math.pi / 2)
    assert loc.distance_m == 1.0


def test_zero_vector_rejected():
    with pytest.raises(ValueError):
        cartesian_to_location([0.0, 0.0, 0.0])


@given(locations)
def test_round_trip(loc):
    back = cartesian_to_location(speaker_to_cartesian(loc))
    np.testing.assert_allclose(speaker_to_cartesian(back), speaker_to_cartesian(loc), atol=1e-9)


def test_dot_with_axis_is_cosine_product():
    loc = SpeakerLocation3D(1.1, -0.4, 1.0)
    assert speaker_to_cartesian(loc)[0] == pytest.approx(math.cos(1.1) * math.cos(-0.4))


@pytest.mark.parametrize("bad", [(0.1, 0.0, 0.0), (-0.1, 0.0, 1.0), (3.2, 0.0, 1.0), (0.0, 1.6, 1.0)])
def test_location_invariants(bad):
    with pytest.raises(ValueError):
        SpeakerLocation3D(*bad)


# ---------------------------------------------------------------- geometry type


def test_geometry_recenters_and_defaults_pairs():
    g = MicArrayGeometry([[1.0, 0, 0], [2.0, 0, 0], [3.0, 0, 0]])
    np.testing.assert_allclose(g.mic_positions[:, 0], [-1, 0, 1])
    assert g.pairs == ((0, 1), (1, 2))
    np.testing.assert_array_equal(g.camera_position, 0.0)


@pytest.mark.parametrize(
    "pos, pairs",
    [
        ([[0, 0, 0]], ()),
        ([[0, 0, 0], [0, 0, 0]], ()),
        ([[0, 0, 0], [1, 0, 0]], ((0, 0),)),
        ([[0, 0, 0], [1, 0, 0]], ((0, 2),)),
    ],
)
def test_geometry_invariants(pos, pairs):
    with pytest.raises(ValueError):
        MicArrayGeometry(np.array(pos, dtype=float), pairs)


def test_geometry_is_immutable():
    g = MicArrayGeometry.linear(2, 0.1)
    with pytest.raises(ValueError):
        g.mic_positions[0, 0] = 5.0


def test_geometry_json(tmp_path):
    path = tmp_path / "array.json"
    path.write_text(json.dumps({"mic_positions": [[-0.1, 0, 0], [0, 0, 0], [0.1, 0, 0]]}))
    g = MicArrayGeometry.from_json(path)
    assert g.pairs == ((0, 1), (1, 2))
    g2 = MicArrayGeometry.from_dict(g.to_dict())
    np.testing.assert_array_equal(g.mic_positions, g2.mic_positions)
    assert g2.pairs == g.pairs


def test_collinearity():
    assert MicArrayGeometry.linear(4, 0.05).is_collinear()
    assert not MicArrayGeometry([[0, 0, 0], [0.1, 0, 0], [0, 0.1, 0]]).is_collinear()


# ---------------------------------------------------------------- distances


def test_pythagorean_3_4_5():
    g = MicArrayGeometry([[-3.0, 0, 0], [3.0, 0, 0]])
    d = pair_distances(g, SpeakerLocation3D(math.pi / 2, 0.0, 4.0))
    np.testing.assert_allclose(d, [[5.0, 5.0]], atol=1e-12)


def test_collinear_distance():
    g = MicArrayGeometry([[-1.0, 0, 0], [1.0, 0, 0]])
    d = pair_distances(g, SpeakerLocation3D(0.0, 0.0, 4.0))
    np.testing.assert_allclose(d, [[5.0, 3.0]], atol=1e-12)


def test_oblique_distance_matches_euclidean_oracle():
    g = MicArrayGeometry([[-0.2, 0, 0], [0.2, 0, 0]])
    az, el, d_o = math.pi / 6, math.pi / 18, 2.0
    spk = cart(az, el, d_o)
    expected = [euclid(spk, (-0.2, 0, 0)), euclid(spk, (0.2, 0, 0))]
    np.testing.assert_allclose(pair_distances(g, SpeakerLocation3D(az, el, d_o))[0], expected, atol=1e-12)


@settings(max_examples=200)
@given(
    locations,
    st.lists(st.tuples(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.floats(-0.5, 0.5)), min_size=2, max_size=6),
    st.booleans(),
)
def test_law_of_cosines_equals_euclidean(loc, pts, collinear):
    pos = np.array(pts)
    if collinear:
        pos[:, 1:] = 0.0
    pos[:, 0] += np.arange(len(pos)) * 0.01  # keep microphones distinct
    g = MicArrayGeometry(pos)
    spk = speaker_to_cartesian(loc)
    expected = np.array([euclid(spk, p) for p in g.mic_positions])
    np.testing.assert_allclose(mic_distances(g, loc), expected, atol=1e-9)


def test_rotation_about_axis_invariance_for_linear_array():
    g = MicArrayGeometry.linear(4, 0.07)
    p = speaker_to_cartesian(SpeakerLocation3D(0.8, 0.3, 1.7))
    phi = 1.1
    rot = np.array([[1, 0, 0], [0, math.cos(phi), -math.sin(phi)], [0, math.sin(phi), math.cos(phi)]])
    a = pair_distances(g, cartesian_to_location(p))
    b = pair_distances(g, cartesian_to_location(rot @ p))
    np.testing.assert_allclose(a, b, atol=1e-12)

    planar = MicArrayGeometry([[0, 0, 0], [0.1, 0, 0], [0, 0.1, 0]])
    a = pair_distances(planar, cartesian_to_location(p))
    b = pair_distances(planar, cartesian_to_location(rot @ p))
    assert np.max(np.abs(a - b)) > 1e-3


def test_custom_array_axis():
    g = MicArrayGeometry([[0, -0.1, 0], [0, 0.1, 0]], array_axis=[0, 1, 0])
    assert g.is_collinear()
    np.testing.assert_allclose(g.axial_coordinates, [-0.1, 0.1])
    loc = SpeakerLocation3D(0.0, 0.0, 2.0)
    np.testing.assert_allclose(g.to_camera(loc), [0, 2, 0], atol=1e-12)
    np.testing.assert_allclose(mic_distances(g, loc), [2.1, 1.9], atol=1e-12)
