"""Acceptance criteria, each at its stated tolerance and time budget.

Every test records one PASS/FAIL line, repeated in the terminal summary.
"""

import math
import time

import numpy as np

from sf3d import cli
from sf3d.complex_embed import VARIANTS, ComplexConvLayer, EmbedConfig, complex_conv2d_forward, grad_check
from sf3d.geometry import MicArrayGeometry, SpeakerLocation3D, pair_distances
from sf3d.pipeline import analyze_scene
from sf3d.room_sim import (
    ROOM_PRESETS,
    SceneConfig,
    Source,
    estimate_rt60,
    image_sources,
    render_anechoic,
    simulate_rir,
)
from sf3d.scenes import close_speaker_scenario, preset, single_speaker_scenario, two_speaker_scenario
from sf3d.spatial_features import compute_ipd, compute_sf, compute_tpd_3d
from sf3d.stft import StftConfig, forward_stft, inverse_stft
from sf3d.swap_sampler import DatasetMeta, Item, branch_stats, homogeneity_violations, plan_epoch

N_SEEDS = 10


# ---------------------------------------------------------------- geometry


def test_geometry_oracle(criterion):
    rng = np.random.default_rng(2024)
    cases = []
    for _ in range(1000):
        m = int(rng.integers(2, 7))
        pos = rng.uniform(-0.3, 0.3, (m, 3))
        if rng.random() < 0.5:
            pos[:, 1:] = 0.0
        pos[:, 0] += np.arange(m) * 1e-3
        loc = SpeakerLocation3D(rng.uniform(0, math.pi), rng.uniform(-math.pi / 2, math.pi / 2), rng.uniform(0.3, 6.0))
        cases.append((MicArrayGeometry(pos), loc))

    t0 = time.perf_counter()
    worst = 0.0
    for geom, loc in cases:
        got = pair_distances(geom, loc)
        a, e, d = loc.azimuth_rad, loc.elevation_rad, loc.distance_m
        spk = (d * math.cos(e) * math.cos(a), d * math.cos(e) * math.sin(a), d * math.sin(e))
        for p, (i, j) in enumerate(geom.pairs):
            worst = max(worst, abs(got[p, 0] - math.dist(spk, geom.mic_positions[i])),
                        abs(got[p, 1] - math.dist(spk, geom.mic_positions[j])))
    secs = time.perf_counter() - t0
    ok = criterion(worst < 1e-9 and secs < 1.0, f"max |delta| {worst:.2e} m over 1000 cases, {secs:.2f} s")
    assert ok


# ---------------------------------------------------------------- anechoic fidelity


def test_anechoic_fidelity(criterion):
    t0 = time.perf_counter()
    sc = single_speaker_scenario(seed=7, duration_s=3.0)
    scene = sc.scene
    assert scene.n_mics == 4
    mix = render_anechoic(scene)
    cfg = StftConfig()
    spec = forward_stft(mix, cfg)
    sf = compute_sf(compute_ipd(spec, scene.array.pairs), compute_tpd_3d(scene.array, sc.target, cfg, spec.n_frames))
    power = np.abs(spec.data[0]) ** 2
    loud = power >= 0.01 * power.max()
    mean = float(sf.values[loud].mean())
    secs = time.perf_counter() - t0
    ok = criterion(mean >= 0.95 and secs < 10.0, f"mean SF {mean:.4f} over {loud.sum()} bins, {secs:.2f} s")
    assert ok


# ---------------------------------------------------------------- contrast vs reverberation


def test_contrast_decreases_with_rt60(criterion):
    t0 = time.perf_counter()
    rows = []
    for seed in range(N_SEEDS):
        sc = two_speaker_scenario(seed, rt60_s=0.0, duration_s=2.0)
        dry = analyze_scene(sc.scene).contrast
        wet = analyze_scene(sc.scene.replace(rt60_s=0.6, max_image_order=12)).contrast
        rows.append((dry, wet))
    secs = time.perf_counter() - t0
    wins = sum(d > w for d, w in rows)
    detail = f"{wins}/{N_SEEDS} seeds decrease, mean {np.mean([d for d, _ in rows]):.3f} -> " \
             f"{np.mean([w for _, w in rows]):.3f}, {secs:.1f} s"
    ok = criterion(wins == N_SEEDS and secs < 120.0, detail)
    assert ok


# ---------------------------------------------------------------- 3D vs azimuth-only TPD


def _three_d_beats_one_d(mode):
    rows = []
    for seed in range(N_SEEDS):
        scene = close_speaker_scenario(seed, mode).scene
        c3 = analyze_scene(scene, tpd="3d").contrast
        c1 = analyze_scene(scene, tpd="1d").contrast
        rows.append((c3, c1))
    return sum(a > b for a, b in rows), rows


def test_3d_beats_1d_elevation(criterion):
    wins, rows = _three_d_beats_one_d("elevation")
    gap = np.mean([a - b for a, b in rows])
    ok = criterion(wins == N_SEEDS, f"{wins}/{N_SEEDS} seeds, mean contrast gain {gap:.3f}")
    assert ok


def test_3d_beats_1d_distance(criterion):
    wins, rows = _three_d_beats_one_d("distance")
    gap = np.mean([a - b for a, b in rows])
    ok = criterion(wins == N_SEEDS, f"{wins}/{N_SEEDS} seeds, mean contrast gain {gap:.3f}")
    assert ok


# ---------------------------------------------------------------- complex convolution


def _loop_complex_conv(w, z, stride, padding):
    c_out, c_in, kh, kw = w.shape
    _, h, wd = z.shape
    ho = (h + 2 * padding[0] - kh) // stride[0] + 1
    wo = (wd + 2 * padding[1] - kw) // stride[1] + 1
    out = np.zeros((c_out, ho, wo), complex)
    for o in range(c_out):
        for y in range(ho):
            for x in range(wo):
                acc = 0j
                for c in range(c_in):
                    for i in range(kh):
                        for j in range(kw):
                            yy, xx = y * stride[0] + i - padding[0], x * stride[1] + j - padding[1]
                            if 0 <= yy < h and 0 <= xx < wd:
                                acc += complex(w[o, c, i, j]) * complex(z[c, yy, xx])
                out[o, y, x] = acc
    return out


def test_complex_conv_oracle(criterion):
    rng = np.random.default_rng(11)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        c_in, c_out = (int(v) for v in rng.integers(1, 4, 2))
        kh, kw = (int(v) for v in rng.integers(1, 4, 2))
        stride = tuple(int(v) for v in rng.integers(1, 3, 2))
        padding = (int(rng.integers(0, kh)), int(rng.integers(0, kw)))
        wr, wi = rng.standard_normal((2, c_out, c_in, kh, kw))
        R, I = rng.standard_normal((2, c_in, 5, 6))
        got_r, got_i = complex_conv2d_forward(ComplexConvLayer(wr, wi, stride, padding), R, I)
        ref = _loop_complex_conv(wr + 1j * wi, R + 1j * I, stride, padding)
        worst = max(worst, float(np.max(np.abs(got_r + 1j * got_i - ref))))
    secs = time.perf_counter() - t0
    ok = criterion(worst < 1e-10 and secs < 5.0, f"max |error| {worst:.2e} on 100 instances, {secs:.2f} s")
    assert ok


# ---------------------------------------------------------------- gradients


def test_gradient_verification(criterion):
    t0 = time.perf_counter()
    worst, kinks, checked = 0.0, 0, 0
    for variant in VARIANTS:
        cfg = EmbedConfig(variant=variant)
        for seed in range(20):
            rng = np.random.default_rng(seed)
            x = rng.standard_normal((8, 17, 8)) + 1j * rng.standard_normal((8, 17, 8))
            res = grad_check(cfg, x, seed=seed, eps=1e-5)
            worst = max(worst, res.max_rel_error)
            kinks += res.n_kinks
            checked += res.n_checked
    secs = time.perf_counter() - t0
    detail = f"max relative error {worst:.2e}, {checked} entries, {kinks} kink probes skipped, 3 variants x 20 seeds, {secs:.1f} s"
    ok = criterion(worst < 1e-4 and secs < 60.0, detail)
    assert ok


# ---------------------------------------------------------------- swap sampler


def test_swap_sampler(criterion):
    items = [Item(f"av{i}", "A", 2.0) for i in range(100)]
    items += [Item(f"ao{i}", "B", 2.0) for i in range(100)]
    items += [Item(f"x{i}", "both", 2.0) for i in range(50)]
    meta = DatasetMeta(tuple(items))
    t0 = time.perf_counter()
    plan = plan_epoch(meta, alpha=0.7, batch_size=8, seed=0, n_batches=10_000)
    prop = branch_stats(plan).proportion_a
    bad = homogeneity_violations(plan, meta)
    secs = time.perf_counter() - t0
    ok = criterion(0.68 <= prop <= 0.72 and bad == 0 and secs < 1.0,
                   f"branch-A proportion {prop:.4f}, {bad} violations, {secs:.2f} s")
    assert ok


# ---------------------------------------------------------------- signal-level checks


def test_stft_round_trip(criterion):
    rng = np.random.default_rng(5)
    x = rng.standard_normal((4, 48000))
    y = inverse_stft(forward_stft(x, StftConfig(hop_samples=100)))
    sl = slice(200, 48000 - 200)
    err = float(np.linalg.norm(y[:, sl] - x[:, sl]) / np.linalg.norm(x[:, sl]))
    ok = criterion(err < 1e-6, f"relative L2 error {err:.2e}")
    assert ok


def test_rir_order1_paths(criterion):
    room = ROOM_PRESETS["large"]
    src = np.array([1.3, 1.1, 1.7])
    scene = SceneConfig(room, [Source(src, np.zeros(4000))], MicArrayGeometry.linear(2, 0.1),
                        np.array([3.4, 2.7, 1.1]), rt60_s=0.4, max_image_order=1)
    pos, _ = image_sources(room, src, 1)
    mirrors = [src.copy()]
    for axis in range(3):
        for wall in (0.0, room[axis]):
            p = src.copy()
            p[axis] = 2 * wall - p[axis]
            mirrors.append(p)
    mic = scene.mic_positions[0]
    taps = simulate_rir(scene, 0, 0).taps
    worst = 0.0
    for p in mirrors:
        delay = np.linalg.norm(p - mic) / 343.0 * 16000
        lo = int(math.floor(delay)) - 1
        peak = lo + int(np.argmax(taps[lo : lo + 4]))
        worst = max(worst, abs(peak - delay))
    matched = sorted(map(tuple, np.round(pos, 9))) == sorted(map(tuple, np.round(mirrors, 9)))
    ok = criterion(len(pos) == 7 and matched and worst <= 1.0,
                   f"{len(pos)} paths, positions match mirror oracle: {matched}, max delay error {worst:.2f} samples")
    assert ok


def test_schroeder_rt60(criterion):
    rng = np.random.default_rng(3)
    room = ROOM_PRESETS["large"]
    target = 0.4
    ests = []
    for _ in range(5):
        src = rng.uniform(0.6, np.array(room) - 0.6)
        center = rng.uniform(0.6, np.array(room) - 0.6)
        scene = SceneConfig(room, [Source(src, np.zeros(10))], MicArrayGeometry.linear(2, 0.1), center,
                            rt60_s=target, max_image_order=20)
        ests.append(estimate_rt60(simulate_rir(scene, 0, 0).taps, 16000))
    worst = max(abs(e - target) / target for e in ests)
    ok = criterion(worst <= 0.25, f"T20 estimates {', '.join(f'{e:.3f}' for e in ests)} s for {target} s, "
                                  f"max deviation {worst:.1%}")
    assert ok


# ---------------------------------------------------------------- determinism


def test_simulate_determinism(criterion, tmp_path):
    import json

    scene = tmp_path / "strong.json"
    scene.write_text(json.dumps(preset("strong", duration_s=1.0)))
    scene_noisy = tmp_path / "noisy.json"
    d = preset("weak", duration_s=1.0)
    d["noise_snr_db"] = 15.0
    scene_noisy.write_text(json.dumps(d))
    same = True
    n_files = 0
    for path in (scene, scene_noisy):
        a, b = tmp_path / f"{path.stem}_a", tmp_path / f"{path.stem}_b"
        assert cli.main(["sim", "--scene", str(path), "--out", str(a), "--seed", "13"]) == 0
        assert cli.main(["sim", "--scene", str(path), "--out", str(b), "--seed", "13"]) == 0
        for f in sorted(p for p in a.rglob("*") if p.is_file()):
            n_files += 1
            same &= f.read_bytes() == (b / f.relative_to(a)).read_bytes()
    ok = criterion(same and n_files > 0, f"{n_files} files byte-identical across two runs: {same}")
    assert ok
