"""Self-checks run by ``sf3d verify``.

Each check compares a code path against an independent computation and
returns a :class:`CheckResult`. Functions are looked up through their modules
at call time so a patched implementation is what gets checked.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import complex_embed, geometry, room_sim, spatial_features, stft, swap_sampler
from .scenes import single_speaker_scenario


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def __post_init__(self):
        self.passed = bool(self.passed)

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "detail": self.detail, "seconds": round(self.seconds, 3)}


def random_geometry(rng: np.random.Generator) -> geometry.MicArrayGeometry:
    m = int(rng.integers(2, 7))
    if rng.random() < 0.5:
        x = np.sort(rng.uniform(-0.3, 0.3, m))
        x += np.arange(m) * 1e-3  # keep mics apart
        pos = np.stack([x, np.zeros(m), np.zeros(m)], axis=1)
    else:
        pos = rng.uniform(-0.3, 0.3, (m, 3))
    return geometry.MicArrayGeometry(pos)


def random_location(rng: np.random.Generator) -> geometry.SpeakerLocation3D:
    return geometry.SpeakerLocation3D(
        rng.uniform(0, np.pi), rng.uniform(-np.pi / 2, np.pi / 2), rng.uniform(0.5, 5.0)
    )


def check_geometry(n: int = 1000, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        geom = random_geometry(rng)
        loc = random_location(rng)
        spk = geom.to_camera(loc)
        euclid = np.linalg.norm(spk - geom.mic_positions, axis=1)
        idx = np.array(geom.pairs)
        worst = max(worst, float(np.max(np.abs(geometry.pair_distances(geom, loc) - euclid[idx]))))
    return CheckResult("geometry_oracle", worst < 1e-9, f"max |law of cosines - euclidean| = {worst:.2e} m")


def check_stft_roundtrip(seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    cfg = stft.StftConfig(win_length_samples=512, hop_samples=128, fft_size=512)
    x = rng.standard_normal((3, 16000))
    y = stft.inverse_stft(stft.forward_stft(x, cfg))
    half = cfg.win_length_samples // 2
    sl = slice(half, x.shape[1] - half)
    err = float(np.linalg.norm(y[:, sl] - x[:, sl]) / np.linalg.norm(x[:, sl]))
    return CheckResult("stft_roundtrip", err < 1e-6, f"relative L2 error {err:.2e}")


def naive_complex_conv(wr, wi, R, I, stride, padding):
    """Direct complex-arithmetic convolution by nested loops."""
    w = wr + 1j * wi
    z = R + 1j * I
    c_out, c_in, kh, kw = w.shape
    _, h, wd = z.shape
    ho = (h + 2 * padding[0] - kh) // stride[0] + 1
    wo = (wd + 2 * padding[1] - kw) // stride[1] + 1
    out = np.zeros((c_out, ho, wo), dtype=complex)
    for o in range(c_out):
        for y in range(ho):
            for x in range(wo):
                acc = 0j
                for c in range(c_in):
                    for i in range(kh):
                        for j in range(kw):
                            yy = y * stride[0] + i - padding[0]
                            xx = x * stride[1] + j - padding[1]
                            if 0 <= yy < h and 0 <= xx < wd:
                                acc += w[o, c, i, j] * z[c, yy, xx]
                out[o, y, x] = acc
    return out


def check_complex_conv(n: int = 20, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        c_in, c_out = rng.integers(1, 4, size=2)
        shape = (c_out, c_in, 3, 3)
        stride = tuple(int(s) for s in rng.integers(1, 3, size=2))
        padding = tuple(int(p) for p in rng.integers(0, 2, size=2))
        layer = complex_embed.ComplexConvLayer(
            rng.standard_normal(shape), rng.standard_normal(shape), stride, padding, "identity"
        )
        R, I = rng.standard_normal((2, c_in, 5, 5))
        got_r, got_i = complex_embed.complex_conv2d_forward(layer, R, I)
        ref = naive_complex_conv(layer.w_r, layer.w_i, R, I, stride, padding)
        worst = max(worst, float(np.max(np.abs(got_r - ref.real))), float(np.max(np.abs(got_i - ref.imag))))
    return CheckResult("complex_conv_oracle", worst < 1e-10, f"max abs error {worst:.2e}")


def check_gradients(seeds=range(3)) -> CheckResult:
    worst = 0.0
    for variant in complex_embed.VARIANTS:
        cfg = complex_embed.EmbedConfig(variant=variant, channels=(8, 8))
        for seed in seeds:
            rng = np.random.default_rng(seed)
            x = rng.standard_normal((8, 9, 8)) + 1j * rng.standard_normal((8, 9, 8))
            worst = max(worst, complex_embed.grad_check(cfg, x, seed).max_rel_error)
    return CheckResult("gradient_check", worst < 1e-4, f"max relative error {worst:.2e}")


def check_anechoic_fidelity(seed: int = 0) -> CheckResult:
    """Single anechoic source: IPD must match TPD and the SF must be near 1."""
    sc = single_speaker_scenario(seed, duration_s=2.0)
    scene = sc.scene
    mix = room_sim.render_anechoic(scene)
    cfg = stft.StftConfig(sample_rate_hz=scene.sample_rate_hz)
    spec = stft.forward_stft(mix, cfg)
    ipd = spatial_features.compute_ipd(spec, scene.array.pairs)
    tpd = spatial_features.compute_tpd_3d(scene.array, sc.target, cfg, spec.n_frames, scene.c)
    sf = spatial_features.compute_sf(ipd, tpd)
    power = np.abs(spec.data[0]) ** 2
    loud = power >= 0.01 * power.max()
    err = np.abs(spatial_features.wrap_phase(ipd.values - tpd.values))[:, loud]
    frac = float(np.mean(err < 0.15))
    mean = spatial_features.mean_sf(sf, loud)
    ok = frac >= 0.95 and mean >= 0.95
    return CheckResult("anechoic_fidelity", ok, f"mean SF {mean:.4f}, {frac:.1%} of bins within 0.15 rad")


def check_rir_paths() -> CheckResult:
    geom = geometry.MicArrayGeometry.linear(2, 0.1)
    scene = room_sim.SceneConfig(
        room_sim.ROOM_PRESETS["large"], [room_sim.Source([1.3, 1.1, 1.7], np.zeros(8000))],
        geom, np.array([3.4, 2.7, 1.1]), rt60_s=0.4, max_image_order=1,
    )
    pos, _ = room_sim.image_sources(scene.room_dims, scene.sources[0].position, 1)
    ok = len(pos) == 7
    return CheckResult("rir_order1_paths", ok, f"{len(pos)} propagation paths at order 1")


def check_swap_sampler() -> CheckResult:
    items = [swap_sampler.Item(f"a{i}", "A", 1.0) for i in range(64)]
    items += [swap_sampler.Item(f"b{i}", "B", 1.0) for i in range(64)]
    meta = swap_sampler.DatasetMeta(tuple(items))
    plan = swap_sampler.plan_epoch(meta, 0.7, 8, seed=0, n_batches=10_000)
    prop = swap_sampler.branch_stats(plan).proportion_a
    bad = swap_sampler.homogeneity_violations(plan, meta)
    ok = 0.68 <= prop <= 0.72 and bad == 0
    return CheckResult("swap_sampler", ok, f"branch-A proportion {prop:.4f}, {bad} mixed batches")


ALL_CHECKS = (
    check_geometry,
    check_stft_roundtrip,
    check_complex_conv,
    check_gradients,
    check_anechoic_fidelity,
    check_rir_paths,
    check_swap_sampler,
)


def run_all() -> list[CheckResult]:
    results = []
    for check in ALL_CHECKS:
        t0 = time.perf_counter()
        try:
            res = check()
        except Exception as exc:  # a crashing check is a failing check
            res = CheckResult(check.__name__.removeprefix("check_"), False, f"{type(exc).__name__}: {exc}")
        res.seconds = time.perf_counter() - t0
        results.append(res)
    return results
