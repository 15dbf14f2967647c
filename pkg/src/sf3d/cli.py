"""Command-line entry point.

Exit codes: 0 success, 1 failed verification, 2 bad arguments, 3 runtime
failure. Runtime failures print one JSON object on stderr prefixed with
``error: ``.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import mapio, room_sim, scenes, spatial_features, swap_sampler, verify
from .geometry import SpeakerLocation3D, UnsupportedGeometryError
from .pipeline import analyze
from .stft import StftConfig
from .wavio import FLOAT32, PCM16, read_wav, write_wav

EXIT_OK, EXIT_VERIFY_FAILED, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3
LOCK_NAME = ".sf3d.lock"


class CliError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


@contextlib.contextmanager
def output_lock(out: Path):
    """Advisory lock so two runs do not write the same directory."""
    out.mkdir(parents=True, exist_ok=True)
    lock = out / LOCK_NAME
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise CliError("locked", f"{out} is in use (remove {lock} if stale)") from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        lock.unlink(missing_ok=True)


def _load_scene(path: str, seed: int | None):
    p = Path(path)
    if not p.is_file():
        raise CliError("missing_input", f"scene file {p} not found")
    try:
        return scenes.load_scene(p, seed)
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise CliError("bad_scene", f"{p}: {exc}") from exc


def cmd_preset(args) -> int:
    d = scenes.preset(args.name, duration_s=args.duration, seed=args.seed)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(json.dumps(d, indent=2) + "\n")
    return EXIT_OK


def cmd_simulate(args) -> int:
    scene = _load_scene(args.scene, args.seed)
    out = Path(args.out)
    with output_lock(out):
        rirs = room_sim.simulate_rirs(scene)
        images = room_sim.render_images(scene, rirs)
        mixture = images.sum(axis=0)
        if scene.noise_snr_db is not None:
            mixture = room_sim.add_noise(mixture, scene.noise_snr_db, scene.seed)
        fs = scene.sample_rate_hz
        write_wav(out / "mixture.wav", mixture, fs, args.wav_format)
        for k in range(len(scene.sources)):
            write_wav(out / "sources" / f"source_{k}.wav", images[k], fs, args.wav_format)
            for m in range(scene.n_mics):
                taps = rirs[k][m].taps
                write_wav(out / "rirs" / f"rir_s{k}_m{m}.wav", taps, fs, FLOAT32)
                mapio.write_sfmap(out / "rirs" / f"rir_s{k}_m{m}.sfmap", taps[None, :])
    return EXIT_OK


def _jittered(loc: SpeakerLocation3D, args, rng: np.random.Generator) -> SpeakerLocation3D:
    """Gaussian perturbation of a location, clipped back into the valid ranges."""
    az = loc.azimuth_rad + np.deg2rad(rng.normal(0.0, args.jitter_az_deg))
    el = loc.elevation_rad + np.deg2rad(rng.normal(0.0, args.jitter_el_deg))
    d = loc.distance_m + rng.normal(0.0, args.jitter_dist_m)
    return SpeakerLocation3D(
        float(np.clip(az, 0, np.pi)), float(np.clip(el, -np.pi / 2, np.pi / 2)), float(max(d, 1e-3))
    )


def cmd_features(args) -> int:
    scene = _load_scene(args.scene, args.seed)
    out = Path(args.out)
    mix_path = out / "mixture.wav"
    src_paths = [out / "sources" / f"source_{k}.wav" for k in range(len(scene.sources))]
    missing = [str(p) for p in [mix_path, *src_paths] if not p.is_file()]
    if missing:
        raise CliError("missing_input", f"run `sf3d sim` first; missing {', '.join(missing)}")
    if not 0 <= args.target < len(scene.sources):
        raise CliError("bad_target", f"target {args.target} out of range")

    mixture, _ = read_wav(mix_path)
    images = np.stack([read_wav(p)[0] for p in src_paths])
    loc = scene.source_location(args.target)
    if args.jitter_az_deg or args.jitter_el_deg or args.jitter_dist_m:
        loc = _jittered(loc, args, np.random.default_rng(scene.seed))
    cfg = StftConfig(sample_rate_hz=scene.sample_rate_hz)

    with output_lock(out):
        try:
            res = analyze(
                scene, mixture, images, target=args.target, tpd=args.tpd,
                normalize=args.normalize, floor_db=args.floor_db, cfg=cfg, location=loc,
            )
        except UnsupportedGeometryError as exc:
            raise CliError("unsupported_geometry", str(exc)) from exc
        feat = out / "features"
        mapio.write_sfmap(feat / "sf.sfmap", res.sf.values)
        mapio.write_map_csv(feat / "sf.csv", res.sf.values)
        for p in range(len(scene.array.pairs)):
            mapio.write_sfmap(feat / f"ipd_p{p}.sfmap", res.ipd.values[p])
            mapio.write_sfmap(feat / f"tpd_p{p}.sfmap", res.tpd.values[p])
        cin = spatial_features.assemble_complex_input(res.spec, scene.array, loc, args.smoothing, scene.c)
        np.save(feat / "complex_input.npy", cin.data)
        report = {
            "scenario": Path(args.scene).stem,
            "rt60_s": scene.rt60_s,
            "tpd": args.tpd,
            "normalized": args.normalize,
            "floor_db": args.floor_db,
            "target": args.target,
            "location": {
                "azimuth_deg": float(np.rad2deg(loc.azimuth_rad)),
                "elevation_deg": float(np.rad2deg(loc.elevation_rad)),
                "distance_m": loc.distance_m,
            },
            "sf_contrast": res.contrast,
            "mean_sf": res.mean_sf,
            "n_frames": res.spec.n_frames,
            "complex_input_shape": list(cin.data.shape),
        }
        (feat / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    contrast = "n/a" if res.contrast is None else f"{res.contrast:.4f}"
    print(f"{report['scenario']}: mean SF {res.mean_sf:.4f}, contrast {contrast}")
    return EXIT_OK


def cmd_verify(args) -> int:
    results = verify.run_all()
    ok = all(r.passed for r in results)
    if args.json:
        print(json.dumps({"passed": ok, "checks": [r.to_dict() for r in results]}, indent=2))
    else:
        for r in results:
            print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail} ({r.seconds:.2f} s)")
    return EXIT_OK if ok else EXIT_VERIFY_FAILED


def cmd_plan(args) -> int:
    try:
        meta = swap_sampler.read_meta(args.meta)
    except FileNotFoundError as exc:
        raise CliError("missing_input", str(exc)) from exc
    try:
        plan = swap_sampler.plan_epoch(
            meta, args.alpha, args.batch_size, args.seed, args.n_batches, quota=args.quota
        )
    except swap_sampler.InsufficientItemsError as exc:
        raise CliError("insufficient_items", str(exc)) from exc
    swap_sampler.write_plan(args.out, plan, meta)
    st = swap_sampler.branch_stats(plan)
    print(f"{st.batch_count} batches, branch A {st.proportion_a:.4f}, coverage {st.item_coverage:.3f}")
    return EXIT_OK


def _unit_interval(text: str) -> float:
    v = float(text)
    if not 0.0 <= v < 1.0:
        raise argparse.ArgumentTypeError("must lie in [0, 1)")
    return v


def _probability(text: str) -> float:
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError("must lie in [0, 1]")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sf3d", description="3D spatial feature toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preset", help="write a built-in scene file")
    p.add_argument("name", choices=scenes.PRESET_NAMES)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--duration", type=float, default=3.0)
    p.set_defaults(func=cmd_preset)

    p = sub.add_parser("sim", help="render a scene to WAV files and RIRs")
    p.add_argument("--scene", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--wav-format", choices=[FLOAT32, PCM16], default=FLOAT32)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("features", help="IPD/TPD/SF maps and contrast for a simulated scene")
    p.add_argument("--scene", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--tpd", choices=["1d", "3d"], default="3d")
    p.add_argument("--normalize", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--lambda", dest="smoothing", type=_unit_interval, default=0.0)
    p.add_argument("--floor-db", type=float, default=-20.0)
    p.add_argument("--target", type=int, default=0)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jitter-az-deg", type=float, default=0.0)
    p.add_argument("--jitter-el-deg", type=float, default=0.0)
    p.add_argument("--jitter-dist-m", type=float, default=0.0)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("verify", help="run the built-in correctness checks")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("plan", help="plan swap-training batches")
    p.add_argument("--meta", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--alpha", type=_probability, default=swap_sampler.DEFAULT_ALPHA)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--n-batches", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--quota", action="store_true")
    p.set_defaults(func=cmd_plan)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print("error: " + json.dumps({"code": exc.code, "message": str(exc)}), file=sys.stderr)
        return EXIT_RUNTIME
    except (ValueError, OSError) as exc:
        print("error: " + json.dumps({"code": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
