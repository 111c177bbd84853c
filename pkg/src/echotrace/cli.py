"""Batch front-end: config in, B-mode image (plus optional RF dump and
stats) out.

Pipeline: load meshes -> build BVH -> trace -> pulse convolution ->
delay-and-sum beamforming -> envelope -> log compression -> export.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import dsp, scene as scene_mod, tracer
from .config import SimConfig, parse_config, write_config


def build_scene(cfg: SimConfig) -> scene_mod.Scene:
    meshes = []
    for entry in cfg.meshes:
        mesh = scene_mod.load_mesh(entry.path, name=entry.name,
                                   material=entry.material)
        meshes.append(mesh)
    return scene_mod.Scene(meshes=meshes, materials=dict(cfg.materials),
                           background=cfg.background,
                           speed_of_sound=cfg.speed_of_sound)


def run(cfg: SimConfig, output_dir, threads: int = 1,
        dump_rf: bool = False, stats_json: bool = False,
        quiet: bool = False) -> int:
    """Execute the full pipeline; returns a process exit status."""
    out_dir = Path(output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    timings: dict[str, float] = {}

    def log(msg):
        if not quiet:
            print(msg)

    stage = "load"
    try:
        t0 = time.perf_counter()
        sc = build_scene(cfg)
        timings["load_s"] = time.perf_counter() - t0

        stage = "build"
        t0 = time.perf_counter()
        accel = scene_mod.build_accelerator(sc)
        timings["build_s"] = time.perf_counter() - t0
        log(f"scene: {accel.num_triangles} triangles, "
            f"{len(sc.meshes)} mesh(es)")

        stage = "trace"
        pulse = dsp.pulse_kernel(cfg.transducer.center_frequency_fc,
                                 cfg.pulse_cycles, cfg.sampling_frequency)
        trace_cfg = cfg.trace
        if trace_cfg.num_samples is None:
            trace_cfg.num_samples = tracer.default_num_samples(
                trace_cfg, sc.speed_of_sound, pulse_margin=pulse.kernel.size)
        channel = tracer.trace(sc, accel, cfg.transducer, cfg.scheme,
                               trace_cfg, threads=threads)
        stats = tracer.trace_stats(channel)
        timings["trace_s"] = stats.wall_time_s
        log(f"trace: {stats.rays_emitted} rays, {stats.deposits} deposits "
            f"({stats.occluded_cancelled} occluded, {stats.truncated} "
            f"truncated, {stats.killed_paths} killed), "
            f"mean bounces {stats.mean_bounces:.2f}, "
            f"{stats.wall_time_s:.2f} s")

        if dump_rf or cfg.output.rf_name:
            rf_name = cfg.output.rf_name or "channel.urrf"
            tracer.save_urrf(channel, out_dir / rf_name)
            log(f"wrote {out_dir / rf_name}")

        stage = "convolve"
        t0 = time.perf_counter()
        rf = dsp.convolve_channels(channel, pulse)
        timings["convolve_s"] = time.perf_counter() - t0

        stage = "beamform"
        t0 = time.perf_counter()
        bf_stats: dict = {}
        beamformed = dsp.das_beamform(rf, cfg.transducer, cfg.scheme,
                                      cfg.output.grid, sc.speed_of_sound,
                                      stats=bf_stats, threads=threads)
        timings["beamform_s"] = time.perf_counter() - t0
        if cfg.output.beamformed_name:
            dsp.save_urbf(beamformed, cfg.output.grid.pixel_pitch,
                          out_dir / cfg.output.beamformed_name)
            log(f"wrote {out_dir / cfg.output.beamformed_name}")

        stage = "envelope"
        t0 = time.perf_counter()
        env = dsp.envelope(beamformed)
        img = dsp.log_compress(env, cfg.dynamic_range_db,
                               grid=cfg.output.grid)
        timings["envelope_s"] = time.perf_counter() - t0

        stage = "export"
        image_path = out_dir / cfg.output.image_name
        dsp.export_image(img, image_path)
        log(f"wrote {image_path}")
        write_config(cfg, out_dir / "resolved.cfg")

        if stats_json:
            payload = {"trace": stats.as_dict(),
                       "beamform": bf_stats,
                       "timings": timings}
            (out_dir / "stats.json").write_text(
                json.dumps(payload, indent=2) + "\n", encoding="utf-8")
            log(f"wrote {out_dir / 'stats.json'}")
        log("timings: " + ", ".join(f"{k} {v:.2f}"
                                    for k, v in timings.items()))
        return 0
    except Exception as exc:  # noqa: BLE001 - report stage and fail
        print(f"error in stage {stage!r}: {exc}", file=sys.stderr)
        return 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="echotrace",
        description="Monte Carlo acoustic ray tracing with a plane-wave "
                    "ultrasound imaging chain")
    parser.add_argument("--config", required=True, help="run configuration")
    parser.add_argument("--output", default=".", help="output directory")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    parser.add_argument("--threads", type=int, default=1,
                        help="trace worker count")
    parser.add_argument("--dump-rf", action="store_true",
                        help="write the raw channel data as URRF")
    parser.add_argument("--stats-json", action="store_true",
                        help="write trace statistics and timings as JSON")
    args = parser.parse_args(argv)

    try:
        cfg = parse_config(args.config)
    except (OSError, ValueError) as exc:
        print(f"error in stage 'config': {exc}", file=sys.stderr)
        return 1
    if args.seed is not None:
        if args.seed < 0:
            print("error in stage 'config': --seed must be >= 0",
                  file=sys.stderr)
            return 1
        cfg.trace.seed = args.seed
    return run(cfg, args.output, threads=args.threads,
               dump_rf=args.dump_rf, stats_json=args.stats_json)


if __name__ == "__main__":
    sys.exit(main())
