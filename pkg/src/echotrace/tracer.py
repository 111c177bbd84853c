"""Monte Carlo trace loop: emit primary rays, traverse with the acoustic
interface model, cast next-event rays toward sampled receive elements, and
accumulate time-stamped pressure into per-event channel data.

Work is partitioned into chunks with counter-derived random streams and
private accumulation buffers that are summed at the end; the deposit set is
identical for any worker count, only float summation order differs.
"""

from __future__ import annotations

import math
import struct
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .scene import Accelerator, Scene
from .transducer import (PlaneWaveScheme, TransducerSpec, element_centers,
                         element_normals, min_aperture_projections,
                         probe_frame, steering_directions)

SECONDARY_MODES = ("binary", "transmissive")

_URRF_MAGIC = b"URRF"
_URRF_VERSION = 1


@dataclass
class TraceConfig:
    rays_per_element: int
    max_bounces: int = 10
    max_path_length: float = 0.2  # m
    seed: int = 0
    sampling_frequency_fs: float = 50e6  # Hz
    num_samples: int | None = None  # derived from the path cap when None
    secondary_mode: str = "transmissive"
    max_secondary_interactions: int | None = None

    def __post_init__(self):
        if self.rays_per_element < 1 or self.max_bounces < 1:
            raise ValueError("ray and bounce budgets must be >= 1")
        if self.max_path_length <= 0.0:
            raise ValueError("max_path_length must be > 0")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")
        if self.secondary_mode not in SECONDARY_MODES:
            raise ValueError(f"secondary_mode must be one of "
                             f"{SECONDARY_MODES}")
        if (self.max_secondary_interactions is not None
                and self.max_secondary_interactions < 1):
            raise ValueError("max_secondary_interactions must be >= 1")


@dataclass
class TraceStats:
    rays_emitted: int = 0
    deposits: int = 0
    occluded_cancelled: int = 0
    truncated: int = 0
    killed_paths: int = 0
    zero_weight_rays: int = 0
    total_bounces: int = 0
    per_event_deposits: np.ndarray = field(
        default_factory=lambda: np.zeros(0, dtype=np.int64))
    wall_time_s: float = 0.0

    @property
    def mean_bounces(self) -> float:
        if self.rays_emitted == 0:
            return 0.0
        return self.total_bounces / self.rays_emitted

    def as_dict(self) -> dict:
        return {
            "rays_emitted": self.rays_emitted,
            "deposits": self.deposits,
            "occluded_cancelled": self.occluded_cancelled,
            "truncated": self.truncated,
            "killed_paths": self.killed_paths,
            "zero_weight_rays": self.zero_weight_rays,
            "mean_bounces": self.mean_bounces,
            "per_event_deposits": self.per_event_deposits.tolist(),
            "wall_time_s": self.wall_time_s,
        }


@dataclass
class ChannelData:
    """Per-event, per-element, per-sample pressure traces.

    `scheme` is None for data loaded from a dump, which does not record the
    steering angles.
    """

    samples: np.ndarray  # (events, elements, samples) float32
    fs: float
    scheme: PlaneWaveScheme | None
    stats: TraceStats | None = None

    @property
    def num_events(self) -> int:
        return self.samples.shape[0]

    @property
    def num_elements(self) -> int:
        return self.samples.shape[1]

    @property
    def num_samples(self) -> int:
        return self.samples.shape[2]


def default_num_samples(cfg: TraceConfig, c: float,
                        pulse_margin: int = 0) -> int:
    """Buffer length covering the longest round trip plus a pulse margin."""
    return (int(math.ceil(2.0 * cfg.max_path_length / c
                          * cfg.sampling_frequency_fs)) + pulse_margin + 1)


def splat(channel: ChannelData, event: int, element: int, time_s: float,
          amplitude: float) -> int:
    """Linear two-tap deposit at time_s; returns the number of taps dropped
    beyond the sample buffer."""
    if time_s < 0.0:
        raise ValueError("time must be >= 0")
    pos = time_s * channel.fs
    i0 = int(pos)
    frac = pos - i0
    dropped = 0
    n = channel.num_samples
    if i0 < n:
        channel.samples[event, element, i0] += amplitude * (1.0 - frac)
    else:
        dropped += 1
    if i0 + 1 < n:
        channel.samples[event, element, i0 + 1] += amplitude * frac
    else:
        dropped += 1
    return dropped


def trace(scene: Scene, accel: Accelerator, spec: TransducerSpec,
          scheme: PlaneWaveScheme, cfg: TraceConfig,
          threads: int = 1) -> ChannelData:
    """Run the full emission-traversal-deposit loop.

    Deterministic for a fixed (seed, scene, config); bit-identical across
    reruns at any fixed thread count, and deposit-set identical across
    thread counts.
    """
    if accel.scene is not scene:
        raise ValueError("accelerator was built for a different scene")
    if cfg.sampling_frequency_fs <= 2.0 * spec.center_frequency_fc:
        raise ValueError("sampling frequency must exceed twice the center "
                         "frequency")
    if threads < 1:
        raise ValueError("threads must be >= 1")

    c = scene.speed_of_sound
    n_events = scheme.num_events
    n_elements = spec.num_elements
    n_samples = (cfg.num_samples if cfg.num_samples is not None
                 else default_num_samples(cfg, c))
    max_sec = (cfg.max_secondary_interactions
               if cfg.max_secondary_interactions is not None
               else cfg.max_bounces)
    mode = (_kernels.SECONDARY_BINARY if cfg.secondary_mode == "binary"
            else _kernels.SECONDARY_TRANSMISSIVE)

    frame = probe_frame(spec)
    elem_c = element_centers(spec)
    elem_n = element_normals(spec)
    steer = steering_directions(spec, scheme)
    minproj = min_aperture_projections(spec, scheme)
    cc = frame.curvature_center

    total_rays = cfg.rays_per_element * n_elements
    bounds = np.linspace(0, total_rays, threads + 1).astype(np.int64)

    def run_chunk(lo, hi):
        buf = np.zeros((n_events, n_elements, n_samples), dtype=np.float32)
        st = np.zeros(8, dtype=np.int64)
        evd = np.zeros(n_events, dtype=np.int64)
        if hi > lo:
            _kernels.trace_chunk(
                lo, hi - lo, cfg.seed,
                accel.v0, accel.v1, accel.v2, accel.tri_n, accel.tri_mesh,
                accel.node_min, accel.node_max, accel.node_child,
                accel.node_range, accel.tri_order,
                accel.mesh_mat, accel.mat_z, accel.mat_alpha, accel.bg_mat,
                elem_c, elem_n,
                spec.main_beam_angle_alpha_m, spec.cutoff_angle_alpha_c,
                cc[0], cc[1], cc[2], frame.lateral, frame.axis,
                frame.elevational, spec.radius, frame.half_opening,
                frame.half_elevation, steer, minproj,
                c, cfg.rays_per_element, cfg.max_bounces,
                cfg.max_path_length, cfg.sampling_frequency_fs, mode,
                max_sec, buf, st, evd)
        return buf, st, evd

    t_start = time.perf_counter()
    if threads == 1:
        results = [run_chunk(0, total_rays)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(
                lambda ab: run_chunk(*ab),
                zip(bounds[:-1], bounds[1:])))
    samples = results[0][0]
    stats_arr = results[0][1]
    evd = results[0][2]
    for buf, st, ed in results[1:]:
        samples += buf
        stats_arr += st
        evd += ed
    wall = time.perf_counter() - t_start

    if not np.all(np.isfinite(samples)):
        raise FloatingPointError("non-finite channel data; physics bug")

    stats = TraceStats(
        rays_emitted=int(stats_arr[_kernels.STAT_RAYS]),
        deposits=int(stats_arr[_kernels.STAT_DEPOSITS]),
        occluded_cancelled=int(stats_arr[_kernels.STAT_OCCLUDED]),
        truncated=int(stats_arr[_kernels.STAT_TRUNCATED]),
        killed_paths=int(stats_arr[_kernels.STAT_KILLED]),
        zero_weight_rays=int(stats_arr[_kernels.STAT_ZERO_WEIGHT]),
        total_bounces=int(stats_arr[_kernels.STAT_BOUNCES]),
        per_event_deposits=evd,
        wall_time_s=wall)
    return ChannelData(samples=samples, fs=cfg.sampling_frequency_fs,
                       scheme=scheme, stats=stats)


def trace_stats(channel: ChannelData) -> TraceStats:
    if channel.stats is None:
        raise ValueError("channel data carries no trace statistics")
    return channel.stats


def save_urrf(channel: ChannelData, path) -> None:
    """Binary RF dump: magic URRF, u32 version, u32 events, u32 elements,
    u32 samples, f64 fs, then float32 little-endian in
    [event][element][sample] order."""
    a, e, s = channel.samples.shape
    with open(path, "wb") as fh:
        fh.write(_URRF_MAGIC)
        fh.write(struct.pack("<IIIId", _URRF_VERSION, a, e, s, channel.fs))
        fh.write(np.ascontiguousarray(channel.samples,
                                      dtype="<f4").tobytes())


def load_urrf(path, scheme: PlaneWaveScheme | None = None) -> ChannelData:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _URRF_MAGIC:
            raise ValueError(f"not an URRF file (magic {magic!r})")
        version, a, e, s, fs = struct.unpack("<IIIId", fh.read(24))
        if version != _URRF_VERSION:
            raise ValueError(f"unsupported URRF version {version}")
        data = np.frombuffer(fh.read(a * e * s * 4), dtype="<f4")
        if data.size != a * e * s:
            raise ValueError("truncated URRF payload")
    samples = data.reshape(a, e, s).astype(np.float32)
    return ChannelData(samples=samples, fs=fs, scheme=scheme)
