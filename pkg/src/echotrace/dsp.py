"""Signal chain from channel data to a B-mode image.

Steps: axial pulse convolution (sine carrier under a Gaussian envelope),
plane-wave delay-and-sum beamforming with coherent compounding across
steering angles, per-column analytic-signal envelope detection, log
compression to a fixed dynamic range, and 8-bit graymap export.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve, hilbert

from . import _kernels
from .tracer import ChannelData
from .transducer import (PlaneWaveScheme, TransducerSpec, element_centers,
                         min_aperture_projections, probe_frame,
                         steering_directions)

_URBF_MAGIC = b"URBF"
_URBF_VERSION = 1


@dataclass(frozen=True)
class Pulse:
    """Axial pulse: sin(2 pi fc t) exp(-t^2 / sigma) sampled at fs.

    sigma is fixed so the envelope is at half amplitude at
    +- cycles / (2 fc); the sampled support extends to where the envelope
    falls to 1e-3 of its peak.
    """

    fc: float
    cycles: float
    sigma: float  # s^2
    fs: float
    kernel: np.ndarray


def pulse_kernel(fc: float, cycles: float, fs: float) -> Pulse:
    """Build the axial pulse kernel.

    Parameters
    ----------
    fc : carrier frequency in Hz.
    cycles : pulse length in carrier cycles (>= 1).
    fs : sampling frequency in Hz; must exceed 2 fc.
    """
    if fs <= 2.0 * fc:
        raise ValueError(f"fs = {fs:g} violates the Nyquist bound for "
                         f"fc = {fc:g}")
    if cycles < 1:
        raise ValueError("cycles must be >= 1")
    sigma = (cycles / (2.0 * fc)) ** 2 / math.log(2.0)
    t_max = math.sqrt(sigma * math.log(1000.0))
    n_half = int(math.ceil(t_max * fs))
    t = np.arange(-n_half, n_half + 1) / fs
    kernel = np.sin(2.0 * math.pi * fc * t) * np.exp(-t * t / sigma)
    return Pulse(fc=fc, cycles=cycles, sigma=sigma, fs=fs, kernel=kernel)


def convolve_channels(channel: ChannelData, pulse: Pulse) -> ChannelData:
    """Convolve every (event, element) trace with the pulse, same length,
    aligned at the kernel center."""
    if abs(pulse.fs - channel.fs) > 1e-9 * channel.fs:
        raise ValueError(f"pulse sampled at {pulse.fs:g} Hz but channel "
                         f"data at {channel.fs:g} Hz")
    out = fftconvolve(channel.samples.astype(np.float64),
                      pulse.kernel[None, None, :], mode="same", axes=2)
    return ChannelData(samples=out.astype(np.float32), fs=channel.fs,
                       scheme=channel.scheme, stats=channel.stats)


@dataclass(frozen=True)
class BeamformGrid:
    """Cartesian pixel grid in the imaging plane; x lateral, z depth from
    the probe apex, both in meters."""

    x_min: float
    x_max: float
    z_min: float
    z_max: float
    pixel_pitch: float

    def __post_init__(self):
        if self.x_max <= self.x_min or self.z_max <= self.z_min:
            raise ValueError("grid extents must be positive")
        if self.pixel_pitch <= 0.0:
            raise ValueError("pixel_pitch must be > 0")

    @property
    def xs(self) -> np.ndarray:
        n = int(round((self.x_max - self.x_min) / self.pixel_pitch)) + 1
        return self.x_min + self.pixel_pitch * np.arange(n)

    @property
    def zs(self) -> np.ndarray:
        n = int(round((self.z_max - self.z_min) / self.pixel_pitch)) + 1
        return self.z_min + self.pixel_pitch * np.arange(n)

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.zs), len(self.xs))


def das_beamform(rf: ChannelData, spec: TransducerSpec,
                 scheme: PlaneWaveScheme, grid: BeamformGrid, c: float,
                 stats: dict | None = None, threads: int = 1) -> np.ndarray:
    """Delay-and-sum beamforming of plane-wave channel data.

    Per pixel and steering angle, the transmit time is the pixel's
    projection onto the steering direction referenced to the least-delayed
    element; the receive time is the element distance over c. Channels are
    sampled by linear interpolation, summed over elements without
    apodization, and compounded coherently over events. Out-of-range
    samples contribute zero and are counted in stats.

    Pixel-pitch note: the beamformed field still carries the carrier, so
    the depth pitch should stay below c / (4 fc) or envelope detection
    will alias.

    Workers split the pixel set; every pixel is summed by one worker, so
    the result does not depend on the thread count. Returns (nz, nx).
    """
    if rf.num_events != scheme.num_events:
        raise ValueError("channel data and scheme disagree on event count")
    if rf.num_elements != spec.num_elements:
        raise ValueError("channel data and spec disagree on element count")
    frame = probe_frame(spec)
    centers = element_centers(spec)
    steer = steering_directions(spec, scheme)
    minproj = min_aperture_projections(spec, scheme)
    apex = np.asarray(spec.center, dtype=np.float64)

    xs = grid.xs
    zs = grid.zs
    pix = (apex[None, None, :]
           + xs[None, :, None] * frame.lateral[None, None, :]
           + zs[:, None, None] * frame.axis[None, None, :])
    flat = np.ascontiguousarray(pix.reshape(-1, 3))
    n_pix = flat.shape[0]
    samples = np.ascontiguousarray(rf.samples, dtype=np.float32)

    acc = np.zeros(n_pix)
    if threads <= 1 or n_pix < 4096:
        out_of_range = int(_kernels.das_pixels(
            samples, flat, steer, minproj, centers, c, rf.fs, acc))
    else:
        bounds = np.linspace(0, n_pix, threads + 1).astype(np.int64)
        from concurrent.futures import ThreadPoolExecutor

        def worker(lo, hi):
            return int(_kernels.das_pixels(
                samples, flat[lo:hi], steer, minproj, centers, c, rf.fs,
                acc[lo:hi]))

        with ThreadPoolExecutor(max_workers=threads) as pool:
            out_of_range = sum(pool.map(lambda b: worker(*b),
                                        zip(bounds[:-1], bounds[1:])))
    if stats is not None:
        stats["out_of_range_samples"] = out_of_range
    return acc.reshape(len(zs), len(xs))


def envelope(beamformed: np.ndarray) -> np.ndarray:
    """Per depth-column magnitude of the analytic signal (one-sided
    spectrum method)."""
    b = np.asarray(beamformed, dtype=np.float64)
    if b.size == 0 or not np.any(b):
        return np.zeros_like(b)
    return np.abs(hilbert(b, axis=0))


@dataclass(frozen=True)
class BModeImage:
    values_db: np.ndarray  # (nz, nx), in [-dynamic_range_db, 0]
    dynamic_range_db: float
    grid: BeamformGrid | None = None


def log_compress(env: np.ndarray, dynamic_range_db: float,
                 grid: BeamformGrid | None = None) -> BModeImage:
    """20 log10(env / max(env)) clipped to [-dynamic_range_db, 0]; zeros
    map to the clip floor. Raises on an all-zero envelope."""
    if dynamic_range_db <= 0.0:
        raise ValueError("dynamic_range_db must be > 0")
    env = np.asarray(env, dtype=np.float64)
    peak = env.max() if env.size else 0.0
    if peak <= 0.0:
        raise ValueError("envelope has no positive values to normalize")
    with np.errstate(divide="ignore"):
        v = 20.0 * np.log10(env / peak)
    v = np.clip(v, -dynamic_range_db, 0.0)
    return BModeImage(values_db=v, dynamic_range_db=dynamic_range_db,
                      grid=grid)


def export_image(img: BModeImage, path) -> None:
    """Write an 8-bit binary graymap (P5); row 0 is the shallowest depth.

    Quantization: round(255 (v + DR) / DR) with halves away from zero.
    """
    v = img.values_db
    dr = img.dynamic_range_db
    scaled = 255.0 * (v + dr) / dr
    pixels = np.floor(scaled + 0.5).astype(np.uint8)
    nz, nx = v.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{nx} {nz}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())


def load_pgm(path) -> np.ndarray:
    """Read back a binary P5 graymap written by export_image."""
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P5"):
        raise ValueError("not a P5 graymap")
    fields: list[int] = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        fields.append(int(data[start:pos]))
    pos += 1  # single whitespace after maxval
    nx, nz, maxval = fields
    if maxval != 255:
        raise ValueError(f"unsupported maxval {maxval}")
    raster = np.frombuffer(data[pos:pos + nx * nz], dtype=np.uint8)
    if raster.size != nx * nz:
        raise ValueError("truncated raster")
    return raster.reshape(nz, nx)


def save_urbf(beamformed: np.ndarray, pixel_pitch: float, path) -> None:
    """Pre-envelope beamformed dump: magic URBF, u32 version, u32 nx,
    u32 nz, f64 pitch, float32 little-endian row-major (nz rows)."""
    nz, nx = beamformed.shape
    with open(path, "wb") as fh:
        fh.write(_URBF_MAGIC)
        fh.write(struct.pack("<IIId", _URBF_VERSION, nx, nz, pixel_pitch))
        fh.write(np.ascontiguousarray(beamformed, dtype="<f4").tobytes())


def load_urbf(path) -> tuple[np.ndarray, float]:
    with open(path, "rb") as fh:
        if fh.read(4) != _URBF_MAGIC:
            raise ValueError("not an URBF file")
        version, nx, nz, pitch = struct.unpack("<IIId", fh.read(20))
        if version != _URBF_VERSION:
            raise ValueError(f"unsupported URBF version {version}")
        data = np.frombuffer(fh.read(nx * nz * 4), dtype="<f4")
    if data.size != nx * nz:
        raise ValueError("truncated URBF payload")
    return data.reshape(nz, nx).astype(np.float64), pitch
