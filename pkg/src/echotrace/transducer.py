"""Convex-array geometry, steered plane-wave emission, and receive-side
element sampling with the directivity ramp.

The probe face is an arc of `radius` curvature spanning `opening_angle` in
the imaging plane, extruded by `elevational_extent`. `center` is the apex of
the face (middle of the arc) and `axis` points into the medium along the
imaging depth direction. The lateral and elevational directions are derived
from `axis` deterministically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .rng import RandomStream


@dataclass(frozen=True)
class TransducerSpec:
    num_elements: int
    radius: float  # m, convex curvature radius
    opening_angle: float  # rad, full arc subtended
    elevational_extent: float  # m
    center_frequency_fc: float  # Hz
    main_beam_angle_alpha_m: float  # rad
    cutoff_angle_alpha_c: float  # rad
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    axis: tuple[float, float, float] = (0.0, 0.0, 1.0)

    def __post_init__(self):
        if self.num_elements < 1:
            raise ValueError("num_elements must be >= 1")
        if self.radius <= 0.0:
            raise ValueError("radius must be > 0")
        if self.elevational_extent <= 0.0:
            raise ValueError("elevational_extent must be > 0")
        if not (0.0 <= self.main_beam_angle_alpha_m
                <= self.cutoff_angle_alpha_c <= math.pi / 2):
            raise ValueError("need 0 <= alpha_m <= alpha_c <= pi/2")
        axis = np.asarray(self.axis, dtype=np.float64)
        norm = np.linalg.norm(axis)
        if abs(norm - 1.0) > 1e-6:
            raise ValueError("axis must be unit length")


@dataclass(frozen=True)
class PlaneWaveScheme:
    """Steering angles (radians, in the imaging plane) of the acquisition."""

    angles: tuple[float, ...]

    def __post_init__(self):
        if len(self.angles) == 0:
            raise ValueError("scheme needs at least one angle")
        if any(b <= a for a, b in zip(self.angles, self.angles[1:])):
            raise ValueError("angles must be strictly increasing")

    @property
    def num_events(self) -> int:
        return len(self.angles)


@dataclass(frozen=True)
class EmittedRay:
    origin: np.ndarray
    direction: np.ndarray
    pressure: float
    emission_delay_t0: float
    event_index: int


@dataclass(frozen=True)
class ElementGeometry:
    index: int
    center: np.ndarray
    normal: np.ndarray
    lateral_arc_position: float


@dataclass(frozen=True)
class ProbeFrame:
    """Derived orthonormal frame and arc parameters used by the kernels."""

    lateral: np.ndarray
    elevational: np.ndarray
    axis: np.ndarray
    curvature_center: np.ndarray
    radius: float
    half_opening: float
    half_elevation: float


def probe_frame(spec: TransducerSpec) -> ProbeFrame:
    axis = np.asarray(spec.axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    up = np.array([0.0, 1.0, 0.0])
    if abs(np.dot(up, axis)) > 0.9:
        up = np.array([1.0, 0.0, 0.0])
    elev = up - np.dot(up, axis) * axis
    elev /= np.linalg.norm(elev)
    lateral = np.cross(elev, axis)
    center = np.asarray(spec.center, dtype=np.float64)
    return ProbeFrame(lateral=lateral, elevational=elev, axis=axis,
                      curvature_center=center - spec.radius * axis,
                      radius=spec.radius,
                      half_opening=0.5 * spec.opening_angle,
                      half_elevation=0.5 * spec.elevational_extent)


def _arc_angle(spec: TransducerSpec, e: int) -> float:
    if spec.num_elements == 1:
        return 0.0
    return spec.opening_angle * (e / (spec.num_elements - 1) - 0.5)


def element_geometry(spec: TransducerSpec, e: int) -> ElementGeometry:
    """Center, outward normal and arc position of element e."""
    if not 0 <= e < spec.num_elements:
        raise IndexError(f"element {e} out of range "
                         f"[0, {spec.num_elements})")
    frame = probe_frame(spec)
    phi = _arc_angle(spec, e)
    normal = math.sin(phi) * frame.lateral + math.cos(phi) * frame.axis
    return ElementGeometry(
        index=e,
        center=frame.curvature_center + spec.radius * normal,
        normal=normal,
        lateral_arc_position=spec.radius * phi)


def element_centers(spec: TransducerSpec) -> np.ndarray:
    """(num_elements, 3) element center positions."""
    frame = probe_frame(spec)
    phi = np.array([_arc_angle(spec, e) for e in range(spec.num_elements)])
    normals = (np.sin(phi)[:, None] * frame.lateral
               + np.cos(phi)[:, None] * frame.axis)
    return frame.curvature_center + spec.radius * normals


def element_normals(spec: TransducerSpec) -> np.ndarray:
    frame = probe_frame(spec)
    phi = np.array([_arc_angle(spec, e) for e in range(spec.num_elements)])
    return (np.sin(phi)[:, None] * frame.lateral
            + np.cos(phi)[:, None] * frame.axis)


def steering_direction(spec: TransducerSpec, angle: float) -> np.ndarray:
    """Unit propagation direction of the plane wave steered by `angle`."""
    frame = probe_frame(spec)
    return math.sin(angle) * frame.lateral + math.cos(angle) * frame.axis


def steering_directions(spec: TransducerSpec,
                        scheme: PlaneWaveScheme) -> np.ndarray:
    return np.stack([steering_direction(spec, a) for a in scheme.angles])


def min_aperture_projections(spec: TransducerSpec,
                             scheme: PlaneWaveScheme) -> np.ndarray:
    """Per event: smallest element-center projection onto the steering
    direction; subtracting it zeroes the minimum delay over the aperture."""
    centers = element_centers(spec)
    steer = steering_directions(spec, scheme)
    return (centers @ steer.T).min(axis=0)


def plane_wave_delay(spec: TransducerSpec, angle: float, point,
                     c: float) -> float:
    """Launch delay at `point` for a plane wave steered by `angle`.

    The delay is the point's projection onto the steering direction,
    referenced to the least-delayed element center, so the minimum over the
    aperture is exactly zero.
    """
    k = steering_direction(spec, angle)
    centers = element_centers(spec)
    ref = float((centers @ k).min())
    return (float(np.dot(np.asarray(point, dtype=np.float64), k)) - ref) / c


def sample_emission(spec: TransducerSpec, scheme: PlaneWaveScheme,
                    rays_per_element: int, rng: RandomStream,
                    c: float = 1540.0) -> EmittedRay:
    """Draw one primary ray: uniform origin over the face strip, uniform
    event choice, cosine pressure weighting scaled by the per-element ray
    budget, and the plane-wave launch delay of the sampled origin."""
    frame = probe_frame(spec)
    steer = steering_directions(spec, scheme)
    minproj = min_aperture_projections(spec, scheme)
    cc = frame.curvature_center
    (rng.state, ev, ox, oy, oz, kx, ky, kz, w, t0) = _kernels.emit_ray(
        rng.state, scheme.num_events, frame.half_opening,
        frame.half_elevation, cc[0], cc[1], cc[2],
        frame.lateral, frame.axis, frame.elevational, spec.radius,
        steer, minproj, c, rays_per_element)
    return EmittedRay(origin=np.array([ox, oy, oz]),
                      direction=np.array([kx, ky, kz]),
                      pressure=float(w),
                      emission_delay_t0=float(t0),
                      event_index=int(ev))


def receive_directivity(spec: TransducerSpec, omega_i,
                        element_normal) -> float:
    """Sensitivity in [0, 1] for an arrival from direction `omega_i`
    (pointing from the element into the medium): 1 inside the main beam,
    0 beyond the cutoff, linear ramp between; a hard step when the two
    angles coincide."""
    w = np.asarray(omega_i, dtype=np.float64)
    n = np.asarray(element_normal, dtype=np.float64)
    return float(_kernels.receive_weight(float(np.dot(n, w)),
                                         spec.main_beam_angle_alpha_m,
                                         spec.cutoff_angle_alpha_c))


def sample_receive_target(spec: TransducerSpec, rng: RandomStream
                          ) -> tuple[ElementGeometry, float]:
    """Uniformly chosen element plus its selection probability."""
    u = rng.uniform()
    e = min(int(u * spec.num_elements), spec.num_elements - 1)
    return element_geometry(spec, e), 1.0 / spec.num_elements
