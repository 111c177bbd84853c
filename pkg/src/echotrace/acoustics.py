"""Acoustic interface model: reflection/transmission directions from
Snell's law with the impedance ratio, signed Fresnel pressure amplitudes,
energy-conserving stochastic branch selection, and GGX microfacet roughness.

Conventions: incident directions point toward the surface, normals against
the incident ray. The impedance ratio eta = Z1/Z2 uses Z1 for the medium the
ray travels in. Total internal reflection is treated as full reflection with
unit amplitude magnitude.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .rng import RandomStream
from .scene import Hit

_UNIT_TOL = 1e-6


class Branch(enum.Enum):
    REFLECT = "reflect"
    TRANSMIT = "transmit"


class TotalInternalReflection:
    """Marker singleton returned in place of a transmitted direction."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "TIR"


TIR = TotalInternalReflection()


@dataclass(frozen=True)
class MicrofacetSample:
    half_vector_h: np.ndarray
    density: float  # D(h) (n.h), the sampling PDF over half vectors


@dataclass(frozen=True)
class ScatterResult:
    out_direction: np.ndarray
    throughput: float  # +-1: importance weights cancel, signs survive
    density: float


def _check_unit(v, label):
    v = np.asarray(v, dtype=np.float64)
    if abs(np.linalg.norm(v) - 1.0) > _UNIT_TOL:
        raise ValueError(f"{label} must be unit length (|v| = "
                         f"{np.linalg.norm(v):.8f})")
    return v


def snell_directions(omega_i, n, eta: float):
    """Reflected and transmitted directions at an interface.

    Returns (omega_r, omega_t, cos_theta_r, cos_theta_t); the transmitted
    pair is (TIR, TIR) past the critical angle.
    """
    omega_i = _check_unit(omega_i, "omega_i")
    n = _check_unit(n, "n")
    if eta <= 0.0:
        raise ValueError("eta must be > 0")
    if np.dot(n, omega_i) >= 0.0:
        raise ValueError("n must face against omega_i")
    rx, ry, rz, tx, ty, tz, cos_r, cos_t, tir = _kernels.snell(
        omega_i[0], omega_i[1], omega_i[2], n[0], n[1], n[2], eta)
    omega_r = np.array([rx, ry, rz])
    if tir:
        return omega_r, TIR, float(cos_r), TIR
    return omega_r, np.array([tx, ty, tz]), float(cos_r), float(cos_t)


def fresnel_amplitude(z1, z2, cos_theta_r, cos_theta_t):
    """Signed pressure reflection amplitude; TIR inputs give magnitude 1.

    Accepts scalars or broadcastable arrays; the TIR marker (or nan) in
    cos_theta_t maps to 1.0.
    """
    if cos_theta_t is TIR:
        return 1.0
    z1 = np.asarray(z1, dtype=np.float64)
    z2 = np.asarray(z2, dtype=np.float64)
    cr = np.asarray(cos_theta_r, dtype=np.float64)
    ct = np.asarray(cos_theta_t, dtype=np.float64)
    a = (z1 * cr - z2 * ct) / (z1 * cr + z2 * ct)
    a = np.where(np.isnan(ct), 1.0, a)
    return float(a) if a.ndim == 0 else a


def choose_branch(a_r_squared, rng: RandomStream):
    """Reflect with probability a_r_squared, else transmit.

    Scalar input returns a Branch; array input returns a boolean array
    (True = reflect) drawn elementwise from the stream.
    """
    a2 = np.asarray(a_r_squared, dtype=np.float64)
    if np.any(a2 < 0.0) or np.any(a2 > 1.0):
        raise ValueError("a_r_squared must lie in [0, 1]")
    if a2.ndim == 0:
        return Branch.REFLECT if rng.uniform() < float(a2) else Branch.TRANSMIT
    return rng.uniforms(a2.size).reshape(a2.shape) < a2


def ggx_density(n, h, alpha: float):
    """Microfacet distribution D(h); zero below the surface.

    n may be (3,) and h (..., 3); broadcasts over leading axes of h.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must be in (0, 1]")
    n = np.asarray(n, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    cos_nh = h @ n
    a2 = alpha * alpha
    t = cos_nh * cos_nh * (a2 - 1.0) + 1.0
    d = np.where(cos_nh > 0.0, a2 / (math.pi * t * t), 0.0)
    return float(d) if d.ndim == 0 else d


def sample_microfacet_normal(n, alpha: float,
                             rng: RandomStream) -> MicrofacetSample:
    """Half vector from the D(h)(n.h)-weighted GGX lobe.

    Inverse-CDF of two uniforms: theta = arctan(alpha sqrt(u1/(1-u1))),
    phi = 2 pi u2; the reported density is D(h)(n.h).
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must be in (0, 1]")
    n = _check_unit(n, "n")
    u1 = rng.uniform()
    u2 = rng.uniform()
    hx, hy, hz = _kernels.sample_h(n[0], n[1], n[2], alpha, u1, u2)
    h = np.array([hx, hy, hz])
    return MicrofacetSample(half_vector_h=h,
                            density=float(ggx_density(n, h, alpha)
                                          * np.dot(n, h)))


def scatter(hit: Hit, omega_i, material_pair, alpha: float,
            rng: RandomStream) -> ScatterResult | None:
    """Stochastic bounce at a hit: microfacet-perturbed Snell directions,
    Fresnel-weighted branch choice, unit |throughput| with the amplitude
    sign attached. Returns None when eight below-surface resamples fail."""
    omega_i = _check_unit(omega_i, "omega_i")
    n = hit.geometric_normal
    z1, z2 = material_pair
    state, ox, oy, oz, sign, density, ok = _kernels.scatter(
        rng.state, omega_i[0], omega_i[1], omega_i[2],
        n[0], n[1], n[2], z1, z2, alpha)
    rng.state = state
    if not ok:
        return None
    return ScatterResult(out_direction=np.array([ox, oy, oz]),
                         throughput=float(sign), density=float(density))


def eval_toward(hit: Hit, omega_i, omega_target, material_pair,
                alpha: float) -> float:
    """Directional density of leaving toward omega_target after arriving
    along omega_i: reflected-branch value A_r^2 D(h)(n.h) / (4 (t.h)),
    zero when the target is below the surface on the reflection side."""
    omega_i = _check_unit(omega_i, "omega_i")
    omega_target = _check_unit(omega_target, "omega_target")
    n = hit.geometric_normal
    z1, z2 = material_pair
    return float(_kernels.eval_reflect_toward(
        omega_i[0], omega_i[1], omega_i[2],
        omega_target[0], omega_target[1], omega_target[2],
        n[0], n[1], n[2], z1, z2, alpha))
