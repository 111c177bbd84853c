"""Physics-based ultrasound simulation by Monte Carlo acoustic ray tracing.

Rays are traced from a convex-array transducer through a triangle-mesh
scene with an acoustic microfacet interface model; next-event rays back to
receive elements accumulate time-stamped channel data, which a plane-wave
signal chain (pulse convolution, delay-and-sum beamforming, envelope
detection, log compression) turns into B-mode images.
"""

from .acoustics import (Branch, MicrofacetSample, ScatterResult, TIR,
                        choose_branch, eval_toward, fresnel_amplitude,
                        ggx_density, sample_microfacet_normal,
                        scatter, snell_directions)
from .dsp import (BeamformGrid, BModeImage, Pulse, convolve_channels,
                  das_beamform, envelope, export_image, load_pgm, load_urbf,
                  log_compress, pulse_kernel, save_urbf)
from .rng import RandomStream
from .scene import (Accelerator, DegenerateTriangleError, Hit, Material,
                    Mesh, MeshFormatError, Scene, build_accelerator,
                    intersect, load_mesh, material_pair_at)
from .tracer import (ChannelData, TraceConfig, TraceStats, load_urrf,
                     save_urrf, splat, trace, trace_stats)
from .transducer import (ElementGeometry, EmittedRay, PlaneWaveScheme,
                         TransducerSpec, element_geometry, plane_wave_delay,
                         receive_directivity, sample_emission,
                         sample_receive_target)

__version__ = "0.1.0"

__all__ = [
    "Accelerator", "BeamformGrid", "BModeImage", "Branch", "ChannelData",
    "DegenerateTriangleError", "ElementGeometry", "EmittedRay", "Hit",
    "Material", "Mesh", "MeshFormatError", "MicrofacetSample",
    "PlaneWaveScheme", "Pulse", "RandomStream", "ScatterResult", "Scene",
    "TIR", "TraceConfig", "TraceStats", "TransducerSpec",
    "build_accelerator", "choose_branch", "convolve_channels",
    "das_beamform", "element_geometry", "envelope", "eval_toward",
    "export_image", "fresnel_amplitude", "ggx_density", "intersect",
    "load_mesh", "load_pgm", "load_urbf", "load_urrf", "log_compress",
    "material_pair_at", "plane_wave_delay", "pulse_kernel",
    "receive_directivity", "sample_emission", "sample_microfacet_normal",
    "sample_receive_target", "save_urbf", "save_urrf", "scatter",
    "snell_directions", "splat", "trace", "trace_stats",
]
