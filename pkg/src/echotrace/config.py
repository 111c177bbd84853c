"""Sectioned key-value configuration for simulation runs.

Sections: scene, meshes, materials, transducer, acquisition, trace, output.
Angles are degrees in config files and radians internally. Unknown sections
or keys are errors, not warnings; every diagnostic names the offending
`section.key` path.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass
from pathlib import Path

from .dsp import BeamformGrid
from .scene import Material
from .tracer import SECONDARY_MODES, TraceConfig
from .transducer import PlaneWaveScheme, TransducerSpec


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class MeshEntry:
    name: str
    path: Path
    material: str


@dataclass
class OutputConfig:
    grid: BeamformGrid
    image_name: str = "bmode.pgm"
    rf_name: str | None = None
    beamformed_name: str | None = None


@dataclass
class SimConfig:
    meshes: list[MeshEntry]
    materials: dict[str, Material]
    background: str
    speed_of_sound: float
    transducer: TransducerSpec
    scheme: PlaneWaveScheme
    sampling_frequency: float
    pulse_cycles: float
    dynamic_range_db: float
    trace: TraceConfig
    output: OutputConfig


_LINSPACE_RE = re.compile(
    r"^linspace\(\s*([-+0-9.eE]+)\s*,\s*([-+0-9.eE]+)\s*,\s*(\d+)\s*\)$")

_KNOWN_KEYS = {
    "scene": {"speed_of_sound", "background"},
    "meshes": None,  # free-form names
    "materials": None,
    "transducer": {"num_elements", "radius", "opening_angle_deg",
                   "elevational_extent", "center_frequency",
                   "main_beam_angle_deg", "cutoff_angle_deg", "center",
                   "axis"},
    "acquisition": {"angles_deg", "sampling_frequency", "pulse_cycles",
                    "dynamic_range_db"},
    "trace": {"rays_per_element", "max_bounces", "max_path_length", "seed",
              "secondary_mode", "max_secondary_interactions"},
    "output": {"x_min", "x_max", "z_min", "z_max", "pixel_pitch", "image",
               "rf", "beamformed"},
}


def _fail(path: str, message: str):
    raise ConfigError(f"{path}: {message}")


class _Section:
    def __init__(self, name: str, items: dict[str, str]):
        self.name = name
        self.items = items

    def get(self, key: str, default=None, required: bool = False):
        if key in self.items:
            return self.items[key]
        if required:
            _fail(f"{self.name}.{key}", "required key is missing")
        return default

    def number(self, key: str, default=None, required=False,
               minimum=None, strict_min=None, integer=False):
        raw = self.get(key, required=required)
        if raw is None:
            return default
        path = f"{self.name}.{key}"
        try:
            value = int(raw) if integer else float(raw)
        except ValueError:
            _fail(path, f"expected a number, got {raw!r}")
        if minimum is not None and value < minimum:
            _fail(path, f"must be >= {minimum}, got {value}")
        if strict_min is not None and value <= strict_min:
            _fail(path, f"must be > {strict_min}, got {value}")
        return value

    def vector(self, key: str, default):
        raw = self.get(key)
        if raw is None:
            return default
        parts = raw.split()
        if len(parts) != 3:
            _fail(f"{self.name}.{key}", "expected three numbers")
        try:
            return tuple(float(p) for p in parts)
        except ValueError:
            _fail(f"{self.name}.{key}", f"non-numeric component in {raw!r}")


def _parse_angles(raw: str, path: str) -> tuple[float, ...]:
    m = _LINSPACE_RE.match(raw.strip())
    if m:
        lo, hi, n = float(m.group(1)), float(m.group(2)), int(m.group(3))
        if n < 1:
            _fail(path, "linspace needs at least one point")
        if n == 1:
            degs = [lo]
        else:
            degs = [lo + (hi - lo) * i / (n - 1) for i in range(n)]
    else:
        try:
            degs = [float(p) for p in raw.split()]
        except ValueError:
            _fail(path, f"expected angles or linspace(a, b, n), got {raw!r}")
        if not degs:
            _fail(path, "angle list is empty")
    for d in degs:
        if not -90.0 < d < 90.0:
            _fail(path, f"angle {d} deg outside (-90, 90)")
    if any(b <= a for a, b in zip(degs, degs[1:])):
        _fail(path, "angles must be strictly increasing")
    return tuple(math.radians(d) for d in degs)


def parse_config(path) -> SimConfig:
    """Parse and fully validate a run configuration, applying defaults."""
    path = Path(path)
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",),
                                       interpolation=None)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    for section in parser.sections():
        if section not in _KNOWN_KEYS:
            _fail(section, "unknown section")
        known = _KNOWN_KEYS[section]
        if known is not None:
            for key in parser[section]:
                if key not in known:
                    _fail(f"{section}.{key}", "unknown key")

    def sec(name):
        return _Section(name, dict(parser[name]) if parser.has_section(name)
                        else {})

    scene = sec("scene")
    background = scene.get("background", required=True)
    c = scene.number("speed_of_sound", default=1540.0, strict_min=0.0)

    materials: dict[str, Material] = {}
    for key, raw in sec("materials").items.items():
        parts = raw.split()
        if len(parts) != 2:
            _fail(f"materials.{key}",
                  "expected '<impedance_mrayl> <roughness>'")
        try:
            z, rough = float(parts[0]), float(parts[1])
        except ValueError:
            _fail(f"materials.{key}", f"non-numeric value in {raw!r}")
        if z <= 0.0:
            _fail(f"materials.{key}", f"impedance must be > 0, got {z}")
        if not 0.0 < rough <= 1.0:
            _fail(f"materials.{key}",
                  f"roughness must be in (0, 1], got {rough}")
        materials[key] = Material(name=key, impedance_z=z,
                                  roughness_alpha=rough)
    if not materials:
        _fail("materials", "at least one material is required")
    if background not in materials:
        _fail("scene.background", f"unknown material {background!r}")

    meshes: list[MeshEntry] = []
    for key, raw in sec("meshes").items.items():
        parts = raw.rsplit(None, 1)
        if len(parts) != 2:
            _fail(f"meshes.{key}", "expected '<path> <material>'")
        mesh_path, mat = parts
        if mat not in materials:
            _fail(f"meshes.{key}", f"unknown material {mat!r}")
        p = Path(mesh_path)
        if not p.is_absolute():
            p = path.parent / p
        meshes.append(MeshEntry(name=key, path=p, material=mat))

    td = sec("transducer")
    try:
        transducer = TransducerSpec(
            num_elements=td.number("num_elements", default=128, integer=True,
                                   minimum=1),
            radius=td.number("radius", default=0.06, strict_min=0.0),
            opening_angle=math.radians(
                td.number("opening_angle_deg", default=70.0,
                          strict_min=0.0)),
            elevational_extent=td.number("elevational_extent", default=0.004,
                                         strict_min=0.0),
            center_frequency_fc=td.number("center_frequency", default=5e6,
                                          strict_min=0.0),
            main_beam_angle_alpha_m=math.radians(
                td.number("main_beam_angle_deg", default=2.0, minimum=0.0)),
            cutoff_angle_alpha_c=math.radians(
                td.number("cutoff_angle_deg", default=2.0, minimum=0.0)),
            center=td.vector("center", (0.0, 0.0, 0.0)),
            axis=td.vector("axis", (0.0, 0.0, 1.0)))
    except ValueError as exc:
        raise ConfigError(f"transducer: {exc}") from exc

    acq = sec("acquisition")
    angles = _parse_angles(acq.get("angles_deg", "linspace(-30, 30, 25)"),
                           "acquisition.angles_deg")
    scheme = PlaneWaveScheme(angles=angles)
    fs = acq.number("sampling_frequency", default=50e6, strict_min=0.0)
    cycles = acq.number("pulse_cycles", default=5.0, minimum=1.0)
    dr = acq.number("dynamic_range_db", default=90.0, strict_min=0.0)
    if fs <= 2.0 * transducer.center_frequency_fc:
        _fail("acquisition.sampling_frequency",
              f"{fs:g} Hz violates the Nyquist bound for the "
              f"{transducer.center_frequency_fc:g} Hz carrier")

    tr = sec("trace")
    mode = tr.get("secondary_mode", "transmissive")
    if mode not in SECONDARY_MODES:
        _fail("trace.secondary_mode",
              f"must be one of {SECONDARY_MODES}, got {mode!r}")
    try:
        trace_cfg = TraceConfig(
            rays_per_element=tr.number("rays_per_element", default=100000,
                                       integer=True, minimum=1),
            max_bounces=tr.number("max_bounces", default=10, integer=True,
                                  minimum=1),
            max_path_length=tr.number("max_path_length", default=0.2,
                                      strict_min=0.0),
            seed=tr.number("seed", default=0, integer=True, minimum=0),
            sampling_frequency_fs=fs,
            secondary_mode=mode,
            max_secondary_interactions=tr.number(
                "max_secondary_interactions", default=None, integer=True,
                minimum=1))
    except ValueError as exc:
        raise ConfigError(f"trace: {exc}") from exc

    out = sec("output")
    try:
        grid = BeamformGrid(
            x_min=out.number("x_min", default=-0.02),
            x_max=out.number("x_max", default=0.02),
            z_min=out.number("z_min", default=0.0),
            z_max=out.number("z_max", default=0.08),
            pixel_pitch=out.number("pixel_pitch", default=2e-4,
                                   strict_min=0.0))
    except ValueError as exc:
        raise ConfigError(f"output: {exc}") from exc
    output = OutputConfig(grid=grid,
                          image_name=out.get("image", "bmode.pgm"),
                          rf_name=out.get("rf"),
                          beamformed_name=out.get("beamformed"))

    return SimConfig(meshes=meshes, materials=materials,
                     background=background, speed_of_sound=c,
                     transducer=transducer, scheme=scheme,
                     sampling_frequency=fs, pulse_cycles=cycles,
                     dynamic_range_db=dr, trace=trace_cfg, output=output)


def write_config(cfg: SimConfig, path) -> None:
    """Echo a fully resolved configuration; parsing it back reproduces the
    run (mesh paths are written absolute)."""
    lines = ["[scene]",
             f"speed_of_sound = {cfg.speed_of_sound!r}",
             f"background = {cfg.background}",
             "",
             "[meshes]"]
    for m in cfg.meshes:
        lines.append(f"{m.name} = {m.path.resolve()} {m.material}")
    lines.append("")
    lines.append("[materials]")
    for name, mat in cfg.materials.items():
        lines.append(f"{name} = {mat.impedance_z!r} {mat.roughness_alpha!r}")
    t = cfg.transducer
    lines += [
        "",
        "[transducer]",
        f"num_elements = {t.num_elements}",
        f"radius = {t.radius!r}",
        f"opening_angle_deg = {math.degrees(t.opening_angle)!r}",
        f"elevational_extent = {t.elevational_extent!r}",
        f"center_frequency = {t.center_frequency_fc!r}",
        f"main_beam_angle_deg = {math.degrees(t.main_beam_angle_alpha_m)!r}",
        f"cutoff_angle_deg = {math.degrees(t.cutoff_angle_alpha_c)!r}",
        "center = {!r} {!r} {!r}".format(*t.center),
        "axis = {!r} {!r} {!r}".format(*t.axis),
        "",
        "[acquisition]",
        "angles_deg = " + " ".join(repr(math.degrees(a))
                                   for a in cfg.scheme.angles),
        f"sampling_frequency = {cfg.sampling_frequency!r}",
        f"pulse_cycles = {cfg.pulse_cycles!r}",
        f"dynamic_range_db = {cfg.dynamic_range_db!r}",
        "",
        "[trace]",
        f"rays_per_element = {cfg.trace.rays_per_element}",
        f"max_bounces = {cfg.trace.max_bounces}",
        f"max_path_length = {cfg.trace.max_path_length!r}",
        f"seed = {cfg.trace.seed}",
        f"secondary_mode = {cfg.trace.secondary_mode}",
    ]
    if cfg.trace.max_secondary_interactions is not None:
        lines.append("max_secondary_interactions = "
                     f"{cfg.trace.max_secondary_interactions}")
    g = cfg.output.grid
    lines += [
        "",
        "[output]",
        f"x_min = {g.x_min!r}",
        f"x_max = {g.x_max!r}",
        f"z_min = {g.z_min!r}",
        f"z_max = {g.z_max!r}",
        f"pixel_pitch = {g.pixel_pitch!r}",
        f"image = {cfg.output.image_name}",
    ]
    if cfg.output.rf_name:
        lines.append(f"rf = {cfg.output.rf_name}")
    if cfg.output.beamformed_name:
        lines.append(f"beamformed = {cfg.output.beamformed_name}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
