import math
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

import echotrace as et
from echotrace.meshgen import make_slab

settings.register_profile(
    "default", deadline=None, max_examples=50,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

REPO_ROOT = Path(__file__).resolve().parent.parent
SCENES = REPO_ROOT / "scenes"

WATER = et.Material("water", 1.54, 0.5)
BONE = et.Material("bone", 7.8, 0.5)


def flat_probe(num_elements=128, pitch=3e-4, radius=100.0,
               alpha_m_deg=2.0, alpha_c_deg=2.0) -> et.TransducerSpec:
    """Near-linear layout: the aperture laid on a large curvature radius."""
    aperture = (num_elements - 1) * pitch
    return et.TransducerSpec(
        num_elements=num_elements, radius=radius,
        opening_angle=aperture / radius, elevational_extent=0.004,
        center_frequency_fc=5e6,
        main_beam_angle_alpha_m=math.radians(alpha_m_deg),
        cutoff_angle_alpha_c=math.radians(alpha_c_deg))


def convex_probe(num_elements=128, radius=0.06, opening_deg=70.0
                 ) -> et.TransducerSpec:
    return et.TransducerSpec(
        num_elements=num_elements, radius=radius,
        opening_angle=math.radians(opening_deg), elevational_extent=0.004,
        center_frequency_fc=5e6,
        main_beam_angle_alpha_m=math.radians(2.0),
        cutoff_angle_alpha_c=math.radians(2.0))


def slab_scene(z_top=0.05, thickness=0.01, x_half=0.06, y_half=0.02,
               roughness=0.5) -> et.Scene:
    water = et.Material("water", 1.54, roughness)
    bone = et.Material("bone", 7.8, roughness)
    slab = make_slab(x_half, y_half, z_top, thickness, material="bone",
                     name="plate")
    return et.Scene(meshes=[slab], materials={"water": water, "bone": bone},
                    background="water")


def empty_scene() -> et.Scene:
    return et.Scene(meshes=[], materials={"water": WATER},
                    background="water")


@pytest.fixture(scope="session")
def plate_scene():
    return slab_scene()


@pytest.fixture(scope="session")
def plate_accel(plate_scene):
    return et.build_accelerator(plate_scene)
