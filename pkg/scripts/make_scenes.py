#!/usr/bin/env python3
"""Regenerate the bundled example meshes in scenes/."""

from pathlib import Path

from echotrace.meshgen import make_slab, make_sphere, write_obj

ROOT = Path(__file__).resolve().parent.parent / "scenes"


def main():
    ROOT.mkdir(exist_ok=True)
    write_obj(make_slab(0.06, 0.02, 0.05, 0.01, name="flat_plate"),
              ROOT / "flat_plate.obj")
    write_obj(make_slab(0.06, 0.02, 0.05, 0.01, tilt_deg=20.0,
                        name="tilted_plate"),
              ROOT / "tilted_plate.obj")
    write_obj(make_sphere((0.0, 0.0, 0.045), 0.010, n_lat=24, n_lon=48,
                          name="sphere"),
              ROOT / "sphere.obj")
    # occluder wider than the deep plate: every return path to the probe
    # from the deep plate crosses the shallow one. The occluder is thin so
    # in-plate reverberation (10 bounces max) cannot alias deeper than
    # ~35 mm and the shadow below stays free of legitimate ghosts.
    write_obj(make_slab(0.030, 0.02, 0.030, 0.0005, name="upper_plate"),
              ROOT / "upper_plate.obj")
    write_obj(make_slab(0.015, 0.02, 0.050, 0.005, name="lower_plate"),
              ROOT / "lower_plate.obj")
    for f in sorted(ROOT.glob("*.obj")):
        print(f)


if __name__ == "__main__":
    main()
