#!/usr/bin/env python3
"""Monte Carlo convergence on the flat-plate scene: the variance of the
peak channel amplitude across seeds should fall like 1/N."""

import argparse
import math
import time

import numpy as np

import echotrace as et
from echotrace.meshgen import make_slab


def flat_probe(num_elements: int, pitch: float = 3e-4,
               radius: float = 100.0) -> et.TransducerSpec:
    aperture = (num_elements - 1) * pitch
    return et.TransducerSpec(
        num_elements=num_elements, radius=radius,
        opening_angle=aperture / radius, elevational_extent=0.004,
        center_frequency_fc=5e6,
        main_beam_angle_alpha_m=math.radians(2.0),
        cutoff_angle_alpha_c=math.radians(2.0))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--elements", type=int, default=16)
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--threads", type=int, default=2)
    ap.add_argument("--budgets", type=int, nargs="+",
                    default=[1000, 10000, 100000])
    args = ap.parse_args()

    water = et.Material("water", 1.54, 0.5)
    bone = et.Material("bone", 7.8, 0.5)
    slab = make_slab(0.06, 0.02, 0.05, 0.01, material="bone", name="plate")
    sc = et.Scene(meshes=[slab], materials={"water": water, "bone": bone},
                  background="water")
    accel = et.build_accelerator(sc)
    spec = flat_probe(args.elements)
    scheme = et.PlaneWaveScheme((0.0,))

    t0 = time.time()
    log_n, log_v = [], []
    for n in args.budgets:
        peaks = []
        for s in range(args.seeds):
            cfg = et.TraceConfig(rays_per_element=n, seed=1000 + s)
            cd = et.trace(sc, accel, spec, scheme, cfg,
                          threads=args.threads)
            peaks.append(float(np.abs(cd.samples).max()))
        var = float(np.var(peaks, ddof=1))
        log_n.append(math.log(n))
        log_v.append(math.log(var))
        print(f"N = {n:>7d}  mean peak = {np.mean(peaks):.5g}  "
              f"var = {var:.5g}")
    slope = float(np.polyfit(log_n, log_v, 1)[0])
    print(f"log-variance slope vs log-N: {slope:.3f} "
          f"(ideal -1), {time.time() - t0:.0f} s")


if __name__ == "__main__":
    main()
