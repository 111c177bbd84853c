"""Procedural meshes for example scenes and tests. All solids are closed
with outward winding."""

from __future__ import annotations

import math

import numpy as np

from .scene import Mesh


def make_slab(x_half: float, y_half: float, z_top: float, thickness: float,
              x_center: float = 0.0, tilt_deg: float = 0.0,
              name: str = "slab", material: str = "") -> Mesh:
    """Axis-aligned box slab with its top face at depth z_top, optionally
    tilted about the elevational (y) axis through the top-face center."""
    zb = z_top + thickness
    corners = np.array([
        [-x_half, -y_half, z_top], [x_half, -y_half, z_top],
        [x_half, y_half, z_top], [-x_half, y_half, z_top],
        [-x_half, -y_half, zb], [x_half, -y_half, zb],
        [x_half, y_half, zb], [-x_half, y_half, zb],
    ])
    if tilt_deg:
        a = math.radians(tilt_deg)
        rot = np.array([[math.cos(a), 0.0, math.sin(a)],
                        [0.0, 1.0, 0.0],
                        [-math.sin(a), 0.0, math.cos(a)]])
        pivot = np.array([0.0, 0.0, z_top])
        corners = (corners - pivot) @ rot.T + pivot
    corners[:, 0] += x_center
    # quads with outward normals, fan split
    quads = [
        (0, 1, 2, 3),  # top (-z side, toward the probe)
        (7, 6, 5, 4),  # bottom
        (0, 4, 5, 1),  # -y
        (2, 6, 7, 3),  # +y
        (1, 5, 6, 2),  # +x
        (3, 7, 4, 0),  # -x
    ]
    tris = []
    for q in quads:
        tris.append((q[0], q[1], q[2]))
        tris.append((q[0], q[2], q[3]))
    # top face must point toward -z (outward, toward the probe)
    mesh = Mesh(vertices=corners,
                triangles=np.array(tris, dtype=np.int32),
                material=material, name=name)
    _orient_outward(mesh)
    mesh.validate()
    return mesh


def make_sphere(center, radius: float, n_lat: int = 24, n_lon: int = 48,
                name: str = "sphere", material: str = "") -> Mesh:
    """UV sphere with triangle fans at the poles."""
    cx, cy, cz = center
    verts = [(cx, cy, cz - radius)]
    for i in range(1, n_lat):
        theta = math.pi * i / n_lat
        st, ct = math.sin(theta), math.cos(theta)
        for j in range(n_lon):
            phi = 2.0 * math.pi * j / n_lon
            verts.append((cx + radius * st * math.cos(phi),
                          cy + radius * st * math.sin(phi),
                          cz - radius * ct))
    verts.append((cx, cy, cz + radius))
    top = 0
    bottom = len(verts) - 1

    def ring(i, j):
        return 1 + (i - 1) * n_lon + (j % n_lon)

    tris = []
    for j in range(n_lon):
        tris.append((top, ring(1, j + 1), ring(1, j)))
    for i in range(1, n_lat - 1):
        for j in range(n_lon):
            a, b = ring(i, j), ring(i, j + 1)
            c, d = ring(i + 1, j), ring(i + 1, j + 1)
            tris.append((a, b, d))
            tris.append((a, d, c))
    for j in range(n_lon):
        tris.append((bottom, ring(n_lat - 1, j), ring(n_lat - 1, j + 1)))
    mesh = Mesh(vertices=np.asarray(verts, dtype=np.float64),
                triangles=np.asarray(tris, dtype=np.int32),
                material=material, name=name)
    _orient_outward(mesh, inner_point=np.array([cx, cy, cz]))
    mesh.validate()
    return mesh


def _orient_outward(mesh: Mesh, inner_point=None) -> None:
    """Flip triangles whose winding normal points toward the interior."""
    v = mesh.vertices
    t = mesh.triangles
    if inner_point is None:
        inner_point = v.mean(axis=0)
    a = v[t[:, 0]]
    n = np.cross(v[t[:, 1]] - a, v[t[:, 2]] - a)
    centroid = (a + v[t[:, 1]] + v[t[:, 2]]) / 3.0
    flip = np.einsum("ij,ij->i", n, centroid - inner_point) < 0.0
    t[flip] = t[flip][:, [0, 2, 1]]


def write_obj(mesh: Mesh, path) -> None:
    """Write vertices and 1-based triangle faces."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# {mesh.name}: {len(mesh.vertices)} vertices, "
                 f"{len(mesh.triangles)} triangles\n")
        for x, y, z in mesh.vertices:
            fh.write(f"v {x:.9g} {y:.9g} {z:.9g}\n")
        for i, j, k in mesh.triangles:
            fh.write(f"f {i + 1} {j + 1} {k + 1}\n")
