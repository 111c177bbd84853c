"""Triangle-mesh scenes: loading, acoustic materials, BVH construction and
ray queries.

Positions and directions are numpy float64 arrays of shape (3,); positions
are in meters, directions unit length. Scenes are immutable after
construction and safe to share across workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels

SELF_INTERSECT_OFFSET = _kernels.SELF_INTERSECT_OFFSET
_MIN_TRIANGLE_AREA = 1e-12  # m^2
_LEAF_SIZE = 4


class MeshFormatError(ValueError):
    """Raised on malformed mesh input; carries the offending line number."""

    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


class DegenerateTriangleError(ValueError):
    """Raised when a mesh contains triangles below the minimum area."""

    def __init__(self, name, indices):
        super().__init__(
            f"mesh {name!r} has {len(indices)} degenerate triangle(s) "
            f"(area <= {_MIN_TRIANGLE_AREA} m^2): {indices[:16]}")
        self.indices = indices


@dataclass(frozen=True)
class Material:
    """Homogeneous acoustic medium: impedance in MRayl, surface roughness."""

    name: str
    impedance_z: float
    roughness_alpha: float

    def __post_init__(self):
        if self.impedance_z <= 0.0:
            raise ValueError(f"material {self.name!r}: impedance_z must be "
                             f"> 0, got {self.impedance_z}")
        if not 0.0 < self.roughness_alpha <= 1.0:
            raise ValueError(f"material {self.name!r}: roughness_alpha must "
                             f"be in (0, 1], got {self.roughness_alpha}")


@dataclass
class Mesh:
    vertices: np.ndarray  # (V, 3) float64
    triangles: np.ndarray  # (T, 3) int32
    material: str = ""
    name: str = ""

    def validate(self):
        v = np.asarray(self.vertices, dtype=np.float64)
        t = np.asarray(self.triangles, dtype=np.int32)
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise ValueError(f"mesh {self.name!r}: triangle index out of "
                             f"range [0, {len(v)})")
        bad = _degenerate_indices(v, t)
        if bad:
            raise DegenerateTriangleError(self.name, bad)

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)


def _degenerate_indices(vertices, triangles):
    if len(triangles) == 0:
        return []
    a = vertices[triangles[:, 0]]
    e1 = vertices[triangles[:, 1]] - a
    e2 = vertices[triangles[:, 2]] - a
    area = 0.5 * np.linalg.norm(np.cross(e1, e2), axis=1)
    return np.nonzero(area <= _MIN_TRIANGLE_AREA)[0].tolist()


@dataclass
class Scene:
    """Meshes plus the material table and the ambient background medium."""

    meshes: list[Mesh] = field(default_factory=list)
    materials: dict[str, Material] = field(default_factory=dict)
    background: str = ""
    speed_of_sound: float = 1540.0

    def __post_init__(self):
        if self.speed_of_sound <= 0.0:
            raise ValueError("speed_of_sound must be > 0")
        if self.background not in self.materials:
            raise ValueError(f"background material {self.background!r} not "
                             "in material table")

    def material_of(self, mesh: Mesh) -> Material:
        try:
            return self.materials[mesh.material]
        except KeyError:
            raise ValueError(f"mesh {mesh.name!r} references unknown "
                             f"material {mesh.material!r}") from None


@dataclass(frozen=True)
class Hit:
    """Nearest surface interaction; the normal is oriented against the ray."""

    position: np.ndarray
    geometric_normal: np.ndarray
    distance_t: float
    material_inside: Material
    material_outside: Material
    front_face: bool


def load_mesh(path, fmt: str = "obj", *, name: str | None = None,
              material: str = "") -> Mesh:
    """Parse a wavefront-style triangle mesh.

    Recognized lines: `v x y z` vertices (meters) and `f i j k [l ...]`
    1-based faces; everything else is ignored. Polygons with more than three
    vertices are fan-triangulated. Face entries of the `i/j/k` flavor keep
    the leading vertex index.
    """
    if fmt != "obj":
        raise ValueError(f"unsupported mesh format {fmt!r}")
    path = Path(path)
    verts: list[tuple[float, float, float]] = []
    faces: list[tuple[int, int, int]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            parts = raw.split()
            if not parts:
                continue
            tag = parts[0]
            if tag == "v":
                if len(parts) < 4:
                    raise MeshFormatError(path, line_no,
                                          "vertex needs 3 coordinates")
                try:
                    verts.append((float(parts[1]), float(parts[2]),
                                  float(parts[3])))
                except ValueError:
                    raise MeshFormatError(path, line_no,
                                          "non-numeric vertex coordinate")
            elif tag == "f":
                if len(parts) < 4:
                    raise MeshFormatError(path, line_no,
                                          "face needs at least 3 indices")
                idx = []
                for tok in parts[1:]:
                    head = tok.split("/", 1)[0]
                    try:
                        i = int(head)
                    except ValueError:
                        raise MeshFormatError(path, line_no,
                                              f"bad face index {tok!r}")
                    if i < 1:
                        raise MeshFormatError(
                            path, line_no,
                            f"face index {i} is not 1-based positive")
                    idx.append(i - 1)
                for k in range(1, len(idx) - 1):
                    faces.append((idx[0], idx[k], idx[k + 1]))
    vertices = np.asarray(verts, dtype=np.float64).reshape(-1, 3)
    triangles = np.asarray(faces, dtype=np.int32).reshape(-1, 3)
    if triangles.size and triangles.max() >= len(vertices):
        raise MeshFormatError(path, 0,
                              f"face index {int(triangles.max()) + 1} "
                              f"exceeds vertex count {len(vertices)}")
    mesh = Mesh(vertices=vertices, triangles=triangles, material=material,
                name=name if name is not None else path.stem)
    mesh.validate()
    return mesh


def _build_bvh(v0, v1, v2):
    """Median-split BVH over triangle centroids; returns flat node arrays."""
    n_tri = len(v0)
    tri_min = np.minimum(np.minimum(v0, v1), v2)
    tri_max = np.maximum(np.maximum(v0, v1), v2)
    centroid = 0.5 * (tri_min + tri_max)
    order = np.arange(n_tri, dtype=np.int32)

    node_min: list[np.ndarray] = []
    node_max: list[np.ndarray] = []
    node_child: list[tuple[int, int]] = []
    node_range: list[tuple[int, int]] = []

    def new_node(lo, hi):
        i = len(node_min)
        if hi > lo:
            sel = order[lo:hi]
            node_min.append(tri_min[sel].min(axis=0))
            node_max.append(tri_max[sel].max(axis=0))
        else:
            node_min.append(np.full(3, np.inf))
            node_max.append(np.full(3, -np.inf))
        node_child.append((-1, -1))
        node_range.append((lo, hi - lo))
        return i

    stack = [(new_node(0, n_tri), 0, n_tri)]
    while stack:
        node, lo, hi = stack.pop()
        count = hi - lo
        if count <= _LEAF_SIZE:
            continue
        sel = order[lo:hi]
        cen = centroid[sel]
        extent = cen.max(axis=0) - cen.min(axis=0)
        axis = int(np.argmax(extent))
        if extent[axis] <= 0.0:
            continue  # coincident centroids: leave as a leaf
        order[lo:hi] = sel[np.argsort(cen[:, axis], kind="stable")]
        mid = lo + count // 2
        left = new_node(lo, mid)
        right = new_node(mid, hi)
        node_child[node] = (left, right)
        node_range[node] = (0, 0)
        stack.append((left, lo, mid))
        stack.append((right, mid, hi))

    return (np.asarray(node_min, dtype=np.float64),
            np.asarray(node_max, dtype=np.float64),
            np.asarray(node_child, dtype=np.int32),
            np.asarray(node_range, dtype=np.int32),
            order)


class Accelerator:
    """Packed scene arrays plus a BVH; all queries are read-only."""

    def __init__(self, scene: Scene):
        self.scene = scene
        mat_names = list(scene.materials)
        self._mat_index = {n: i for i, n in enumerate(mat_names)}
        self.mat_z = np.array(
            [scene.materials[n].impedance_z for n in mat_names])
        self.mat_alpha = np.array(
            [scene.materials[n].roughness_alpha for n in mat_names])
        self.bg_mat = self._mat_index[scene.background]

        v0s, v1s, v2s, mesh_ids = [], [], [], []
        mesh_mat = []
        for mi, mesh in enumerate(scene.meshes):
            mesh.validate()
            mesh_mat.append(self._mat_index[scene.material_of(mesh).name])
            v = np.asarray(mesh.vertices, dtype=np.float64)
            t = np.asarray(mesh.triangles, dtype=np.int32)
            if len(t) == 0:
                continue
            v0s.append(v[t[:, 0]])
            v1s.append(v[t[:, 1]])
            v2s.append(v[t[:, 2]])
            mesh_ids.append(np.full(len(t), mi, dtype=np.int32))
        if v0s:
            self.v0 = np.ascontiguousarray(np.concatenate(v0s))
            self.v1 = np.ascontiguousarray(np.concatenate(v1s))
            self.v2 = np.ascontiguousarray(np.concatenate(v2s))
            self.tri_mesh = np.concatenate(mesh_ids)
        else:
            self.v0 = np.empty((0, 3))
            self.v1 = np.empty((0, 3))
            self.v2 = np.empty((0, 3))
            self.tri_mesh = np.empty(0, dtype=np.int32)
        self.mesh_mat = np.asarray(mesh_mat, dtype=np.int32)

        normal = np.cross(self.v1 - self.v0, self.v2 - self.v0)
        length = np.linalg.norm(normal, axis=1, keepdims=True)
        self.tri_n = normal / np.where(length > 0.0, length, 1.0)

        (self.node_min, self.node_max, self.node_child,
         self.node_range, self.tri_order) = _build_bvh(
            self.v0, self.v1, self.v2)

    @property
    def num_triangles(self) -> int:
        return len(self.v0)

    def intersect_raw(self, origin, direction, t_max=math.inf):
        """(triangle index, total distance) with the self-intersection
        offset applied; triangle index is -1 on a miss."""
        eps = SELF_INTERSECT_OFFSET
        ox, oy, oz = (origin[0] + eps * direction[0],
                      origin[1] + eps * direction[1],
                      origin[2] + eps * direction[2])
        tri, t = _kernels.bvh_intersect(
            ox, oy, oz, direction[0], direction[1], direction[2],
            t_max - eps,
            self.node_min, self.node_max, self.node_child, self.node_range,
            self.tri_order, self.v0, self.v1, self.v2)
        return tri, t + eps

    def occluded(self, origin, direction, t_max) -> bool:
        eps = SELF_INTERSECT_OFFSET
        return _kernels.bvh_occluded(
            origin[0] + eps * direction[0], origin[1] + eps * direction[1],
            origin[2] + eps * direction[2],
            direction[0], direction[1], direction[2], t_max - 2.0 * eps,
            self.node_min, self.node_max, self.node_child, self.node_range,
            self.tri_order, self.v0, self.v1, self.v2)


def build_accelerator(scene: Scene) -> Accelerator:
    return Accelerator(scene)


def intersect(accel: Accelerator, origin, direction,
              t_max: float = math.inf) -> Hit | None:
    """Nearest hit within t_max, or None. Directions must be unit length."""
    origin = np.asarray(origin, dtype=np.float64)
    direction = np.asarray(direction, dtype=np.float64)
    tri, t = accel.intersect_raw(origin, direction, t_max)
    if tri < 0:
        return None
    normal = accel.tri_n[tri].copy()
    front = bool(np.dot(normal, direction) < 0.0)
    if not front:
        normal = -normal
    scene = accel.scene
    inside = scene.material_of(scene.meshes[accel.tri_mesh[tri]])
    outside = scene.materials[scene.background]
    return Hit(position=origin + t * direction,
               geometric_normal=normal,
               distance_t=float(t),
               material_inside=inside,
               material_outside=outside,
               front_face=front)


def material_pair_at(hit: Hit, scene: Scene) -> tuple[float, float]:
    """(Z1, Z2): Z1 is the medium the ray travels in, Z2 the one beyond."""
    zi = hit.material_inside.impedance_z
    zo = hit.material_outside.impedance_z
    return (zo, zi) if hit.front_face else (zi, zo)
