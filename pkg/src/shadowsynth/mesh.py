"""Triangle meshes, OBJ input, and rigid transforms for occluders.

Only geometry matters for shadow casting, so OBJ parsing keeps `v` and
`f` records and ignores materials, normals, and texture coordinates.
Polygon faces are fan-triangulated around their first vertex.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "TriangleMesh",
    "Transform",
    "rotation_from_euler",
    "load_mesh",
    "save_obj",
    "unit_square",
    "unit_cube",
]


@dataclass(frozen=True)
class TriangleMesh:
    """Vertices (N, 3) float64 and triangle index triples (M, 3) int."""

    vertices: np.ndarray
    triangles: np.ndarray
    name: str = ""

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64)
        t = np.asarray(self.triangles, dtype=np.int64)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        if v.ndim != 2 or v.shape[1] != 3:
            raise ValueError(f"vertices must be (N, 3), got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("vertex coordinates must be finite")
        if t.ndim != 2 or t.shape[1] != 3 or t.shape[0] < 1:
            raise ValueError("mesh must have at least one triangle index triple")
        if t.min() < 0 or t.max() >= v.shape[0]:
            raise ValueError("triangle indices out of vertex range")

    @property
    def extent(self) -> float:
        """Largest axis-aligned bounding-box edge length."""
        spans = self.vertices.max(axis=0) - self.vertices.min(axis=0)
        return float(spans.max())


def rotation_from_euler(rx: float, ry: float, rz: float) -> np.ndarray:
    """Rotation matrix Rz @ Ry @ Rx from intrinsic xyz Euler angles (radians)."""
    cx, sx = np.cos(rx), np.sin(rx)
    cy, sy = np.cos(ry), np.sin(ry)
    cz, sz = np.cos(rz), np.sin(rz)
    rot_x = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    rot_y = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    rot_z = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    return rot_z @ rot_y @ rot_x


@dataclass(frozen=True)
class Transform:
    """Scale, then rotate, then translate."""

    scale: float | tuple[float, float, float] = 1.0
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        rot = np.asarray(self.rotation, dtype=np.float64)
        trans = np.asarray(self.translation, dtype=np.float64)
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", trans)
        scale = np.atleast_1d(np.asarray(self.scale, dtype=np.float64))
        if np.any(scale <= 0.0):
            raise ValueError(f"scale must be positive, got {self.scale}")
        if rot.shape != (3, 3):
            raise ValueError("rotation must be a 3x3 matrix")
        if not np.allclose(rot @ rot.T, np.eye(3), atol=1e-9):
            raise ValueError("rotation must be orthonormal")
        if not np.isclose(np.linalg.det(rot), 1.0, atol=1e-9):
            raise ValueError("rotation determinant must be +1")
        if trans.shape != (3,):
            raise ValueError("translation must be a 3-vector")

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform (N, 3) points."""
        scaled = np.asarray(points, dtype=np.float64) * self.scale
        return scaled @ self.rotation.T + self.translation


def load_mesh(path: str | os.PathLike) -> TriangleMesh:
    """Parse a Wavefront OBJ file into a TriangleMesh.

    Supports `v x y z` and `f ...` records with 1-based indices (also
    negative, relative indices); `v/vt/vn` slashes are tolerated and
    everything past the vertex index is dropped. Quads and larger
    polygons become triangle fans (v0, v_i, v_i+1).
    """
    vertices: list[list[float]] = []
    triangles: list[list[int]] = []
    with open(path, "r", encoding="utf-8", errors="replace") as handle:
        for lineno, line in enumerate(handle, start=1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "v":
                if len(parts) < 4:
                    raise ValueError(f"{path}:{lineno}: vertex needs 3 coordinates")
                vertices.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                if len(parts) < 4:
                    raise ValueError(f"{path}:{lineno}: face needs >= 3 vertices")
                idx = []
                for token in parts[1:]:
                    raw = int(token.split("/")[0])
                    idx.append(raw - 1 if raw > 0 else len(vertices) + raw)
                for i in range(1, len(idx) - 1):
                    triangles.append([idx[0], idx[i], idx[i + 1]])
    if not triangles:
        raise ValueError(f"{path}: no faces found")
    return TriangleMesh(
        vertices=np.array(vertices),
        triangles=np.array(triangles),
        name=os.path.splitext(os.path.basename(path))[0],
    )


def save_obj(mesh: TriangleMesh, path: str | os.PathLike) -> None:
    """Write a mesh as a minimal OBJ (triangle faces, 1-based indices)."""
    with open(path, "w", encoding="utf-8") as handle:
        for v in mesh.vertices:
            handle.write(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
        for t in mesh.triangles:
            handle.write(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}\n")


def unit_square() -> TriangleMesh:
    """Axis-aligned unit square in the z=0 plane, centered at the origin."""
    vertices = np.array(
        [[-0.5, -0.5, 0.0], [0.5, -0.5, 0.0], [0.5, 0.5, 0.0], [-0.5, 0.5, 0.0]]
    )
    triangles = np.array([[0, 1, 2], [0, 2, 3]])
    return TriangleMesh(vertices=vertices, triangles=triangles, name="unit_square")


def unit_cube() -> TriangleMesh:
    """Axis-aligned unit cube centered at the origin (12 triangles)."""
    vertices = np.array(
        [
            [-0.5, -0.5, -0.5],
            [0.5, -0.5, -0.5],
            [0.5, 0.5, -0.5],
            [-0.5, 0.5, -0.5],
            [-0.5, -0.5, 0.5],
            [0.5, -0.5, 0.5],
            [0.5, 0.5, 0.5],
            [-0.5, 0.5, 0.5],
        ]
    )
    triangles = np.array(
        [
            [0, 2, 1], [0, 3, 2],  # bottom
            [4, 5, 6], [4, 6, 7],  # top
            [0, 1, 5], [0, 5, 4],  # front
            [2, 3, 7], [2, 7, 6],  # back
            [1, 2, 6], [1, 6, 5],  # right
            [3, 0, 4], [3, 4, 7],  # left
        ]
    )
    return TriangleMesh(vertices=vertices, triangles=triangles, name="unit_cube")
