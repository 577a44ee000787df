"""Software soft-shadow matte renderer.

A pinhole camera looks at the ground plane z=0, a spherical light hangs
above it, and one or two transformed triangle meshes occlude the light
from outside the camera view. The matte value of a pixel is the
fraction of the light that the occluders block at the pixel's plane
point: 1 inside the umbra, fractional in the penumbra, 0 where lit.

Brightness is deliberately not modeled here; the matte is a pure
occlusion fraction, and all intensity variation comes from the
illumination model at composition time.

The sphere is treated, per receiver point, as a disk of equal radius
facing that point. Each pixel shoots `light_samples` shadow rays at
stratified jittered disk points; every scanline owns a decorrelated
counter-based stream, so output is reproducible and independent of any
parallel schedule.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mesh import TriangleMesh, Transform, rotation_from_euler
from .streams import substream

__all__ = [
    "Camera",
    "SphereLight",
    "SceneConfig",
    "RenderSettings",
    "SceneRanges",
    "SceneError",
    "ray_triangle_intersect",
    "render_matte",
    "randomize_scene",
    "visible_plane_quad",
    "aabb_outside_frustum",
]

_SEGMENT_T_MIN = 1e-9
_DET_EPS = 1e-12


class SceneError(RuntimeError):
    """Scene construction or placement failure."""


@dataclass(frozen=True)
class Camera:
    """Pinhole camera: position, look-at orientation, vertical FOV, aspect."""

    position: np.ndarray
    look_at: np.ndarray
    fov_y_deg: float = 40.0
    aspect: float = 1.0
    up: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=np.float64)
        tgt = np.asarray(self.look_at, dtype=np.float64)
        up = np.asarray(self.up, dtype=np.float64)
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "look_at", tgt)
        object.__setattr__(self, "up", up)
        if pos.shape != (3,) or tgt.shape != (3,) or up.shape != (3,):
            raise ValueError("camera vectors must be 3D")
        if np.allclose(pos, tgt):
            raise ValueError("camera position and look_at coincide")
        if not 0.0 < self.fov_y_deg < 180.0:
            raise ValueError(f"fov_y_deg must be in (0, 180), got {self.fov_y_deg}")
        if self.aspect <= 0.0:
            raise ValueError("aspect must be positive")

    def basis(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Right, up, forward unit vectors of the camera frame."""
        forward = self.look_at - self.position
        forward = forward / np.linalg.norm(forward)
        up_hint = self.up
        if abs(float(forward @ up_hint) / np.linalg.norm(up_hint)) > 0.999:
            up_hint = np.array([0.0, 1.0, 0.0])
        right = np.cross(forward, up_hint)
        right = right / np.linalg.norm(right)
        true_up = np.cross(right, forward)
        return right, true_up, forward

    def ray_directions(self, width: int, height: int) -> np.ndarray:
        """Normalized directions through all pixel centers, shape (H, W, 3).

        Row 0 is the top of the image.
        """
        right, up, forward = self.basis()
        tan_y = np.tan(np.radians(self.fov_y_deg) / 2.0)
        tan_x = tan_y * self.aspect
        xs = ((np.arange(width) + 0.5) / width * 2.0 - 1.0) * tan_x
        ys = (1.0 - (np.arange(height) + 0.5) / height * 2.0) * tan_y
        dirs = (
            forward
            + xs[None, :, None] * right
            + ys[:, None, None] * up
        )
        return dirs / np.linalg.norm(dirs, axis=-1, keepdims=True)


@dataclass(frozen=True)
class SphereLight:
    """Spherical area light; radius 0 degenerates to a point light."""

    center: np.ndarray
    radius: float = 0.0

    def __post_init__(self):
        center = np.asarray(self.center, dtype=np.float64)
        object.__setattr__(self, "center", center)
        if center.shape != (3,):
            raise ValueError("light center must be 3D")
        if self.radius < 0.0:
            raise ValueError(f"light radius must be >= 0, got {self.radius}")


@dataclass(frozen=True)
class SceneConfig:
    """Camera + spherical light + transformed occluders over the plane z=0."""

    camera: Camera
    light: SphereLight
    occluders: tuple[tuple[TriangleMesh, Transform], ...]

    def __post_init__(self):
        object.__setattr__(self, "occluders", tuple(self.occluders))
        if self.light.center[2] <= 0.0:
            raise ValueError("light center must be strictly above the plane z=0")
        if len(self.occluders) < 1:
            raise ValueError("scene needs at least one occluder")

    def world_triangles(self) -> list[np.ndarray]:
        """Per occluder, transformed triangle vertices with shape (M, 3, 3)."""
        out = []
        for mesh, transform in self.occluders:
            verts = transform.apply(mesh.vertices)
            out.append(verts[mesh.triangles])
        return out


@dataclass(frozen=True)
class RenderSettings:
    width: int = 512
    height: int = 512
    light_samples: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("render dimensions must be positive")
        if self.light_samples < 1:
            raise ValueError("light_samples must be >= 1")


# ---------------------------------------------------------------------------
# Ray-triangle intersection
# ---------------------------------------------------------------------------

def ray_triangle_intersect(
    origin: np.ndarray,
    direction: np.ndarray,
    triangle: np.ndarray,
    t_min: float = 1e-12,
    t_max: float = np.inf,
) -> float | None:
    """Parametric ray-triangle intersection (Moller-Trumbore).

    Returns the ray parameter t of the hit within (t_min, t_max), or
    None. Barycentric bounds are inclusive, so rays through shared
    edges and vertices register on the triangles on both sides.
    """
    origin = np.asarray(origin, dtype=np.float64)
    direction = np.asarray(direction, dtype=np.float64)
    tri = np.asarray(triangle, dtype=np.float64)
    if not np.any(direction):
        raise ValueError("ray direction must be non-zero")
    edge1 = tri[1] - tri[0]
    edge2 = tri[2] - tri[0]
    pvec = np.cross(direction, edge2)
    det = float(edge1 @ pvec)
    if abs(det) < _DET_EPS:
        return None
    inv_det = 1.0 / det
    tvec = origin - tri[0]
    u = float(tvec @ pvec) * inv_det
    if u < 0.0 or u > 1.0:
        return None
    qvec = np.cross(tvec, edge1)
    v = float(direction @ qvec) * inv_det
    if v < 0.0 or u + v > 1.0:
        return None
    t = float(edge2 @ qvec) * inv_det
    if t <= t_min or t >= t_max:
        return None
    return t


def _segment_hits_aabb(
    origins: np.ndarray, deltas: np.ndarray, lo: np.ndarray, hi: np.ndarray
) -> np.ndarray:
    """Slab test: may segment origin + t*delta, t in [0, 1], enter the box?"""
    safe = np.where(np.abs(deltas) < 1e-300, 1e-300, deltas)
    inv = 1.0 / safe
    t0 = (lo - origins) * inv
    t1 = (hi - origins) * inv
    t_near = np.minimum(t0, t1).max(axis=-1)
    t_far = np.maximum(t0, t1).min(axis=-1)
    return (t_near <= t_far) & (t_far >= 0.0) & (t_near <= 1.0)


def _segment_occluded(
    origins: np.ndarray,
    targets: np.ndarray,
    occluder_tris: list[np.ndarray],
) -> np.ndarray:
    """Boolean per segment origin->target: does any triangle block it?

    `targets` may be a single point or one per origin. Intersections are
    accepted for t in (eps, 1 - eps) so endpoint geometry never
    self-occludes.
    """
    deltas = np.broadcast_to(targets, origins.shape) - origins
    occluded = np.zeros(origins.shape[0], dtype=bool)
    for tris in occluder_tris:
        lo = tris.min(axis=(0, 1))
        hi = tris.max(axis=(0, 1))
        active = np.flatnonzero(~occluded & _segment_hits_aabb(origins, deltas, lo, hi))
        if active.size == 0:
            continue
        o_sub = origins[active]
        d_sub = deltas[active]
        hit_sub = np.zeros(active.size, dtype=bool)
        for tri in tris:
            live = ~hit_sub
            if not live.any():
                break
            o = o_sub[live]
            d = d_sub[live]
            edge1 = tri[1] - tri[0]
            edge2 = tri[2] - tri[0]
            pvec = np.cross(d, edge2)
            det = pvec @ edge1
            valid = np.abs(det) > _DET_EPS
            inv_det = np.where(valid, 1.0 / np.where(valid, det, 1.0), 0.0)
            tvec = o - tri[0]
            u = np.einsum("ij,ij->i", tvec, pvec) * inv_det
            qvec = np.cross(tvec, edge1)
            v = np.einsum("ij,ij->i", d, qvec) * inv_det
            t = (qvec @ edge2) * inv_det
            hit = (
                valid
                & (u >= 0.0)
                & (v >= 0.0)
                & (u + v <= 1.0)
                & (t > _SEGMENT_T_MIN)
                & (t < 1.0 - _SEGMENT_T_MIN)
            )
            hit_sub[live] |= hit
        occluded[active] |= hit_sub
    return occluded


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

def _disk_frame(w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal (e1, e2) spanning the plane perpendicular to unit w (..., 3)."""
    helper = np.zeros_like(w)
    use_x = np.abs(w[..., 0]) < 0.9
    helper[..., 0] = use_x
    helper[..., 1] = ~use_x
    e1 = np.cross(w, helper)
    e1 = e1 / np.linalg.norm(e1, axis=-1, keepdims=True)
    e2 = np.cross(w, e1)
    return e1, e2


def render_matte(scene: SceneConfig, settings: RenderSettings) -> np.ndarray:
    """Render the shadow matte of the plane z=0 seen through the camera.

    Pixels whose camera ray misses the plane get 0. With n light
    samples every value is a multiple of 1/n, and a radius-0 light
    yields a strictly binary matte.
    """
    h, w, n = settings.height, settings.width, settings.light_samples
    cam = scene.camera
    dirs = cam.ray_directions(w, h).reshape(-1, 3)
    dz = dirs[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        t_plane = np.where(np.abs(dz) > 1e-300, -cam.position[2] / dz, -1.0)
    hits = t_plane > 0.0
    points = cam.position + t_plane[:, None] * dirs
    occluder_tris = scene.world_triangles()
    light = scene.light

    matte = np.zeros(h * w)
    if light.radius == 0.0:
        idx = np.flatnonzero(hits)
        if idx.size:
            occ = _segment_occluded(points[idx], light.center, occluder_tris)
            matte[idx] = occ.astype(np.float64)
        return matte.reshape(h, w)

    matte = matte.reshape(h, w)
    points = points.reshape(h, w, 3)
    hits = hits.reshape(h, w)
    sample_index = np.arange(n)
    rows_per_chunk = max(1, (1 << 19) // max(w * n, 1))
    for start in range(0, h, rows_per_chunk):
        rows = range(start, min(h, start + rows_per_chunk))
        jitter = np.stack(
            [substream(settings.seed, row, 0).random((w, n, 2)) for row in rows]
        )
        p_chunk = points[start : start + len(rows)]
        hit_chunk = hits[start : start + len(rows)]

        to_light = light.center - p_chunk
        dist = np.linalg.norm(to_light, axis=-1, keepdims=True)
        w_axis = to_light / np.where(dist > 0.0, dist, 1.0)
        e1, e2 = _disk_frame(w_axis)

        # Stratified in radius, jittered in angle.
        u1 = (sample_index + jitter[..., 0]) / n
        rho = light.radius * np.sqrt(u1)
        theta = 2.0 * np.pi * jitter[..., 1]
        targets = (
            light.center
            + (rho * np.cos(theta))[..., None] * e1[:, :, None, :]
            + (rho * np.sin(theta))[..., None] * e2[:, :, None, :]
        )
        origins = np.broadcast_to(p_chunk[:, :, None, :], targets.shape)

        flat_origin = origins.reshape(-1, 3)
        flat_target = targets.reshape(-1, 3)
        live = np.repeat(hit_chunk.reshape(-1), n)
        occ = np.zeros(flat_origin.shape[0], dtype=bool)
        idx = np.flatnonzero(live)
        if idx.size:
            occ[idx] = _segment_occluded(flat_origin[idx], flat_target[idx], occluder_tris)
        counts = occ.reshape(len(rows), w, n).sum(axis=2)
        matte[start : start + len(rows)] = counts / n * hit_chunk
    return matte


# ---------------------------------------------------------------------------
# Visibility / placement geometry
# ---------------------------------------------------------------------------

def visible_plane_quad(camera: Camera) -> np.ndarray | None:
    """Plane points hit by the four image-corner rays, or None if any miss.

    Returned as (4, 2) xy coordinates: the region of the plane the
    camera can see (assuming the whole image is below the horizon).
    """
    right, up, forward = camera.basis()
    tan_y = np.tan(np.radians(camera.fov_y_deg) / 2.0)
    tan_x = tan_y * camera.aspect
    corners = []
    for sx, sy in ((-1, -1), (1, -1), (1, 1), (-1, 1)):
        d = forward + sx * tan_x * right + sy * tan_y * up
        if d[2] >= -1e-12:
            return None
        t = -camera.position[2] / d[2]
        if t <= 0.0:
            return None
        corners.append((camera.position + t * d)[:2])
    return np.array(corners)


def _frustum_corner_coords(camera: Camera, aabb_lo, aabb_hi) -> np.ndarray:
    right, up, forward = camera.basis()
    corners = np.array(
        [
            [x, y, z]
            for x in (aabb_lo[0], aabb_hi[0])
            for y in (aabb_lo[1], aabb_hi[1])
            for z in (aabb_lo[2], aabb_hi[2])
        ]
    )
    rel = corners - camera.position
    return np.stack([rel @ right, rel @ up, rel @ forward], axis=1)


def aabb_outside_frustum(
    camera: Camera, aabb_lo: np.ndarray, aabb_hi: np.ndarray, near: float = 1e-3
) -> bool:
    """Conservatively True when the box cannot intersect the view frustum.

    Tests the 8 corners against the near plane and the four side
    planes; a box fully outside any one plane is certainly invisible.
    """
    coords = _frustum_corner_coords(camera, aabb_lo, aabb_hi)
    tan_y = np.tan(np.radians(camera.fov_y_deg) / 2.0)
    tan_x = tan_y * camera.aspect
    r, u, f = coords[:, 0], coords[:, 1], coords[:, 2]
    if np.all(f < near):
        return True
    for signed in (r + tan_x * f, -r + tan_x * f, u + tan_y * f, -u + tan_y * f):
        if np.all(signed < 0.0):
            return True
    return False


def _shadow_footprint(
    light_center: np.ndarray, aabb_lo: np.ndarray, aabb_hi: np.ndarray
) -> np.ndarray | None:
    """xy bounding box of the occluder AABB projected from the light center
    onto the plane z=0, or None when nothing projects downward."""
    pts = []
    lz = light_center[2]
    for x in (aabb_lo[0], aabb_hi[0]):
        for y in (aabb_lo[1], aabb_hi[1]):
            for z in (aabb_lo[2], aabb_hi[2]):
                if z >= lz - 1e-9:
                    continue
                t = lz / (lz - z)
                pts.append(light_center[:2] + t * (np.array([x, y]) - light_center[:2]))
    if not pts:
        return None
    pts = np.array(pts)
    return np.array([pts.min(axis=0), pts.max(axis=0)])


def _boxes_overlap(a: np.ndarray, b: np.ndarray) -> bool:
    return bool(
        (a[0, 0] <= b[1, 0])
        and (b[0, 0] <= a[1, 0])
        and (a[0, 1] <= b[1, 1])
        and (b[0, 1] <= a[1, 1])
    )


@dataclass(frozen=True)
class SceneRanges:
    """Randomization bounds for scene geometry.

    These are toolkit defaults for plausible oblique-sun scenes, chosen
    so that occluders sit off-view to the side of the camera while
    their shadows fall into the visible plane region.
    """

    occluder_count_weights: tuple[float, float] = (0.5, 0.5)
    occluder_size: tuple[float, float] = (0.8, 2.5)
    path_fraction: tuple[float, float] = (0.35, 0.75)
    light_height: tuple[float, float] = (6.0, 12.0)
    light_offset: tuple[float, float] = (6.0, 14.0)
    light_radius: tuple[float, float] = (0.0, 1.0)
    camera_height: tuple[float, float] = (5.0, 10.0)
    camera_distance: tuple[float, float] = (4.0, 8.0)
    fov_y_deg: float = 40.0
    aspect: float = 1.0
    max_attempts: int = 200

    def __post_init__(self):
        w1, w2 = self.occluder_count_weights
        if w1 < 0 or w2 < 0 or w1 + w2 <= 0:
            raise ValueError("occluder_count_weights must be nonnegative, not both 0")
        for name in (
            "occluder_size",
            "path_fraction",
            "camera_height",
            "camera_distance",
            "light_height",
            "light_offset",
            "light_radius",
        ):
            lo, hi = getattr(self, name)
            if not lo <= hi:
                raise ValueError(f"{name} must satisfy lo <= hi, got ({lo}, {hi})")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")


def _quad_point(quad: np.ndarray, u: float, v: float) -> np.ndarray:
    """Bilinear point inside the visible quad for (u, v) in [0, 1]^2."""
    bottom = quad[0] * (1 - u) + quad[1] * u
    top = quad[3] * (1 - u) + quad[2] * u
    return bottom * (1 - v) + top * v


def randomize_scene(
    assets: list[TriangleMesh],
    ranges: SceneRanges,
    rng: np.random.Generator,
) -> SceneConfig:
    """Draw a random scene whose occluders are invisible but cast onto the view.

    Occluders float on the segment from the light toward a random
    target point in the camera-visible plane region; placements are
    rejected and fully redrawn until every occluder is outside the
    camera frustum and its projected shadow footprint overlaps the
    visible region.
    """
    if not assets:
        raise SceneError("asset library is empty")
    w1, w2 = ranges.occluder_count_weights
    # Drawn once, before placement retries, so rejection cannot skew the
    # occluder-count distribution away from the configured weights.
    n_occluders = 2 if rng.random() < w2 / (w1 + w2) else 1

    for _ in range(ranges.max_attempts):
        cam_azimuth = rng.uniform(0.0, 2.0 * np.pi)
        cam_distance = rng.uniform(*ranges.camera_distance)
        cam_height = rng.uniform(*ranges.camera_height)
        camera = Camera(
            position=np.array(
                [
                    cam_distance * np.cos(cam_azimuth),
                    cam_distance * np.sin(cam_azimuth),
                    cam_height,
                ]
            ),
            look_at=np.zeros(3),
            fov_y_deg=ranges.fov_y_deg,
            aspect=ranges.aspect,
        )
        quad = visible_plane_quad(camera)
        if quad is None:
            continue
        quad_box = np.array([quad.min(axis=0), quad.max(axis=0)])

        light_azimuth = rng.uniform(0.0, 2.0 * np.pi)
        light_offset = rng.uniform(*ranges.light_offset)
        light_center = np.array(
            [
                light_offset * np.cos(light_azimuth),
                light_offset * np.sin(light_azimuth),
                rng.uniform(*ranges.light_height),
            ]
        )
        light = SphereLight(center=light_center, radius=rng.uniform(*ranges.light_radius))

        occluders = []
        for _k in range(n_occluders):
            mesh = assets[int(rng.integers(len(assets)))]
            target = _quad_point(quad, rng.random(), rng.random())
            fraction = rng.uniform(*ranges.path_fraction)
            size = rng.uniform(*ranges.occluder_size)
            euler = rng.uniform(0.0, 2.0 * np.pi, size=3)

            scale = size / mesh.extent
            rotation = rotation_from_euler(*euler)
            anchor = light_center * (1.0 - fraction) + np.append(target, 0.0) * fraction

            base = Transform(scale=scale, rotation=rotation)
            verts = base.apply(mesh.vertices)
            center = (verts.min(axis=0) + verts.max(axis=0)) / 2.0
            translation = anchor - center
            # Keep the body strictly between plane and light.
            lo_z = verts[:, 2].min() + translation[2]
            hi_z = verts[:, 2].max() + translation[2]
            clearance = 0.05
            if lo_z < clearance:
                translation[2] += clearance - lo_z
                hi_z += clearance - lo_z
            if hi_z > light_center[2] - clearance:
                occluders = None
                break
            transform = Transform(scale=scale, rotation=rotation, translation=translation)

            world = transform.apply(mesh.vertices)
            aabb_lo, aabb_hi = world.min(axis=0), world.max(axis=0)
            if not aabb_outside_frustum(camera, aabb_lo, aabb_hi):
                occluders = None
                break
            footprint = _shadow_footprint(light_center, aabb_lo, aabb_hi)
            if footprint is None or not _boxes_overlap(footprint, quad_box):
                occluders = None
                break
            occluders.append((mesh, transform))

        if occluders:
            return SceneConfig(camera=camera, light=light, occluders=tuple(occluders))

    raise SceneError(
        f"no valid placement in {ranges.max_attempts} attempts; "
        "check camera/light/occluder ranges"
    )
