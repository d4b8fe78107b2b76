"""Ground-truth world geometry: solid boxes, triangle meshes, interest points.

The scene is immutable after construction and safe for concurrent reads.  All
raycasting goes through one vectorized core so single-ray queries, LiDAR
bundles, and occlusion checks share identical intersection semantics.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .world import BoundingBox, VoxelGrid

_EPS_T = 1e-9           # minimum hit distance, rejects self-intersection at the origin
_EPS_BARY = 1e-12       # barycentric slack, keeps triangle edges closed
_EPS_LOS = 1e-6         # slack when comparing a hit distance against segment length
_EPS_BACKOFF = 1e-3     # interest points are lifted off their surface by this much


@dataclass(frozen=True)
class InterestPoint:
    """Scored surface point with its outward normal."""

    id: int
    position: tuple[float, float, float]
    normal: tuple[float, float, float]


@dataclass(frozen=True)
class RayHit:
    hit: bool
    distance: float
    point: tuple[float, float, float]


class Scene:
    """Static inspection world.

    triangles: (t, 3, 3) float array, one row of three vertices per triangle.
    solid_boxes: list of BoundingBox obstacles (the structure geometry).
    interest point arrays are index-aligned; ids are 0..n-1.
    """

    def __init__(self, solid_boxes=None, triangles=None, interest_points=None,
                 inspection_boxes=None):
        self.solid_boxes: list[BoundingBox] = list(solid_boxes or [])
        tris = np.asarray(triangles, dtype=float) if triangles is not None else np.zeros((0, 3, 3))
        if tris.size and tris.shape[1:] != (3, 3):
            raise ConfigurationError(f"triangles must be (n, 3, 3), got {tris.shape}")
        if tris.size and not np.all(np.isfinite(tris)):
            raise ConfigurationError("triangle geometry contains non-finite vertices")
        self.triangles = tris.reshape(-1, 3, 3)
        self.inspection_boxes: list[BoundingBox] = list(inspection_boxes or [])

        points = list(interest_points or [])
        self.point_ids = np.array([p.id for p in points], dtype=int)
        self.point_positions = np.array([p.position for p in points], dtype=float).reshape(-1, 3)
        normals = np.array([p.normal for p in points], dtype=float).reshape(-1, 3)
        if len(normals):
            norms = np.linalg.norm(normals, axis=1)
            if np.any(norms < 1e-12):
                raise ConfigurationError("interest point with zero-length normal")
            normals = normals / norms[:, None]
        self.point_normals = normals

        if len(points) and self.inspection_boxes:
            outside = [
                p.id for p in points
                if not any(b.contains(p.position) for b in self.inspection_boxes)
            ]
            if outside:
                warnings.warn(
                    f"{len(outside)} interest point(s) lie outside every inspection box",
                    stacklevel=2,
                )

        # cached box corner arrays for the vectorized raycaster
        if self.solid_boxes:
            self._box_lo = np.array([b.min_corner for b in self.solid_boxes], dtype=float)
            self._box_hi = np.array([b.max_corner for b in self.solid_boxes], dtype=float)
        else:
            self._box_lo = np.zeros((0, 3))
            self._box_hi = np.zeros((0, 3))

    @property
    def num_points(self) -> int:
        return len(self.point_ids)

    def interest_point(self, idx: int) -> InterestPoint:
        return InterestPoint(
            int(self.point_ids[idx]),
            tuple(self.point_positions[idx].tolist()),
            tuple(self.point_normals[idx].tolist()),
        )


def ray_cast_batch(scene: Scene, origins: np.ndarray, dirs: np.ndarray,
                   max_range: float) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-hit distances for a bundle of rays.

    origins, dirs: (n, 3) with unit directions.  Returns (hit mask, distances);
    distance is inf where nothing was hit within max_range.
    """
    origins = np.atleast_2d(np.asarray(origins, dtype=float))
    dirs = np.atleast_2d(np.asarray(dirs, dtype=float))
    n = len(dirs)
    best = np.full(n, np.inf)

    if len(scene._box_lo):
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / dirs                                    # signed inf where dir is 0
            t1 = (scene._box_lo[None, :, :] - origins[:, None, :]) * inv[:, None, :]
            t2 = (scene._box_hi[None, :, :] - origins[:, None, :]) * inv[:, None, :]
        tn = np.fmin(t1, t2).max(axis=2)
        tf = np.fmax(t1, t2).min(axis=2)
        ok = (tf >= tn) & (tf > _EPS_T) & (tn <= max_range)
        t = np.where(ok, np.where(tn > _EPS_T, tn, 0.0), np.inf)
        best = np.minimum(best, t.min(axis=1))

    if len(scene.triangles):
        v0 = scene.triangles[:, 0]
        e1 = scene.triangles[:, 1] - v0
        e2 = scene.triangles[:, 2] - v0
        h = np.cross(dirs[:, None, :], e2[None, :, :])
        a = np.einsum("tk,ntk->nt", e1, h)
        with np.errstate(divide="ignore", invalid="ignore"):
            f = 1.0 / a
        s = origins[:, None, :] - v0[None, :, :]
        u = f * np.einsum("ntk,ntk->nt", s, h)
        q = np.cross(s, e1[None, :, :])
        v = f * np.einsum("nk,ntk->nt", dirs, q)
        t = f * np.einsum("tk,ntk->nt", e2, q)
        ok = (
            (np.abs(a) > _EPS_BARY)
            & (u >= -_EPS_BARY) & (v >= -_EPS_BARY) & (u + v <= 1.0 + _EPS_BARY)
            & (t > _EPS_T) & (t <= max_range)
        )
        t = np.where(ok, t, np.inf)
        best = np.minimum(best, t.min(axis=1))

    hit = best <= max_range
    return hit, best


def ray_cast(scene: Scene, origin, direction, max_range: float) -> RayHit:
    """Nearest intersection of a single ray with the scene within max_range."""
    direction = np.asarray(direction, dtype=float)
    norm = np.linalg.norm(direction)
    if norm < 1e-12:
        raise ConfigurationError("ray direction must be non-zero")
    if max_range <= 0:
        raise ConfigurationError("max_range must be positive")
    d = direction / norm
    origin = np.asarray(origin, dtype=float)
    hit, dist = ray_cast_batch(scene, origin[None, :], d[None, :], max_range)
    if not hit[0]:
        return RayHit(False, float("inf"), tuple(origin.tolist()))
    p = origin + d * dist[0]
    return RayHit(True, float(dist[0]), tuple(p.tolist()))


def line_of_sight(scene: Scene, a, b) -> bool:
    """True when nothing blocks the open segment between a and b."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    length = float(np.linalg.norm(b - a))
    if length < 1e-12:
        return True
    d = (b - a) / length
    hit, dist = ray_cast_batch(scene, a[None, :], d[None, :], length)
    return not (hit[0] and dist[0] < length - _EPS_LOS)


def _segments_clear(scene: Scene, origins: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Vectorized line_of_sight over many segments; returns a bool mask."""
    rel = targets - origins
    lengths = np.linalg.norm(rel, axis=1)
    safe = np.where(lengths > 1e-12, lengths, 1.0)
    dirs = rel / safe[:, None]
    hit, dist = ray_cast_batch(scene, origins, dirs, float(lengths.max(initial=0.0)) + 1.0)
    blocked = hit & (dist < lengths - _EPS_LOS)
    return ~blocked


def visible_point_indices(scene: Scene, apex, candidate_mask: np.ndarray) -> np.ndarray:
    """Indices of interest points that are front-facing and unoccluded from apex.

    candidate_mask preselects points (normally the camera frustum test).  Each
    survivor is checked front-facing (its normal toward the apex) and for a
    clear segment from the apex to the point backed off along its normal.
    """
    if scene.num_points == 0:
        return np.zeros(0, dtype=int)
    idx = np.nonzero(candidate_mask)[0]
    if len(idx) == 0:
        return idx
    apex = np.asarray(apex, dtype=float)
    pos = scene.point_positions[idx]
    nrm = scene.point_normals[idx]
    facing = np.einsum("nk,nk->n", nrm, apex[None, :] - pos) > 0.0
    idx = idx[facing]
    if len(idx) == 0:
        return idx
    targets = scene.point_positions[idx] + scene.point_normals[idx] * _EPS_BACKOFF
    origins = np.tile(apex, (len(idx), 1))
    clear = _segments_clear(scene, origins, targets)
    return idx[clear]


def visible_interest_points(scene: Scene, camera_apex, fov_test) -> list[InterestPoint]:
    """Interest points inside the field of view, front-facing, and unoccluded.

    fov_test is a predicate over a world position, supplied by the sensor model.
    """
    mask = np.array([bool(fov_test(p)) for p in scene.point_positions], dtype=bool)
    idx = visible_point_indices(scene, camera_apex, mask)
    return [scene.interest_point(i) for i in idx]


# --- ground-truth voxelization (used by the mission safety audit) ---

def _tri_box_overlap(center: np.ndarray, half: float, tri: np.ndarray) -> bool:
    """Separating-axis test between a triangle and a cube of half-extent half."""
    v = tri - center
    e = np.array([v[1] - v[0], v[2] - v[1], v[0] - v[2]])

    # cross-product axes between box axes and triangle edges
    for i in range(3):
        for j in range(3):
            axis = np.zeros(3)
            a1, a2 = (j + 1) % 3, (j + 2) % 3
            axis[a1] = -e[i][a2]
            axis[a2] = e[i][a1]
            p = v @ axis
            r = half * (abs(axis[a1]) + abs(axis[a2]))
            if p.min() > r or p.max() < -r:
                return False
    # box face normals
    if np.any(v.min(axis=0) > half) or np.any(v.max(axis=0) < -half):
        return False
    # triangle plane
    n = np.cross(e[0], e[1])
    d = float(n @ v[0])
    r = half * np.abs(n).sum()
    return abs(d) <= r


def scene_occupancy(scene: Scene, grid: VoxelGrid) -> np.ndarray:
    """Boolean grid of voxels intersected by scene geometry.

    Face-touching contact does not count as overlap, so a box flush against a
    voxel boundary occupies only its own side.
    """
    occ = np.zeros(grid.dims, dtype=bool)
    origin = grid.origin_arr
    v = grid.voxel_size
    dims = np.asarray(grid.dims)

    for box in scene.solid_boxes:
        i_lo = np.maximum(np.floor((box.lo - origin) / v + 1e-9).astype(int), 0)
        i_hi = np.minimum(np.ceil((box.hi - origin) / v - 1e-9).astype(int), dims)
        if np.any(i_hi <= i_lo):
            continue
        occ[i_lo[0]:i_hi[0], i_lo[1]:i_hi[1], i_lo[2]:i_hi[2]] = True

    half = v / 2.0
    for tri in scene.triangles:
        t_lo = np.maximum(np.floor((tri.min(axis=0) - origin) / v - 1e-9).astype(int), 0)
        t_hi = np.minimum(np.floor((tri.max(axis=0) - origin) / v + 1e-9).astype(int) + 1, dims)
        for ix in range(t_lo[0], t_hi[0]):
            for iy in range(t_lo[1], t_hi[1]):
                for iz in range(t_lo[2], t_hi[2]):
                    if occ[ix, iy, iz]:
                        continue
                    center = origin + (np.array([ix, iy, iz]) + 0.5) * v
                    if _tri_box_overlap(center, half, tri):
                        occ[ix, iy, iz] = True
    return occ


def scatter_box_face_points(box: BoundingBox, count: int, seed: int,
                            faces=("x-", "x+", "y-", "y+", "z-", "z+"),
                            id_offset: int = 0) -> list[InterestPoint]:
    """Uniformly scatter interest points over selected outer faces of a box.

    Sampling is area-weighted across the selected faces and fully determined by
    the seed.  Normals point outward.
    """
    if count < 0:
        raise ConfigurationError("scatter count must be non-negative")
    lo, hi = box.lo, box.hi
    ext = hi - lo
    face_defs = {
        "x-": (0, lo[0], (-1.0, 0.0, 0.0), ext[1] * ext[2]),
        "x+": (0, hi[0], (1.0, 0.0, 0.0), ext[1] * ext[2]),
        "y-": (1, lo[1], (0.0, -1.0, 0.0), ext[0] * ext[2]),
        "y+": (1, hi[1], (0.0, 1.0, 0.0), ext[0] * ext[2]),
        "z-": (2, lo[2], (0.0, 0.0, -1.0), ext[0] * ext[1]),
        "z+": (2, hi[2], (0.0, 0.0, 1.0), ext[0] * ext[1]),
    }
    for f in faces:
        if f not in face_defs:
            raise ConfigurationError(f"unknown face name {f!r}")
    chosen = [face_defs[f] for f in faces]
    areas = np.array([c[3] for c in chosen], dtype=float)
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(chosen), size=count, p=areas / areas.sum())
    uv = rng.random((count, 2))
    points = []
    for i in range(count):
        axis, coord, normal, _ = chosen[picks[i]]
        other = [a for a in range(3) if a != axis]
        p = np.zeros(3)
        p[axis] = coord
        p[other[0]] = lo[other[0]] + uv[i, 0] * ext[other[0]]
        p[other[1]] = lo[other[1]] + uv[i, 1] * ext[other[1]]
        points.append(InterestPoint(id_offset + i, tuple(p.tolist()), normal))
    return points
