"""Gimballed camera model with observation-quality scoring, plus rotating LiDAR.

The camera is a pinhole at the agent position.  A captured interest point gets
two scores in [0, 1]:

  blur: how far the point smears across the image during the exposure.  Both
  the point and the point advanced by its camera-frame velocity times the
  exposure are projected; the score is pixel_width over the larger of the
  horizontal / vertical pixel displacements, capped at 1.

  resolution: ground-sample distance against the desired resolution.  The
  point is shifted one meter along the camera x and y axes, both positions are
  projected, and meters-per-pixel along each axis is pixel_width over the
  pixel displacement; the score is desired_resolution over the worse of the
  two, capped at 1.

The observation quality is the product of the two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .agents import AgentState, GimbalState
from .errors import ConfigurationError, ProjectionError
from .scene import Scene, ray_cast_batch, visible_point_indices

_ANG_TOL = 1e-12        # keeps the field-of-view boundary closed under float error


@dataclass(frozen=True)
class CameraConfig:
    fov_h: float = math.radians(80.0)
    fov_v: float = math.radians(60.0)
    range: float = 30.0
    focal: float = 1000.0
    pixel_width: float = 1.0
    exposure: float = 0.05
    desired_resolution: float = 0.03
    quality_floor: float = 0.1

    def __post_init__(self):
        for name in ("fov_h", "fov_v", "range", "focal", "pixel_width",
                     "exposure", "desired_resolution"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"camera {name} must be positive")
        if not 0.0 <= self.quality_floor <= 1.0:
            raise ConfigurationError("quality_floor must lie in [0, 1]")


@dataclass(frozen=True)
class LidarConfig:
    range: float = 50.0
    beams: int = 16
    azimuth_steps: int = 360
    servo_period: float = 8.0
    servo_min: float = math.radians(-90.0)
    servo_max: float = math.radians(90.0)
    vertical_aperture: float = math.radians(15.0)

    def __post_init__(self):
        if self.range <= 0:
            raise ConfigurationError("lidar range must be positive")
        if self.beams < 1 or self.azimuth_steps < 1:
            raise ConfigurationError("lidar needs at least one beam and azimuth step")
        if self.servo_period <= 0:
            raise ConfigurationError("servo period must be positive")


@dataclass(frozen=True)
class Observation:
    point_id: int
    q_blur: float
    q_res: float
    q: float
    timestep: int


def camera_axis(yaw: float, gimbal: GimbalState) -> np.ndarray:
    """World-frame optical axis for the given body yaw and gimbal angles."""
    th, ph = gimbal.inclination, gimbal.azimuth
    bx = math.cos(th) * math.cos(ph)
    by = math.cos(th) * math.sin(ph)
    bz = math.sin(th)
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([c * bx - s * by, s * bx + c * by, bz])


def camera_basis(axis) -> np.ndarray:
    """Roll-free camera frame for an optical axis: columns are the world-frame
    image-right, image-down, and forward directions.

    Image-right stays horizontal; for a perfectly vertical axis the world
    x-axis is used as image-right by convention.
    """
    z = np.asarray(axis, dtype=float)
    z = z / np.linalg.norm(z)
    horiz = np.array([z[1], -z[0], 0.0])
    h = float(np.linalg.norm(horiz))
    x = horiz / h if h > 1e-9 else np.array([1.0, 0.0, 0.0])
    y = np.cross(z, x)
    return np.column_stack([x, y, z])


def _fov_mask(p_cam: np.ndarray, dists: np.ndarray, cfg: CameraConfig) -> np.ndarray:
    z = p_cam[:, 2]
    front = z > 0.0
    with np.errstate(invalid="ignore"):
        ah = np.abs(np.arctan2(p_cam[:, 0], z)) <= cfg.fov_h / 2.0 + _ANG_TOL
        av = np.abs(np.arctan2(p_cam[:, 1], z)) <= cfg.fov_v / 2.0 + _ANG_TOL
    return front & ah & av & (dists <= cfg.range + _ANG_TOL)


def fov_contains(apex, optical_axis, cfg: CameraConfig, p) -> bool:
    """True when p lies inside the camera's view pyramid (boundaries included)."""
    axis = np.asarray(optical_axis, dtype=float)
    if abs(np.linalg.norm(axis) - 1.0) > 1e-6:
        raise ConfigurationError("optical axis must be a unit vector")
    rel = np.asarray(p, dtype=float) - np.asarray(apex, dtype=float)
    p_cam = rel @ camera_basis(axis)
    return bool(_fov_mask(p_cam[None, :], np.array([np.linalg.norm(rel)]), cfg)[0])


def project(p_cam, focal: float) -> tuple[float, float]:
    """Pinhole projection u = f*x/z, v = f*y/z of a camera-frame point."""
    x, y, z = (float(c) for c in p_cam)
    if z <= 0.0:
        raise ProjectionError(f"cannot project point at depth {z}")
    return focal * x / z, focal * y / z


def _blur_batch(p_cam: np.ndarray, v_cam: np.ndarray, cfg: CameraConfig) -> np.ndarray:
    p0 = p_cam
    p1 = p_cam + v_cam * cfg.exposure
    z0, z1 = p0[:, 2], p1[:, 2]
    ok = (z0 > _ANG_TOL) & (z1 > _ANG_TOL)

    q = np.zeros(len(p0))
    if ok.any():
        a0, a1 = p0[ok], p1[ok]
        u0 = cfg.focal * a0[:, 0] / a0[:, 2]
        v0 = cfg.focal * a0[:, 1] / a0[:, 2]
        u1 = cfg.focal * a1[:, 0] / a1[:, 2]
        v1 = cfg.focal * a1[:, 1] / a1[:, 2]
        disp = np.maximum(np.abs(u1 - u0), np.abs(v1 - v0))
        with np.errstate(divide="ignore"):
            score = np.minimum(cfg.pixel_width / disp, 1.0)
        score[disp == 0.0] = 1.0

        # a point that slides out of the view pyramid mid-exposure scores zero
        inside = _fov_mask(a1, np.linalg.norm(a1, axis=1), cfg)
        score[~inside] = 0.0
        q[ok] = score
    return q


def blur_score(p_cam, v_cam, cfg: CameraConfig) -> float:
    """Motion-blur score of one camera-frame point with camera-frame velocity."""
    p = np.asarray(p_cam, dtype=float)[None, :]
    v = np.asarray(v_cam, dtype=float)[None, :]
    return float(_blur_batch(p, v, cfg)[0])


def _resolution_batch(p_cam: np.ndarray, cfg: CameraConfig) -> np.ndarray:
    z = p_cam[:, 2]
    q = np.zeros(len(p_cam))
    ok = z > _ANG_TOL
    if ok.any():
        p = p_cam[ok]
        zz = p[:, 2]
        u3 = cfg.focal * p[:, 0] / zz
        u4 = cfg.focal * (p[:, 0] + 1.0) / zz
        v3 = cfg.focal * p[:, 1] / zz
        v4 = cfg.focal * (p[:, 1] + 1.0) / zz
        r_horz = cfg.pixel_width / np.abs(u4 - u3)
        r_vert = cfg.pixel_width / np.abs(v4 - v3)
        q[ok] = np.minimum(cfg.desired_resolution / np.maximum(r_horz, r_vert), 1.0)
    return q


def resolution_score(p_cam, cfg: CameraConfig) -> float:
    """Ground-sample-distance score of one camera-frame point."""
    p = np.asarray(p_cam, dtype=float)
    if p[2] <= 0.0:
        raise ProjectionError(f"cannot score point at depth {p[2]}")
    return float(_resolution_batch(p[None, :], cfg)[0])


def observe(agent: AgentState, gimbal: GimbalState, scene: Scene,
            cfg: CameraConfig, k: int) -> list[Observation]:
    """Score every interest point currently visible to this agent's camera.

    Visibility requires the view pyramid, a front-facing surface normal, and a
    clear sight line.  The point velocity entering the blur score is the
    camera-frame image of the (static) point relative to the moving agent.
    Observations with zero quality are dropped; the quality floor is applied
    later by the score ledger, not here.
    """
    if scene.num_points == 0:
        return []
    apex = agent.position
    axis = camera_axis(agent.yaw, gimbal)
    basis = camera_basis(axis)
    rel = scene.point_positions - apex
    p_cam = rel @ basis
    dists = np.linalg.norm(rel, axis=1)
    candidates = _fov_mask(p_cam, dists, cfg)
    idx = visible_point_indices(scene, apex, candidates)
    if len(idx) == 0:
        return []
    v_cam = -(agent.velocity @ basis)
    qb = _blur_batch(p_cam[idx], np.tile(v_cam, (len(idx), 1)), cfg)
    qr = _resolution_batch(p_cam[idx], cfg)
    q = qb * qr
    out = []
    for j, i in enumerate(idx):
        if q[j] > 0.0:
            out.append(Observation(int(scene.point_ids[i]), float(qb[j]),
                                   float(qr[j]), float(q[j]), k))
    return out


def servo_angle(t: float, cfg: LidarConfig) -> float:
    """Triangle-wave servo pitch: starts at the lower stop, sweeps to the upper
    stop at half period, and returns."""
    if t < 0:
        raise ConfigurationError("time must be non-negative")
    half = cfg.servo_period / 2.0
    s = math.fmod(t, cfg.servo_period)
    span = cfg.servo_max - cfg.servo_min
    if s <= half:
        return cfg.servo_min + span * (s / half)
    return cfg.servo_max - span * ((s - half) / half)


@lru_cache(maxsize=8)
def _base_directions(beams: int, azimuth_steps: int, aperture: float) -> np.ndarray:
    if beams == 1:
        elev = np.array([0.0])
    else:
        elev = np.linspace(-aperture, aperture, beams)
    az = np.arange(azimuth_steps) * (2.0 * math.pi / azimuth_steps)
    ce, se = np.cos(elev), np.sin(elev)
    ca, sa = np.cos(az), np.sin(az)
    dirs = np.empty((beams * azimuth_steps, 3))
    dirs[:, 0] = np.outer(ce, ca).ravel()
    dirs[:, 1] = np.outer(ce, sa).ravel()
    dirs[:, 2] = np.repeat(se, azimuth_steps)
    return dirs


def lidar_sweep(agent: AgentState, scene: Scene, cfg: LidarConfig,
                t: float) -> tuple[np.ndarray, np.ndarray]:
    """One full sensor firing at time t: (hit points, endpoints of empty rays).

    Beams are spread over the sensor's vertical aperture, azimuths cover a full
    revolution, and the whole pattern is pitched about the body x-axis by the
    servo angle.  Rays that see nothing report their maximum-range endpoint so
    the mapper can clear the corridor they crossed.  Noise-free.
    """
    base = _base_directions(cfg.beams, cfg.azimuth_steps, cfg.vertical_aperture)
    s = servo_angle(t, cfg)
    cs, ss = math.cos(s), math.sin(s)
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cs, -ss], [0.0, ss, cs]])
    cy, sy = math.cos(agent.yaw), math.sin(agent.yaw)
    rz = np.array([[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]])
    dirs = base @ (rz @ rx).T
    origins = np.tile(agent.position, (len(dirs), 1))
    hit, dist = ray_cast_batch(scene, origins, dirs, cfg.range)
    hits = agent.position + dirs[hit] * dist[hit, None]
    misses = agent.position + dirs[~hit] * cfg.range
    return hits, misses


def lidar_scan(agent: AgentState, scene: Scene, cfg: LidarConfig, t: float) -> np.ndarray:
    """Point cloud of nearest-surface hits for one full sensor firing at time t."""
    return lidar_sweep(agent, scene, cfg, t)[0]
