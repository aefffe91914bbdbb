"""Rigid transforms, planar tabletop motions, pinhole projection and the
spherical viewing-direction distance.

Conventions used project-wide:
    - A viewpoint pose is camera-in-world. The extrinsics passed to
      projection functions are world-to-camera, i.e. ``invert(viewpoint)``.
    - ``compose(a, b)`` applies ``b`` first: ``x -> a(b(x))``.
    - Planar transforms rotate about the world z axis (the table normal).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BehindCamera, DegenerateObservation, NonPlanarEstimate

__all__ = [
    "Pose3",
    "PlanarTransform",
    "CameraIntrinsics",
    "wrap_angle",
    "rot_z",
    "axis_angle_to_matrix",
    "rotation_angle",
    "compose",
    "invert",
    "lift",
    "planar_compose",
    "planar_invert",
    "planar_of_pose",
    "planar_error",
    "observation_vector",
    "angular_distance",
    "project",
    "project_points",
    "back_project",
    "back_project_pixels",
    "look_at",
]


def wrap_angle(theta):
    """Wrap an angle in radians into (-pi, pi]."""
    return np.pi - np.mod(np.pi - theta, 2.0 * np.pi)


@dataclass(frozen=True)
class Pose3:
    """Rigid transform in SE(3): ``x_out = rotation @ x_in + translation``."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", np.array(self.rotation, dtype=float))
        object.__setattr__(self, "translation", np.array(self.translation, dtype=float).reshape(3))

    @staticmethod
    def identity() -> "Pose3":
        return Pose3(np.eye(3), np.zeros(3))

    @staticmethod
    def from_matrix(m) -> "Pose3":
        m = np.asarray(m, dtype=float)
        return Pose3(m[:3, :3], m[:3, 3])

    @property
    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform an (N,3) array (or a single 3-vector)."""
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            return self.rotation @ pts + self.translation
        return pts @ self.rotation.T + self.translation

    def is_valid(self, tol: float = 1e-9) -> bool:
        r = self.rotation
        return (
            np.allclose(r.T @ r, np.eye(3), atol=tol)
            and abs(np.linalg.det(r) - 1.0) < tol
            and np.all(np.isfinite(self.translation))
        )


@dataclass
class PlanarTransform:
    """Rotation about the table normal plus in-plane translation (m)."""

    yaw: float
    tx: float
    ty: float

    def __post_init__(self):
        self.yaw = float(wrap_angle(self.yaw))
        self.tx = float(self.tx)
        self.ty = float(self.ty)

    @staticmethod
    def identity() -> "PlanarTransform":
        return PlanarTransform(0.0, 0.0, 0.0)

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.tx, self.ty])


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 < self.cx < self.width) or not (0 < self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    @property
    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )


def rot_z(yaw: float) -> np.ndarray:
    c, s = np.cos(yaw), np.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def axis_angle_to_matrix(w: np.ndarray) -> np.ndarray:
    """Rodrigues formula; ``w`` is the rotation vector (axis * angle)."""
    w = np.asarray(w, dtype=float)
    theta = np.linalg.norm(w)
    if theta < 1e-12:
        k = _skew(w)
        return np.eye(3) + k  # first-order term is exact enough below 1e-12
    k = _skew(w / theta)
    return np.eye(3) + np.sin(theta) * k + (1.0 - np.cos(theta)) * (k @ k)


def _skew(v):
    return np.array(
        [[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]]
    )


def rotation_angle(r: np.ndarray) -> float:
    """Magnitude of the rotation encoded by a 3x3 rotation matrix, in radians."""
    c = (np.trace(r) - 1.0) / 2.0
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def compose(a: Pose3, b: Pose3) -> Pose3:
    """a after b: ``compose(a, b).apply(x) == a.apply(b.apply(x))``."""
    return Pose3(a.rotation @ b.rotation, a.rotation @ b.translation + a.translation)


def invert(a: Pose3) -> Pose3:
    rt = a.rotation.T
    return Pose3(rt, -rt @ a.translation)


def lift(p: PlanarTransform) -> Pose3:
    """Embed a planar transform in SE(3) (rotation about z, zero lift)."""
    return Pose3(rot_z(p.yaw), np.array([p.tx, p.ty, 0.0]))


def planar_compose(a: PlanarTransform, b: PlanarTransform) -> PlanarTransform:
    """a after b, mirroring :func:`compose` on the lifted poses."""
    c, s = np.cos(a.yaw), np.sin(a.yaw)
    return PlanarTransform(
        a.yaw + b.yaw,
        c * b.tx - s * b.ty + a.tx,
        s * b.tx + c * b.ty + a.ty,
    )


def planar_invert(a: PlanarTransform) -> PlanarTransform:
    c, s = np.cos(a.yaw), np.sin(a.yaw)
    return PlanarTransform(-a.yaw, -(c * a.tx + s * a.ty), -(-s * a.tx + c * a.ty))


def planar_of_pose(
    pose: Pose3, max_tilt_deg: float = 10.0, max_dz: float = 0.02
) -> PlanarTransform:
    """Project an SE(3) pose down to a planar transform.

    Raises NonPlanarEstimate when the out-of-plane rotation exceeds
    ``max_tilt_deg`` or the vertical translation exceeds ``max_dz`` meters
    (the signature of a grossly wrong pose solution given planar motion).
    """
    yaw = float(np.arctan2(pose.rotation[1, 0], pose.rotation[0, 0]))
    tilt = rotation_angle(rot_z(-yaw) @ pose.rotation)
    if np.degrees(tilt) > max_tilt_deg or abs(pose.translation[2]) > max_dz:
        raise NonPlanarEstimate(
            f"tilt={np.degrees(tilt):.2f} deg, dz={pose.translation[2]:.4f} m"
        )
    return PlanarTransform(yaw, pose.translation[0], pose.translation[1])


def planar_error(
    estimate: Pose3,
    truth: PlanarTransform,
    max_tilt_deg: float = 10.0,
    max_dz: float = 0.02,
) -> tuple[float, float]:
    """Planar pose error: (|yaw difference| in degrees, distance in cm).

    The yaw difference is wrapped, so adding 2*pi to either yaw does not
    change the result.
    """
    est = planar_of_pose(estimate, max_tilt_deg=max_tilt_deg, max_dz=max_dz)
    dtheta = abs(wrap_angle(est.yaw - truth.yaw))
    dt = np.hypot(est.tx - truth.tx, est.ty - truth.ty)
    return float(np.degrees(dtheta)), float(dt * 100.0)


def observation_vector(viewpoint: Pose3, cloud: np.ndarray) -> np.ndarray:
    """Unit vector from the cloud centroid toward the camera center."""
    cloud = np.asarray(cloud, dtype=float)
    v = viewpoint.translation - cloud.mean(axis=0)
    n = np.linalg.norm(v)
    if n < 1e-6:
        raise DegenerateObservation("viewpoint sits on the cloud centroid")
    return v / n


def angular_distance(e1: np.ndarray, e2: np.ndarray) -> float:
    """Distance between two unit viewing directions in spherical coordinates.

    Euclidean norm of (wrapped azimuth difference, polar angle difference);
    lies in [0, pi*sqrt(2)] and is symmetric in its arguments.
    """
    e1 = np.asarray(e1, dtype=float)
    e2 = np.asarray(e2, dtype=float)
    daz = wrap_angle(np.arctan2(e1[1], e1[0]) - np.arctan2(e2[1], e2[0]))
    dpol = np.arccos(np.clip(e1[2], -1.0, 1.0)) - np.arccos(np.clip(e2[2], -1.0, 1.0))
    return float(np.hypot(daz, dpol))


def project(
    intr: CameraIntrinsics, world_to_cam: Pose3, point: np.ndarray
) -> tuple[float, float, float]:
    """Pinhole projection of one world point -> (u, v, depth)."""
    p = world_to_cam.apply(np.asarray(point, dtype=float))
    if p[2] <= 1e-6:
        raise BehindCamera(f"camera-frame z = {p[2]:.3g}")
    u = intr.fx * p[0] / p[2] + intr.cx
    v = intr.fy * p[1] / p[2] + intr.cy
    return float(u), float(v), float(p[2])


def project_points(
    intr: CameraIntrinsics, world_to_cam: Pose3, points: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized projection: returns (uv (N,2), depth (N,)).

    Does not raise for points behind the camera; callers filter on depth.
    """
    cam = world_to_cam.apply(points)
    z = cam[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = intr.fx * cam[:, 0] / z + intr.cx
        v = intr.fy * cam[:, 1] / z + intr.cy
    return np.stack([u, v], axis=1), z


def back_project(
    intr: CameraIntrinsics, world_to_cam: Pose3, u: float, v: float, depth: float
) -> np.ndarray:
    """Inverse of :func:`project` at a known depth."""
    x = (u - intr.cx) / intr.fx * depth
    y = (v - intr.cy) / intr.fy * depth
    return invert(world_to_cam).apply(np.array([x, y, depth]))


def back_project_pixels(
    intr: CameraIntrinsics, world_to_cam: Pose3, uv: np.ndarray, depth: np.ndarray
) -> np.ndarray:
    """Vectorized :func:`back_project` for (N,2) pixels and (N,) depths."""
    uv = np.asarray(uv, dtype=float)
    depth = np.asarray(depth, dtype=float)
    cam = np.stack(
        [
            (uv[:, 0] - intr.cx) / intr.fx * depth,
            (uv[:, 1] - intr.cy) / intr.fy * depth,
            depth,
        ],
        axis=1,
    )
    return invert(world_to_cam).apply(cam)


def look_at(eye: np.ndarray, target: np.ndarray) -> Pose3:
    """Camera-in-world pose looking from ``eye`` toward ``target``.

    Camera axes: +z forward, +x right, +y down (image v grows downward).
    """
    eye = np.asarray(eye, dtype=float)
    forward = np.asarray(target, dtype=float) - eye
    forward = forward / np.linalg.norm(forward)
    right = np.cross(forward, np.array([0.0, 0.0, 1.0]))
    n = np.linalg.norm(right)
    if n < 1e-9:
        right = np.array([1.0, 0.0, 0.0])
    else:
        right = right / n
    down = np.cross(forward, right)
    r = np.stack([right, down, forward], axis=1)
    return Pose3(r, eye)
