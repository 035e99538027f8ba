"""
Rigid poses and pinhole intrinsics
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole intrinsics in pixels"""
    fx: float
    fy: float
    cx: float
    cy: float

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx],
                         [0.0, self.fy, self.cy],
                         [0.0, 0.0, 1.0]])

    @classmethod
    def for_resolution(cls, width: int, height: int) -> "Intrinsics":
        """Default intrinsics: 600 px focal length at 640 px width, principal point centered"""
        focal = 0.9375 * width
        return cls(fx=focal, fy=focal, cx=width / 2.0, cy=height / 2.0)


@dataclass(frozen=True)
class Pose:
    """
    Rigid transform X_out = R @ X_in + t.

    Marker poses map marker-plane coordinates (x right, y down, z away from the
    viewer) into the camera frame; camera poses place the camera in the world.
    """
    R: np.ndarray = field(default_factory=lambda: np.eye(3))
    t: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "R", np.asarray(self.R, dtype=np.float64).reshape(3, 3))
        object.__setattr__(self, "t", np.asarray(self.t, dtype=np.float64).reshape(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform (N, 3) points"""
        return np.asarray(points, dtype=np.float64) @ self.R.T + self.t

    def inverse(self) -> "Pose":
        return Pose(self.R.T, -self.R.T @ self.t)

    def compose(self, other: "Pose") -> "Pose":
        """self after other"""
        return Pose(self.R @ other.R, self.R @ other.t + self.t)

    def key(self) -> tuple:
        """Hashable rounded representation for render caching"""
        return tuple(np.round(np.concatenate([self.R.ravel(), self.t]), 12))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Pose):
            return NotImplemented
        return bool(np.array_equal(self.R, other.R) and np.array_equal(self.t, other.t))

    def __hash__(self) -> int:
        return hash(self.key())


def rotation_from_euler(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Rotation R = Rz(yaw) @ Ry(pitch) @ Rx(roll), angles in radians"""
    cr, sr = np.cos(roll), np.sin(roll)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cy, sy = np.cos(yaw), np.sin(yaw)
    rx = np.array([[1, 0, 0], [0, cr, -sr], [0, sr, cr]])
    ry = np.array([[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]])
    rz = np.array([[cy, -sy, 0], [sy, cy, 0], [0, 0, 1]])
    return rz @ ry @ rx


def project(points_cam: np.ndarray, intrinsics: Intrinsics) -> np.ndarray:
    """Pinhole projection of (N, 3) camera-frame points to (N, 2) pixels"""
    pts = np.asarray(points_cam, dtype=np.float64).reshape(-1, 3)
    u = intrinsics.fx * pts[:, 0] / pts[:, 2] + intrinsics.cx
    v = intrinsics.fy * pts[:, 1] / pts[:, 2] + intrinsics.cy
    return np.column_stack([u, v])


def marker_relative_to_camera(marker_world: Pose, camera_world: Pose) -> Pose:
    """Marker pose expressed in the camera frame"""
    return camera_world.inverse().compose(marker_world)
