"""
Marker pose from four corners via a DLT plane-to-image homography
"""
from __future__ import annotations

from typing import Tuple

import numpy as np

from src.camera.geometry import Intrinsics, Pose, project
from src.exceptions import DegenerateGeometryError
from src.marker.render import MarkerSpec

COLLINEAR_TOL = 1e-9


def _normalizing_transform(pts: np.ndarray) -> np.ndarray:
    """Similarity moving the centroid to 0 and the mean distance to sqrt(2)"""
    centroid = pts.mean(axis=0)
    dist = np.mean(np.linalg.norm(pts - centroid, axis=1))
    s = np.sqrt(2.0) / dist
    return np.array([[s, 0.0, -s * centroid[0]],
                     [0.0, s, -s * centroid[1]],
                     [0.0, 0.0, 1.0]])


def _check_not_collinear(pts: np.ndarray, label: str) -> None:
    scale = max(np.ptp(pts[:, 0]), np.ptp(pts[:, 1]), 1e-12)
    for i in range(4):
        a, b, c = pts[i], pts[(i + 1) % 4], pts[(i + 2) % 4]
        area = abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
        if area <= COLLINEAR_TOL * scale ** 2:
            raise DegenerateGeometryError(f"Three of the four {label} points are collinear")


def dlt_homography(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """
    Normalized DLT homography H with dst ~ H @ src.

    Args:
        src: (4, 2) plane points
        dst: (4, 2) image points
    """
    src = np.asarray(src, dtype=np.float64).reshape(-1, 2)
    dst = np.asarray(dst, dtype=np.float64).reshape(-1, 2)
    _check_not_collinear(src, "plane")
    _check_not_collinear(dst, "image")

    t_src = _normalizing_transform(src)
    t_dst = _normalizing_transform(dst)
    src_h = np.column_stack([src, np.ones(len(src))]) @ t_src.T
    dst_h = np.column_stack([dst, np.ones(len(dst))]) @ t_dst.T

    rows = []
    for (x, y, _), (u, v, _) in zip(src_h, dst_h):
        rows.append([-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u])
        rows.append([0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v])
    _, _, vt = np.linalg.svd(np.asarray(rows))
    h_norm = vt[-1].reshape(3, 3)
    h = np.linalg.inv(t_dst) @ h_norm @ t_src
    return h / h[2, 2] if abs(h[2, 2]) > 1e-15 else h


def pose_from_homography(h: np.ndarray, intrinsics: Intrinsics) -> Pose:
    """Decompose H = K [r1 r2 t] into a rotation and a positive-depth translation"""
    h_tilde = np.linalg.inv(intrinsics.K) @ h
    h1, h2, h3 = h_tilde[:, 0], h_tilde[:, 1], h_tilde[:, 2]
    lam = 2.0 / (np.linalg.norm(h1) + np.linalg.norm(h2))
    t = lam * h3
    if t[2] < 0:
        lam = -lam
        t = -t
    r1, r2 = lam * h1, lam * h2
    approx = np.column_stack([r1, r2, np.cross(r1, r2)])
    u, _, vt = np.linalg.svd(approx)
    R = u @ vt
    if np.linalg.det(R) < 0:
        R = u @ np.diag([1.0, 1.0, -1.0]) @ vt
    return Pose(R, t)


def reprojection_error(pose: Pose, spec: MarkerSpec, corners: np.ndarray,
                       intrinsics: Intrinsics) -> float:
    """RMS pixel distance between corners and the reprojected marker corners"""
    pts = np.column_stack([spec.corner_points(), np.zeros(4)])
    reproj = project(pose.apply(pts), intrinsics)
    return float(np.sqrt(np.mean(np.sum((reproj - corners) ** 2, axis=1))))


def estimate_pose(corners: np.ndarray, spec: MarkerSpec,
                  intrinsics: Intrinsics) -> Tuple[np.ndarray, float, Pose]:
    """
    Marker translation from its four ordered corners.

    Args:
        corners: (4, 2) pixels, ordered TL, TR, BR, BL
        spec: marker definition (side length sets the metric scale)
        intrinsics: pinhole intrinsics
    Returns:
        (translation in meters, RMS reprojection error in pixels, full pose)
    Raises:
        DegenerateGeometryError: three corners are collinear
    """
    corners = np.asarray(corners, dtype=np.float64).reshape(4, 2)
    h = dlt_homography(spec.corner_points(), corners)
    pose = pose_from_homography(h, intrinsics)
    return pose.t.copy(), reprojection_error(pose, spec, corners, intrinsics), pose
