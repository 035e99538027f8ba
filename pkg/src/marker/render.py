"""
Synthetic square fiducial: pattern definition and rendering into an irradiance field
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from src.camera.geometry import Intrinsics, Pose, project

DEFAULT_PATTERN: Tuple[str, ...] = (
    "100110",
    "011010",
    "110101",
    "001101",
    "101011",
    "010100",
)

MIN_DEPTH = 1e-6
RENDER_CHUNK_ROWS = 32


def parse_pattern(rows: Sequence[str]) -> np.ndarray:
    """Rows of '0'/'1' (1 = white) to an int array"""
    cleaned = [r.strip() for r in rows if r.strip()]
    if not cleaned:
        raise ValueError("Marker pattern is empty")
    width = len(cleaned[0])
    if any(len(r) != width for r in cleaned) or len(cleaned) != width:
        raise ValueError("Marker pattern must be square")
    if any(ch not in "01" for r in cleaned for ch in r):
        raise ValueError("Marker pattern rows may only contain 0 and 1")
    return np.array([[int(ch) for ch in r] for r in cleaned], dtype=np.int64)


def _rotationally_asymmetric(bits: np.ndarray) -> bool:
    return all(not np.array_equal(bits, np.rot90(bits, k)) for k in (1, 2, 3))


@dataclass(frozen=True)
class MarkerSpec:
    """
    Square marker: an interior bit pattern inside a solid black border, surrounded by a
    white quiet zone. `side` is the outer edge of the black border in meters.
    """
    side: float = 0.15
    border_cells: int = 1
    quiet_cells: int = 1
    pattern: Tuple[str, ...] = DEFAULT_PATTERN
    rho_black: float = 0.08
    rho_white: float = 0.90
    bits: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.side <= 0:
            raise ValueError(f"Marker side must be positive, got {self.side}")
        if self.border_cells < 1 or self.quiet_cells < 0:
            raise ValueError("Marker needs at least one border cell and a non-negative quiet zone")
        bits = parse_pattern(self.pattern)
        if not _rotationally_asymmetric(bits):
            raise ValueError("Marker pattern must be rotationally asymmetric")
        object.__setattr__(self, "pattern", tuple(self.pattern))
        object.__setattr__(self, "bits", bits)

    @property
    def n_cells(self) -> int:
        """Cells across the black square (pattern plus border)"""
        return self.bits.shape[0] + 2 * self.border_cells

    @property
    def cell(self) -> float:
        return self.side / self.n_cells

    @property
    def outer_half(self) -> float:
        """Half extent of the printed area including the quiet zone"""
        return self.side / 2.0 + self.quiet_cells * self.cell

    def reflectance_grid(self) -> np.ndarray:
        """Reflectance per cell across the printed area (quiet zone included)"""
        n = self.n_cells + 2 * self.quiet_cells
        grid = np.full((n, n), self.rho_white)
        b0 = self.quiet_cells
        grid[b0:b0 + self.n_cells, b0:b0 + self.n_cells] = self.rho_black
        p0 = b0 + self.border_cells
        size = self.bits.shape[0]
        grid[p0:p0 + size, p0:p0 + size] = np.where(self.bits == 1, self.rho_white, self.rho_black)
        return grid

    def corner_points(self) -> np.ndarray:
        """Black-square corners in the marker plane, ordered TL, TR, BR, BL"""
        h = self.side / 2.0
        return np.array([[-h, -h], [h, -h], [h, h], [-h, h]])


def plane_homography(pose: Pose, intrinsics: Intrinsics) -> np.ndarray:
    """Homography from marker-plane (X, Y) in meters to pixels"""
    return intrinsics.K @ np.column_stack([pose.R[:, 0], pose.R[:, 1], pose.t])


def project_marker_corners(spec: MarkerSpec, pose: Pose, intrinsics: Intrinsics) -> np.ndarray:
    """Ground-truth pixel positions of the four black-square corners (TL, TR, BR, BL)"""
    pts = np.column_stack([spec.corner_points(), np.zeros(4)])
    return project(pose.apply(pts), intrinsics)


def marker_in_front(spec: MarkerSpec, pose: Pose) -> bool:
    h = spec.outer_half
    outer = np.array([[-h, -h, 0], [h, -h, 0], [h, h, 0], [-h, h, 0]], dtype=np.float64)
    return bool(np.all(pose.apply(outer)[:, 2] > MIN_DEPTH))


def _marker_box(shape: Tuple[int, int], spec: MarkerSpec, pose: Pose,
                intrinsics: Intrinsics) -> Optional[Tuple[int, int, int, int]]:
    """Pixel box (x0, y0, x1, y1) around the projected printed area, clipped to the image"""
    height, width = shape
    h = spec.outer_half
    outer = np.array([[-h, -h, 0], [h, -h, 0], [h, h, 0], [-h, h, 0]], dtype=np.float64)
    px = project(pose.apply(outer), intrinsics)
    x0 = max(int(np.floor(px[:, 0].min())) - 1, 0)
    y0 = max(int(np.floor(px[:, 1].min())) - 1, 0)
    x1 = min(int(np.ceil(px[:, 0].max())) + 2, width)
    y1 = min(int(np.ceil(px[:, 1].max())) + 2, height)
    if x1 <= x0 or y1 <= y0:
        return None
    return x0, y0, x1, y1


def subpixel_offsets(supersample: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Multi-jittered sample offsets in [-0.5, 0.5) as two (s, s) arrays (x, y).

    Sample (a, b) sits in column stratum b and row stratum a, and within them at
    fine position a (along x) and b (along y), so each axis sees s*s distinct
    offsets instead of s.
    """
    s = supersample
    a, b = np.meshgrid(np.arange(s), np.arange(s), indexing="ij")
    ox = (b + (a + 0.5) / s) / s - 0.5
    oy = (a + (b + 0.5) / s) / s - 0.5
    return ox, oy


def _sample_plane(box: Tuple[int, int, int, int], pose: Pose, intrinsics: Intrinsics,
                  supersample: int) -> Tuple[np.ndarray, np.ndarray]:
    """Marker-plane coordinates of the sub-pixel samples of a box, shaped (h, s, w, s)"""
    x0, y0, x1, y1 = box
    ox, oy = subpixel_offsets(supersample)
    uu = np.arange(x0, x1)[None, None, :, None] + ox[None, :, None, :]
    vv = np.arange(y0, y1)[:, None, None, None] + oy[None, :, None, :]
    uu, vv = np.broadcast_arrays(uu, vv)

    h_inv = np.linalg.inv(plane_homography(pose, intrinsics))
    xw = h_inv[0, 0] * uu + h_inv[0, 1] * vv + h_inv[0, 2]
    yw = h_inv[1, 0] * uu + h_inv[1, 1] * vv + h_inv[1, 2]
    ww = h_inv[2, 0] * uu + h_inv[2, 1] * vv + h_inv[2, 2]
    return xw / ww, yw / ww


def render_marker(irradiance: np.ndarray, illumination: np.ndarray, spec: MarkerSpec,
                  pose: Pose, intrinsics: Intrinsics, supersample: int = 4) -> np.ndarray:
    """
    Composite the marker into an irradiance field.

    Args:
        irradiance: background field E(u, v), saturation-units per ms
        illumination: light falling on the marker plane at each pixel (same units)
        spec: marker definition
        pose: marker pose in the camera frame
        intrinsics: pinhole intrinsics
        supersample: s, for s*s multi-jittered samples per pixel
    Returns:
        New field; covered pixels get illumination x reflectance, area-weighted
    """
    if supersample < 1:
        raise ValueError(f"Supersampling factor must be at least 1, got {supersample}")
    out = np.array(irradiance, dtype=np.float64, copy=True)
    if not marker_in_front(spec, pose):
        return out
    box = _marker_box(out.shape, spec, pose, intrinsics)
    if box is None:
        return out
    x0, y0, x1, y1 = box

    grid = spec.reflectance_grid()
    n = grid.shape[0]
    for top in range(y0, y1, RENDER_CHUNK_ROWS):
        bottom = min(top + RENDER_CHUNK_ROWS, y1)
        xs, ys = _sample_plane((x0, top, x1, bottom), pose, intrinsics, supersample)
        col = np.floor((xs + spec.outer_half) / spec.cell).astype(np.int64)
        row = np.floor((ys + spec.outer_half) / spec.cell).astype(np.int64)
        inside = (col >= 0) & (col < n) & (row >= 0) & (row < n)
        refl = np.where(inside, grid[np.clip(row, 0, n - 1), np.clip(col, 0, n - 1)], 0.0)
        coverage = inside.mean(axis=(1, 3))
        mean_refl = refl.mean(axis=(1, 3))

        block = out[top:bottom, x0:x1]
        light = illumination[top:bottom, x0:x1]
        out[top:bottom, x0:x1] = light * mean_refl + (1.0 - coverage) * block
    return out


def marker_mask(shape: Tuple[int, int], spec: MarkerSpec, pose: Pose,
                intrinsics: Intrinsics) -> np.ndarray:
    """Pixels whose centers fall inside the black square (the marker interior)"""
    mask = np.zeros(shape, dtype=bool)
    if not marker_in_front(spec, pose):
        return mask
    box = _marker_box(shape, spec, pose, intrinsics)
    if box is None:
        return mask
    x0, y0, x1, y1 = box
    xs, ys = _sample_plane(box, pose, intrinsics, supersample=1)
    half = spec.side / 2.0
    inner = (np.abs(xs) < half) & (np.abs(ys) < half)
    mask[y0:y1, x0:x1] = inner.reshape(y1 - y0, x1 - x0)
    return mask


def projected_radius(spec: MarkerSpec, pose: Pose, intrinsics: Intrinsics) -> float:
    """Mean distance (px) of the projected black-square corners from their centroid"""
    corners = project_marker_corners(spec, pose, intrinsics)
    return float(np.mean(np.linalg.norm(corners - corners.mean(axis=0), axis=1)))
