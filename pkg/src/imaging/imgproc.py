"""
Pixel-buffer primitives: Sobel gradients, rectangle arithmetic, cropping and PGM dumps

Images are plain numpy arrays indexed [row, col]: uint8 arrays for captured frames
(DN, 0-255) and float64 arrays for real-valued maps (gradients, derivatives).
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Tuple, Union

import numpy as np
from PIL import Image
from scipy import ndimage

from src.exceptions import DimensionError, RegionError

MIN_FRAME_SIDE = 8

SOBEL_X = np.array([[-1.0, 0.0, 1.0],
                    [-2.0, 0.0, 2.0],
                    [-1.0, 0.0, 1.0]])
SOBEL_Y = SOBEL_X.T.copy()


@dataclass(frozen=True)
class Rect:
    """Axis-aligned pixel rectangle (top-left corner plus extent)"""
    x0: int
    y0: int
    w: int
    h: int

    def __post_init__(self):
        if self.w < 1 or self.h < 1:
            raise RegionError(f"Rect extent must be at least 1x1, got {self.w}x{self.h}")

    @property
    def x1(self) -> int:
        return self.x0 + self.w

    @property
    def y1(self) -> int:
        return self.y0 + self.h

    @property
    def area(self) -> int:
        return self.w * self.h

    @property
    def slices(self) -> Tuple[slice, slice]:
        """Row/column slices selecting this rect from an image"""
        return slice(self.y0, self.y1), slice(self.x0, self.x1)

    @classmethod
    def full(cls, image: np.ndarray) -> "Rect":
        """Rect covering the whole image"""
        height, width = image.shape[:2]
        return cls(0, 0, width, height)

    def contains(self, other: "Rect") -> bool:
        return (other.x0 >= self.x0 and other.y0 >= self.y0
                and other.x1 <= self.x1 and other.y1 <= self.y1)

    def as_tuple(self) -> Tuple[int, int, int, int]:
        return self.x0, self.y0, self.w, self.h


def check_image8(img: np.ndarray) -> np.ndarray:
    """Validate a captured 8-bit frame"""
    if img.dtype != np.uint8 or img.ndim != 2:
        raise DimensionError(f"Expected 2-D uint8 image, got {img.dtype} with shape {img.shape}")
    if img.shape[0] < MIN_FRAME_SIDE or img.shape[1] < MIN_FRAME_SIDE:
        raise DimensionError(f"Frames must be at least {MIN_FRAME_SIDE}x{MIN_FRAME_SIDE}, got {img.shape}")
    return img


def sobel_gradients(img: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    3x3 Sobel gradients of an image.

    Args:
        img: 2-D image (any real dtype)
    Returns:
        (gx, gy, gmag) float64 maps; the 1-pixel border is 0 in all three
    """
    if img.ndim != 2 or img.shape[0] < 3 or img.shape[1] < 3:
        raise DimensionError(f"Sobel needs an image of at least 3x3, got {img.shape}")

    data = np.asarray(img, dtype=np.float64)
    gx = ndimage.correlate(data, SOBEL_X, mode="nearest")
    gy = ndimage.correlate(data, SOBEL_Y, mode="nearest")
    for g in (gx, gy):
        g[0, :] = 0.0
        g[-1, :] = 0.0
        g[:, 0] = 0.0
        g[:, -1] = 0.0
    gmag = np.hypot(gx, gy)
    return gx, gy, gmag


def crop(img: np.ndarray, r: Rect) -> np.ndarray:
    """Copy of the w x h block of img whose (0, 0) is img[y0, x0]"""
    if not Rect.full(img).contains(r) or r.x0 < 0 or r.y0 < 0:
        raise RegionError(f"Rect {r.as_tuple()} is outside image of shape {img.shape}")
    return img[r.slices].copy()


def clip_rect(r: Rect, bounds: Rect) -> Rect:
    """Intersection of r with bounds; degenerate intersections shrink to one pixel"""
    x0 = min(max(r.x0, bounds.x0), bounds.x1 - 1)
    y0 = min(max(r.y0, bounds.y0), bounds.y1 - 1)
    x1 = max(min(r.x1, bounds.x1), x0 + 1)
    y1 = max(min(r.y1, bounds.y1), y0 + 1)
    return Rect(x0, y0, x1 - x0, y1 - y0)


def inflate_and_clip(r: Rect, fx: float, fy: float, bounds: Rect) -> Rect:
    """
    Grow r by fx*w on the left and right and fy*h on the top and bottom, then clip.

    Args:
        r: rectangle to inflate
        fx: horizontal padding as a fraction of r.w, per side
        fy: vertical padding as a fraction of r.h, per side
        bounds: rectangle the result must stay inside
    """
    if fx < 0 or fy < 0:
        raise RegionError(f"Inflation fractions must be non-negative, got fx={fx}, fy={fy}")
    pad_x = int(np.floor(fx * r.w + 0.5))
    pad_y = int(np.floor(fy * r.h + 0.5))
    grown = Rect(r.x0 - pad_x, r.y0 - pad_y, r.w + 2 * pad_x, r.h + 2 * pad_y)
    return clip_rect(grown, bounds)


def bounding_rect(points: np.ndarray) -> Rect:
    """Integer box around sub-pixel points, rounded outward"""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    x0 = int(np.floor(pts[:, 0].min()))
    y0 = int(np.floor(pts[:, 1].min()))
    x1 = int(np.ceil(pts[:, 0].max()))
    y1 = int(np.ceil(pts[:, 1].max()))
    return Rect(x0, y0, max(x1 - x0, 1), max(y1 - y0, 1))


def write_pgm(path: Union[str, Path], img: np.ndarray) -> Path:
    """Dump an image as binary PGM (P5); float maps are rescaled affinely to 0-255"""
    path = Path(path)
    if img.dtype == np.uint8:
        data = img
    else:
        lo, hi = float(np.min(img)), float(np.max(img))
        scale = 255.0 / (hi - lo) if hi > lo else 0.0
        data = np.round((np.asarray(img, dtype=np.float64) - lo) * scale).astype(np.uint8)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(data, mode="L").save(path, format="PPM")
    return path
