"""
Marker detection: Otsu segmentation, quad test, sub-pixel edge fitting, pattern check
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy import ndimage
from skimage.filters import threshold_otsu

from src.camera.camera_sim import FULL_SCALE, Frame
from src.camera.geometry import Intrinsics, Pose
from src.exceptions import DegenerateGeometryError, DetectionStateError
from src.imaging.imgproc import Rect, bounding_rect, crop, inflate_and_clip, sobel_gradients
from src.marker.pose import dlt_homography, estimate_pose
from src.marker.render import MarkerSpec

logger = logging.getLogger(__name__)

MIN_SEPARATION_DN = 20.0
MIN_QUAD_AREA = 64.0
MAX_REPROJ_ERROR = 2.0
MIN_HOLE_FRACTION = 0.1
MAX_AREA_MISMATCH = 0.2
MAX_CANDIDATES = 5
EDGE_SPAN = (0.15, 0.85)
MIN_NORMAL_ALIGNMENT = 0.8
ROI_PADDING = 0.10
SCAN_HALF_WIDTH = 2
MIN_SCANLINES = 4
MAX_SCAN_RESIDUAL = 0.5


@dataclass
class DetectionResult:
    """Outcome of one detection attempt"""
    found: bool
    corners: Optional[np.ndarray] = None
    translation: Optional[np.ndarray] = None
    reproj_error: float = float("nan")
    pose: Optional[Pose] = field(default=None, repr=False)
    reason: str = ""

    @classmethod
    def failure(cls, reason: str) -> "DetectionResult":
        return cls(found=False, reason=reason)


def _polygon_area(pts: np.ndarray) -> float:
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _is_convex(pts: np.ndarray) -> bool:
    signs = []
    for i in range(4):
        a, b, c = pts[i], pts[(i + 1) % 4], pts[(i + 2) % 4]
        signs.append((b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]))
    signs = np.asarray(signs)
    return bool(np.all(signs > 0) or np.all(signs < 0))


def _order_clockwise(pts: np.ndarray) -> np.ndarray:
    """Cyclic order by angle around the centroid (clockwise on screen, y down)"""
    center = pts.mean(axis=0)
    angles = np.arctan2(pts[:, 1] - center[1], pts[:, 0] - center[0])
    return pts[np.argsort(angles, kind="stable")]


def _coarse_corners(boundary: np.ndarray) -> Optional[np.ndarray]:
    """Four extreme points of a convex blob's boundary"""
    center = boundary.mean(axis=0)
    c0 = boundary[np.argmax(np.sum((boundary - center) ** 2, axis=1))]
    c1 = boundary[np.argmax(np.sum((boundary - c0) ** 2, axis=1))]
    d = c1 - c0
    norm = np.hypot(d[0], d[1])
    if norm == 0:
        return None
    side = ((boundary[:, 0] - c0[0]) * d[1] - (boundary[:, 1] - c0[1]) * d[0]) / norm
    if side.max() <= 0 or side.min() >= 0:
        return None
    c2 = boundary[np.argmax(side)]
    c3 = boundary[np.argmin(side)]
    return _order_clockwise(np.array([c0, c1, c2, c3], dtype=np.float64))


def _fit_edge(p0: np.ndarray, p1: np.ndarray, coords: np.ndarray, gx: np.ndarray,
              gy: np.ndarray, gmag: np.ndarray, band: float) -> Optional[np.ndarray]:
    """Gradient-weighted total-least-squares line near the segment p0-p1, as (a, b, c)"""
    d = p1 - p0
    length = np.hypot(d[0], d[1])
    if length == 0:
        return None
    d = d / length
    n = np.array([-d[1], d[0]])
    rel = coords - p0
    along = rel @ d / length
    grad_n = np.abs(gx * n[0] + gy * n[1]) / np.maximum(gmag, 1e-12)
    base = (along >= EDGE_SPAN[0]) & (along <= EDGE_SPAN[1]) & (grad_n >= MIN_NORMAL_ALIGNMENT)

    point, normal = p0, n
    for _ in range(2):
        dist = (coords - point) @ normal
        sel = base & (np.abs(dist) <= band)
        if np.count_nonzero(sel) < 3:
            return None
        w = gmag[sel]
        pts = coords[sel]
        point = (w[:, None] * pts).sum(axis=0) / w.sum()
        centered = pts - point
        cov = (w[:, None] * centered).T @ centered
        _, vecs = np.linalg.eigh(cov)
        direction = vecs[:, -1]
        normal = np.array([-direction[1], direction[0]])
    return np.array([normal[0], normal[1], -normal @ point])


def _refine_edge(img: np.ndarray, line: np.ndarray, p0: np.ndarray,
                 p1: np.ndarray) -> np.ndarray:
    """
    Partial-area edge localization along scanlines crossing the line (a, b, c).

    Each scanline (a row for a steep edge, a column otherwise) contributes the
    position where the step from the level on one side to the level on the other
    accounts for the summed intensity of a window around the current line; a
    least-squares line through those positions replaces the input. Scanlines
    touching saturation or lacking contrast are skipped, and the input line is
    returned when too few remain.
    """
    a, b, c = line
    steep = abs(a) >= abs(b)
    arr = img if steep else img.T
    big_a, big_b = (a, b) if steep else (b, a)
    t0, t1 = (p0[1], p1[1]) if steep else (p0[0], p1[0])
    lo, hi = min(t0, t1), max(t0, t1)
    span = hi - lo
    first = int(np.ceil(lo + EDGE_SPAN[0] * span))
    last = int(np.floor(lo + EDGE_SPAN[1] * span))
    half = SCAN_HALF_WIDTH
    n_rows, n_cols = arr.shape

    ts, es = [], []
    for t in range(max(first, 0), min(last, n_rows - 1) + 1):
        e = -(big_b * t + c) / big_a
        k = int(np.floor(e + 0.5))
        if k - half - 1 < 0 or k + half + 1 >= n_cols:
            continue
        strip = arr[t, k - half - 1:k + half + 2]
        if strip.max() >= FULL_SCALE:
            continue
        left, right = strip[0], strip[-1]
        if abs(right - left) < MIN_SEPARATION_DN:
            continue
        frac = np.clip((strip[1:-1] - left) / (right - left), 0.0, 1.0)
        ts.append(t)
        es.append(k + half + 0.5 - frac.sum())

    if len(ts) < MIN_SCANLINES:
        return line
    ts, es = np.asarray(ts, dtype=np.float64), np.asarray(es)
    slope, offset = np.polyfit(ts, es, 1)
    keep = np.abs(es - (slope * ts + offset)) <= MAX_SCAN_RESIDUAL
    if MIN_SCANLINES <= np.count_nonzero(keep) < len(ts):
        slope, offset = np.polyfit(ts[keep], es[keep], 1)
    # s = slope * t + offset, back in (x, y)
    refined = np.array([1.0, -slope, -offset]) if steep else np.array([-slope, 1.0, -offset])
    return refined / np.hypot(refined[0], refined[1])


def _intersect(l1: np.ndarray, l2: np.ndarray) -> Optional[np.ndarray]:
    p = np.cross(l1, l2)
    if abs(p[2]) < 1e-12:
        return None
    return p[:2] / p[2]


class MarkerDetector:
    """Detects the single scene marker and recovers its translation"""

    def __init__(self, spec: MarkerSpec, intrinsics: Intrinsics):
        self.spec = spec
        self.intrinsics = intrinsics
        size = spec.bits.shape[0]
        self._max_mismatch = max(1, int(0.1 * size * size))

    def detect(self, frame: Frame, search: Optional[Rect] = None) -> DetectionResult:
        """
        Find the marker inside `search` (default: whole frame).

        Failure at any stage is reported through `found=False` and `reason`.
        """
        search = search or Rect.full(frame.image)
        img = crop(frame.image, search).astype(np.float64)
        if img.shape[0] < 3 or img.shape[1] < 3 or img.max() - img.min() < MIN_SEPARATION_DN:
            return DetectionResult.failure("no contrast")

        thr = float(threshold_otsu(img))
        dark = img <= thr
        if dark.all() or not dark.any():
            return DetectionResult.failure("no contrast")
        separation = img[~dark].mean() - img[dark].mean()
        if separation < MIN_SEPARATION_DN:
            return DetectionResult.failure("no contrast")

        candidates = self._candidates(dark)
        if not candidates:
            return DetectionResult.failure("no dark quad component")

        gx, gy, gmag = sobel_gradients(img)
        reason = "quad test failed"
        for box, _, coarse in candidates[:MAX_CANDIDATES]:
            result = self._try_candidate(img, thr, box, coarse, gx, gy, gmag)
            if isinstance(result, str):
                reason = result
                continue
            corners = result + np.array([search.x0, search.y0], dtype=np.float64)
            try:
                translation, reproj, pose = estimate_pose(corners, self.spec, self.intrinsics)
            except DegenerateGeometryError:
                reason = "degenerate corners"
                continue
            if reproj > MAX_REPROJ_ERROR:
                reason = "reprojection error"
                continue
            return DetectionResult(True, corners, translation, reproj, pose)
        return DetectionResult.failure(reason)

    def _candidates(self, dark: np.ndarray) -> List[Tuple[Tuple[slice, slice], np.ndarray, np.ndarray]]:
        """
        Ring-shaped, quad-like dark components away from the search border, largest first.

        Returns (box, filled mask, coarse corners) per component. Components whose
        filled area differs from their four-corner quad by more than
        MAX_AREA_MISMATCH are dropped here, before the MAX_CANDIDATES cut, so a
        textured background cannot crowd the marker out.
        """
        labels, count = ndimage.label(dark)
        if count == 0:
            return []
        border = np.unique(np.concatenate([labels[0, :], labels[-1, :], labels[:, 0], labels[:, -1]]))
        sizes = ndimage.sum_labels(np.ones_like(labels), labels, index=np.arange(1, count + 1))
        found = []
        for idx, box in enumerate(ndimage.find_objects(labels), start=1):
            if box is None or idx in border or sizes[idx - 1] < MIN_QUAD_AREA / 2:
                continue
            component = labels[box] == idx
            filled = ndimage.binary_fill_holes(component)
            filled_area = int(filled.sum())
            if filled_area < MIN_QUAD_AREA:
                continue
            if (filled_area - sizes[idx - 1]) < MIN_HOLE_FRACTION * filled_area:
                continue
            coarse = self._coarse_quad(box, filled)
            if coarse is None:
                continue
            found.append((filled_area, idx, box, filled, coarse))
        found.sort(key=lambda item: (-item[0], item[1]))
        return [(box, filled, coarse) for _, _, box, filled, coarse in found]

    @staticmethod
    def _coarse_quad(box, filled: np.ndarray) -> Optional[np.ndarray]:
        """Extreme-point quad of a filled component, or None if it is not quad-shaped"""
        rows, cols = box
        eroded = ndimage.binary_erosion(filled)
        by, bx = np.nonzero(filled & ~eroded)
        boundary = np.column_stack([bx + cols.start, by + rows.start]).astype(np.float64)
        coarse = _coarse_corners(boundary)
        if coarse is None or not _is_convex(coarse):
            return None
        quad_area = abs(_polygon_area(coarse))
        if quad_area < MIN_QUAD_AREA:
            return None
        if abs(filled.sum() - quad_area) > MAX_AREA_MISMATCH * quad_area:
            return None
        return coarse

    def _try_candidate(self, img, thr, box, coarse, gx, gy, gmag):
        rows, cols = box
        quad_area = abs(_polygon_area(coarse))
        side_px = np.sqrt(quad_area)
        band = float(np.clip(0.3 * side_px / self.spec.n_cells, 1.0, 3.0))
        margin = int(np.ceil(band)) + 2
        y0 = max(rows.start - margin, 1)
        y1 = min(rows.stop + margin, img.shape[0] - 1)
        x0 = max(cols.start - margin, 1)
        x1 = min(cols.stop + margin, img.shape[1] - 1)
        vv, uu = np.mgrid[y0:y1, x0:x1]
        local = gmag[y0:y1, x0:x1] > 0
        coords = np.column_stack([uu[local], vv[local]]).astype(np.float64)
        lgx, lgy, lgmag = gx[y0:y1, x0:x1][local], gy[y0:y1, x0:x1][local], gmag[y0:y1, x0:x1][local]

        lines = []
        for i in range(4):
            line = _fit_edge(coarse[i], coarse[(i + 1) % 4], coords, lgx, lgy, lgmag, band)
            if line is None:
                return "edge fit failed"
            lines.append(line)
        refined = self._corners(lines)
        if refined is None:
            return "edge fit failed"
        # second pass: scanline partial-area positions between the fitted corners
        lines = [_refine_edge(img, lines[i], refined[i], refined[(i + 1) % 4]) for i in range(4)]
        refined = self._corners(lines)
        if refined is None:
            return "edge fit failed"
        if not _is_convex(refined) or abs(_polygon_area(refined)) < MIN_QUAD_AREA:
            return "quad test failed"

        ordered = self._orient(img, thr, refined)
        if ordered is None:
            return "pattern mismatch"
        return ordered

    @staticmethod
    def _corners(lines: List[np.ndarray]) -> Optional[np.ndarray]:
        """Corner i is where edge i-1 meets edge i"""
        corners = []
        for i in range(4):
            corner = _intersect(lines[i - 1], lines[i])
            if corner is None:
                return None
            corners.append(corner)
        return np.asarray(corners)

    def _orient(self, img: np.ndarray, thr: float, corners: np.ndarray) -> Optional[np.ndarray]:
        """Rotate the cyclic corner list so it starts at the pattern's top-left corner"""
        n = self.spec.n_cells
        b = self.spec.border_cells
        size = self.spec.bits.shape[0]
        grid = np.array([[0.0, 0.0], [n, 0.0], [n, n], [0.0, n]])
        centers = (np.arange(size) + b + 0.5)
        gxx, gyy = np.meshgrid(centers, centers)
        cells = np.column_stack([gxx.ravel(), gyy.ravel(), np.ones(size * size)])

        best_k, best_miss = None, None
        for k in range(4):
            ordered = np.roll(corners, -k, axis=0)
            try:
                h = dlt_homography(grid, ordered)
            except DegenerateGeometryError:
                return None
            proj = cells @ h.T
            u = proj[:, 0] / proj[:, 2]
            v = proj[:, 1] / proj[:, 2]
            samples = ndimage.map_coordinates(img, [v, u], order=1, mode="nearest")
            bits = (samples > thr).astype(np.int64).reshape(size, size)
            miss = int(np.count_nonzero(bits != self.spec.bits))
            if best_miss is None or miss < best_miss:
                best_k, best_miss = k, miss
        if best_miss is None or best_miss > self._max_mismatch:
            return None
        return np.roll(corners, -best_k, axis=0)


def detect(frame: Frame, search: Optional[Rect], spec: MarkerSpec,
           intrinsics: Intrinsics) -> DetectionResult:
    """Functional form of MarkerDetector.detect"""
    return MarkerDetector(spec, intrinsics).detect(frame, search)


def roi_from_detection(det: DetectionResult, bounds: Rect,
                       padding: float = ROI_PADDING) -> Rect:
    """Corner bounding box padded by `padding` of its own size per side, clipped to bounds"""
    if not det.found or det.corners is None:
        raise DetectionStateError("roi_from_detection needs a successful detection")
    return inflate_and_clip(bounding_rect(det.corners), padding, padding, bounds)
