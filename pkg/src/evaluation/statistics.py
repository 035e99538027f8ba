"""
Run statistics: position precision, detection rate, distance to the true path, convergence
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from typing import List, Mapping, Optional, Union

import numpy as np
from scipy.spatial.distance import pdist

from src.camera.trajectory import TrajectoryKind, parse_trajectory_kind
from src.evaluation.records import RunRecord
from src.exceptions import TrajectoryError

logger = logging.getLogger(__name__)

CONVERGENCE_BAND = 0.02
CONVERGENCE_PERSIST = 5
CONVERGENCE_TAIL = 10
DEFAULT_WARMUP_CAP = 50


@dataclass
class Convergence:
    frames: Optional[int]
    seconds: Optional[float]

    @property
    def converged(self) -> bool:
        return self.frames is not None


@dataclass
class Summary:
    """One summary row per run"""
    scenario: str
    controller: str
    seed: int
    cov_det: float
    detection_rate: float
    traj_dist_m: float
    max_pairwise_dist_m: float
    conv_frames: Optional[int]
    conv_seconds: Optional[float]

    def as_row(self) -> dict:
        return asdict(self)


def covariance_determinant(points: np.ndarray) -> float:
    """
    Determinant of the sample covariance (divisor n-1) of 3-D points.

    Raises:
        ValueError: fewer than 4 points
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(pts) < 4:
        raise ValueError(f"Covariance determinant needs at least 4 points, got {len(pts)}")
    det = float(np.linalg.det(np.cov(pts, rowvar=False, ddof=1)))
    return max(det, 0.0)


def max_pairwise_distance(points: np.ndarray) -> float:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(pts) < 2:
        return 0.0
    return float(pdist(pts).max())


def convergence_time(dt: Union[RunRecord, np.ndarray], fps: Optional[float] = None) -> Convergence:
    """
    First frame after which dt stays within 2% of its settled value for 5 more frames.

    The settled value is the median of the last 10 frames. Returns a Convergence with
    frames=None when no such frame exists.
    """
    if isinstance(dt, RunRecord):
        fps = dt.fps if fps is None else fps
        dt = dt.dt
    series = np.asarray(dt, dtype=np.float64)
    if len(series) < CONVERGENCE_TAIL:
        raise ValueError(f"Convergence needs at least {CONVERGENCE_TAIL} frames, got {len(series)}")
    dt_end = float(np.median(series[-CONVERGENCE_TAIL:]))
    inside = np.abs(series - dt_end) / dt_end < CONVERGENCE_BAND
    window = CONVERGENCE_PERSIST + 1
    for k in range(len(series) - CONVERGENCE_PERSIST):
        if inside[k:k + window].all():
            seconds = k / fps if fps else None
            return Convergence(k, seconds)
    return Convergence(None, None)


def default_warmup(rec: RunRecord) -> int:
    """Frames excluded before precision statistics: convergence or 50 frames, whichever first"""
    conv = convergence_time(rec) if len(rec) >= CONVERGENCE_TAIL else Convergence(None, None)
    if conv.frames is None:
        return min(DEFAULT_WARMUP_CAP, max(len(rec) - 1, 0))
    return min(conv.frames, DEFAULT_WARMUP_CAP)


def detection_rate(rec: RunRecord, warmup: Optional[int] = None) -> float:
    """Fraction of frames with a detection after the warm-up window"""
    if len(rec) == 0:
        raise ValueError("Detection rate needs at least one frame")
    start = default_warmup(rec) if warmup is None else warmup
    start = min(max(start, 0), len(rec) - 1)
    return float(rec.found[start:].mean())


def point_line_distance(points: np.ndarray, origin: np.ndarray, direction: np.ndarray) -> np.ndarray:
    """Euclidean distance of each point to the infinite line origin + s * direction"""
    u = np.asarray(direction, dtype=np.float64)
    u = u / np.linalg.norm(u)
    rel = np.asarray(points, dtype=np.float64) - origin
    return np.linalg.norm(rel - np.outer(rel @ u, u), axis=1)


def trajectory_distance(rec: RunRecord, warmup: int = 0) -> float:
    """
    Mean distance of detected translations to the ground-truth path.

    Static runs compare to the fixed marker position, lateral runs to the straight line
    traced by the ground truth. NaN when nothing was detected.

    Raises:
        TrajectoryError: jitter runs have no straight reference path
    """
    kind = parse_trajectory_kind(rec.trajectory)
    if kind is TrajectoryKind.JITTER:
        raise TrajectoryError("Trajectory distance is defined for static and lateral runs only")
    found = rec.found.copy()
    found[:warmup] = False
    if not found.any():
        return float("nan")
    points = rec.detections[found]
    gt = rec.ground_truth
    direction = gt[-1] - gt[0]
    if kind is TrajectoryKind.STATIC or np.linalg.norm(direction) < 1e-12:
        return float(np.linalg.norm(points - gt[0], axis=1).mean())
    return float(point_line_distance(points, gt[0], direction).mean())


def summarize(rec: RunRecord, warmup: Optional[int] = None) -> Summary:
    """All statistics of one run; undefined values come back as NaN or None"""
    conv = convergence_time(rec) if len(rec) >= CONVERGENCE_TAIL else Convergence(None, None)
    start = default_warmup(rec) if warmup is None else warmup
    found = rec.found.copy()
    found[:start] = False
    points = rec.detections[found]

    try:
        cov_det = covariance_determinant(points)
    except ValueError:
        cov_det = float("nan")
    try:
        traj = trajectory_distance(rec, warmup=start)
    except TrajectoryError:
        traj = float("nan")

    summary = Summary(
        scenario=rec.scenario,
        controller=rec.controller,
        seed=rec.seed,
        cov_det=cov_det,
        detection_rate=detection_rate(rec, start),
        traj_dist_m=traj,
        max_pairwise_dist_m=max_pairwise_distance(points) if len(points) else float("nan"),
        conv_frames=conv.frames,
        conv_seconds=conv.seconds,
    )
    if math.isnan(cov_det):
        logger.info("%s/%s seed %d: too few detections for covariance", rec.scenario,
                    rec.controller, rec.seed)
    return summary


def precision_order(cov_dets: Mapping[str, float]) -> List[str]:
    """
    Controllers from most to least precise by cov_det.

    A NaN cov_det means too few detections to measure spread, so it ranks behind
    every finite value; ties keep the input order.
    """
    def key(item):
        value = item[1]
        return (1, 0.0) if value is None or math.isnan(value) else (0, value)

    return [name for name, _ in sorted(cov_dets.items(), key=key)]
