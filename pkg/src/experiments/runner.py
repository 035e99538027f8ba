"""
Closed-loop simulation of one controller on one scenario, and the brute-force exposure sweep
"""
from __future__ import annotations

import logging
import multiprocessing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional, Union

import numpy as np
import pandas as pd
from tqdm import tqdm

from src.camera.camera_sim import CameraModel, Frame, capture, expose
from src.camera.geometry import Pose, marker_relative_to_camera
from src.camera.scenarios import IrradianceScene, Scenario, make_scenario
from src.camera.trajectory import Trajectory, TrajectoryKind, pose_at
from src.evaluation.records import RunRecord
from src.exceptions import RegionError
from src.exposure.controllers import ControllerParams, build_controller, parse_controller
from src.exposure.metric import MetricParams, m_softperc_values
from src.imaging.imgproc import Rect, bounding_rect, crop, inflate_and_clip, write_pgm
from src.marker.detect import DetectionResult, MarkerDetector, roi_from_detection
from src.marker.render import MarkerSpec, marker_mask, project_marker_corners

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ["dt_ms", "m", "found", "mean_intensity", "marker_saturated_frac", "is_argmax"]


@dataclass(frozen=True)
class RunSpec:
    """Everything one simulated run needs; picklable for worker processes"""
    scenario: str
    controller: str
    seed: int
    frames: int
    cam: CameraModel = field(default_factory=CameraModel)
    params: ControllerParams = field(default_factory=ControllerParams)
    trajectory: Optional[Trajectory] = None
    marker: MarkerSpec = field(default_factory=MarkerSpec)
    marker_pose: Optional[Pose] = None
    initial_dt: Optional[float] = None
    dump_dir: Optional[str] = None

    def resolved_trajectory(self) -> Trajectory:
        if self.trajectory is not None:
            return self.trajectory
        return Trajectory(TrajectoryKind.STATIC, duration=self.frames / self.cam.fps, seed=self.seed)


def _search_region(last: Optional[DetectionResult], bounds: Rect, padding: float) -> Optional[Rect]:
    if last is None or not last.found:
        return None
    return roi_from_detection(last, bounds, padding)


def track_marker(detector: MarkerDetector, frame, last: Optional[DetectionResult],
                 padding: float) -> DetectionResult:
    """Search around the previous detection first, then the whole frame"""
    bounds = Rect.full(frame.image)
    search = _search_region(last, bounds, padding)
    if search is not None:
        det = detector.detect(frame, search)
        if det.found:
            return det
    return detector.detect(frame, None)


def simulate_run(spec: RunSpec, scene: Optional[IrradianceScene] = None) -> RunRecord:
    """
    Run the capture -> detect -> control loop for `spec.frames` frames.

    Frame k is taken at t = k / fps with the exposure the controller chose after
    frame k-1. Detection is the same for every controller so rates are comparable.
    """
    cam = spec.cam
    traj = spec.resolved_trajectory()
    scene = scene or make_scenario(spec.scenario, cam, marker=spec.marker, marker_pose=spec.marker_pose)
    controller = build_controller(spec.controller, cam, spec.params, spec.initial_dt)
    detector = MarkerDetector(scene.marker, scene.intrinsics)
    rng = np.random.default_rng(spec.seed)
    dump_dir = Path(spec.dump_dir) if spec.dump_dir else None

    steps, detections, truths, errors = [], [], [], []
    last: Optional[DetectionResult] = None
    for k in range(spec.frames):
        t = k / cam.fps
        rel = marker_relative_to_camera(scene.nominal_pose, pose_at(traj, t))
        frame = capture(scene, cam, controller.dt, rel, rng, index=k)
        if dump_dir is not None:
            write_pgm(dump_dir / f"frame_{k:05d}.pgm", frame.image)

        det = track_marker(detector, frame, last, spec.params.roi_padding)
        last = det if det.found else last
        steps.append(controller.step(frame, det))
        detections.append(det.translation if det.found else None)
        truths.append(rel.t.copy())
        errors.append(det.reproj_error if det.found else float("nan"))

    found = sum(s.found for s in steps)
    logger.info("%s/%s seed %d: %d frames, %d detections, final dt %.4g ms", spec.scenario,
                spec.controller, spec.seed, spec.frames, found, controller.dt)
    return RunRecord.from_steps(
        steps, detections, truths, errors,
        scenario=Scenario(scene.scenario).value,
        controller=parse_controller(spec.controller).value,
        trajectory=traj.kind.value,
        seed=spec.seed,
        fps=cam.fps,
    )


def run_many(specs: Iterable[RunSpec], jobs: int = 1, progress: bool = True) -> List[RunRecord]:
    """Simulate runs, in a process pool when jobs > 1; results keep the input order"""
    specs = list(specs)
    bar = tqdm(total=len(specs), desc="runs", disable=not progress)
    records: List[RunRecord] = []
    if jobs > 1 and len(specs) > 1:
        with multiprocessing.Pool(min(jobs, len(specs))) as pool:
            for rec in pool.imap(simulate_run, specs):
                records.append(rec)
                bar.update(1)
    else:
        for spec in specs:
            records.append(simulate_run(spec))
            bar.update(1)
    bar.close()
    return records


def marker_roi(scene: IrradianceScene, bounds: Rect, padding: float = 0.10,
               pose: Optional[Pose] = None) -> Rect:
    """Padded box around the ground-truth projected marker corners"""
    pose = scene.nominal_pose if pose is None else pose
    corners = project_marker_corners(scene.marker, pose, scene.intrinsics)
    return inflate_and_clip(bounding_rect(corners), padding, padding, bounds)


def exposure_sweep(scene: IrradianceScene, cam: CameraModel, region: Union[str, Rect] = "full",
                   n_points: int = 64, p: float = 0.75, k: float = 5.0,
                   detect_markers: bool = True) -> pd.DataFrame:
    """
    Noise-free metric over log-spaced exposures spanning the camera range.

    Args:
        scene: irradiance scene, marker at its nominal pose
        cam: camera; noise is ignored
        region: "full", "roi" (padded ground-truth marker box) or an explicit Rect
        n_points: number of exposures, at least 8
        p, k: metric parameters
        detect_markers: run the detector on every swept frame
    Returns:
        DataFrame with SWEEP_COLUMNS; exactly one row has is_argmax set (first maximum)
    """
    if n_points < 8:
        raise ValueError(f"Exposure sweep needs at least 8 points, got {n_points}")

    bounds = Rect(0, 0, cam.width, cam.height)
    if isinstance(region, Rect):
        rect = region
    elif region == "full":
        rect = bounds
    elif region == "roi":
        rect = marker_roi(scene, bounds)
    else:
        raise RegionError(f"Unknown sweep region '{region}'. Valid options: full, roi")

    params = MetricParams(p=p, k=k, crf=cam.crf)
    irradiance = scene.irradiance
    interior = marker_mask(scene.shape, scene.marker, scene.nominal_pose, scene.intrinsics)
    detector = MarkerDetector(scene.marker, scene.intrinsics) if detect_markers else None
    quiet = cam.noiseless

    rows = []
    for dt in np.clip(np.geomspace(cam.dt_min, cam.dt_max, n_points), cam.dt_min, cam.dt_max):
        intensity = expose(irradiance, quiet, float(dt))
        image = np.clip(np.round(intensity), 0, 255).astype(np.uint8)
        found = False
        if detector is not None:
            found = detector.detect(Frame(image, float(dt))).found
        rows.append({
            "dt_ms": float(dt),
            "m": m_softperc_values(crop(intensity, rect), params),
            "found": int(found),
            "mean_intensity": float(intensity.mean()),
            "marker_saturated_frac": float((image[interior] == 255).mean()) if interior.any() else 0.0,
        })
    table = pd.DataFrame(rows)
    table["is_argmax"] = 0
    table.loc[int(table["m"].to_numpy().argmax()), "is_argmax"] = 1
    return table[SWEEP_COLUMNS]


def sweep_optimum(table: pd.DataFrame) -> float:
    """Exposure at the sweep's argmax row"""
    return float(table.loc[table["is_argmax"] == 1, "dt_ms"].iloc[0])
