"""
Exposure-time controllers

`aaec_step` is momentum gradient ascent on the gradient metric over a region tracked
around the detected marker. The baselines are a global (full-frame, momentum-free)
variant of the same ascent, a gamma-search gradient controller, and a mean-intensity
auto-exposure.
"""
from __future__ import annotations

import dataclasses
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Tuple, Type, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.camera.camera_sim import CameraModel, Frame
from src.exceptions import ConfigError
from src.exposure.metric import MetricParams, MetricReport, dm_ddt
from src.imaging.imgproc import Rect, sobel_gradients
from src.marker.detect import DetectionResult, roi_from_detection

logger = logging.getLogger(__name__)

GEC_GAMMAS = (0.5, 0.67, 0.8, 1.0, 1.25, 1.5, 2.0)


class ControllerType(Enum):
    """Controller labels accepted by the runner and CLI"""
    AAEC = "aaec"
    AEC = "aec"
    GEC = "gec"
    DEFAULT = "default"


class Mode(Enum):
    """Region source for the metric"""
    TRACKING = "tracking"
    REACQUIRE = "reacquire"


class ControllerParams(BaseModel):
    """Hyperparameters shared by all controllers (each reads the ones it needs)"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    gamma_m: float = Field(default=0.9, ge=0.0, lt=1.0)
    eta: float = Field(default=0.02, gt=0.0)
    threshold: float = Field(default=1e-4, ge=0.0)
    hold_frames: int = Field(default=10, ge=0)
    escape_saturated_frac: float = Field(default=0.9, gt=0.0, le=1.0)
    momentum_restart: bool = True
    reacquire_scan: bool = True
    scan_factor: float = Field(default=0.5, gt=0.0, lt=1.0)
    roi_padding: float = Field(default=0.10, ge=0.0)
    p: float = Field(default=0.75, gt=0.0, lt=1.0)
    k: float = Field(default=5.0, ge=1.0)
    initial_dt: float = Field(default=1.0, gt=0.0)
    gec_kappa: float = Field(default=0.5, gt=0.0)
    target_mean: float = Field(default=118.0, gt=0.0, lt=255.0)
    ae_damping: float = Field(default=0.7, gt=0.0, le=1.0)

    def metric_params(self, cam: CameraModel) -> MetricParams:
        return MetricParams(p=self.p, k=self.k, crf=cam.crf)


@dataclass(frozen=True)
class ControllerState:
    """Exposure, momentum and tracking state between frames"""
    dt: float
    v: float = 0.0
    roi: Optional[Rect] = None
    frames_since_detection: int = 0
    mode: Mode = Mode.REACQUIRE
    frame_index: int = 0


@dataclass(frozen=True)
class StepLog:
    """One controller row per frame"""
    frame: int
    time_s: float
    dt: float
    m: float
    d_hat: float
    v: float
    found: bool
    roi: Tuple[int, int, int, int]
    mode: str
    saturated_frac: float


def normalized_derivative(report: MetricReport, dt: float) -> float:
    """
    Exposure elasticity of the metric, dm/ddt * dt / m, clipped to [-1, 1].

    The weights sum to 1, so m is a weighted mean gradient and the elasticity is
    scale-free. The clip bounds a single momentum-free step at eta * dt.
    """
    if report.m <= 0.0 or not math.isfinite(report.dm_ddt):
        return 0.0
    return float(np.clip(report.dm_ddt * dt / report.m, -1.0, 1.0))


def _momentum_update(state: ControllerState, d_hat: float, cam: CameraModel,
                     params: ControllerParams, gamma_m: float,
                     restart: bool = False) -> Tuple[float, float]:
    """
    Apply the deadband, momentum and anti-windup; returns (dt_next, v).

    With `restart`, momentum pointing against the current derivative is dropped
    before the new kick.
    """
    carried = gamma_m * state.v
    if restart and d_hat * state.v < 0.0:
        carried = 0.0
    if abs(d_hat) >= params.threshold:
        v = carried + params.eta * d_hat * state.dt
    else:
        v = carried
    raw = state.dt + v
    dt_next = cam.clamp(raw)
    if dt_next != raw:
        v = 0.0
    return dt_next, v


def scan_exposure(dt: float, cam: CameraModel, factor: float = 0.5) -> float:
    """Next exposure of the reacquisition scan: shrink by `factor`, wrapping from dt_min to dt_max"""
    if dt <= cam.dt_min * (1.0 + 1e-9):
        return cam.dt_max
    return cam.clamp(dt * factor)


def _row(state: ControllerState, cam: CameraModel, report: Optional[MetricReport], d_hat: float,
         v: float, found: bool, roi: Rect, mode: Mode, saturated_frac: float) -> StepLog:
    return StepLog(
        frame=state.frame_index,
        time_s=state.frame_index / cam.fps,
        dt=state.dt,
        m=report.m if report is not None else float("nan"),
        d_hat=d_hat,
        v=v,
        found=found,
        roi=roi.as_tuple(),
        mode=mode.value,
        saturated_frac=saturated_frac,
    )


def aaec_step(state: ControllerState, frame: Frame, det: DetectionResult, cam: CameraModel,
              params: ControllerParams) -> Tuple[ControllerState, StepLog]:
    """
    One frame of adaptive active exposure control.

    Updates the tracked region from the detection (holding the last region for up to
    `hold_frames` misses), takes the metric derivative over it, and moves dt by
    momentum gradient ascent.

    In reacquire mode a region more than `escape_saturated_frac` saturated halves dt,
    since saturated pixels carry no gradient signal. Once the hold has run out the
    full-frame ascent is replaced by a scan that shrinks dt by `scan_factor` per
    frame (wrapping from dt_min to dt_max) until the marker is found again; the
    full-frame optimum of a glare-lit scene is where the marker saturates.
    """
    bounds = Rect.full(frame.image)
    misses = state.frames_since_detection
    if det.found:
        roi = roi_from_detection(det, bounds, params.roi_padding)
        mode = Mode.TRACKING
        misses = 0
    else:
        misses += 1
        roi, mode = state.roi, state.mode
        if roi is None or misses > params.hold_frames:
            roi, mode = bounds, Mode.REACQUIRE

    report = dm_ddt(frame, roi, state.dt, params.metric_params(cam),
                    dt_range=(cam.dt_min, cam.dt_max))
    d_hat = normalized_derivative(report, state.dt)

    reacquiring = mode is Mode.REACQUIRE
    if reacquiring and report.saturated_frac > params.escape_saturated_frac:
        dt_next, v = cam.clamp(state.dt / 2.0), 0.0
    elif reacquiring and params.reacquire_scan and misses > params.hold_frames:
        dt_next, v = scan_exposure(state.dt, cam, params.scan_factor), 0.0
    else:
        dt_next, v = _momentum_update(state, d_hat, cam, params, params.gamma_m,
                                      restart=params.momentum_restart)

    row = _row(state, cam, report, d_hat, v, det.found, roi, mode, report.saturated_frac)
    new_state = ControllerState(dt=dt_next, v=v, roi=roi, frames_since_detection=misses,
                                mode=mode, frame_index=state.frame_index + 1)
    return new_state, row


def aec_global_step(state: ControllerState, frame: Frame, cam: CameraModel,
                    params: ControllerParams,
                    det: Optional[DetectionResult] = None) -> Tuple[ControllerState, StepLog]:
    """Full-frame gradient ascent on the same metric, without momentum"""
    roi = Rect.full(frame.image)
    report = dm_ddt(frame, roi, state.dt, params.metric_params(cam),
                    dt_range=(cam.dt_min, cam.dt_max))
    d_hat = normalized_derivative(report, state.dt)
    dt_next, _ = _momentum_update(dataclasses.replace(state, v=0.0), d_hat, cam, params, 0.0)
    found = bool(det.found) if det is not None else False
    row = _row(state, cam, report, d_hat, 0.0, found, roi, Mode.REACQUIRE, report.saturated_frac)
    new_state = ControllerState(dt=dt_next, v=0.0, roi=roi, mode=Mode.REACQUIRE,
                                frame_index=state.frame_index + 1)
    return new_state, row


def gradient_mass(image: np.ndarray, gamma: float) -> float:
    """Total Sobel gradient magnitude of 255 * (I / 255) ** gamma"""
    remapped = 255.0 * np.power(np.asarray(image, dtype=np.float64) / 255.0, gamma)
    return float(sobel_gradients(remapped)[2].sum())


def best_gamma(image: np.ndarray, gammas: Tuple[float, ...] = GEC_GAMMAS) -> float:
    """Gamma whose remap maximizes gradient mass; flat frames pick the brightening or darkening extreme"""
    masses = np.array([gradient_mass(image, g) for g in gammas])
    if masses.max() - masses.min() <= 1e-9 * max(1.0, masses.max()):
        return gammas[-1] if float(np.mean(image)) >= 127.5 else gammas[0]
    return float(gammas[int(np.argmax(masses))])


def gec_step(state: ControllerState, frame: Frame, cam: CameraModel, params: ControllerParams,
             det: Optional[DetectionResult] = None) -> Tuple[ControllerState, StepLog]:
    """Gamma-search gradient controller: brighten when a gamma below 1 adds gradient"""
    g_star = best_gamma(frame.image)
    dt_next = cam.clamp(state.dt * (1.0 + params.gec_kappa * (1.0 - g_star) / g_star))
    found = bool(det.found) if det is not None else False
    saturated = float(np.mean(frame.image == 255))
    row = _row(state, cam, None, float("nan"), 0.0, found, Rect.full(frame.image),
               Mode.REACQUIRE, saturated)
    return dataclasses.replace(state, dt=dt_next, frame_index=state.frame_index + 1), row


def default_ae_step(state: ControllerState, frame: Frame, cam: CameraModel,
                    params: ControllerParams,
                    det: Optional[DetectionResult] = None) -> Tuple[ControllerState, StepLog]:
    """Mid-tone auto-exposure: scale dt towards a target mean intensity"""
    mean = max(float(np.mean(frame.image)), 1.0)
    dt_next = cam.clamp(state.dt * (params.target_mean / mean) ** params.ae_damping)
    found = bool(det.found) if det is not None else False
    saturated = float(np.mean(frame.image == 255))
    row = _row(state, cam, None, float("nan"), 0.0, found, Rect.full(frame.image),
               Mode.REACQUIRE, saturated)
    return dataclasses.replace(state, dt=dt_next, frame_index=state.frame_index + 1), row


class ExposureController(ABC):
    """Base class holding state and the per-frame log of one controller instance"""

    controller_type: ControllerType

    def __init__(self, cam: CameraModel, params: Optional[ControllerParams] = None,
                 initial_dt: Optional[float] = None):
        self.cam = cam
        self.params = params or ControllerParams()
        start = self.params.initial_dt if initial_dt is None else initial_dt
        self.state = ControllerState(dt=cam.clamp(start))
        self.history: List[StepLog] = []
        self.logger = logging.getLogger(f"controller.{self.controller_type.value}")

    @property
    def dt(self) -> float:
        return self.state.dt

    @abstractmethod
    def advance(self, frame: Frame, det: DetectionResult) -> Tuple[ControllerState, StepLog]:
        """Compute the next state for one frame"""

    def step(self, frame: Frame, det: Optional[DetectionResult] = None) -> StepLog:
        """Consume one frame captured at the current exposure and record its row"""
        if not math.isclose(frame.dt, self.state.dt, rel_tol=1e-9):
            self.logger.warning("Frame exposure %.6g ms differs from controller exposure %.6g ms",
                                frame.dt, self.state.dt)
        det = det or DetectionResult.failure("not run")
        self.state, row = self.advance(frame, det)
        self.history.append(row)
        self.logger.debug("frame %d dt=%.5g -> %.5g d_hat=%.4g", row.frame, row.dt,
                          self.state.dt, row.d_hat)
        return row


class AAECController(ExposureController):
    controller_type = ControllerType.AAEC

    def advance(self, frame, det):
        return aaec_step(self.state, frame, det, self.cam, self.params)


class GlobalAECController(ExposureController):
    controller_type = ControllerType.AEC

    def advance(self, frame, det):
        return aec_global_step(self.state, frame, self.cam, self.params, det)


class GECController(ExposureController):
    controller_type = ControllerType.GEC

    def advance(self, frame, det):
        return gec_step(self.state, frame, self.cam, self.params, det)


class DefaultAEController(ExposureController):
    controller_type = ControllerType.DEFAULT

    def advance(self, frame, det):
        return default_ae_step(self.state, frame, self.cam, self.params, det)


CONTROLLERS: Dict[ControllerType, Type[ExposureController]] = {
    ControllerType.AAEC: AAECController,
    ControllerType.AEC: GlobalAECController,
    ControllerType.GEC: GECController,
    ControllerType.DEFAULT: DefaultAEController,
}


def parse_controller(label: Union[str, ControllerType]) -> ControllerType:
    if isinstance(label, ControllerType):
        return label
    try:
        return ControllerType(str(label).strip().lower())
    except ValueError:
        valid = ", ".join(c.value for c in ControllerType)
        raise ConfigError(f"Unknown controller '{label}'. Valid options: {valid}") from None


def build_controller(label: Union[str, ControllerType], cam: CameraModel,
                     params: Optional[ControllerParams] = None,
                     initial_dt: Optional[float] = None) -> ExposureController:
    """Instantiate a controller by label"""
    return CONTROLLERS[parse_controller(label)](cam, params, initial_dt)
