"""
Deterministic photometric camera

Maps an irradiance field E (saturation-units per ms) and an exposure time dt (ms)
to an 8-bit frame: I = crf(E * dt), then shot and read noise, rounding and clamping.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from src.exceptions import ExposureRangeError
from src.imaging.imgproc import MIN_FRAME_SIDE, check_image8

logger = logging.getLogger(__name__)

FULL_SCALE = 255.0


class CRFKind(Enum):
    """Camera response function families"""
    LINEAR = "linear"
    GAMMA = "gamma"


@dataclass(frozen=True)
class CRF:
    """Response function descriptor"""
    kind: CRFKind = CRFKind.LINEAR
    gamma: float = 1.0

    def __post_init__(self):
        if isinstance(self.kind, str):
            object.__setattr__(self, "kind", CRFKind(self.kind))
        if self.kind is CRFKind.GAMMA and self.gamma <= 0:
            raise ValueError(f"Gamma CRF exponent must be positive, got {self.gamma}")


@dataclass(frozen=True)
class CameraModel:
    """Sensor geometry, response and noise"""
    width: int = 640
    height: int = 480
    crf: CRF = field(default_factory=CRF)
    dt_min: float = 0.01
    dt_max: float = 50.0
    read_noise_sigma: float = 2.0
    shot_noise_scale: float = 0.5
    fps: float = 20.0

    def __post_init__(self):
        if self.width < MIN_FRAME_SIDE or self.height < MIN_FRAME_SIDE:
            raise ValueError(f"Camera resolution must be at least {MIN_FRAME_SIDE}x{MIN_FRAME_SIDE}")
        if not 0 < self.dt_min < self.dt_max:
            raise ValueError(f"Need 0 < dt_min < dt_max, got [{self.dt_min}, {self.dt_max}]")
        if self.read_noise_sigma < 0 or self.shot_noise_scale < 0:
            raise ValueError("Noise parameters must be non-negative")
        if self.fps <= 0:
            raise ValueError(f"fps must be positive, got {self.fps}")

    @property
    def noiseless(self) -> "CameraModel":
        """Same camera with both noise sources switched off"""
        return CameraModel(self.width, self.height, self.crf, self.dt_min, self.dt_max,
                           0.0, 0.0, self.fps)

    def clamp(self, dt: float) -> float:
        return float(min(max(dt, self.dt_min), self.dt_max))

    def check_exposure(self, dt: float) -> None:
        if not self.dt_min <= dt <= self.dt_max:
            raise ExposureRangeError(
                f"Exposure {dt} ms outside camera range [{self.dt_min}, {self.dt_max}] ms"
            )


@dataclass(frozen=True)
class Frame:
    """Captured 8-bit grayscale image with the exposure time that produced it"""
    image: np.ndarray
    dt: float
    index: int = 0

    def __post_init__(self):
        check_image8(self.image)

    @property
    def width(self) -> int:
        return int(self.image.shape[1])

    @property
    def height(self) -> int:
        return int(self.image.shape[0])


def crf_apply(crf: CRF, x) -> np.ndarray:
    """Pre-quantization intensity (DN) for accumulated exposure x = E * dt"""
    xc = np.clip(np.asarray(x, dtype=np.float64), 0.0, 1.0)
    if crf.kind is CRFKind.LINEAR:
        return FULL_SCALE * xc
    return FULL_SCALE * np.power(xc, 1.0 / crf.gamma)


def crf_derivative(crf: CRF, x) -> np.ndarray:
    """dI/dx of crf_apply; 0 for saturated pixels (x >= 1) and, for gamma, at x = 0"""
    xa = np.asarray(x, dtype=np.float64)
    unsaturated = xa < 1.0
    if crf.kind is CRFKind.LINEAR:
        return np.where(unsaturated, FULL_SCALE, 0.0)
    positive = unsaturated & (xa > 0.0)
    safe = np.where(positive, xa, 1.0)
    slope = FULL_SCALE / crf.gamma * np.power(safe, 1.0 / crf.gamma - 1.0)
    return np.where(positive, slope, 0.0)


def crf_inverse(crf: CRF, intensity) -> np.ndarray:
    """Accumulated exposure estimate from intensity (DN); saturated pixels map to 1"""
    y = np.clip(np.asarray(intensity, dtype=np.float64) / FULL_SCALE, 0.0, 1.0)
    if crf.kind is CRFKind.LINEAR:
        return y
    return np.power(y, crf.gamma)


def expose(irradiance: np.ndarray, cam: CameraModel, dt: float) -> np.ndarray:
    """Noise-free pre-quantization intensity map for an irradiance field"""
    cam.check_exposure(dt)
    return crf_apply(cam.crf, irradiance * dt)


def quantize(intensity: np.ndarray, cam: CameraModel,
             rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Add shot and read noise, round and clamp to 8 bits"""
    values = np.asarray(intensity, dtype=np.float64)
    if rng is not None and (cam.shot_noise_scale > 0 or cam.read_noise_sigma > 0):
        shot = cam.shot_noise_scale * np.sqrt(values) * rng.standard_normal(values.shape)
        read = cam.read_noise_sigma * rng.standard_normal(values.shape)
        values = values + shot + read
    return np.clip(np.round(values), 0, 255).astype(np.uint8)


def capture(scene, cam: CameraModel, dt: float, pose=None,
            rng: Optional[np.random.Generator] = None, index: int = 0) -> Frame:
    """
    Capture one frame of a scene.

    Args:
        scene: IrradianceScene providing the irradiance field for a marker pose
        cam: camera model
        dt: exposure time (ms), inside [dt_min, dt_max]
        pose: marker pose in the camera frame; None uses the scene's nominal pose
        rng: noise stream; None (or a noiseless camera) captures noise-free
        index: frame index stored on the result
    Returns:
        Frame with the quantized image
    """
    cam.check_exposure(dt)
    irradiance = scene.irradiance_at(pose)
    intensity = crf_apply(cam.crf, irradiance * dt)
    image = quantize(intensity, cam, rng)
    return Frame(image=image, dt=float(dt), index=index)
