"""
Percentile-weighted gradient metric and its derivative with respect to exposure time

The metric sorts the Sobel gradient magnitudes of a region ascending and takes a
weighted sum whose weight curve peaks sharply at the p-th percentile. The
derivative follows the chain rule through the camera response: each pixel's
intensity slope dI/ddt is filtered with the same Sobel kernels, giving
dG/ddt = (gx * dgx + gy * dgy) / G with the sort order frozen.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

import numpy as np

from src.camera.camera_sim import CRF, FULL_SCALE, Frame, crf_derivative, crf_inverse
from src.exceptions import ExposureRangeError, RegionError
from src.imaging.imgproc import Rect, crop, sobel_gradients

logger = logging.getLogger(__name__)


class IrradianceSource(Enum):
    """Where the derivative takes per-pixel irradiance from"""
    INVERSE_CRF = "inverse_crf"
    GROUND_TRUTH = "ground_truth"


@dataclass(frozen=True)
class MetricParams:
    """Target percentile p, weight sharpness k and the active camera response"""
    p: float = 0.75
    k: float = 5.0
    crf: CRF = field(default_factory=CRF)

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ValueError(f"Percentile p must lie in (0, 1), got {self.p}")
        if self.k < 1.0:
            raise ValueError(f"Weight exponent k must be >= 1, got {self.k}")


@dataclass(frozen=True)
class MetricReport:
    """Metric value and exposure derivative over one region"""
    m: float
    dm_ddt: float
    s: int
    saturated_frac: float


def weights(S: int, p: float, k: float) -> np.ndarray:
    """
    Normalized weight curve over S ascending-sorted pixels, peaking at floor(p*S).

    Rising branch sin(pi*i/(2m))^k up to m = floor(p*S); falling branch
    sin(pi/2 - pi*(i-m)/(2*(S-m)))^k beyond it, decaying towards 0 at i = S.

    Raises:
        RegionError: S < 2, or p*S < 1 so the peak would land on W_0
    """
    if S < 2:
        raise RegionError(f"Weight curve needs at least 2 pixels, got {S}")
    m = int(np.floor(p * S))
    if m < 1:
        raise RegionError(f"Percentile {p} of {S} pixels falls below the first rank")
    i = np.arange(S, dtype=np.float64)
    w = np.empty(S)
    w[:m + 1] = np.sin(np.pi * i[:m + 1] / (2.0 * m)) ** k
    tail = i[m + 1:]
    w[m + 1:] = np.sin(np.pi / 2.0 - np.pi * (tail - m) / (2.0 * (S - m))) ** k
    return w / w.sum()


def _region(image: np.ndarray, roi: Optional[Rect]) -> np.ndarray:
    block = image if roi is None else crop(image, roi)
    if block.shape[0] < 4 or block.shape[1] < 4:
        raise RegionError(f"Region {block.shape} leaves fewer than 2 interior pixels")
    return block


def _interior(a: np.ndarray) -> np.ndarray:
    return a[1:-1, 1:-1].ravel()


def sorted_gradients(intensity: np.ndarray):
    """Interior Sobel maps of a region plus the stable ascending order of gmag"""
    gx, gy, gmag = sobel_gradients(intensity)
    g = _interior(gmag)
    order = np.argsort(g, kind="stable")
    return gx, gy, gmag, order


def m_softperc_values(intensity: np.ndarray, params: MetricParams) -> float:
    """Metric over a whole region given as an intensity array (DN, any real dtype)"""
    block = _region(np.asarray(intensity), None)
    _, _, gmag, order = sorted_gradients(block)
    g = _interior(gmag)[order]
    return float(weights(g.size, params.p, params.k) @ g)


def m_softperc(frame: Union[Frame, np.ndarray], roi: Optional[Rect],
               params: MetricParams) -> float:
    """Metric of a frame over roi (None = full frame)"""
    image = frame.image if isinstance(frame, Frame) else np.asarray(frame)
    return m_softperc_values(_region(image, roi), params)


def gradient_derivative(intensity: np.ndarray, slope: np.ndarray):
    """
    Per-pixel dG/ddt for a region.

    Args:
        intensity: region intensities (DN)
        slope: dI/ddt per pixel (DN per ms), 0 where saturated
    Returns:
        (gmag, dG) interior-flattened arrays in row-major order
    """
    gx, gy, gmag = sobel_gradients(intensity)
    dgx, dgy, _ = sobel_gradients(slope)
    g = _interior(gmag)
    num = _interior(gx) * _interior(dgx) + _interior(gy) * _interior(dgy)
    dg = np.divide(num, g, out=np.zeros_like(g), where=g > 0)
    return g, dg


def metric_with_derivative(intensity: np.ndarray, slope: np.ndarray,
                           params: MetricParams, saturated: np.ndarray) -> MetricReport:
    """Metric and frozen-order derivative from intensity and intensity-slope maps"""
    g, dg = gradient_derivative(intensity, slope)
    order = np.argsort(g, kind="stable")
    w = weights(g.size, params.p, params.k)
    return MetricReport(
        m=float(w @ g[order]),
        dm_ddt=float(w @ dg[order]),
        s=int(g.size),
        saturated_frac=float(np.mean(saturated)),
    )


def dm_ddt(frame: Frame, roi: Optional[Rect], dt: float, params: MetricParams,
           irradiance_source: Union[IrradianceSource, str] = IrradianceSource.INVERSE_CRF,
           irradiance: Optional[np.ndarray] = None,
           dt_range: Optional[tuple] = None) -> MetricReport:
    """
    Metric report with the derivative of the metric w.r.t. exposure time.

    Args:
        frame: captured frame
        roi: region (None = full frame)
        dt: exposure of the frame (ms)
        params: metric parameters
        irradiance_source: inverse_crf estimates E from the frame; ground_truth
            uses `irradiance` (full-frame field, saturation-units per ms)
        irradiance: ground-truth field, required for ground_truth mode
        dt_range: optional (dt_min, dt_max) bounds to validate dt against
    """
    if dt <= 0 or (dt_range is not None and not dt_range[0] <= dt <= dt_range[1]):
        raise ExposureRangeError(f"Exposure {dt} ms outside the camera range")
    source = IrradianceSource(irradiance_source)
    image = frame.image if isinstance(frame, Frame) else np.asarray(frame)
    block = _region(image, roi).astype(np.float64)
    saturated = block >= FULL_SCALE

    if source is IrradianceSource.GROUND_TRUTH:
        if irradiance is None:
            raise ValueError("ground_truth mode needs the scene irradiance field")
        e = _region(np.asarray(irradiance, dtype=np.float64), roi)
        x_hat = e * dt
        saturated = x_hat >= 1.0
    else:
        x_hat = crf_inverse(params.crf, block)
        e = x_hat / dt

    slope = crf_derivative(params.crf, x_hat) * e
    slope[saturated] = 0.0
    return metric_with_derivative(block, slope, params, saturated)


def finite_difference(intensity_at, dt: float, params: MetricParams, rel_step: float = 0.01,
                      roi: Optional[Rect] = None) -> float:
    """
    Central difference of the metric with the sort order frozen at dt.

    Args:
        intensity_at: callable dt -> full-frame pre-quantization intensity (DN)
        dt: exposure (ms)
        params: metric parameters
        rel_step: h as a fraction of dt
        roi: region (None = full frame)
    """
    h = rel_step * dt
    base = _region(intensity_at(dt), roi)
    _, _, gmag, order = sorted_gradients(base)
    w = weights(order.size, params.p, params.k)

    def frozen(values: np.ndarray) -> float:
        _, _, g, _ = sorted_gradients(_region(values, roi))
        return float(w @ _interior(g)[order])

    return (frozen(intensity_at(dt + h)) - frozen(intensity_at(dt - h))) / (2.0 * h)
