"""
Lighting scenarios: background irradiance, marker illumination and marker placement
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

import numpy as np
from scipy import ndimage, stats

from src.camera.camera_sim import CameraModel
from src.camera.geometry import Intrinsics, Pose, project
from src.exceptions import ScenarioError
from src.marker.render import MarkerSpec, projected_radius, render_marker

logger = logging.getLogger(__name__)

TEXTURE_SEED = 20240101
DEFAULT_MARKER_DEPTH = 0.6
TEXTURE_GRAIN = 0.002


class Scenario(Enum):
    """Lighting conditions of the benchmark"""
    NORMAL = "normal"
    LOWLIGHT = "lowlight"
    ADVERSARIAL = "adversarial"


@dataclass(frozen=True)
class Lighting:
    """Scenario constants (saturation-units per ms) and background reflectance spread"""
    background: float
    marker_light: float
    glare_sigma_factor: Optional[float] = None
    texture_amplitude: float = 0.4


SCENARIO_LIGHTING = {
    # brightest background patches match the white cells, so both regions saturate together
    Scenario.NORMAL: Lighting(background=0.30, marker_light=0.50, texture_amplitude=0.5),
    Scenario.LOWLIGHT: Lighting(background=0.02, marker_light=0.04, texture_amplitude=0.4),
    # glare spot peaks on the marker; sigma in units of the projected marker radius
    Scenario.ADVERSARIAL: Lighting(background=0.005, marker_light=5.0, glare_sigma_factor=1.2,
                                   texture_amplitude=0.8),
}


def background_texture(height: int, width: int, amplitude: float = 0.4,
                       seed: int = TEXTURE_SEED) -> np.ndarray:
    """
    Fine-grained reflectance field, uniformly distributed on [1 - amplitude, 1 + amplitude].

    White noise is blurred over about a pixel (TEXTURE_GRAIN of the longer side) and
    rank-transformed, so neighbouring pixels differ at every exposure and the mean
    stays at 1.
    """
    if amplitude >= 1.0:
        raise ScenarioError(f"Texture amplitude must stay below 1, got {amplitude}")
    if amplitude <= 0:
        return np.ones((height, width))
    rng = np.random.default_rng(seed)
    noise = ndimage.gaussian_filter(rng.standard_normal((height, width)),
                                    sigma=max(width, height) * TEXTURE_GRAIN, mode="reflect")
    uniform = (stats.rankdata(noise, method="ordinal").reshape(height, width) - 0.5) / noise.size
    return 1.0 + amplitude * (2.0 * uniform - 1.0)


@dataclass(eq=False)
class IrradianceScene:
    """
    Ground truth for simulation.

    `background` is the irradiance of everything but the marker; the marker is
    lit by `lighting.marker_light` (uniformly, or as a glare spot centered on it)
    and rendered per pose.
    """
    background: np.ndarray
    marker: MarkerSpec
    intrinsics: Intrinsics
    nominal_pose: Pose
    scenario: Scenario
    lighting: Lighting
    supersample: int = 4
    _cache_key: Optional[tuple] = field(default=None, init=False, repr=False)
    _cache_value: Optional[np.ndarray] = field(default=None, init=False, repr=False)

    @property
    def shape(self):
        return self.background.shape

    @property
    def irradiance(self) -> np.ndarray:
        """Field E(u, v) at the nominal pose"""
        return self.irradiance_at(None)

    def illumination_at(self, pose: Optional[Pose] = None) -> np.ndarray:
        """Light on the marker plane at each pixel"""
        pose = self.nominal_pose if pose is None else pose
        height, width = self.shape
        peak = self.lighting.marker_light
        if self.lighting.glare_sigma_factor is None:
            return np.full((height, width), peak)

        center = project(pose.t[None, :], self.intrinsics)[0]
        sigma = self.lighting.glare_sigma_factor * projected_radius(self.marker, pose, self.intrinsics)
        vv, uu = np.mgrid[0:height, 0:width]
        r2 = (uu - center[0]) ** 2 + (vv - center[1]) ** 2
        return peak * np.exp(-r2 / (2.0 * sigma ** 2))

    def irradiance_at(self, pose: Optional[Pose] = None) -> np.ndarray:
        """Field with the marker rendered at `pose` (marker in camera frame)"""
        pose = self.nominal_pose if pose is None else pose
        key = pose.key()
        if self._cache_key != key:
            field_ = render_marker(self.background, self.illumination_at(pose),
                                   self.marker, pose, self.intrinsics, self.supersample)
            field_.setflags(write=False)
            self._cache_key, self._cache_value = key, field_
        return self._cache_value


def parse_scenario(label: Union[str, Scenario]) -> Scenario:
    if isinstance(label, Scenario):
        return label
    try:
        return Scenario(str(label).strip().lower())
    except ValueError:
        valid = ", ".join(s.value for s in Scenario)
        raise ScenarioError(f"Unknown scenario '{label}'. Valid options: {valid}") from None


def make_scenario(label: Union[str, Scenario], cam: CameraModel,
                  marker: Optional[MarkerSpec] = None,
                  marker_pose: Optional[Pose] = None,
                  texture_amplitude: Optional[float] = None,
                  lighting: Optional[Lighting] = None,
                  supersample: int = 4) -> IrradianceScene:
    """
    Build one of the benchmark's lighting scenarios.

    Args:
        label: normal, lowlight or adversarial
        cam: camera (resolution drives intrinsics and field size)
        marker: marker definition, default MarkerSpec()
        marker_pose: nominal marker pose in the camera frame, default fronto-parallel at 0.6 m
        texture_amplitude: background reflectance variation, default from the lighting;
            0 gives a flat background
        lighting: override of the scenario constants
        supersample: marker anti-aliasing, s*s samples per pixel
    """
    scenario = parse_scenario(label)
    marker = marker or MarkerSpec()
    marker_pose = marker_pose or Pose(np.eye(3), np.array([0.0, 0.0, DEFAULT_MARKER_DEPTH]))
    lighting = lighting or SCENARIO_LIGHTING[scenario]
    intrinsics = Intrinsics.for_resolution(cam.width, cam.height)

    amplitude = lighting.texture_amplitude if texture_amplitude is None else texture_amplitude
    texture = background_texture(cam.height, cam.width, amplitude)
    background = lighting.background * texture
    logger.debug("Built %s scene %dx%d, marker at %s", scenario.value, cam.width, cam.height,
                 marker_pose.t)
    return IrradianceScene(
        background=background,
        marker=marker,
        intrinsics=intrinsics,
        nominal_pose=marker_pose,
        scenario=scenario,
        lighting=lighting,
        supersample=supersample,
    )
