"""
Experiment configuration: INI file sections validated by pydantic models
"""
import configparser
import logging
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from config.settings import get_settings
from src.camera.camera_sim import CRF, CameraModel
from src.camera.geometry import Pose, rotation_from_euler
from src.camera.scenarios import parse_scenario
from src.camera.trajectory import Trajectory, parse_trajectory_kind
from src.exceptions import ConfigError
from src.exposure.controllers import ControllerParams, parse_controller
from src.marker.render import DEFAULT_PATTERN, MarkerSpec

logger = logging.getLogger(__name__)


def _split(value: Union[str, List]) -> List[str]:
    if isinstance(value, str):
        return [v.strip() for v in value.split(",") if v.strip()]
    return [str(v).strip() for v in value]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ExperimentSection(_Section):
    scenarios: List[str] = Field(default_factory=lambda: get_settings().scenario_list)
    controllers: List[str] = Field(default_factory=lambda: get_settings().controller_list)
    seeds: List[int] = Field(default_factory=lambda: get_settings().seed_list)
    frames: int = Field(default_factory=lambda: get_settings().default_frames, ge=10)
    output_dir: str = Field(default_factory=lambda: get_settings().output_dir)
    noise: bool = True
    dump_frames: bool = False
    jobs: int = Field(default_factory=lambda: get_settings().jobs, ge=1)

    @field_validator("scenarios", mode="before")
    @classmethod
    def _scenarios(cls, v):
        labels = _split(v)
        for label in labels:
            parse_scenario(label)
        return labels

    @field_validator("controllers", mode="before")
    @classmethod
    def _controllers(cls, v):
        labels = _split(v)
        for label in labels:
            parse_controller(label)
        return labels

    @field_validator("seeds", mode="before")
    @classmethod
    def _seeds(cls, v):
        return [int(s) for s in _split(v)] if isinstance(v, (str, list, tuple)) else v


class CameraSection(_Section):
    width: int = Field(default=640, ge=8)
    height: int = Field(default=480, ge=8)
    crf: str = "linear"
    crf_gamma: float = Field(default=1.0, gt=0.0)
    dt_min: float = Field(default=0.01, gt=0.0)
    dt_max: float = Field(default=50.0, gt=0.0)
    read_noise_sigma: float = Field(default=2.0, ge=0.0)
    shot_noise_scale: float = Field(default=0.5, ge=0.0)
    fps: float = Field(default=20.0, gt=0.0)


class MetricSection(_Section):
    p: float = Field(default=0.75, gt=0.0, lt=1.0)
    k: float = Field(default=5.0, ge=1.0)


class ControllerSection(_Section):
    gamma_m: float = Field(default=0.9, ge=0.0, lt=1.0)
    eta: float = Field(default=0.02, gt=0.0)
    threshold: float = Field(default=1e-4, ge=0.0)
    hold_frames: int = Field(default=10, ge=0)
    escape_saturated_frac: float = Field(default=0.9, gt=0.0, le=1.0)
    momentum_restart: bool = True
    reacquire_scan: bool = True
    scan_factor: float = Field(default=0.5, gt=0.0, lt=1.0)
    roi_padding: float = Field(default=0.10, ge=0.0)
    initial_dt: float = Field(default=1.0, gt=0.0)
    gec_kappa: float = Field(default=0.5, gt=0.0)
    target_mean: float = Field(default=118.0, gt=0.0, lt=255.0)
    ae_damping: float = Field(default=0.7, gt=0.0, le=1.0)


class TrajectorySection(_Section):
    kind: str = "static"
    speed: float = 0.004
    start_offset: float = -0.12
    amplitude: Tuple[float, float, float] = (0.01, 0.01, 0.005)

    @field_validator("kind")
    @classmethod
    def _kind(cls, v):
        return parse_trajectory_kind(v).value

    @field_validator("amplitude", mode="before")
    @classmethod
    def _amplitude(cls, v):
        return tuple(float(a) for a in _split(v)) if isinstance(v, str) else v


class MarkerSection(_Section):
    side: float = Field(default=0.15, gt=0.0)
    depth: float = Field(default=0.6, gt=0.0)
    yaw_deg: float = 0.0
    pattern: Tuple[str, ...] = DEFAULT_PATTERN
    rho_black: float = Field(default=0.08, ge=0.0, le=1.0)
    rho_white: float = Field(default=0.90, ge=0.0, le=1.0)

    @field_validator("pattern", mode="before")
    @classmethod
    def _pattern(cls, v):
        return tuple(_split(v)) if isinstance(v, str) else v


class ExperimentConfig(_Section):
    """A full experiment: what to run and every simulator and controller knob"""
    experiment: ExperimentSection = Field(default_factory=ExperimentSection)
    camera: CameraSection = Field(default_factory=CameraSection)
    metric: MetricSection = Field(default_factory=MetricSection)
    controller: ControllerSection = Field(default_factory=ControllerSection)
    trajectory: TrajectorySection = Field(default_factory=TrajectorySection)
    marker: MarkerSection = Field(default_factory=MarkerSection)

    def camera_model(self) -> CameraModel:
        c = self.camera
        cam = CameraModel(
            width=c.width, height=c.height, crf=CRF(c.crf, c.crf_gamma),
            dt_min=c.dt_min, dt_max=c.dt_max, read_noise_sigma=c.read_noise_sigma,
            shot_noise_scale=c.shot_noise_scale, fps=c.fps,
        )
        return cam if self.experiment.noise else cam.noiseless

    def controller_params(self) -> ControllerParams:
        return ControllerParams(p=self.metric.p, k=self.metric.k, **self.controller.model_dump())

    def marker_spec(self) -> MarkerSpec:
        m = self.marker
        return MarkerSpec(side=m.side, pattern=m.pattern, rho_black=m.rho_black,
                          rho_white=m.rho_white)

    def marker_pose(self) -> Pose:
        # yaw turns the marker about the camera's vertical (y) axis
        yaw = np.deg2rad(self.marker.yaw_deg)
        return Pose(rotation_from_euler(0.0, yaw, 0.0), np.array([0.0, 0.0, self.marker.depth]))

    def trajectory_for(self, seed: int) -> Trajectory:
        t = self.trajectory
        return Trajectory(kind=t.kind, speed=t.speed, start_offset=t.start_offset,
                          amplitude=t.amplitude,
                          duration=self.experiment.frames / self.camera.fps, seed=seed)


def load_experiment_config(path: Optional[Union[str, Path]] = None,
                           overrides: Optional[Dict[str, Dict[str, object]]] = None) -> ExperimentConfig:
    """
    Read an INI experiment file and apply overrides.

    Args:
        path: INI file; None starts from defaults
        overrides: {section: {key: value}} applied on top of the file (CLI flags)
    Raises:
        ConfigError: unreadable file, unknown section or key, invalid value
    """
    sections: Dict[str, Dict[str, object]] = {}
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        try:
            with open(path, "r", encoding="utf-8") as handle:
                parser.read_file(handle)
        except configparser.Error as e:
            raise ConfigError(f"{path}: {e}") from None
        except FileNotFoundError:
            raise ConfigError(f"Config file not found: {path}") from None
        for name in parser.sections():
            sections[name] = dict(parser.items(name))

    for name, values in (overrides or {}).items():
        sections.setdefault(name, {}).update({k: v for k, v in values.items() if v is not None})

    try:
        config = ExperimentConfig(**sections)
    except ValidationError as e:
        raise ConfigError(f"Invalid experiment config: {e}") from None
    if config.camera.dt_min >= config.camera.dt_max:
        raise ConfigError("camera.dt_min must be below camera.dt_max")
    if not (config.experiment.scenarios and config.experiment.controllers and config.experiment.seeds):
        raise ConfigError("Need at least one scenario, one controller and one seed")
    logger.debug("Loaded experiment config from %s", path or "defaults")
    return config
