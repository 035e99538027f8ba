"""
Camera motion over a run: static, lateral cart motion, or free-floating jitter
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Tuple, Union

import numpy as np

from src.camera.geometry import Pose
from src.exceptions import TrajectoryError

OU_THETA = 2.0
OU_STEP = 0.01


class TrajectoryKind(Enum):
    """Supported camera motions"""
    STATIC = "static"
    LATERAL = "lateral"
    JITTER = "jitter"


@dataclass(frozen=True)
class Trajectory:
    """
    Camera motion specification.

    Lateral motion translates the camera along its x-axis at `speed` (m/s), starting
    at `start_offset`. Jitter adds Ornstein-Uhlenbeck offsets whose stationary
    standard deviation per axis is `amplitude`.
    """
    kind: TrajectoryKind = TrajectoryKind.STATIC
    speed: float = 0.0
    start_offset: float = 0.0
    amplitude: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    duration: float = 60.0
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.kind, str):
            object.__setattr__(self, "kind", parse_trajectory_kind(self.kind))
        object.__setattr__(self, "amplitude", tuple(float(a) for a in self.amplitude))
        if len(self.amplitude) != 3 or any(a < 0 for a in self.amplitude):
            raise TrajectoryError("Jitter amplitude must be three non-negative values")
        if self.duration <= 0:
            raise TrajectoryError(f"Trajectory duration must be positive, got {self.duration}")


def parse_trajectory_kind(label: Union[str, TrajectoryKind]) -> TrajectoryKind:
    if isinstance(label, TrajectoryKind):
        return label
    try:
        return TrajectoryKind(str(label).strip().lower())
    except ValueError:
        valid = ", ".join(k.value for k in TrajectoryKind)
        raise TrajectoryError(f"Unknown trajectory kind '{label}'. Valid options: {valid}") from None


@lru_cache(maxsize=32)
def _ou_samples(seed: int, amplitude: Tuple[float, float, float], duration: float) -> np.ndarray:
    """Exact OU discretization on a fixed grid, started at 0"""
    n = int(math.ceil(duration / OU_STEP)) + 2
    rng = np.random.default_rng(seed)
    decay = math.exp(-OU_THETA * OU_STEP)
    spread = np.asarray(amplitude) * math.sqrt(1.0 - decay ** 2)
    samples = np.zeros((n, 3))
    for i in range(1, n):
        samples[i] = decay * samples[i - 1] + spread * rng.standard_normal(3)
    samples.setflags(write=False)
    return samples


def pose_at(traj: Trajectory, t: float) -> Pose:
    """
    Camera pose in the world at time t (seconds).

    Raises:
        TrajectoryError: t outside [0, duration]
    """
    if not 0.0 <= t <= traj.duration:
        raise TrajectoryError(f"t={t} s outside trajectory duration [0, {traj.duration}] s")

    if traj.kind is TrajectoryKind.STATIC:
        return Pose()
    if traj.kind is TrajectoryKind.LATERAL:
        return Pose(t=np.array([traj.start_offset + traj.speed * t, 0.0, 0.0]))

    samples = _ou_samples(traj.seed, traj.amplitude, traj.duration)
    pos = t / OU_STEP
    i = min(int(pos), len(samples) - 2)
    frac = pos - i
    offset = (1.0 - frac) * samples[i] + frac * samples[i + 1]
    return Pose(t=offset)
