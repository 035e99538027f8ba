"""
Shared fixtures for the benchmark tests
"""
import os
import sys

import pytest

sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from src.camera.camera_sim import CameraModel  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: multi-hundred-frame closed-loop checks")


@pytest.fixture
def small_cam():
    """320x240 camera with the default noise model"""
    return CameraModel(width=320, height=240)


@pytest.fixture
def quiet_cam(small_cam):
    """320x240 camera with noise switched off"""
    return small_cam.noiseless
