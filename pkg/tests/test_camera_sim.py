"""
Unit tests for the photometric camera, lighting scenarios and trajectories
"""
import pytest
import sys
import os

import numpy as np

# Add repo root to path for imports
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from src.camera.camera_sim import (
    CRF,
    CRFKind,
    CameraModel,
    capture,
    crf_apply,
    crf_derivative,
    crf_inverse,
    expose,
)
from src.camera.geometry import Pose, marker_relative_to_camera
from src.camera.scenarios import SCENARIO_LIGHTING, Scenario, background_texture, make_scenario
from src.camera.trajectory import Trajectory, TrajectoryKind, pose_at
from src.exceptions import ExposureRangeError, ScenarioError, TrajectoryError
from src.experiments.runner import exposure_sweep, sweep_optimum
from src.imaging.imgproc import sobel_gradients
from src.marker.render import marker_mask


class UniformScene:
    """Irradiance field with the same value everywhere"""

    def __init__(self, value, shape=(24, 32)):
        self.field = np.full(shape, float(value))

    def irradiance_at(self, pose=None):
        return self.field


class TestCRF:
    """Test cases for camera response functions"""

    def setup_method(self):
        """Setup test environment"""
        self.linear = CRF()
        self.gamma = CRF(CRFKind.GAMMA, 2.0)

    def test_linear_midpoint(self):
        assert crf_apply(self.linear, 0.5) == pytest.approx(127.5)

    def test_saturation(self):
        """Every kind clamps at full scale"""
        for crf in (self.linear, self.gamma):
            assert crf_apply(crf, 1.0) == pytest.approx(255.0)
            assert crf_apply(crf, 2.0) == pytest.approx(255.0)

    def test_gamma_square_root(self):
        assert crf_apply(self.gamma, 0.25) == pytest.approx(127.5)

    def test_derivative_values(self):
        assert crf_derivative(self.linear, 0.5) == pytest.approx(255.0)
        assert crf_derivative(self.gamma, 0.25) == pytest.approx(255.0)
        assert crf_derivative(self.linear, 1.5) == 0.0
        assert crf_derivative(self.gamma, 1.5) == 0.0
        assert crf_derivative(self.gamma, 0.0) == 0.0

    def test_derivative_matches_finite_difference(self):
        """Analytic slope agrees with a central difference on (0.01, 0.99)"""
        xs = np.linspace(0.011, 0.989, 60)
        h = 1e-6
        for crf in (self.linear, self.gamma, CRF(CRFKind.GAMMA, 2.2)):
            fd = (crf_apply(crf, xs + h) - crf_apply(crf, xs - h)) / (2 * h)
            assert np.allclose(crf_derivative(crf, xs), fd, rtol=1e-5)

    def test_inverse(self):
        """Inverse recovers the exposure below saturation"""
        xs = np.linspace(0.0, 0.99, 25)
        for crf in (self.linear, self.gamma):
            assert np.allclose(crf_inverse(crf, crf_apply(crf, xs)), xs)

    def test_monotone(self):
        xs = np.linspace(0.0, 2.0, 200)
        for crf in (self.linear, self.gamma):
            assert np.all(np.diff(crf_apply(crf, xs)) >= 0)

    def test_invalid_gamma(self):
        with pytest.raises(ValueError):
            CRF(CRFKind.GAMMA, 0.0)


class TestCapture:
    """Test cases for frame capture"""

    def setup_method(self):
        """Setup test environment"""
        self.cam = CameraModel(width=32, height=24)

    def test_uniform_noiseless(self):
        """E=0.5/ms for 1 ms rounds 127.5 to 128"""
        frame = capture(UniformScene(0.5), self.cam.noiseless, 1.0)
        assert frame.image.dtype == np.uint8
        assert np.all(frame.image == 128)
        assert frame.dt == 1.0

    def test_full_saturation_kills_gradients(self):
        frame = capture(UniformScene(0.5), self.cam.noiseless, 4.0)
        assert np.all(frame.image == 255)
        assert np.all(sobel_gradients(frame.image)[2] == 0)

    def test_deterministic_with_seed(self):
        """Same seed, same frame"""
        a = capture(UniformScene(0.3), self.cam, 1.0, rng=np.random.default_rng(5))
        b = capture(UniformScene(0.3), self.cam, 1.0, rng=np.random.default_rng(5))
        assert np.array_equal(a.image, b.image)

    def test_noise_present(self):
        frame = capture(UniformScene(0.3), self.cam, 1.0, rng=np.random.default_rng(5))
        assert frame.image.std() > 0

    def test_exposure_out_of_range(self):
        with pytest.raises(ExposureRangeError):
            capture(UniformScene(0.5), self.cam, 60.0)
        with pytest.raises(ExposureRangeError):
            capture(UniformScene(0.5), self.cam, 0.001)

    def test_invalid_camera(self):
        with pytest.raises(ValueError):
            CameraModel(dt_min=5.0, dt_max=1.0)
        with pytest.raises(ValueError):
            CameraModel(read_noise_sigma=-1.0)


class TestScenarios:
    """Test cases for lighting scenarios"""

    def test_unknown_label(self, quiet_cam):
        with pytest.raises(ScenarioError) as exc:
            make_scenario("underwater", quiet_cam)
        assert "adversarial" in str(exc.value)

    def test_irradiance_non_negative(self, quiet_cam):
        for label in Scenario:
            scene = make_scenario(label, quiet_cam)
            assert scene.irradiance.shape == (quiet_cam.height, quiet_cam.width)
            assert np.all(scene.irradiance >= 0)

    def test_marker_inside_image(self, quiet_cam):
        scene = make_scenario("normal", quiet_cam)
        mask = marker_mask(scene.shape, scene.marker, scene.nominal_pose, scene.intrinsics)
        assert mask.any()
        assert not (mask[0, :].any() or mask[-1, :].any() or mask[:, 0].any() or mask[:, -1].any())

    def test_texture_uniform_spread(self):
        """Reflectance is uniform on [1 - a, 1 + a] with mean 1"""
        texture = background_texture(240, 320, amplitude=0.5)
        assert texture.min() >= 0.5 and texture.max() <= 1.5
        assert texture.mean() == pytest.approx(1.0, abs=1e-9)
        counts, _ = np.histogram(texture, bins=10, range=(0.5, 1.5))
        assert counts.max() - counts.min() <= 2

    def test_texture_varies_between_neighbours(self):
        texture = background_texture(240, 320, amplitude=0.5)
        assert np.median(np.abs(np.diff(texture, axis=1))) > 0.05

    def test_texture_amplitude_limit(self):
        with pytest.raises(ScenarioError):
            background_texture(16, 16, amplitude=1.0)
        assert np.all(background_texture(16, 16, amplitude=0.0) == 1.0)

    def test_lighting_sets_texture_spread(self, quiet_cam):
        lighting = SCENARIO_LIGHTING[Scenario.ADVERSARIAL]
        scene = make_scenario("adversarial", quiet_cam)
        spread = np.ptp(scene.background) / lighting.background
        assert spread == pytest.approx(2.0 * lighting.texture_amplitude, rel=1e-3)
        flat = make_scenario("adversarial", quiet_cam, texture_amplitude=0.0)
        assert np.all(flat.background == lighting.background)

    def test_adversarial_glare_on_marker(self, quiet_cam):
        """Marker pixels are far brighter than the background"""
        scene = make_scenario("adversarial", quiet_cam)
        mask = marker_mask(scene.shape, scene.marker, scene.nominal_pose, scene.intrinsics)
        lighting = SCENARIO_LIGHTING[Scenario.ADVERSARIAL]
        assert scene.irradiance[mask].max() > 0.5 * lighting.marker_light
        assert np.median(scene.irradiance[~mask]) < 2 * lighting.background

    def test_mean_intensity_monotone_in_exposure(self, quiet_cam):
        scene = make_scenario("normal", quiet_cam)
        means = [expose(scene.irradiance, quiet_cam, dt).mean()
                 for dt in np.geomspace(quiet_cam.dt_min, quiet_cam.dt_max, 30)]
        assert np.all(np.diff(means) >= 0)

    def test_strictly_increasing_below_saturation(self, quiet_cam):
        scene = make_scenario("lowlight", quiet_cam)
        e = scene.irradiance
        dts = np.array([0.5, 1.0, 2.0])
        assert np.all(e * dts[-1] < 1.0)
        stack = np.stack([expose(e, quiet_cam, dt) for dt in dts])
        lit = e > 0
        assert np.all(np.diff(stack, axis=0)[:, lit] > 0)


class TestScenarioSweeps:
    """Exposure sweeps that define the benchmark's oracles"""

    def setup_method(self):
        """Setup test environment"""
        self.cam = CameraModel(width=320, height=240).noiseless

    def _marker_saturation(self, table):
        return float(table.loc[table["is_argmax"] == 1, "marker_saturated_frac"].iloc[0])

    def test_adversarial_full_frame_optimum_saturates_marker(self):
        scene = make_scenario("adversarial", self.cam)
        table = exposure_sweep(scene, self.cam, "full", n_points=64)
        assert self._marker_saturation(table) >= 0.5
        assert table.loc[table["is_argmax"] == 1, "found"].iloc[0] == 0

    def test_adversarial_roi_optimum_keeps_marker(self):
        """RoI optimum sits well below the full-frame one and the marker stays detectable"""
        scene = make_scenario("adversarial", self.cam)
        full = exposure_sweep(scene, self.cam, "full", n_points=64)
        roi = exposure_sweep(scene, self.cam, "roi", n_points=64)
        assert sweep_optimum(roi) < 0.1 * sweep_optimum(full)
        assert self._marker_saturation(roi) < self._marker_saturation(full)
        assert roi.loc[roi["is_argmax"] == 1, "found"].iloc[0] == 1

    def test_normal_optima_agree(self):
        """Under benign light full-frame and RoI optima differ by less than 25%"""
        scene = make_scenario("normal", self.cam)
        full = sweep_optimum(exposure_sweep(scene, self.cam, "full", n_points=256, detect_markers=False))
        roi = sweep_optimum(exposure_sweep(scene, self.cam, "roi", n_points=256, detect_markers=False))
        assert abs(full - roi) < 0.25 * roi

    def test_adversarial_full_frame_climbs_to_longest_exposure(self):
        """The textured background keeps the full-frame metric rising while the marker saturates"""
        scene = make_scenario("adversarial", self.cam)
        table = exposure_sweep(scene, self.cam, "full", n_points=64, detect_markers=False)
        assert sweep_optimum(table) == pytest.approx(self.cam.dt_max)
        upper = table.loc[table["dt_ms"] >= 1.0, "m"].to_numpy()
        assert upper[-1] > 5.0 * upper[0]

    def test_sweep_shape(self):
        scene = make_scenario("lowlight", self.cam)
        table = exposure_sweep(scene, self.cam, "roi", n_points=16, detect_markers=False)
        assert len(table) == 16
        assert table["is_argmax"].sum() == 1
        assert np.all(np.diff(table["dt_ms"]) > 0)
        assert np.all(np.diff(table["mean_intensity"]) >= 0)

    def test_sweep_too_few_points(self):
        scene = make_scenario("lowlight", self.cam)
        with pytest.raises(ValueError):
            exposure_sweep(scene, self.cam, "full", n_points=4)


class TestTrajectory:
    """Test cases for camera motion"""

    def test_static_constant(self):
        traj = Trajectory(TrajectoryKind.STATIC, duration=10.0)
        assert pose_at(traj, 7.3) == pose_at(traj, 0.0)

    def test_lateral_linear(self):
        traj = Trajectory(TrajectoryKind.LATERAL, speed=0.05, duration=10.0)
        p = pose_at(traj, 2.0)
        assert p.t == pytest.approx([0.10, 0.0, 0.0])
        assert np.allclose(p.R, np.eye(3))

    def test_lateral_start_offset(self):
        traj = Trajectory("lateral", speed=0.004, start_offset=-0.12, duration=60.0)
        assert pose_at(traj, 0.0).t[0] == pytest.approx(-0.12)
        assert pose_at(traj, 60.0).t[0] == pytest.approx(0.12)

    def test_jitter_deterministic_and_continuous(self):
        a = Trajectory(TrajectoryKind.JITTER, amplitude=(0.01, 0.01, 0.005), duration=5.0, seed=4)
        b = Trajectory(TrajectoryKind.JITTER, amplitude=(0.01, 0.01, 0.005), duration=5.0, seed=4)
        assert pose_at(a, 1.234) == pose_at(b, 1.234)
        gap = np.linalg.norm(pose_at(a, 2.0).t - pose_at(a, 2.0 + 1e-6).t)
        assert gap < 1e-5

    def test_jitter_seed_changes_path(self):
        a = Trajectory(TrajectoryKind.JITTER, amplitude=(0.01, 0.01, 0.005), duration=5.0, seed=4)
        b = Trajectory(TrajectoryKind.JITTER, amplitude=(0.01, 0.01, 0.005), duration=5.0, seed=5)
        assert pose_at(a, 3.0) != pose_at(b, 3.0)

    def test_out_of_range(self):
        traj = Trajectory(TrajectoryKind.STATIC, duration=1.0)
        with pytest.raises(TrajectoryError):
            pose_at(traj, 1.5)
        with pytest.raises(TrajectoryError):
            pose_at(traj, -0.1)

    def test_unknown_kind(self):
        with pytest.raises(TrajectoryError):
            Trajectory("orbit")

    def test_camera_motion_moves_marker_opposite(self):
        """Camera moving +x sees the marker move -x"""
        marker = Pose(t=np.array([0.0, 0.0, 0.6]))
        traj = Trajectory(TrajectoryKind.LATERAL, speed=0.05, duration=10.0)
        rel = marker_relative_to_camera(marker, pose_at(traj, 2.0))
        assert rel.t == pytest.approx([-0.10, 0.0, 0.6])


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
