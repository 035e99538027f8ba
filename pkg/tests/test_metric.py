"""
Unit tests for the percentile-weighted gradient metric and its exposure derivative
"""
import pytest
import sys
import os

import numpy as np
from scipy.signal import convolve2d

# Add repo root to path for imports
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from src.camera.camera_sim import CRF, CRFKind, CameraModel, Frame, capture, crf_apply
from src.camera.scenarios import make_scenario
from src.exceptions import ExposureRangeError, RegionError
from src.exposure.metric import (
    IrradianceSource,
    MetricParams,
    dm_ddt,
    finite_difference,
    m_softperc,
    m_softperc_values,
    weights,
)
from src.imaging.imgproc import Rect


def brute_force_metric(img, p, k):
    """Independent reimplementation: valid-mode convolution, plain sort, explicit weight loop"""
    kx = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
    gx = convolve2d(img, kx[::-1, ::-1], mode="valid")
    gy = convolve2d(img, kx.T[::-1, ::-1], mode="valid")
    g = np.sort(np.sqrt(gx ** 2 + gy ** 2).ravel())
    S = g.size
    m = int(np.floor(p * S))
    w = []
    for i in range(S):
        if i <= m:
            w.append(np.sin(np.pi * i / (2 * m)) ** k)
        else:
            w.append(np.sin(np.pi / 2 - np.pi * (i - m) / (2 * (S - m))) ** k)
    w = np.array(w)
    return float(np.sum(w / w.sum() * g))


class TestWeights:
    """Test cases for the percentile weight curve"""

    @pytest.mark.parametrize("S", [10, 100, 4096])
    @pytest.mark.parametrize("p", [0.6, 0.75, 0.9])
    @pytest.mark.parametrize("k", [1, 5])
    def test_shape(self, S, p, k):
        """Normalized, zero at the start, unimodal with its peak at floor(p*S)"""
        w = weights(S, p, k)
        peak = int(np.floor(p * S))
        assert w.sum() == pytest.approx(1.0, abs=1e-12)
        assert w[0] == 0.0
        assert np.all(w >= 0)
        assert int(np.argmax(w)) == peak
        assert np.all(np.diff(w[:peak + 1]) >= 0)
        assert np.all(np.diff(w[peak:]) <= 0)

    def test_tail_decays(self):
        w = weights(1000, 0.75, 5)
        assert w[-1] < 1e-6 * w.max()

    def test_hand_evaluated_vector(self):
        """S=10, p=0.5, k=1"""
        s = np.sin
        raw = np.array([0, s(np.pi / 10), s(2 * np.pi / 10), s(3 * np.pi / 10), s(4 * np.pi / 10), 1,
                        s(2 * np.pi / 5), s(3 * np.pi / 10), s(np.pi / 5), s(np.pi / 10)])
        assert np.allclose(weights(10, 0.5, 1), raw / raw.sum())

    def test_too_few_pixels(self):
        with pytest.raises(RegionError):
            weights(1, 0.75, 5)

    def test_percentile_below_first_rank(self):
        """p*S < 1 would put the peak on W_0, which must stay zero"""
        with pytest.raises(RegionError, match="first rank"):
            weights(4, 0.2, 5)
        assert int(np.argmax(weights(5, 0.2, 5))) == 1

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            MetricParams(p=1.0)
        with pytest.raises(ValueError):
            MetricParams(k=0.5)


class TestMetric:
    """Test cases for M_softperc"""

    def setup_method(self):
        """Setup test environment"""
        self.params = MetricParams()
        self.rng = np.random.default_rng(17)

    def test_constant_frame(self):
        frame = Frame(np.full((32, 32), 90, dtype=np.uint8), 1.0)
        assert m_softperc(frame, None, self.params) == 0.0

    def test_scaling(self):
        img = self.rng.uniform(0, 100, size=(32, 32))
        assert m_softperc_values(2.5 * img, self.params) == pytest.approx(2.5 * m_softperc_values(img, self.params))

    def test_matches_brute_force(self):
        """20 random frames against the independent implementation"""
        for _ in range(20):
            img = self.rng.integers(0, 256, size=(32, 32)).astype(np.uint8)
            expected = brute_force_metric(img.astype(np.float64), 0.75, 5)
            assert m_softperc(Frame(img, 1.0), None, self.params) == pytest.approx(expected, rel=1e-9)

    def test_step_edge_against_brute_force(self):
        img = np.zeros((32, 32))
        img[:, 13:] = 200.0
        expected = brute_force_metric(img, 0.75, 5)
        assert m_softperc_values(img, self.params) == pytest.approx(expected, rel=1e-9)

    def test_position_permutation_invariance(self):
        """Transposed and mirrored images share the gradient multiset"""
        img = self.rng.uniform(0, 255, size=(24, 24))
        base = m_softperc_values(img, self.params)
        assert m_softperc_values(img.T, self.params) == pytest.approx(base, rel=1e-12)
        assert m_softperc_values(img[:, ::-1], self.params) == pytest.approx(base, rel=1e-12)

    def test_roi(self):
        img = self.rng.integers(0, 256, size=(40, 50)).astype(np.uint8)
        roi = Rect(5, 6, 20, 15)
        expected = brute_force_metric(img[6:21, 5:25].astype(np.float64), 0.75, 5)
        assert m_softperc(Frame(img, 1.0), roi, self.params) == pytest.approx(expected, rel=1e-9)

    def test_roi_too_small(self):
        frame = Frame(np.zeros((32, 32), dtype=np.uint8), 1.0)
        with pytest.raises(RegionError):
            m_softperc(frame, Rect(0, 0, 3, 10), self.params)


class TestDerivative:
    """Test cases for dm/d(dt)"""

    def setup_method(self):
        """Setup test environment"""
        self.cam = CameraModel(width=320, height=240).noiseless

    def test_saturated_region_zero(self):
        frame = Frame(np.full((32, 32), 255, dtype=np.uint8), 2.0)
        report = dm_ddt(frame, None, 2.0, MetricParams())
        assert report.dm_ddt == 0.0
        assert report.saturated_frac == 1.0

    def test_linear_homogeneity(self):
        """Unsaturated linear frames give dm/ddt = m / dt"""
        scene = make_scenario("normal", self.cam)
        dt = 0.8
        frame = capture(scene, self.cam, dt)
        assert frame.image.max() < 255
        report = dm_ddt(frame, None, dt, MetricParams())
        assert report.dm_ddt == pytest.approx(report.m / dt, rel=1e-12)
        assert report.s == (self.cam.width - 2) * (self.cam.height - 2)
        assert report.saturated_frac == 0.0

    def test_gamma_homogeneity(self):
        """With a gamma response G grows as dt ** (1/gamma)"""
        crf = CRF(CRFKind.GAMMA, 2.0)
        scene = make_scenario("lowlight", self.cam)
        dt = 5.0
        intensity = crf_apply(crf, scene.irradiance * dt)
        report = dm_ddt(intensity, None, dt, MetricParams(crf=crf), IrradianceSource.GROUND_TRUTH,
                        irradiance=scene.irradiance)
        assert report.dm_ddt == pytest.approx(report.m / (2.0 * dt), rel=1e-9)

    @pytest.mark.parametrize("label,lo,hi", [
        ("normal", 0.05, 1.2),
        ("lowlight", 0.5, 20.0),
        ("adversarial", 0.05, 20.0),
    ])
    @pytest.mark.parametrize("crf", [CRF(), CRF(CRFKind.GAMMA, 2.2)], ids=["linear", "gamma"])
    def test_matches_finite_difference(self, label, lo, hi, crf):
        """Ground-truth derivative vs frozen-order central difference, h = 1% of dt"""
        scene = make_scenario(label, self.cam)
        e = scene.irradiance
        params = MetricParams(crf=crf)

        def intensity_at(dt):
            return crf_apply(crf, e * dt)

        checked = 0
        for dt in np.geomspace(lo, hi, 16):
            oracle = finite_difference(intensity_at, dt, params)
            if abs(oracle) <= 1e-6:
                continue
            report = dm_ddt(intensity_at(dt), None, dt, params, "ground_truth", irradiance=e)
            assert report.dm_ddt == pytest.approx(oracle, rel=0.02)
            checked += 1
        assert checked > 0

    def test_inverse_matches_ground_truth_unsaturated(self):
        """Without noise or saturation the two irradiance sources agree"""
        scene = make_scenario("lowlight", self.cam)
        dt = 4.0
        intensity = crf_apply(CRF(), scene.irradiance * dt)
        a = dm_ddt(intensity, None, dt, MetricParams(), "inverse_crf")
        b = dm_ddt(intensity, None, dt, MetricParams(), "ground_truth", irradiance=scene.irradiance)
        assert a.dm_ddt == pytest.approx(b.dm_ddt, rel=1e-9)

    def test_adversarial_roi_positive_when_dark(self):
        """Dark RoI (nearly all pixels under half-saturation) wants more exposure"""
        scene = make_scenario("adversarial", self.cam)
        roi = Rect(110, 70, 100, 100)
        dt = 0.02
        frame_values = crf_apply(CRF(), scene.irradiance * dt)
        assert np.mean(frame_values[70:170, 110:210] < 127.5) > 0.99
        report = dm_ddt(frame_values, roi, dt, MetricParams(), "ground_truth", irradiance=scene.irradiance)
        assert report.dm_ddt > 0

    def test_exposure_validation(self):
        frame = Frame(np.full((16, 16), 10, dtype=np.uint8), 1.0)
        with pytest.raises(ExposureRangeError):
            dm_ddt(frame, None, 0.0, MetricParams())
        with pytest.raises(ExposureRangeError):
            dm_ddt(frame, None, 80.0, MetricParams(), dt_range=(0.01, 50.0))

    def test_ground_truth_needs_field(self):
        frame = Frame(np.full((16, 16), 10, dtype=np.uint8), 1.0)
        with pytest.raises(ValueError):
            dm_ddt(frame, None, 1.0, MetricParams(), "ground_truth")


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
