"""
Unit tests for pixel primitives (Sobel, rectangles, cropping, PGM dumps)
"""
import pytest
import sys
import os

import numpy as np
from PIL import Image
from scipy.signal import convolve2d

# Add repo root to path for imports
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))

from src.exceptions import DimensionError, RegionError
from src.imaging.imgproc import (
    SOBEL_X,
    SOBEL_Y,
    Rect,
    bounding_rect,
    crop,
    inflate_and_clip,
    sobel_gradients,
    write_pgm,
)


class TestSobel:
    """Test cases for Sobel gradients"""

    def setup_method(self):
        """Setup test environment"""
        self.rng = np.random.default_rng(3)

    def test_constant_image_has_no_gradient(self):
        """Flat field gives an all-zero magnitude"""
        _, _, gmag = sobel_gradients(np.full((16, 20), 128.0))
        assert np.all(gmag == 0)

    def test_vertical_step_edge(self):
        """Unit step response peaks at 4 * step height on the two adjacent columns"""
        img = np.zeros((12, 12))
        img[:, 6:] = 255.0
        gx, gy, gmag = sobel_gradients(img)
        assert np.all(gy == 0)
        assert np.allclose(gmag[1:-1, 5], 1020.0)
        assert np.allclose(gmag[1:-1, 6], 1020.0)
        assert np.all(gmag[1:-1, :5] == 0)
        assert np.all(gmag[1:-1, 7:] == 0)

    def test_matches_direct_convolution(self):
        """Interior values equal a direct 2-D convolution with the flipped kernels"""
        img = self.rng.uniform(0, 255, size=(20, 24))
        gx, gy, _ = sobel_gradients(img)
        ref_x = convolve2d(img, SOBEL_X[::-1, ::-1], mode="valid")
        ref_y = convolve2d(img, SOBEL_Y[::-1, ::-1], mode="valid")
        assert np.allclose(gx[1:-1, 1:-1], ref_x)
        assert np.allclose(gy[1:-1, 1:-1], ref_y)

    def test_border_is_zero(self):
        """Border pixels are zero in every output"""
        img = self.rng.uniform(0, 255, size=(10, 10))
        for g in sobel_gradients(img):
            assert np.all(g[0, :] == 0) and np.all(g[-1, :] == 0)
            assert np.all(g[:, 0] == 0) and np.all(g[:, -1] == 0)

    def test_transpose_symmetry(self):
        """Transposing the image swaps gx and gy"""
        img = np.tril(np.full((15, 15), 200.0))
        gx, gy, gmag = sobel_gradients(img)
        tx, ty, tmag = sobel_gradients(img.T)
        assert np.allclose(tx, gy.T)
        assert np.allclose(ty, gx.T)
        assert np.allclose(tmag, gmag.T)

    def test_linearity_of_components(self):
        """gx and gy are linear in the image"""
        a = self.rng.uniform(0, 255, size=(12, 14))
        b = self.rng.uniform(0, 255, size=(12, 14))
        gxa, gya, _ = sobel_gradients(a)
        gxb, gyb, _ = sobel_gradients(b)
        gxc, gyc, _ = sobel_gradients(2.0 * a - 0.5 * b)
        assert np.allclose(gxc, 2.0 * gxa - 0.5 * gxb)
        assert np.allclose(gyc, 2.0 * gya - 0.5 * gyb)

    def test_too_small(self):
        """Images under 3x3 are rejected"""
        with pytest.raises(DimensionError):
            sobel_gradients(np.zeros((2, 5)))


class TestRects:
    """Test cases for crop and RoI arithmetic"""

    def setup_method(self):
        """Setup test environment"""
        self.img = np.arange(20 * 30, dtype=np.float64).reshape(20, 30)
        self.bounds = Rect.full(self.img)

    def test_full_crop_is_identity(self):
        """Full-image crop is an equal copy"""
        out = crop(self.img, self.bounds)
        assert np.array_equal(out, self.img)
        assert out is not self.img

    def test_single_pixel_crop(self):
        """1x1 crop returns that pixel"""
        assert crop(self.img, Rect(7, 4, 1, 1))[0, 0] == self.img[4, 7]

    def test_crop_composition(self):
        """Cropping twice equals one crop of the composed rect"""
        outer = crop(self.img, Rect(5, 3, 20, 12))
        inner = crop(outer, Rect(2, 1, 6, 4))
        assert np.array_equal(inner, crop(self.img, Rect(7, 4, 6, 4)))

    def test_crop_out_of_bounds(self):
        """Rects reaching past the image are rejected"""
        with pytest.raises(RegionError):
            crop(self.img, Rect(25, 0, 10, 5))
        with pytest.raises(RegionError):
            crop(self.img, Rect(-1, 0, 3, 3))

    def test_inflate_ten_percent(self):
        """10% padding per side of a 50x40 box"""
        out = inflate_and_clip(Rect(100, 100, 50, 40), 0.10, 0.10, Rect(0, 0, 640, 480))
        assert out.as_tuple() == (95, 96, 60, 48)

    def test_inflate_rounds_half_up(self):
        """Half-pixel padding rounds away from zero, not to even"""
        out = inflate_and_clip(Rect(100, 100, 5, 9), 0.5, 0.5, Rect(0, 0, 640, 480))
        assert out.as_tuple() == (97, 95, 11, 19)

    def test_inflate_zero(self):
        """No padding leaves the rect unchanged"""
        r = Rect(3, 4, 5, 6)
        assert inflate_and_clip(r, 0.0, 0.0, self.bounds) == r

    def test_inflate_clips_to_bounds(self):
        """Inflation at the image edge never leaves the image"""
        r = Rect(0, 15, 12, 5)
        out = inflate_and_clip(r, 0.10, 0.10, self.bounds)
        assert self.bounds.contains(out)
        assert out.contains(r)

    def test_inflate_contains_clipped_original(self):
        """Result always holds the original for random rects"""
        rng = np.random.default_rng(11)
        for _ in range(50):
            x0, y0 = int(rng.integers(0, 25)), int(rng.integers(0, 15))
            r = Rect(x0, y0, int(rng.integers(1, 30 - x0 + 1)), int(rng.integers(1, 20 - y0 + 1)))
            out = inflate_and_clip(r, float(rng.uniform(0, 0.5)), float(rng.uniform(0, 0.5)), self.bounds)
            assert self.bounds.contains(out)
            assert out.contains(r)

    def test_negative_fraction(self):
        """Negative padding is rejected"""
        with pytest.raises(RegionError):
            inflate_and_clip(Rect(1, 1, 4, 4), -0.1, 0.0, self.bounds)

    def test_bounding_rect_rounds_outward(self):
        """Sub-pixel corners round outward"""
        r = bounding_rect(np.array([[10.4, 5.6], [20.2, 5.9], [20.7, 15.1], [10.9, 14.2]]))
        assert r.as_tuple() == (10, 5, 11, 11)


class TestPGM:
    """Test cases for debug dumps"""

    def test_uint8_roundtrip(self, tmp_path):
        """8-bit frames are written verbatim as P5"""
        img = (np.arange(64, dtype=np.uint8).reshape(8, 8) * 3).astype(np.uint8)
        path = write_pgm(tmp_path / "frame.pgm", img)
        assert path.read_bytes().startswith(b"P5")
        assert np.array_equal(np.asarray(Image.open(path)), img)

    def test_float_rescaled(self, tmp_path):
        """Float maps are stretched to the full 0-255 range"""
        img = np.linspace(-1.0, 3.0, 64).reshape(8, 8)
        data = np.asarray(Image.open(write_pgm(tmp_path / "map.pgm", img)))
        assert data.min() == 0 and data.max() == 255


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
