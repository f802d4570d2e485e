import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wavefuse.dmae import DEFAULT_MASK_RATIO, PatchMask, dmae_loss, mask_count, mask_patches
from wavefuse.errors import InputError, ShapeError
from wavefuse.numeric import philox


def image(h=64, w=64, seed=0):
    return philox(seed).uniform(0, 255, (h, w, 3))


class TestMask:
    def test_default_ratio(self):
        assert DEFAULT_MASK_RATIO == 0.75

    def test_sixteen_patches(self):
        _, m = mask_patches(image(), 16, 0.75, seed=3)
        assert m.grid == (4, 4)
        assert m.count == 12

    def test_ratio_zero(self):
        img = image()
        out, m = mask_patches(img, 16, 0.0)
        assert m.count == 0
        np.testing.assert_array_equal(out, img)

    def test_ratio_one(self):
        out, m = mask_patches(image(), 8, 1.0)
        assert m.count == 64
        np.testing.assert_array_equal(out, 0.0)

    def test_deterministic(self):
        _, a = mask_patches(image(), 8, seed=5)
        _, b = mask_patches(image(seed=1), 8, seed=5)
        np.testing.assert_array_equal(a.masked, b.masked)
        _, c = mask_patches(image(), 8, seed=6)
        assert not np.array_equal(a.masked, c.masked)

    def test_masked_pixels_zeroed(self):
        img = image(seed=2) + 1.0
        out, m = mask_patches(img, 16, seed=1)
        pm = m.pixel_mask()
        np.testing.assert_array_equal(out[pm], 0.0)
        np.testing.assert_array_equal(out[~pm], img[~pm])

    def test_errors(self):
        with pytest.raises(ShapeError):
            mask_patches(image(60, 64), 16)
        with pytest.raises(InputError):
            mask_patches(image(), 16, 1.5)

    @given(st.integers(1, 12), st.integers(1, 12), st.floats(0, 1), st.integers(0, 1000))
    def test_exact_count(self, gh, gw, ratio, seed):
        _, m = mask_patches(np.zeros((gh * 4, gw * 4, 3)), 4, ratio, seed)
        n = gh * gw
        assert m.count == mask_count(n, ratio)
        assert abs(m.count - ratio * n) <= 0.5

    def test_half_up_rounding(self):
        assert mask_count(2, 0.75) == 2  # 1.5 rounds up
        assert mask_count(10, 0.25) == 3  # 2.5 rounds up


class TestLoss:
    def test_exact_prediction(self):
        img = image()
        _, m = mask_patches(img, 16)
        assert dmae_loss(img, img, m) == 0.0

    def test_empty_mask(self):
        m = PatchMask(16, np.zeros((4, 4), dtype=bool))
        assert dmae_loss(image(seed=1), image(seed=2), m) == 0.0

    def test_one_patch_plus_two(self):
        masked = np.zeros((4, 4), dtype=bool)
        masked[1, 2] = True
        clean = image()
        assert dmae_loss(clean + 2.0, clean, PatchMask(16, masked)) == pytest.approx(4.0, abs=1e-9)

    def test_unmasked_independence(self):
        clean = image(seed=3)
        _, m = mask_patches(clean, 16, seed=4)
        pred = clean + philox(5).normal(size=clean.shape)
        other = pred.copy()
        other[~m.pixel_mask()] = philox(6).normal(size=other[~m.pixel_mask()].shape) * 1e3
        assert dmae_loss(pred, clean, m) == dmae_loss(other, clean, m)

    def test_zero_iff_match(self):
        clean = image(seed=7)
        _, m = mask_patches(clean, 16, seed=8)
        pred = clean.copy()
        r, c = np.argwhere(m.pixel_mask())[0]
        pred[r, c, 1] += 1e-6
        assert dmae_loss(pred, clean, m) > 0.0

    def test_shape_mismatch(self):
        _, m = mask_patches(image(), 16)
        with pytest.raises(ShapeError):
            dmae_loss(image(), image(32, 64), m)
