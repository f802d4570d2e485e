import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from wavefuse.errors import ShapeError
from wavefuse.numeric import (
    ConvKernel,
    LinearMap,
    TConvKernel,
    attention,
    conv2d,
    init_conv,
    matmul,
    maxpool2,
    nearest_up2,
    philox,
    pool_to_stride,
    resample,
    softmax_rows,
    tconv2,
)

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)


class TestMatmul:
    def test_identity(self):
        a = philox(1).normal(size=(3, 4))
        np.testing.assert_array_equal(matmul(np.eye(3), a), a)

    def test_hand_case(self):
        np.testing.assert_array_equal(matmul([[1, 2], [3, 4]], [[0], [1]]), [[2], [4]])

    def test_mismatch(self):
        with pytest.raises(ShapeError):
            matmul(np.zeros((2, 3)), np.zeros((4, 5)))

    def test_associative(self):
        rng = philox(2)
        for _ in range(50):
            a, b, c = rng.normal(size=(3, 4)), rng.normal(size=(4, 5)), rng.normal(size=(5, 2))
            np.testing.assert_allclose(matmul(matmul(a, b), c), matmul(a, matmul(b, c)), atol=1e-9)


class TestSoftmax:
    def test_symmetric(self):
        np.testing.assert_array_equal(softmax_rows([[0.0, 0.0]]), [[0.5, 0.5]])

    def test_no_overflow(self):
        out = softmax_rows([[1000.0, 1000.0]])
        np.testing.assert_array_equal(out, [[0.5, 0.5]])

    def test_closed_form(self):
        np.testing.assert_allclose(softmax_rows([[0.0, np.log(3.0)]]), [[0.25, 0.75]], atol=1e-12)

    def test_empty_row(self):
        with pytest.raises(ShapeError):
            softmax_rows(np.zeros((2, 0)))

    def test_fuzz_rows_sum_to_one(self):
        rng = philox(3)
        for _ in range(1000):
            r, c = rng.integers(1, 8, size=2)
            m = rng.normal(0, rng.uniform(0.1, 300), size=(r, c))
            s = softmax_rows(m)
            assert np.all(s >= 0)
            np.testing.assert_allclose(s.sum(axis=1), 1.0, atol=1e-9)

    @given(arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(1, 6)), elements=finite))
    def test_shift_invariant(self, m):
        np.testing.assert_allclose(softmax_rows(m), softmax_rows(m + 7.5), atol=1e-12)


class TestAttention:
    def test_single_kv_token_returns_v(self):
        rng = philox(4)
        v = rng.normal(size=(1, 5))
        out = attention(rng.normal(size=(3, 4)), rng.normal(size=(1, 4)), v)
        np.testing.assert_array_equal(out, np.repeat(v, 3, axis=0))

    def test_identical_keys_give_mean(self):
        rng = philox(5)
        k = np.tile(rng.normal(size=(1, 4)), (6, 1))
        v = rng.normal(size=(6, 3))
        out = attention(rng.normal(size=(2, 4)), k, v)
        np.testing.assert_allclose(out, np.tile(v.mean(axis=0), (2, 1)), atol=1e-12)

    def test_default_scale(self):
        q = np.array([[1.0, 0.0, 0.0, 0.0]])
        k = np.array([[2.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0]])
        _, w = attention(q, k, np.eye(2), return_weights=True)
        e = np.exp(2.0 / 2.0)  # q.k / sqrt(4)
        np.testing.assert_allclose(w, [[e / (e + 1), 1 / (e + 1)]], atol=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            attention(np.zeros((2, 3)), np.zeros((2, 4)), np.zeros((2, 1)))


class TestConv:
    def test_identity_1x1(self):
        x = philox(6).normal(size=(5, 7, 1))
        np.testing.assert_array_equal(conv2d(x, ConvKernel(np.ones((1, 1, 1, 1)))), x)

    def test_zero_input(self):
        k = init_conv(philox(7), 3, 4, 3)
        k = ConvKernel(k.weight, np.zeros(4), padding=1)
        np.testing.assert_array_equal(conv2d(np.zeros((6, 6, 3)), k), 0.0)

    def test_ones_sum(self):
        out = conv2d(np.ones((3, 3, 1)), ConvKernel(np.ones((1, 1, 3, 3))))
        np.testing.assert_array_equal(out, [[[9.0]]])

    def test_cross_correlation_no_flip(self):
        x = np.arange(9.0).reshape(3, 3, 1)
        w = np.zeros((1, 1, 3, 3))
        w[0, 0, 0, 0] = 1.0
        assert conv2d(x, ConvKernel(w))[0, 0, 0] == 0.0

    def test_matches_loop_oracle(self):
        rng = philox(8)
        x = rng.normal(size=(7, 9, 2))
        k = ConvKernel(rng.normal(size=(3, 2, 3, 3)), rng.normal(size=3), stride=2, padding=1)
        out = conv2d(x, k)
        xp = np.pad(x, ((1, 1), (1, 1), (0, 0)))
        ref = np.zeros(out.shape)
        for i in range(out.shape[0]):
            for j in range(out.shape[1]):
                patch = xp[2 * i:2 * i + 3, 2 * j:2 * j + 3]
                for o in range(3):
                    ref[i, j, o] = np.sum(patch.transpose(2, 0, 1) * k.weight[o]) + k.bias[o]
        np.testing.assert_allclose(out, ref, atol=1e-12)

    def test_non_integral(self):
        with pytest.raises(ShapeError):
            conv2d(np.zeros((4, 4, 1)), ConvKernel(np.ones((1, 1, 3, 3)), stride=2))

    def test_channel_mismatch(self):
        with pytest.raises(ShapeError):
            conv2d(np.zeros((4, 4, 2)), ConvKernel(np.ones((1, 1, 1, 1))))

    @settings(max_examples=50)
    @given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2**31))
    def test_linear(self, a, b, seed):
        rng = philox(seed)
        k = ConvKernel(rng.normal(size=(2, 3, 3, 3)), padding=1)
        x, y = rng.normal(size=(2, 5, 6, 3))
        np.testing.assert_allclose(conv2d(a * x + b * y, k), a * conv2d(x, k) + b * conv2d(y, k), atol=1e-9)


class TestResample:
    def test_maxpool(self):
        np.testing.assert_array_equal(maxpool2(np.array([[1.0, 2.0], [3.0, 4.0]])[..., None]), [[[4.0]]])

    def test_maxpool_odd(self):
        with pytest.raises(ShapeError):
            maxpool2(np.zeros((3, 4, 1)))

    def test_nearest(self):
        np.testing.assert_array_equal(nearest_up2(np.full((1, 1, 1), 5.0))[..., 0], [[5, 5], [5, 5]])

    def test_tconv_constant(self):
        k = TConvKernel(np.ones((1, 1, 2, 2)))
        out = tconv2(np.full((3, 4, 1), 2.5), k)
        assert out.shape == (6, 8, 1)
        np.testing.assert_array_equal(out, 2.5)

    def test_tconv_placement(self):
        w = np.arange(4.0).reshape(1, 1, 2, 2)
        out = tconv2(np.array([[[1.0], [10.0]]]), TConvKernel(w))[..., 0]
        np.testing.assert_array_equal(out, [[0, 1, 0, 10], [2, 3, 20, 30]])

    def test_resample_modes(self):
        x = philox(9).normal(size=(4, 6, 2))
        assert resample(x, "maxpool2").shape == (2, 3, 2)
        assert resample(x, "nearest_up2").shape == (8, 12, 2)
        assert resample(x, "tconv2", TConvKernel(np.ones((2, 3, 2, 2)))).shape == (8, 12, 3)
        with pytest.raises(ShapeError):
            resample(x, "tconv2")
        with pytest.raises(ValueError):
            resample(x, "bicubic")

    def test_pool_to_stride(self):
        assert pool_to_stride(np.zeros((16, 8, 1)), 4).shape == (4, 2, 1)
        with pytest.raises(ShapeError):
            pool_to_stride(np.zeros((16, 8, 1)), 3)


class TestParams:
    def test_linear_map_validation(self):
        with pytest.raises(ShapeError):
            LinearMap(np.zeros((2, 3)), np.zeros(3))
        with pytest.raises(ShapeError):
            LinearMap(np.zeros((2, 3)))(np.zeros(4))

    def test_philox_deterministic(self):
        np.testing.assert_array_equal(philox(1, 2).random(8), philox(1, 2).random(8))
        assert not np.array_equal(philox(1, 2).random(8), philox(2, 1).random(8))
