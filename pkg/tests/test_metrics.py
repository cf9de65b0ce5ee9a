import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gibbsddrm.metrics import align_kernel, compute_metrics, kernel_error, mse, psnr


def test_psnr_examples():
    x = np.zeros(100)
    assert mse(x, x) == 0.0
    assert psnr(x, x) == math.inf
    assert psnr(x, np.full(100, 0.1)) == pytest.approx(20.0)
    assert psnr(x, np.full(100, 0.2), data_range=2.0) == pytest.approx(20.0)
    with pytest.raises(ValueError):
        psnr(x, x, data_range=0.0)
    with pytest.raises(ValueError):
        mse(np.zeros(3), np.zeros(4))


def test_infinite_psnr_sentinel():
    m = compute_metrics(np.ones(5), np.ones(5))
    assert m["psnr_db"] is None and m["psnr_infinite"] is True and m["mse"] == 0.0


def test_kernel_shift_by_one_is_zero_error():
    k = np.array([0.1, 0.5, 0.3, 0.1, 0.0])
    assert kernel_error(k, np.roll(k, 1)) == 0.0
    assert kernel_error(k, np.roll(k, 1), align=False) > 0.5
    aligned, shift = align_kernel(k, np.roll(k, 1))
    np.testing.assert_array_equal(aligned, k)
    assert shift == (-1,)


def test_kernel_alignment_2d():
    rng = np.random.default_rng(0)
    k = rng.random((3, 3))
    assert kernel_error(k, np.roll(k, (1, -1), axis=(0, 1))) == 0.0
    with pytest.raises(ValueError):
        kernel_error(np.zeros(3), np.ones(3))


def test_psnr_is_raw_and_aligned_undoes_shift():
    from gibbsddrm.operators import CirculantConvOperator

    rng = np.random.default_rng(1)
    x = rng.random(16)
    # a zero tap leaves room for the shift inside the kernel array
    k = np.array([0.6, 0.3, 0.1, 0.0])
    # the shifted pair (roll kernel +1, roll signal -1) gives the same measurement
    y = CirculantConvOperator(k, x.shape).apply(x)
    y2 = CirculantConvOperator(np.roll(k, 1), x.shape).apply(np.roll(x, -1))
    np.testing.assert_allclose(y, y2, atol=1e-12)
    m = compute_metrics(x, np.roll(x, -1), k, np.roll(k, 1))
    assert m["kernel_error_l2_normalized"] == 0.0
    assert m["psnr_infinite"] is False and m["psnr_db"] < 30
    assert m["psnr_aligned_db"] is None


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=2, max_size=20), st.floats(1e-3, 0.5))
def test_psnr_matches_formula(values, offset):
    a = np.array(values)
    b = a + offset
    assert psnr(a, b) == pytest.approx(10 * math.log10(1 / offset**2), rel=1e-9)
