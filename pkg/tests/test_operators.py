import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import finite_difference
from gibbsddrm.operators import (
    CirculantConvOperator,
    DenseOperator,
    ScaledOperator,
    gaussian_kernel,
    project_kernel_simplex,
    svd_factors,
)


def direct_circular_conv(kernel, x, origin):
    """Plain double loop, independent of the FFT path."""
    n = x.size
    out = np.zeros(n, dtype=np.result_type(kernel, x))
    for i in range(n):
        for j, k in enumerate(kernel):
            out[i] += k * x[(i - (j - origin)) % n]
    return out


def direct_circular_conv2(kernel, x, origin):
    h, w = x.shape
    out = np.zeros_like(x, dtype=np.result_type(kernel, x))
    for i in range(h):
        for j in range(w):
            for a in range(kernel.shape[0]):
                for b in range(kernel.shape[1]):
                    out[i, j] += kernel[a, b] * x[(i - (a - origin[0])) % h, (j - (b - origin[1])) % w]
    return out


def test_identity_kernel_singular_values():
    k = np.zeros(8)
    k[0] = 1.0
    op = CirculantConvOperator(k, (8,), origin=0)
    np.testing.assert_allclose(op.singular_values(), np.ones(8), atol=1e-15)
    y = np.arange(8.0)
    np.testing.assert_allclose(op.to_spectral_measurement(y), op.to_spectral_data(y), atol=1e-12)
    np.testing.assert_allclose(op.pseudo_inverse(y), y, atol=1e-12)


def test_half_half_kernel():
    op = CirculantConvOperator([0.5, 0.5], (2,))
    np.testing.assert_allclose(op.singular_values(), [1.0, 0.0], atol=1e-15)
    dense = np.linalg.svd(op.matrix(), compute_uv=False)
    np.testing.assert_allclose(op.singular_values(), dense, atol=1e-12)
    ybar = op.to_spectral_measurement([1.0, 1.0])
    s = op.spectral_singular_values()
    assert np.all(ybar[s < 1e-8] == 0)
    assert np.count_nonzero(s < 1e-8) == 1


def test_random_dense_singular_values(rng):
    a = rng.standard_normal((4, 6))
    op = DenseOperator(a)
    np.testing.assert_allclose(op.singular_values(), np.linalg.svd(a, compute_uv=False), rtol=0, atol=1e-8)
    u, s, v = svd_factors(op)
    np.testing.assert_allclose(u[:, :4] @ np.diag(s) @ v[:, :4].T, a, atol=1e-10)
    np.testing.assert_allclose(u.T @ u, np.eye(4), atol=1e-12)
    np.testing.assert_allclose(v.T @ v, np.eye(6), atol=1e-12)


def test_dense_spectral_measurement_3x3(rng):
    a = rng.standard_normal((3, 3))
    op = DenseOperator(a)
    y = rng.standard_normal(3)
    u, s, vt = np.linalg.svd(a)
    np.testing.assert_allclose(op.to_spectral_measurement(y), (u.T @ y) / s, atol=1e-10)
    with pytest.raises(ValueError):
        op.to_spectral_measurement(np.ones(4))


def test_dense_rank_deficient_null_bins():
    a = np.array([[1.0, 1.0], [1.0, 1.0]])
    op = DenseOperator(a)
    s = op.spectral_singular_values()
    ybar = op.to_spectral_measurement([1.0, 3.0])
    assert ybar[~op.nonzero_mask()] == pytest.approx(0.0)
    assert s[1] < 1e-8 * s[0]


def test_zero_threshold_is_relative():
    # a bin at 1e-9 s_1 counts as zero, one at 1e-7 s_1 does not
    op = DenseOperator(np.diag([1.0, 1e-9, 1e-7]))
    np.testing.assert_array_equal(op.nonzero_mask(), [True, True, False])


@pytest.mark.parametrize("d,support", [(5, 3), (8, 2), (16, 5), (32, 7)])
def test_circulant_matches_direct_convolution(rng, d, support):
    k = rng.standard_normal(support)
    op = CirculantConvOperator(k, (d,))
    x = rng.standard_normal(d)
    np.testing.assert_allclose(op.apply(x), direct_circular_conv(k, x, support // 2), atol=1e-10)


def test_circulant_2d_matches_direct(rng):
    k = rng.standard_normal((3, 2))
    x = rng.standard_normal((6, 5))
    op = CirculantConvOperator(k, x.shape)
    np.testing.assert_allclose(op.apply(x), direct_circular_conv2(k, x, (1, 1)), atol=1e-10)


def test_circulant_complex_matches_direct(rng):
    k = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    x = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    op = CirculantConvOperator(k, (8,))
    assert op.is_complex
    np.testing.assert_allclose(op.apply(x), direct_circular_conv(k, x, 1), atol=1e-10)
    assert op.phi.size == 6
    np.testing.assert_array_equal(op.with_phi(op.phi).kernel, k)


def test_singular_value_multiset(rng):
    k = rng.standard_normal(4)
    op = CirculantConvOperator(k, (12,))
    padded = np.zeros(12)
    padded[:4] = k
    expect = np.sort(np.abs(np.fft.fft(padded)))[::-1]
    np.testing.assert_allclose(op.singular_values(), expect, atol=1e-12)
    s = op.singular_values()
    assert np.all(np.diff(s) <= 0) and np.all(s >= 0)
    assert s[0] == pytest.approx(np.linalg.norm(op.matrix(), 2), rel=1e-12)


def _spectral_function(op, f, v):
    """``V f(S) V^H v`` through the operator's own spectral transforms."""
    return op.from_spectral_data(f(op.spectral_singular_values()) * op.to_spectral_data(v))


def _spectral_measurement_function(op, f, y):
    return op.from_spectral_data(f(op.spectral_singular_values()) * op.to_spectral_measurement(y))


@pytest.mark.parametrize("shape,support", [((7,), (3,)), ((16,), (5,)), ((4, 4), (2, 3)), ((8,), (2,))])
def test_circulant_vs_dense_equivalence(rng, shape, support):
    k = rng.uniform(0.0, 1.0, support)
    circ = CirculantConvOperator(k, shape)
    dense = DenseOperator(circ.matrix())
    x = rng.standard_normal(shape)
    np.testing.assert_allclose(circ.apply(x).reshape(-1), dense.apply(x.reshape(-1)), atol=1e-8)
    np.testing.assert_allclose(circ.singular_values(), dense.singular_values(), atol=1e-8)
    # singular vectors of repeated singular values are not unique, so compare
    # basis-free quantities: V f(S) V^T x and V g(S) S^+ U^T y for smooth f, g
    f = lambda s: np.exp(-s) + s**2
    np.testing.assert_allclose(_spectral_function(circ, f, x).reshape(-1),
                               _spectral_function(dense, f, x.reshape(-1)), atol=1e-8)
    y = rng.standard_normal(shape)
    np.testing.assert_allclose(_spectral_measurement_function(circ, f, y).reshape(-1),
                               _spectral_measurement_function(dense, f, y.reshape(-1)), atol=1e-8)


@pytest.mark.parametrize("make", ["dense", "scaled", "circ1", "circ2", "circc"])
def test_parseval_adjoint_roundtrip(rng, make):
    op = _make(make, rng)
    x = _rand(rng, op.x_shape, op.is_complex)
    y = _rand(rng, op.y_shape, op.is_complex)
    assert np.linalg.norm(op.to_spectral_data(x)) == pytest.approx(np.linalg.norm(x), rel=1e-10)
    np.testing.assert_allclose(op.from_spectral_data(op.to_spectral_data(x)).reshape(-1), x.reshape(-1), atol=1e-10)
    lhs = np.vdot(y.reshape(-1), np.asarray(op.apply(x)).reshape(-1))
    rhs = np.vdot(np.asarray(op.apply_adjoint(y)).reshape(-1), x.reshape(-1))
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


def _rand(rng, shape, cplx):
    z = rng.standard_normal(shape)
    return z + 1j * rng.standard_normal(shape) if cplx else z


def _make(kind, rng):
    if kind == "dense":
        return DenseOperator(rng.standard_normal((5, 7)))
    if kind == "scaled":
        return ScaledOperator(rng.standard_normal((4, 3)), -1.7)
    if kind == "circ1":
        return CirculantConvOperator(rng.standard_normal(5), (16,))
    if kind == "circ2":
        return CirculantConvOperator(rng.standard_normal((3, 3)), (6, 5))
    return CirculantConvOperator(rng.standard_normal(3) + 1j * rng.standard_normal(3), (9,))


@pytest.mark.parametrize("kind", ["dense", "scaled", "circ1", "circ2", "circc"])
def test_svd_reconstruction(rng, kind):
    op = _make(kind, rng)
    u, s, v = svd_factors(op)
    a = op.matrix()
    if kind in ("dense", "scaled"):
        r = s.size
        np.testing.assert_allclose(u[:, :r] @ np.diag(s) @ v[:, :r].T, a, atol=1e-10)
        return
    n = op.d_x
    eye = np.eye(n)
    um = np.stack([u.matvec(e) for e in eye], axis=1)
    vm = np.stack([v.matvec(e) for e in eye], axis=1)
    np.testing.assert_allclose(um @ np.diag(s) @ vm.conj().T, a, atol=1e-10)
    np.testing.assert_allclose(um.conj().T @ um, eye, atol=1e-10)
    np.testing.assert_allclose(vm.conj().T @ vm, eye, atol=1e-10)
    assert np.all(np.diff(s) <= 0)
    z = rng.standard_normal(n)
    np.testing.assert_allclose(v.rmatvec(v.matvec(z)), z, atol=1e-10)
    np.testing.assert_allclose(u.rmatvec(u.matvec(z)), z, atol=1e-10)


def test_circulant_factors_stay_implicit():
    op = CirculantConvOperator(gaussian_kernel((5,), 1.0), (128,))
    u, s, v = svd_factors(op)
    assert not isinstance(u, np.ndarray) and not isinstance(v, np.ndarray)
    assert s.shape == (128,)


def test_datafit_grad_zero_residual(rng):
    op = CirculantConvOperator(rng.standard_normal(3), (8,))
    x = rng.standard_normal(8)
    np.testing.assert_allclose(op.datafit_grad(x, op.apply(x), 0.3), 0.0, atol=1e-12)


def test_datafit_grad_hand_computed_d2():
    # kernel k = [k0, k1] with origin 0 on d = 2: (Hx)_i = k0 x_i + k1 x_{i-1}
    op = CirculantConvOperator([1.0, 0.5], (2,), origin=0)
    x = np.array([1.0, 2.0])
    y = np.array([3.0, 0.0])
    hx = np.array([1.0 + 0.5 * 2.0, 2.0 + 0.5 * 1.0])
    r = y - hx  # [1, -2.5]
    sigma = 0.5
    expect = np.array([r @ x, r[0] * x[1] + r[1] * x[0]]) / sigma**2
    np.testing.assert_allclose(op.datafit_grad(x, y, sigma), expect, atol=1e-12)
    np.testing.assert_allclose(expect, [-16.0, -2.0])


def _fd_check(op, x, y, sigma):
    g = op.datafit_grad(x, y, sigma)
    fd = finite_difference(lambda p: op.with_phi(p).datafit(x, y, sigma), op.phi)
    return np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-12)


@pytest.mark.parametrize("kind", ["dense", "scaled", "circ1", "circ2", "circc"])
def test_datafit_grad_finite_differences(rng, kind):
    for _ in range(5):
        op = _make(kind, rng)
        x = _rand(rng, op.x_shape, op.is_complex)
        y = _rand(rng, op.y_shape, op.is_complex)
        assert _fd_check(op, x, y, 0.7) < 1e-5


def test_datafit_grad_rejects_bad_sigma(rng):
    op = CirculantConvOperator([0.5, 0.5], (4,))
    for bad in (0.0, -1.0):
        with pytest.raises(ValueError):
            op.datafit_grad(np.ones(4), np.ones(4), bad)


def test_constructor_validation():
    with pytest.raises(ValueError):
        CirculantConvOperator(np.ones(9), (8,))
    with pytest.raises(ValueError):
        CirculantConvOperator(np.ones((2, 2)), (8,))
    with pytest.raises(ValueError):
        CirculantConvOperator([], (8,))
    with pytest.raises(ValueError):
        DenseOperator(np.ones(3))
    op = CirculantConvOperator(np.ones(3), (8,))
    with pytest.raises(ValueError):
        op.apply(np.ones(7))
    with pytest.raises(ValueError):
        op.with_phi(np.ones(4))


def test_operators_are_immutable(rng):
    k = rng.standard_normal(3)
    op = CirculantConvOperator(k, (8,))
    k[0] = 99.0
    assert op.kernel[0] != 99.0
    with pytest.raises(ValueError):
        op.kernel.setflags(write=True) or op._k.__setitem__(0, 1.0)
    op2 = op.with_phi(np.zeros(3))
    assert op2 is not op and np.any(op.phi != 0)


def test_project_kernel_simplex_examples():
    np.testing.assert_allclose(project_kernel_simplex([0.2, 0.8]), [0.2, 0.8])
    np.testing.assert_array_equal(project_kernel_simplex([-1.0, 1.0]), [0.0, 1.0])
    np.testing.assert_allclose(project_kernel_simplex([-1.0, -2.0, -3.0]), [1 / 3] * 3)
    with pytest.raises(ValueError):
        project_kernel_simplex([])


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, st.integers(1, 12), elements=st.floats(-1e6, 1e6)))
def test_project_kernel_simplex_properties(k):
    p = project_kernel_simplex(k)
    assert np.all(p >= 0)
    assert p.sum() == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(project_kernel_simplex(p), p, atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, 16, elements=st.floats(-10, 10)),
       arrays(np.float64, 4, elements=st.floats(-3, 3)))
def test_circulant_parseval_property(x, k):
    op = CirculantConvOperator(k, (16,))
    assert np.linalg.norm(op.to_spectral_data(x)) == pytest.approx(np.linalg.norm(x), rel=1e-10, abs=1e-12)


def test_gaussian_kernel():
    k = gaussian_kernel((5,), 1.0)
    assert k.sum() == pytest.approx(1.0)
    np.testing.assert_allclose(k, k[::-1])
    assert k.argmax() == 2
