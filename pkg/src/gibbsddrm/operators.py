"""Parametric linear operators with SVD access.

Every operator exposes the same spectral interface:

* ``to_spectral_data(x)``        ``V^H x`` as a flat vector of length ``d_x``
* ``from_spectral_data(xbar)``   inverse of the above
* ``to_spectral_measurement(y)`` ``Sigma^+ U^H y``, zero on null bins
* ``spectral_singular_values()`` singular value attached to each spectral
  coordinate (zero-padded to ``d_x``)

Spectral coordinates of a circulant operator are DFT bins in natural FFT
order, so they are complex; the dense operators use the ordinary real SVD in
descending order.  Operators are immutable: a parameter update builds a new
instance through ``with_phi``.
"""

from __future__ import annotations

import numpy as np
from scipy.sparse.linalg import LinearOperator

__all__ = [
    "ZERO_RTOL",
    "SpectralOperator",
    "DenseOperator",
    "ScaledOperator",
    "CirculantConvOperator",
    "svd_factors",
    "project_kernel_simplex",
    "gaussian_kernel",
]

# singular values below ZERO_RTOL * s_1 are routed to the null-space branches
ZERO_RTOL = 1e-8

_DENSE_FACTOR_LIMIT = 64


def _check_sigma_y(sigma_y):
    if not sigma_y > 0:
        raise ValueError(f"sigma_y must be positive, got {sigma_y!r}")


class SpectralOperator:
    """Abstract parametric operator ``H_phi`` with SVD-based spectral transforms."""

    x_shape: tuple[int, ...]
    y_shape: tuple[int, ...]
    is_complex: bool = False

    @property
    def phi(self) -> np.ndarray:
        raise NotImplementedError

    def with_phi(self, phi) -> "SpectralOperator":
        raise NotImplementedError

    @property
    def d_x(self) -> int:
        return int(np.prod(self.x_shape))

    @property
    def d_y(self) -> int:
        return int(np.prod(self.y_shape))

    def apply(self, x):
        raise NotImplementedError

    def apply_adjoint(self, y):
        raise NotImplementedError

    def spectral_singular_values(self) -> np.ndarray:
        raise NotImplementedError

    def to_spectral_data(self, x) -> np.ndarray:
        raise NotImplementedError

    def from_spectral_data(self, xbar) -> np.ndarray:
        raise NotImplementedError

    def to_spectral_measurement(self, y) -> np.ndarray:
        raise NotImplementedError

    def datafit_grad(self, x, y, sigma_y: float) -> np.ndarray:
        raise NotImplementedError

    def svd_factors(self):
        raise NotImplementedError

    # shared helpers

    def singular_values(self) -> np.ndarray:
        s = self.spectral_singular_values()
        return np.sort(s)[::-1][: min(self.d_x, self.d_y)]

    def nonzero_mask(self) -> np.ndarray:
        s = self.spectral_singular_values()
        s1 = s.max() if s.size else 0.0
        return s > ZERO_RTOL * s1

    def datafit(self, x, y, sigma_y: float) -> float:
        """``-(1 / (2 sigma_y^2)) ||y - H x||^2``."""
        _check_sigma_y(sigma_y)
        r = np.asarray(y) - self.apply(x)
        return float(-0.5 * np.sum(np.abs(r) ** 2) / sigma_y**2)

    def residual_norm(self, x, y) -> float:
        return float(np.linalg.norm(np.asarray(y) - self.apply(x)))

    def pseudo_inverse(self, y) -> np.ndarray:
        return self.from_spectral_data(self.to_spectral_measurement(y))

    def matrix(self) -> np.ndarray:
        """Dense matrix of the operator, assembled column by column."""
        dtype = complex if self.is_complex else float
        eye = np.eye(self.d_x, dtype=dtype)
        cols = [np.asarray(self.apply(e.reshape(self.x_shape))).reshape(-1) for e in eye]
        return np.stack(cols, axis=1)

    def _check_x(self, x):
        x = np.asarray(x)
        if x.size != self.d_x:
            raise ValueError(f"expected signal of size {self.d_x}, got {x.size}")
        return x

    def _check_y(self, y):
        y = np.asarray(y)
        if y.size != self.d_y:
            raise ValueError(f"expected measurement of size {self.d_y}, got {y.size}")
        return y


class DenseOperator(SpectralOperator):
    """Explicit ``d_y x d_x`` real matrix; ``phi`` is the flattened matrix."""

    def __init__(self, matrix):
        a = np.array(matrix, dtype=float)
        if a.ndim != 2:
            raise ValueError("dense operator needs a 2-D matrix")
        a.setflags(write=False)
        self._a = a
        self.y_shape = (a.shape[0],)
        self.x_shape = (a.shape[1],)
        u, s, vt = np.linalg.svd(a, full_matrices=True)
        self._u, self._s, self._vt = u, s, vt
        pad = np.zeros(self.d_x)
        pad[: s.size] = s
        self._s_spec = pad

    @property
    def phi(self):
        return self._a.reshape(-1).copy()

    def with_phi(self, phi):
        return DenseOperator(np.asarray(phi, dtype=float).reshape(self._a.shape))

    def matrix(self):
        return self._a.copy()

    def apply(self, x):
        return self._a @ self._check_x(x).reshape(-1)

    def apply_adjoint(self, y):
        return self._a.T @ self._check_y(y).reshape(-1)

    def spectral_singular_values(self):
        return self._s_spec.copy()

    def to_spectral_data(self, x):
        return self._vt @ self._check_x(x).reshape(-1)

    def from_spectral_data(self, xbar):
        return self._vt.T @ np.asarray(xbar).reshape(-1)

    def to_spectral_measurement(self, y):
        uty = self._u.T @ self._check_y(y).reshape(-1)
        out = np.zeros(self.d_x)
        mask = self.nonzero_mask()
        r = min(self.d_x, self.d_y)
        out[:r] = uty[:r]
        out[mask] = out[mask] / self._s_spec[mask]
        out[~mask] = 0.0
        return out

    def datafit_grad(self, x, y, sigma_y):
        _check_sigma_y(sigma_y)
        x = self._check_x(x).reshape(-1)
        r = self._check_y(y).reshape(-1) - self._a @ x
        return np.outer(r, x).reshape(-1) / sigma_y**2

    def svd_factors(self):
        return self._u.copy(), self._s.copy(), self._vt.T.copy()


class ScaledOperator(SpectralOperator):
    """Scalar family ``H_phi = phi * A`` with a fixed base matrix ``A``."""

    def __init__(self, base, scale: float):
        self._base = base if isinstance(base, DenseOperator) else DenseOperator(base)
        self._scale = float(scale)
        self.x_shape = self._base.x_shape
        self.y_shape = self._base.y_shape
        self._sign = -1.0 if self._scale < 0 else 1.0

    @property
    def phi(self):
        return np.array([self._scale])

    @property
    def base(self) -> DenseOperator:
        return self._base

    def with_phi(self, phi):
        phi = np.asarray(phi, dtype=float).reshape(-1)
        if phi.size != 1:
            raise ValueError("scaled operator has a single scalar parameter")
        return ScaledOperator(self._base, phi[0])

    def apply(self, x):
        return self._scale * self._base.apply(x)

    def apply_adjoint(self, y):
        return self._scale * self._base.apply_adjoint(y)

    def spectral_singular_values(self):
        return abs(self._scale) * self._base.spectral_singular_values()

    def to_spectral_data(self, x):
        return self._base.to_spectral_data(x)

    def from_spectral_data(self, xbar):
        return self._base.from_spectral_data(xbar)

    def to_spectral_measurement(self, y):
        # U_phi = sign(phi) U_base and s = |phi| s_base, so the ratio is base/phi
        if self._scale == 0:
            return np.zeros(self.d_x)
        mask = self.nonzero_mask()
        out = self._base.to_spectral_measurement(y) / self._scale
        out[~mask] = 0.0
        return out

    def datafit_grad(self, x, y, sigma_y):
        _check_sigma_y(sigma_y)
        ax = self._base.apply(x)
        r = self._check_y(y).reshape(-1) - self._scale * ax
        return np.array([np.dot(r, ax) / sigma_y**2])

    def svd_factors(self):
        u, s, v = self._base.svd_factors()
        return self._sign * u, abs(self._scale) * s, v


class CirculantConvOperator(SpectralOperator):
    """Circular convolution with a compactly supported kernel (1-D or 2-D).

    The kernel (support shape ``kernel.shape``) is embedded in a zero array of
    the signal shape with entry ``j`` placed at offset ``j - origin`` (mod n),
    so the default ``origin = support // 2`` keeps a symmetric kernel
    zero-phase.  Complex kernels act on complex signals and are parameterized
    by ``phi = [Re k, Im k]``.
    """

    def __init__(self, kernel, signal_shape, origin=None, complex_signal: bool | None = None):
        k = np.array(kernel)
        shape = tuple(int(n) for n in np.atleast_1d(signal_shape))
        if k.ndim not in (1, 2) or k.ndim != len(shape):
            raise ValueError("kernel and signal must both be 1-D or both 2-D")
        if any(ks > n for ks, n in zip(k.shape, shape)):
            raise ValueError(f"kernel support {k.shape} exceeds signal shape {shape}")
        if k.size == 0:
            raise ValueError("empty kernel")
        self.is_complex = bool(np.iscomplexobj(k) if complex_signal is None else complex_signal)
        k = k.astype(complex if self.is_complex else float)
        k.setflags(write=False)
        self._k = k
        if origin is None:
            origin = tuple(ks // 2 for ks in k.shape)
        self._origin = tuple(int(o) for o in np.atleast_1d(origin))
        self.x_shape = shape
        self.y_shape = shape
        self._axes = tuple(range(len(shape)))
        # lag position of every kernel entry inside the signal grid
        grids = np.meshgrid(*[np.arange(ks) for ks in k.shape], indexing="ij")
        self._lags = tuple((g - o) % n for g, o, n in zip(grids, self._origin, shape))
        padded = np.zeros(shape, dtype=complex if self.is_complex else float)
        np.add.at(padded, self._lags, k)
        self._g = np.fft.fftn(padded, axes=self._axes)
        self._s_bins = np.abs(self._g).reshape(-1)

    # parameters

    @property
    def kernel(self) -> np.ndarray:
        return self._k.copy()

    @property
    def origin(self) -> tuple[int, ...]:
        return self._origin

    @property
    def transfer_function(self) -> np.ndarray:
        return self._g.copy()

    @property
    def phi(self):
        flat = self._k.reshape(-1)
        if self.is_complex:
            return np.concatenate([flat.real, flat.imag])
        return flat.copy()

    def with_phi(self, phi):
        return CirculantConvOperator(
            self.kernel_from_phi(phi), self.x_shape, self._origin, self.is_complex
        )

    def kernel_from_phi(self, phi) -> np.ndarray:
        phi = np.asarray(phi, dtype=float).reshape(-1)
        n = self._k.size
        if self.is_complex:
            if phi.size != 2 * n:
                raise ValueError(f"expected {2 * n} parameters, got {phi.size}")
            return (phi[:n] + 1j * phi[n:]).reshape(self._k.shape)
        if phi.size != n:
            raise ValueError(f"expected {n} parameters, got {phi.size}")
        return phi.reshape(self._k.shape)

    # action

    def _fft(self, a, norm=None):
        return np.fft.fftn(a, axes=self._axes, norm=norm)

    def _ifft(self, a, norm=None):
        out = np.fft.ifftn(a, axes=self._axes, norm=norm)
        return out if self.is_complex else out.real

    def apply(self, x):
        x = self._check_x(x).reshape(self.x_shape)
        return self._ifft(self._g * self._fft(x))

    def apply_adjoint(self, y):
        y = self._check_y(y).reshape(self.y_shape)
        return self._ifft(np.conj(self._g) * self._fft(y))

    # spectral interface

    def spectral_singular_values(self):
        return self._s_bins.copy()

    def to_spectral_data(self, x):
        x = self._check_x(x).reshape(self.x_shape)
        return self._fft(x, norm="ortho").reshape(-1)

    def from_spectral_data(self, xbar):
        xbar = np.asarray(xbar).reshape(self.x_shape)
        return self._ifft(xbar, norm="ortho")

    def to_spectral_measurement(self, y):
        # Sigma^+ U^H y = conj(phase) * F y / |g| = F y / g on nonzero bins
        y = self._check_y(y).reshape(self.y_shape)
        fy = self._fft(y, norm="ortho").reshape(-1)
        g = self._g.reshape(-1)
        mask = self.nonzero_mask()
        out = np.zeros(self.d_x, dtype=complex)
        out[mask] = fy[mask] / g[mask]
        return out

    def datafit_grad(self, x, y, sigma_y):
        _check_sigma_y(sigma_y)
        x = self._check_x(x).reshape(self.x_shape)
        r = self._check_y(y).reshape(self.y_shape) - self.apply(x)
        # c[m] = sum_i r_i conj(x_{i-m}): residual cross-correlated with the signal
        c = np.fft.ifftn(self._fft(r) * np.conj(self._fft(x)), axes=self._axes)
        on_support = c[self._lags].reshape(-1) / sigma_y**2
        if self.is_complex:
            return np.concatenate([on_support.real, on_support.imag])
        return on_support.real.copy()

    def svd_factors(self):
        """Implicit ``(U, s, V)`` with ``s`` descending.

        ``U`` and ``V`` are matrix-free ``LinearOperator`` objects built from
        the unitary DFT and the per-bin phases of the transfer function.
        """
        n = self.d_x
        order = np.argsort(-self._s_bins, kind="stable")
        inv = np.empty_like(order)
        inv[order] = np.arange(n)
        g = self._g.reshape(-1)
        phase = np.ones(n, dtype=complex)
        nz = self._s_bins > 0
        phase[nz] = g[nz] / self._s_bins[nz]
        shape, axes = self.x_shape, self._axes

        def v_mat(z):
            full = np.asarray(z, dtype=complex).reshape(-1)[inv]
            return np.fft.ifftn(full.reshape(shape), axes=axes, norm="ortho").reshape(-1)

        def v_rmat(x):
            fx = np.fft.fftn(np.asarray(x, dtype=complex).reshape(shape), axes=axes, norm="ortho")
            return fx.reshape(-1)[order]

        def u_mat(z):
            full = np.asarray(z, dtype=complex).reshape(-1)[inv] * phase
            return np.fft.ifftn(full.reshape(shape), axes=axes, norm="ortho").reshape(-1)

        def u_rmat(y):
            fy = np.fft.fftn(np.asarray(y, dtype=complex).reshape(shape), axes=axes, norm="ortho")
            return (np.conj(phase) * fy.reshape(-1))[order]

        V = LinearOperator((n, n), matvec=v_mat, rmatvec=v_rmat, dtype=complex)
        U = LinearOperator((n, n), matvec=u_mat, rmatvec=u_rmat, dtype=complex)
        return U, self._s_bins[order].copy(), V


def svd_factors(op: SpectralOperator):
    """``(U, s, V)`` with ``H = U diag(s) V^H`` and ``s`` sorted descending.

    Dense operators return arrays.  Circulant operators return matrix-free
    ``LinearOperator`` factors; they are never densified here.
    """
    return op.svd_factors()


def project_kernel_simplex(kernel) -> np.ndarray:
    """Clip to nonnegative and renormalize to unit sum (uniform if nothing survives)."""
    k = np.asarray(kernel, dtype=float)
    if k.size == 0:
        raise ValueError("empty kernel")
    clipped = np.maximum(k, 0.0)
    total = clipped.sum()
    if not total > 0 or not np.isfinite(total):
        return np.full(k.shape, 1.0 / k.size)
    return clipped / total


def gaussian_kernel(support, width: float) -> np.ndarray:
    """Sampled Gaussian bump on a centered support, normalized to unit sum."""
    support = tuple(int(s) for s in np.atleast_1d(support))
    axes = [np.arange(s) - s // 2 for s in support]
    grids = np.meshgrid(*axes, indexing="ij")
    r2 = sum(g.astype(float) ** 2 for g in grids)
    k = np.exp(-0.5 * r2 / width**2)
    return k / k.sum()
