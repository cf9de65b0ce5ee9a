"""Brute-force references for testing the samplers.

Nothing in here imports the DDRM, Gibbs or Langevin code paths; the oracles
work from the model definition alone (conjugate algebra, grids, adaptive
quadrature and plain Monte Carlo).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import logsumexp

from .priors import GaussianPrior, GmmPrior

__all__ = [
    "OracleError",
    "exact_gaussian_posterior",
    "QuadratureResult",
    "quadrature_posterior_mean",
    "adaptive_posterior_mean",
    "default_grid",
    "tv_distance",
    "ToyModel",
    "jensen_gap_monte_carlo",
]


class OracleError(ArithmeticError):
    pass


def _as_matrix(op) -> np.ndarray:
    if hasattr(op, "matrix"):
        return np.asarray(op.matrix(), dtype=float)
    return np.atleast_2d(np.asarray(op, dtype=float))


def exact_gaussian_posterior(prior: GaussianPrior, op, y, sigma_y: float):
    """Conjugate posterior ``x_0 | y`` for ``y = A x_0 + N(0, sigma_y^2 I)``."""
    if not sigma_y > 0:
        raise ValueError("sigma_y must be positive")
    a = _as_matrix(op)
    d = a.shape[1]
    mu = np.broadcast_to(prior.mean, (d,)).astype(float)
    y = np.asarray(y, dtype=float).reshape(-1)
    with np.errstate(over="ignore", invalid="ignore"):
        precision = np.eye(d) / prior.variance + a.T @ a / sigma_y**2
    if not np.all(np.isfinite(precision)):
        raise OracleError("posterior precision is not finite (cond=inf)")
    try:
        chol = np.linalg.cholesky(precision)
    except np.linalg.LinAlgError as exc:
        cond = np.linalg.cond(precision)
        raise OracleError(f"posterior precision is not positive definite (cond={cond:.3g})") from exc
    eye = np.eye(d)
    inv_chol = np.linalg.solve(chol, eye)
    cov = inv_chol.T @ inv_chol
    mean = cov @ (mu / prior.variance + a.T @ y / sigma_y**2)
    return mean, cov


# ---------------------------------------------------------------------------
# quadrature


def _log_prior(prior, pts: np.ndarray) -> np.ndarray:
    """Log density (up to a constant) of the prior at ``pts`` of shape (n, d)."""
    if isinstance(prior, GaussianPrior):
        mu = np.broadcast_to(prior.mean, (pts.shape[1],))
        return -0.5 * np.sum((pts - mu) ** 2, axis=1) / prior.variance
    if isinstance(prior, GmmPrior):
        sq = np.sum((pts[:, None, :] - prior.means[None, :, :]) ** 2, axis=2)
        with np.errstate(divide="ignore"):
            logw = np.log(prior.weights)
        return logsumexp(logw[None, :] - 0.5 * sq / prior.variance, axis=1)
    raise TypeError(f"unsupported prior {type(prior).__name__}")


def _log_lik(a, y, sigma_y, pts):
    r = y[None, :] - pts @ a.T
    return -0.5 * np.sum(r**2, axis=1) / sigma_y**2


@dataclass
class QuadratureResult:
    mean: np.ndarray
    log_evidence: float
    error_estimate: float
    warning: str | None = None


def default_grid(prior, op, y, sigma_y, n: int = 801, width: float = 12.0):
    """Per-axis ``(lo, hi, n)`` covering the prior's support generously."""
    a = _as_matrix(op)
    d = a.shape[1]
    if isinstance(prior, GmmPrior):
        lo, hi = prior.means.min(axis=0), prior.means.max(axis=0)
    else:
        lo = hi = np.broadcast_to(prior.mean, (d,))
    sd = math.sqrt(prior.variance)
    return [(float(lo[i] - width * sd), float(hi[i] + width * sd), n) for i in range(d)]


def _grid_mean(prior, a, y, sigma_y, axes):
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.reshape(-1) for m in mesh], axis=1)
    logw = _log_prior(prior, pts) + _log_lik(a, y, sigma_y, pts)
    shift = logw.max()
    w = np.exp(logw - shift).reshape(mesh[0].shape)
    # trapezoid weights, tensorized
    for ax, grid in enumerate(axes):
        tw = np.full(grid.size, grid[1] - grid[0])
        tw[0] = tw[-1] = 0.5 * (grid[1] - grid[0])
        shape = [1] * len(axes)
        shape[ax] = grid.size
        w = w * tw.reshape(shape)
    z = w.sum()
    mean = np.array([(w * m).sum() / z for m in mesh])
    return mean, math.log(z) + shift


def quadrature_posterior_mean(prior, op, y, sigma_y: float, grid=None,
                              tol: float = 1e-8) -> QuadratureResult:
    """Posterior mean of ``x_0 | y`` by tensor trapezoid quadrature (``d_x <= 2``).

    ``grid`` is a list of ``(lo, hi, n)`` per axis.  The discretization error
    is estimated by re-integrating on every other node; when it exceeds
    ``tol`` the result carries a warning.
    """
    a = _as_matrix(op)
    d = a.shape[1]
    if d > 2:
        raise ValueError("grid quadrature supports d_x <= 2")
    if not sigma_y > 0:
        raise ValueError("sigma_y must be positive")
    y = np.asarray(y, dtype=float).reshape(-1)
    grid = default_grid(prior, a, y, sigma_y) if grid is None else grid
    if len(grid) != d:
        raise ValueError(f"grid has {len(grid)} axes, model has {d}")
    axes = [np.linspace(lo, hi, int(n)) for lo, hi, n in grid]
    mean, log_z = _grid_mean(prior, a, y, sigma_y, axes)
    coarse, _ = _grid_mean(prior, a, y, sigma_y, [ax[::2] for ax in axes])
    err = float(np.max(np.abs(mean - coarse)))
    msg = None
    if err > tol:
        msg = f"grid may be too coarse: half-resolution mean differs by {err:.3g}"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return QuadratureResult(mean, log_z, err, msg)


def adaptive_posterior_mean(prior, op, y, sigma_y: float, grid=None) -> np.ndarray:
    """Same posterior mean via scipy's adaptive quadrature; independent of the grid rule."""
    a = _as_matrix(op)
    d = a.shape[1]
    y = np.asarray(y, dtype=float).reshape(-1)
    grid = default_grid(prior, a, y, sigma_y) if grid is None else grid
    ref = _grid_mean(prior, a, y, sigma_y, [np.linspace(lo, hi, 201) for lo, hi, _ in grid])[1]

    def dens(*x):
        p = np.array(x, dtype=float)[None, :]
        return math.exp(_log_prior(prior, p)[0] + _log_lik(a, y, sigma_y, p)[0] - ref)

    opts = dict(epsabs=0.0, epsrel=1e-11, limit=400)
    if d == 1:
        lo, hi, _ = grid[0]
        # split at the posterior bulk so quad does not miss narrow peaks
        pts = np.linspace(lo, hi, 41)[1:-1]
        z = integrate.quad(lambda u: dens(u), lo, hi, points=pts, **opts)[0]
        m = integrate.quad(lambda u: u * dens(u), lo, hi, points=pts, **opts)[0]
        return np.array([m / z])
    if d == 2:
        (lo0, hi0, _), (lo1, hi1, _) = grid
        p0 = list(np.linspace(lo0, hi0, 7)[1:-1])
        p1 = list(np.linspace(lo1, hi1, 7)[1:-1])

        def dens_row(v, u):
            # vectorized over v for a fixed outer coordinate u
            p = np.column_stack([np.full_like(v, u), v])
            return np.exp(_log_prior(prior, p) + _log_lik(a, y, sigma_y, p) - ref)

        def inner(u):
            f = lambda v: np.array([1.0, u, v]) * dens_row(np.array([v]), u)[0]
            return integrate.quad_vec(f, lo1, hi1, points=p1, epsabs=1e-12, epsrel=1e-8)[0]

        z, m0, m1 = integrate.quad_vec(inner, lo0, hi0, points=p0, epsabs=1e-12, epsrel=1e-8)[0]
        return np.array([m0 / z, m1 / z])
    raise ValueError("adaptive quadrature supports d_x <= 2")


# ---------------------------------------------------------------------------
# distances


def tv_distance(samples_a, samples_b, bins=50, range=None) -> float:
    """Total-variation distance between binned empirical distributions.

    Samples are ``(n,)`` or ``(n, d)``; ``bins`` and ``range`` follow
    ``numpy.histogramdd``.  A shared range is derived from both sets when
    none is given.
    """
    a = np.asarray(samples_a, dtype=float)
    b = np.asarray(samples_b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise ValueError("tv_distance needs non-empty sample sets")
    a = a.reshape(a.shape[0], -1)
    b = b.reshape(b.shape[0], -1)
    if a.shape[1] != b.shape[1]:
        raise ValueError("sample sets have different dimensionality")
    if range is None:
        both = np.concatenate([a, b])
        lo, hi = both.min(axis=0), both.max(axis=0)
        hi = np.where(hi > lo, hi, lo + 1.0)
        range = list(zip(lo, hi))
    ha, _ = np.histogramdd(a, bins=bins, range=range)
    hb, _ = np.histogramdd(b, bins=bins, range=range)
    # samples outside the range form one overflow cell each
    out_a = a.shape[0] - ha.sum()
    out_b = b.shape[0] - hb.sum()
    pa = np.append(ha.reshape(-1), out_a) / a.shape[0]
    pb = np.append(hb.reshape(-1), out_b) / b.shape[0]
    return float(0.5 * np.abs(pa - pb).sum())


# ---------------------------------------------------------------------------
# linear-Gaussian toy chain with a discrete operator scale


@dataclass(frozen=True, eq=False)
class ToyModel:
    """Tractable chain ``x_0 ~ N(mu, v I)``, ``x_{t} = x_{t-1} + N(0, (s_t^2 - s_{t-1}^2) I)``,
    ``y = phi * A x_0 + N(0, sigma_y^2 I)`` with ``phi`` on a finite support.

    Every conditional of the form ``x_S | x_G, phi, y`` is Gaussian and
    ``phi | x_G, y`` is categorical, so exact Gibbs steps are available.
    """

    prior_mean: np.ndarray
    prior_var: float
    A: np.ndarray
    sigma_y: float
    sigmas: tuple[float, ...]
    phi_values: np.ndarray
    phi_weights: np.ndarray
    y: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.A, dtype=float))
        d = a.shape[1]
        object.__setattr__(self, "A", a)
        object.__setattr__(self, "prior_mean", np.broadcast_to(np.asarray(self.prior_mean, float), (d,)).copy())
        object.__setattr__(self, "phi_values", np.asarray(self.phi_values, dtype=float))
        w = np.asarray(self.phi_weights, dtype=float)
        object.__setattr__(self, "phi_weights", w / w.sum())
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float).reshape(-1))
        object.__setattr__(self, "sigmas", tuple(float(s) for s in self.sigmas))
        if d > 2 or a.shape[0] > 2:
            raise ValueError("toy model supports d_x <= 2 and d_y <= 2")
        if self.T > 3 or self.T < 1:
            raise ValueError("toy model supports 1 <= T <= 3")
        if self.sigmas[0] != 0 or any(b <= a_ for a_, b in zip(self.sigmas[:-1], self.sigmas[1:])):
            raise ValueError("toy schedule must start at 0 and increase strictly")
        if self.y.size != a.shape[0]:
            raise ValueError("y has the wrong size")
        if not (self.sigma_y > 0 and self.prior_var > 0):
            raise ValueError("variances must be positive")

    @property
    def T(self) -> int:
        return len(self.sigmas) - 1

    @property
    def d(self) -> int:
        return self.A.shape[1]

    @property
    def K(self) -> int:
        return self.phi_values.size

    def joint(self, k: int):
        """Mean and covariance of ``(x_0, ..., x_T, y)`` given ``phi = phi_values[k]``."""
        d, T, v = self.d, self.T, self.prior_var
        dy = self.A.shape[0]
        phi = self.phi_values[k]
        n = (T + 1) * d + dy
        cov = np.zeros((n, n))
        for i in range(T + 1):
            for j in range(T + 1):
                cov[i * d:(i + 1) * d, j * d:(j + 1) * d] = (v + self.sigmas[min(i, j)] ** 2) * np.eye(d)
        ys = slice((T + 1) * d, n)
        for j in range(T + 1):
            block = phi * self.A * v
            cov[ys, j * d:(j + 1) * d] = block
            cov[j * d:(j + 1) * d, ys] = block.T
        cov[ys, ys] = phi**2 * v * self.A @ self.A.T + self.sigma_y**2 * np.eye(dy)
        mean = np.concatenate([np.tile(self.prior_mean, T + 1), phi * self.A @ self.prior_mean])
        return mean, cov

    def _idx(self, blocks) -> np.ndarray:
        d = self.d
        out = []
        for b in sorted(blocks, key=lambda b: (b == "y", b if b != "y" else 0)):
            if b == "y":
                out.extend(range((self.T + 1) * d, (self.T + 1) * d + self.A.shape[0]))
            else:
                out.extend(range(b * d, (b + 1) * d))
        return np.array(out, dtype=int)

    def conditional(self, k: int, target: tuple[int, ...], given: tuple[int, ...]):
        """Gain, offset and Cholesky factor of ``x_target | x_given, y, phi_k``.

        Returns ``(G, c, L)`` so that a draw is ``c + G @ x_given + L @ eps``.
        """
        key = ("x", k, tuple(sorted(target)), tuple(sorted(given)))
        if key not in self._cache:
            mean, cov = self.joint(k)
            ti = self._idx(target)
            gb = tuple(sorted(given))
            gi = self._idx(gb + ("y",))
            s_gg = cov[np.ix_(gi, gi)]
            s_tg = cov[np.ix_(ti, gi)]
            gain = np.linalg.solve(s_gg, s_tg.T).T
            c_cov = cov[np.ix_(ti, ti)] - gain @ s_tg.T
            chol = np.linalg.cholesky(0.5 * (c_cov + c_cov.T))
            ny = self.A.shape[0]
            nx = gain.shape[1] - ny
            gx, gy = gain[:, :nx], gain[:, nx:]
            mg = mean[gi]
            offset = mean[ti] - gx @ mg[:nx] + gy @ (self.y - mg[nx:])
            self._cache[key] = (gx, offset, chol)
        return self._cache[key]

    def y_given(self, k: int, given: tuple[int, ...]):
        """Gain, offset, precision and log-det of ``y | x_given, phi_k``."""
        key = ("y", k, tuple(sorted(given)))
        if key not in self._cache:
            mean, cov = self.joint(k)
            yi = self._idx(("y",))
            gb = tuple(sorted(given))
            if gb:
                gi = self._idx(gb)
                gain = np.linalg.solve(cov[np.ix_(gi, gi)], cov[np.ix_(yi, gi)].T).T
                c_cov = cov[np.ix_(yi, yi)] - gain @ cov[np.ix_(yi, gi)].T
                offset = mean[yi] - gain @ mean[gi]
            else:
                gain = np.zeros((yi.size, 0))
                c_cov = cov[np.ix_(yi, yi)]
                offset = mean[yi]
            prec = np.linalg.inv(c_cov)
            logdet = np.linalg.slogdet(c_cov)[1]
            self._cache[key] = (gain, offset, prec, logdet)
        return self._cache[key]

    def phi_log_posterior(self, given: tuple[int, ...], xg: np.ndarray) -> np.ndarray:
        """Unnormalized ``log p(phi_k | x_given, y)`` for every chain (rows of ``xg``) and ``k``."""
        out = np.empty((xg.shape[0], self.K))
        with np.errstate(divide="ignore"):
            logw = np.log(self.phi_weights)
        for k in range(self.K):
            gain, offset, prec, logdet = self.y_given(k, given)
            r = self.y[None, :] - (offset[None, :] + xg @ gain.T)
            out[:, k] = logw[k] - 0.5 * np.einsum("ni,ij,nj->n", r, prec, r) - 0.5 * logdet
        return out

    def exact_phi_posterior(self) -> np.ndarray:
        lp = self.phi_log_posterior((), np.zeros((1, 0)))[0]
        return np.exp(lp - logsumexp(lp))

    def exact_x0_posterior(self):
        """Mixture over ``phi``: weights, per-``phi`` means and covariances of ``x_0 | y``."""
        w = self.exact_phi_posterior()
        means, covs = [], []
        for k in range(self.K):
            gx, c, chol = self.conditional(k, (0,), ())
            means.append(c)
            covs.append(chol @ chol.T)
        return w, np.array(means), np.array(covs)

    def sample_posterior(self, n: int, rng: np.random.Generator):
        """Direct iid draws of ``(x_0, phi)`` from the exact posterior."""
        w, means, covs = self.exact_x0_posterior()
        k = rng.choice(self.K, size=n, p=w)
        eps = rng.standard_normal((n, self.d))
        chols = np.linalg.cholesky(covs)
        x0 = means[k] + np.einsum("nij,nj->ni", chols[k], eps)
        return x0, self.phi_values[k]


# ---------------------------------------------------------------------------
# Jensen gap


def jensen_gap_monte_carlo(prior, A, y, sigma_y: float, x_t, sigma_t: float, n_samples: int,
                           rng: np.random.Generator) -> dict:
    """Monte Carlo estimates along the Jensen-gap inequality chain.

    Draws ``x_0 ~ p(x_0 | x_t)`` (exact, Gaussian or GMM prior), takes
    ``x_hat = E[x_0 | x_t]`` and reports the gap estimate
    ``|mean f(A x_0) - f(A x_hat)|`` with ``f = N(y; ., sigma_y^2 I)``, the
    Lipschitz-relaxed value, the moment ``m1`` and the resulting bound, all
    computed from the same draws.
    """
    a = np.atleast_2d(np.asarray(A, dtype=float))
    dy, d = a.shape
    y = np.asarray(y, dtype=float).reshape(-1)
    x_t = np.asarray(x_t, dtype=float).reshape(-1)
    v, s2 = prior.variance, sigma_t**2
    gain = v / (v + s2)
    post_var = v * s2 / (v + s2)
    if isinstance(prior, GaussianPrior):
        mu = np.broadcast_to(prior.mean, (d,))
        resp = np.array([1.0])
        comp_means = (mu + gain * (x_t - mu))[None, :]
    else:
        sq = np.sum((x_t[None, :] - prior.means) ** 2, axis=1)
        with np.errstate(divide="ignore"):
            logits = np.log(prior.weights) - 0.5 * sq / (v + s2)
        resp = np.exp(logits - logsumexp(logits))
        comp_means = prior.means + gain * (x_t[None, :] - prior.means)
    x_hat = resp @ comp_means
    comp = rng.choice(resp.size, size=n_samples, p=resp)
    x0 = comp_means[comp] + math.sqrt(post_var) * rng.standard_normal((n_samples, d))

    norm = (2 * math.pi * sigma_y**2) ** (-dy / 2)

    def f(mu_rows):
        r = y[None, :] - mu_rows
        return norm * np.exp(-0.5 * np.sum(r**2, axis=1) / sigma_y**2)

    hx0 = x0 @ a.T
    hxh = a @ x_hat
    lip = math.exp(-0.5) / (sigma_y * (math.sqrt(2 * math.pi * sigma_y**2)) ** dy)
    s1 = float(np.linalg.svd(a, compute_uv=False)[0])
    gap = abs(float(f(hx0).mean() - f(hxh[None, :])[0]))
    abs_mean = float(np.abs(f(hx0) - f(hxh[None, :])[0]).mean())
    lip_term = lip * float(np.linalg.norm(hx0 - hxh[None, :], axis=1).mean())
    m1 = float(np.linalg.norm(x0 - x_hat[None, :], axis=1).mean())
    return {
        "gap": gap,
        "mean_abs_difference": abs_mean,
        "lipschitz_term": lip_term,
        "bound": lip * s1 * m1,
        "m1": m1,
        "s1": s1,
        "x_hat": x_hat,
    }
