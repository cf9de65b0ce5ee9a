"""Noise schedules and analytic denoisers.

The diffusion convention throughout the package is variance-exploding:
``x_t = x_0 + sigma_t * eps``.  Denoisers map ``(x_t, sigma_t)`` to the exact
conditional mean ``E[x_0 | x_t]`` for a known prior, standing in for a learned
network.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

__all__ = [
    "NoiseSchedule",
    "make_linear_schedule",
    "make_geometric_schedule",
    "Denoiser",
    "GaussianPrior",
    "GmmPrior",
    "CountingDenoiser",
    "LatentState",
    "gaussian_denoise",
    "gmm_denoise",
    "load_gmm_json",
    "save_gmm_json",
]


@dataclass(frozen=True)
class NoiseSchedule:
    """Increasing noise ladder ``0 = sigma_0 < sigma_1 < ... < sigma_T``."""

    sigmas: tuple[float, ...]

    def __post_init__(self):
        sig = tuple(float(s) for s in self.sigmas)
        object.__setattr__(self, "sigmas", sig)
        if len(sig) < 2:
            raise ValueError("schedule needs at least two levels (T >= 1)")
        if sig[0] != 0.0:
            raise ValueError(f"sigma_0 must be 0, got {sig[0]}")
        if any(not np.isfinite(s) for s in sig):
            raise ValueError("schedule contains non-finite values")
        if any(b <= a for a, b in zip(sig[:-1], sig[1:])):
            raise ValueError("schedule must be strictly increasing")

    @property
    def T(self) -> int:
        return len(self.sigmas) - 1

    def __getitem__(self, t: int) -> float:
        return self.sigmas[t]

    def to_dict(self) -> dict:
        return {"sigmas": list(self.sigmas)}


def make_linear_schedule(T: int, sigma_max: float) -> NoiseSchedule:
    if int(T) != T or T < 1:
        raise ValueError(f"T must be a positive integer, got {T!r}")
    if not sigma_max > 0:
        raise ValueError(f"sigma_max must be positive, got {sigma_max!r}")
    T = int(T)
    return NoiseSchedule(tuple(sigma_max * t / T for t in range(T + 1)))


def make_geometric_schedule(T: int, sigma_min: float, sigma_max: float) -> NoiseSchedule:
    """sigma_0 = 0 followed by T geometrically spaced levels in [sigma_min, sigma_max]."""
    if int(T) != T or T < 1:
        raise ValueError(f"T must be a positive integer, got {T!r}")
    if not 0 < sigma_min < sigma_max:
        raise ValueError("need 0 < sigma_min < sigma_max")
    if T == 1:
        return NoiseSchedule((0.0, float(sigma_max)))
    levels = np.geomspace(sigma_min, sigma_max, int(T))
    return NoiseSchedule((0.0, *levels.tolist()))


@dataclass(frozen=True)
class LatentState:
    """The latent ``x_t`` together with its step index and noise level."""

    t: int
    x: np.ndarray
    sigma: float = 0.0


class Denoiser:
    """Deterministic map ``(x_noisy, sigma) -> estimate of x_0``."""

    def estimate(self, x: np.ndarray, sigma: float) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x: np.ndarray, sigma: float) -> np.ndarray:
        return self.estimate(x, sigma)


@dataclass(frozen=True, eq=False)
class GaussianPrior(Denoiser):
    """Isotropic Gaussian prior ``N(mean, variance * I)``."""

    mean: np.ndarray
    variance: float

    def __post_init__(self):
        object.__setattr__(self, "mean", np.atleast_1d(np.asarray(self.mean, dtype=float)))
        if not self.variance > 0:
            raise ValueError("prior variance must be positive")

    @property
    def dim(self) -> int:
        return self.mean.size

    def estimate(self, x, sigma):
        return gaussian_denoise(self, x, sigma)

    def sample(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        shape = self.mean.shape if size is None else (size, *self.mean.shape)
        return self.mean + np.sqrt(self.variance) * rng.standard_normal(shape)


@dataclass(frozen=True, eq=False)
class GmmPrior(Denoiser):
    """Mixture of isotropic Gaussians sharing one component variance.

    ``means`` has shape ``(K, d)``; ``weights`` has length ``K``.
    """

    weights: np.ndarray
    means: np.ndarray
    variance: float

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        mu = np.asarray(self.means, dtype=float)
        if mu.ndim == 1:
            mu = mu[:, None]
        if w.size == 0 or mu.shape[0] == 0:
            raise ValueError("mixture must have at least one component")
        if w.shape[0] != mu.shape[0]:
            raise ValueError(f"{w.shape[0]} weights but {mu.shape[0]} component means")
        if np.any(w < 0):
            raise ValueError("mixture weights must be nonnegative")
        if not np.isclose(w.sum(), 1.0, rtol=0, atol=1e-9):
            raise ValueError(f"mixture weights must sum to 1, got {w.sum()!r}")
        if not self.variance > 0:
            raise ValueError("component variance must be positive")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def estimate(self, x, sigma):
        return gmm_denoise(self, x, sigma)

    def sample(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        n = 1 if size is None else size
        comp = rng.choice(len(self.weights), size=n, p=self.weights)
        out = self.means[comp] + np.sqrt(self.variance) * rng.standard_normal((n, self.dim))
        return out[0] if size is None else out

    def posterior_components(self, x: np.ndarray, sigma: float):
        """Responsibilities and per-component posterior means/variance of ``x_0 | x_t = x``."""
        x = np.asarray(x, dtype=float).reshape(-1)
        v, s2 = self.variance, float(sigma) ** 2
        sq = np.sum((x[None, :] - self.means) ** 2, axis=1)
        logits = np.log(np.maximum(self.weights, 1e-300)) - 0.5 * sq / (v + s2)
        logits[self.weights == 0] = -np.inf
        resp = np.exp(logits - logsumexp(logits))
        gain = v / (v + s2)
        comp_means = self.means + gain * (x[None, :] - self.means)
        return resp, comp_means, v * s2 / (v + s2)

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "variance": float(self.variance),
        }


def _check_sigma(sigma):
    if not sigma >= 0:
        raise ValueError(f"sigma must be nonnegative, got {sigma!r}")


def gaussian_denoise(prior: GaussianPrior, x, sigma: float) -> np.ndarray:
    _check_sigma(sigma)
    x = np.asarray(x)
    flat = x.reshape(-1)
    mu = prior.mean
    if mu.size == 1 and flat.size != 1:
        mu = np.full(flat.shape, mu[0])
    if mu.size != flat.size:
        raise ValueError(f"dimension mismatch: prior has dim {mu.size}, input has {flat.size}")
    if sigma == 0:
        return x.copy()
    gain = prior.variance / (prior.variance + sigma**2)
    return (mu + gain * (flat - mu)).reshape(x.shape)


def gmm_denoise(prior: GmmPrior, x, sigma: float) -> np.ndarray:
    """Tweedie/MMSE estimate ``E[x_0 | x_0 + sigma*eps = x]`` under a GMM prior."""
    _check_sigma(sigma)
    x = np.asarray(x)
    if np.iscomplexobj(x):
        raise TypeError("GMM denoiser is defined for real signals only")
    if x.size != prior.dim:
        raise ValueError(f"dimension mismatch: prior has dim {prior.dim}, input has {x.size}")
    if sigma == 0:
        return x.astype(float, copy=True)
    resp, comp_means, _ = prior.posterior_components(x, sigma)
    return (resp @ comp_means).reshape(x.shape)


class CountingDenoiser(Denoiser):
    """Wraps a denoiser and counts how many times it is evaluated."""

    def __init__(self, inner: Denoiser):
        self.inner = inner
        self.calls = 0

    def estimate(self, x, sigma):
        self.calls += 1
        return self.inner(x, sigma)


def load_gmm_json(path: str | Path) -> GmmPrior:
    """Read ``{"weights": [...], "means": [[...], ...], "variance": v}``."""
    doc = json.loads(Path(path).read_text())
    try:
        return GmmPrior(doc["weights"], doc["means"], doc["variance"])
    except KeyError as exc:
        raise ValueError(f"GMM document {path} is missing field {exc.args[0]!r}") from None


def save_gmm_json(prior: GmmPrior, path: str | Path) -> None:
    Path(path).write_text(json.dumps(prior.to_dict(), indent=2) + "\n")
