"""Langevin updates of the operator parameters ``phi``.

The conditional score combines the Gaussian data-fit gradient, evaluated at
the denoiser's clean-data estimate, with the score of a simple prior on
``phi``.  Setting ``noise_scale = 0`` turns every update into a plain
gradient-ascent (MAP) step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .operators import SpectralOperator, project_kernel_simplex
from .priors import Denoiser, LatentState

__all__ = [
    "PhiPrior",
    "LangevinConfig",
    "conditional_score_phi",
    "langevin_step",
    "langevin_run",
    "sample_phi",
    "gaussian_lipschitz_constant",
    "jensen_gap_bound",
]


@dataclass(frozen=True)
class PhiPrior:
    """``laplace``: -lam*sign(phi); ``gaussian``: -lam*phi; ``flat``: 0."""

    kind: str = "flat"
    lam: float = 0.0

    def __post_init__(self):
        if self.kind not in ("laplace", "gaussian", "flat"):
            raise ValueError(f"unknown phi prior {self.kind!r}")
        if self.kind != "flat" and not self.lam > 0:
            raise ValueError(f"{self.kind} prior needs lam > 0, got {self.lam!r}")

    @classmethod
    def laplace(cls, lam: float) -> "PhiPrior":
        return cls("laplace", lam)

    @classmethod
    def gaussian(cls, lam: float) -> "PhiPrior":
        return cls("gaussian", lam)

    @classmethod
    def flat(cls) -> "PhiPrior":
        return cls("flat", 0.0)

    def score(self, phi) -> np.ndarray:
        phi = np.asarray(phi, dtype=float)
        if self.kind == "laplace":
            # np.sign(0) == 0 picks the zero subgradient
            return -self.lam * np.sign(phi)
        if self.kind == "gaussian":
            return -self.lam * phi
        return np.zeros_like(phi)

    def log_density(self, phi) -> float:
        """Unnormalized log density."""
        phi = np.asarray(phi, dtype=float)
        if self.kind == "laplace":
            return float(-self.lam * np.abs(phi).sum())
        if self.kind == "gaussian":
            return float(-0.5 * self.lam * np.dot(phi, phi))
        return 0.0

    def to_dict(self) -> dict:
        return {"kind": self.kind, "lam": self.lam}


@dataclass(frozen=True)
class LangevinConfig:
    step_size: float = 1e-5
    n_steps: int = 20
    noise_scale: float = 1.0
    prior: PhiPrior = field(default_factory=PhiPrior.flat)
    project_simplex: bool = False
    projection: str = "step"
    refresh_xhat: bool = False

    def __post_init__(self):
        if not self.step_size > 0:
            raise ValueError(f"step_size must be positive, got {self.step_size!r}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"n_steps must be a positive integer, got {self.n_steps!r}")
        if self.noise_scale not in (0.0, 1.0):
            raise ValueError(f"noise_scale must be 0 (MAP) or 1 (Langevin), got {self.noise_scale!r}")
        if self.projection not in ("step", "run"):
            raise ValueError(f"projection must be 'step' or 'run', got {self.projection!r}")

    def to_dict(self) -> dict:
        return {
            "step_size": self.step_size,
            "n_steps": int(self.n_steps),
            "noise_scale": self.noise_scale,
            "prior": self.prior.to_dict(),
            "project_simplex": self.project_simplex,
            "projection": self.projection,
            "refresh_xhat": self.refresh_xhat,
        }


def conditional_score_phi(op: SpectralOperator, x_hat, y, sigma_y: float, prior: PhiPrior) -> np.ndarray:
    """Approximate ``grad_phi log p(phi | x_{t:T}, y)`` with ``x_hat`` as the clean-data proxy."""
    return op.datafit_grad(x_hat, y, sigma_y) + prior.score(op.phi)


def _project(op: SpectralOperator, phi: np.ndarray, config: LangevinConfig, when: str = "step") -> np.ndarray:
    if not config.project_simplex or config.projection != when:
        return phi
    if op.is_complex:
        raise ValueError("simplex projection needs a real kernel")
    return project_kernel_simplex(phi)


def langevin_step(op: SpectralOperator, x_hat, y, sigma_y: float, config: LangevinConfig,
                  rng: np.random.Generator) -> SpectralOperator:
    """One update ``phi + (xi/2) score + noise_scale * sqrt(xi) eps``.

    Returns a new operator carrying the updated parameters.  With
    ``projection="step"`` the simplex projection (if enabled) follows every
    step; with ``"run"`` it is left to ``langevin_run``/``sample_phi``.
    """
    score = conditional_score_phi(op, x_hat, y, sigma_y, config.prior)
    phi = op.phi + (config.step_size / 2) * score
    if config.noise_scale:
        phi = phi + config.noise_scale * math.sqrt(config.step_size) * rng.standard_normal(phi.shape)
    return op.with_phi(_project(op, phi, config))


def langevin_run(op: SpectralOperator, x_hat, y, sigma_y: float, config: LangevinConfig,
                 rng: np.random.Generator) -> SpectralOperator:
    for _ in range(int(config.n_steps)):
        op = langevin_step(op, x_hat, y, sigma_y, config, rng)
    return op.with_phi(_project(op, op.phi, config, "run"))


def sample_phi(op: SpectralOperator, state: LatentState, denoiser: Denoiser, y, sigma_y: float,
               config: LangevinConfig, rng: np.random.Generator) -> SpectralOperator:
    """Run ``config.n_steps`` Langevin steps against ``denoiser(x_t, sigma_t)``."""
    x_hat = denoiser(state.x, state.sigma)
    for i in range(int(config.n_steps)):
        if config.refresh_xhat and i > 0:
            x_hat = denoiser(state.x, state.sigma)
        op = langevin_step(op, x_hat, y, sigma_y, config, rng)
    return op.with_phi(_project(op, op.phi, config, "run"))


def gaussian_lipschitz_constant(sigma: float, d: int) -> float:
    """Lipschitz constant of an isotropic ``d``-variate Gaussian density in its argument."""
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma!r}")
    log_l = -0.5 - math.log(sigma) - 0.5 * d * math.log(2 * math.pi * sigma**2)
    return math.exp(log_l)


def jensen_gap_bound(sigma_y: float, d_y: int, s1: float, m1: float) -> float:
    """Upper bound ``L(sigma_y, d_y) * s1 * m1`` on ``|p(y|x_{t:T},phi) - p(y|x_hat,phi)|``."""
    if not sigma_y > 0:
        raise ValueError(f"sigma_y must be positive, got {sigma_y!r}")
    if d_y < 1 or s1 < 0 or m1 < 0:
        raise ValueError("need d_y >= 1, s1 >= 0 and m1 >= 0")
    return gaussian_lipschitz_constant(sigma_y, d_y) * s1 * m1
