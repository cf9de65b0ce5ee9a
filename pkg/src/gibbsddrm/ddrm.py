"""Spectral-space DDRM conditionals with the operator parameters held as given.

``sample_xT`` draws the initial latent from ``p(x_T | phi, y)`` and
``sample_xt`` draws ``x_t`` from ``p(x_t | x_{t+1}, phi, y)``.  Both work bin
by bin in the operator's spectral coordinates; noise is drawn white in signal
space and rotated into those coordinates, which keeps circulant samples real.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .operators import SpectralOperator
from .priors import Denoiser, LatentState, NoiseSchedule
from .result import RestorationResult, SamplingError

__all__ = [
    "DdrmParams",
    "BRANCH_NULL",
    "BRANCH_NOISY",
    "BRANCH_INFORMED",
    "xT_moments",
    "xt_moments",
    "sample_xT",
    "sample_xt",
    "run_ddrm",
]

BRANCH_NULL = 0  # s_i == 0
BRANCH_NOISY = 1  # sigma_t < sigma_y / s_i
BRANCH_INFORMED = 2  # sigma_t >= sigma_y / s_i


@dataclass(frozen=True)
class DdrmParams:
    eta: float = 0.85
    eta_b: float = 1.0
    sigma_y: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must lie in [0, 1], got {self.eta!r}")
        if not 0.0 <= self.eta_b <= 1.0:
            raise ValueError(f"eta_b must lie in [0, 1], got {self.eta_b!r}")
        if not self.sigma_y >= 0.0:
            raise ValueError(f"sigma_y must be nonnegative, got {self.sigma_y!r}")

    def to_dict(self) -> dict:
        return {"eta": self.eta, "eta_b": self.eta_b, "sigma_y": self.sigma_y}


def _standard_noise(op: SpectralOperator, rng: np.random.Generator) -> np.ndarray:
    if op.is_complex:
        z = rng.standard_normal((2, *op.x_shape))
        return (z[0] + 1j * z[1]) / np.sqrt(2.0)
    return rng.standard_normal(op.x_shape)


def _noise_ratio(s: np.ndarray, mask: np.ndarray, sigma_y: float) -> np.ndarray:
    """``sigma_y / s_i`` on nonzero bins (0 when sigma_y is 0), inf on null bins."""
    ratio = np.full(s.shape, np.inf)
    ratio[mask] = sigma_y / s[mask] if sigma_y > 0 else 0.0
    return ratio


def xT_moments(ybar, s, mask, sigma_T: float, sigma_y: float):
    """Per-bin mean and variance of the initial latent.

    Bins whose variance ``sigma_T^2 - sigma_y^2 / s_i^2`` would be negative are
    treated as null bins.
    """
    ratio = _noise_ratio(s, mask, sigma_y)
    var = sigma_T**2 - np.where(mask, ratio**2, 0.0)
    informed = mask & (var >= 0)
    mean = np.where(informed, ybar, 0.0)
    var = np.where(informed, var, sigma_T**2)
    return mean, var


def xt_moments(xbar_next, xbar_hat, ybar, s, mask, sigma_t, sigma_next, params: DdrmParams):
    """Per-bin mean, variance and branch index of ``x_t | x_{t+1}, phi, y``."""
    eta, eta_b, sigma_y = params.eta, params.eta_b, params.sigma_y
    ratio = _noise_ratio(s, mask, sigma_y)
    branch = np.full(s.shape, BRANCH_NULL, dtype=np.int8)
    branch[mask & (sigma_t < ratio)] = BRANCH_NOISY
    branch[mask & (sigma_t >= ratio)] = BRANCH_INFORMED

    c = np.sqrt(1.0 - eta**2) * sigma_t
    mean = np.empty(np.shape(xbar_hat), dtype=np.result_type(xbar_hat, ybar, xbar_next))
    var = np.empty(s.shape)

    b = branch == BRANCH_NULL
    mean[b] = xbar_hat[b] + c * (xbar_next[b] - xbar_hat[b]) / sigma_next
    var[b] = eta**2 * sigma_t**2

    b = branch == BRANCH_NOISY
    mean[b] = xbar_hat[b] + c * (ybar[b] - xbar_hat[b]) / ratio[b]
    var[b] = eta**2 * sigma_t**2

    b = branch == BRANCH_INFORMED
    mean[b] = (1.0 - eta_b) * xbar_hat[b] + eta_b * ybar[b]
    var[b] = np.maximum(sigma_t**2 - ratio[b] ** 2 * eta_b**2, 0.0)
    return mean, var, branch


def sample_xT(op: SpectralOperator, y, schedule: NoiseSchedule, params: DdrmParams,
              rng: np.random.Generator) -> LatentState:
    if not isinstance(schedule, NoiseSchedule):
        raise ValueError("schedule must be a NoiseSchedule")
    T = schedule.T
    s = op.spectral_singular_values()
    mean, var = xT_moments(op.to_spectral_measurement(y), s, op.nonzero_mask(), schedule[T], params.sigma_y)
    eps = op.to_spectral_data(_standard_noise(op, rng))
    x = op.from_spectral_data(mean + np.sqrt(var) * eps)
    return LatentState(T, x, schedule[T])


def _sample_xt(op, x_next: LatentState, y, schedule, params, denoiser, rng, x_hat=None):
    t = x_next.t - 1
    if not 0 <= t < schedule.T:
        raise ValueError(f"cannot step down from t={x_next.t} on a schedule with T={schedule.T}")
    sigma_t, sigma_next = schedule[t], schedule[t + 1]
    if x_hat is None:
        x_hat = denoiser(x_next.x, sigma_next)
    s = op.spectral_singular_values()
    mean, var, _ = xt_moments(
        op.to_spectral_data(x_next.x),
        op.to_spectral_data(x_hat),
        op.to_spectral_measurement(y),
        s,
        op.nonzero_mask(),
        sigma_t,
        sigma_next,
        params,
    )
    eps = op.to_spectral_data(_standard_noise(op, rng))
    x = op.from_spectral_data(mean + np.sqrt(var) * eps)
    return LatentState(t, x, sigma_t), x_hat


def sample_xt(op: SpectralOperator, x_next: LatentState, y, schedule: NoiseSchedule,
              params: DdrmParams, denoiser: Denoiser, rng: np.random.Generator) -> LatentState:
    """Draw ``x_t`` given ``x_{t+1}``; the denoiser is evaluated at ``(x_{t+1}, sigma_{t+1})``."""
    return _sample_xt(op, x_next, y, schedule, params, denoiser, rng)[0]


def check_finite(x, step: dict):
    if not np.all(np.isfinite(x)):
        raise SamplingError(f"non-finite value at {step}", step)


def run_ddrm(op: SpectralOperator, y, schedule: NoiseSchedule, params: DdrmParams,
             denoiser: Denoiser, rng: np.random.Generator) -> RestorationResult:
    """Non-blind DDRM: ``x_T`` then ``x_{T-1}, ..., x_0`` with ``phi`` fixed."""
    start = time.perf_counter()
    calls = 0

    def counted(x, sigma):
        nonlocal calls
        calls += 1
        return denoiser(x, sigma)

    state = sample_xT(op, y, schedule, params, rng)
    check_finite(state.x, {"op": "x", "t": state.t})
    events = [("x", schedule.T, 0)]
    trace = []
    for _ in range(schedule.T):
        state, x_hat = _sample_xt(op, state, y, schedule, params, counted, rng)
        check_finite(state.x, {"op": "x", "t": state.t})
        events.append(("x", state.t, 0))
        trace.append({"t": state.t, "residual": op.residual_norm(x_hat, y), "denoiser_evals": calls})
    return RestorationResult(
        x0=state.x,
        phi=op.phi,
        trace=trace,
        events=events,
        denoiser_evals=calls,
        phi_updates=0,
        timing={"seconds": time.perf_counter() - start},
        config={"mode": "ddrm", "ddrm": params.to_dict(), "schedule": schedule.to_dict()},
    )
