"""Partially collapsed Gibbs driver and the blocked-Gibbs baseline.

One cycle samples ``x_T``; then for ``t = T-1, ..., 0`` it samples ``x_t`` once
and alternates ``M_t`` times between a Langevin update of ``phi`` and a
resample of ``x_t``.  ``phi`` carries over between cycles, the latents do
not.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .ddrm import DdrmParams, _sample_xt, check_finite, sample_xT
from .operators import CirculantConvOperator, SpectralOperator, gaussian_kernel, project_kernel_simplex
from .phi_sampler import LangevinConfig, langevin_run, sample_phi
from .priors import CountingDenoiser, Denoiser, LatentState, NoiseSchedule
from .result import RestorationResult

__all__ = [
    "InitStrategy",
    "PcgsConfig",
    "two_regime_m",
    "register_init",
    "TrimmingError",
    "LatentStore",
    "GibbsStep",
    "validate_schedule",
    "pcgs_schedule",
    "run_gibbsddrm",
    "run_blocked_gibbs",
]

_INIT_REGISTRY: dict[str, Callable] = {}


def register_init(name: str, fn: Callable | None = None):
    """Register ``fn(op, y, rng) -> phi`` as a named initialization heuristic."""

    def deco(f):
        _INIT_REGISTRY[name] = f
        return f

    return deco(fn) if fn is not None else deco


@register_init("gaussian_kernel")
def _gaussian_kernel_init(op, y, rng, width: float = 1.0):
    if not isinstance(op, CirculantConvOperator):
        raise ValueError("gaussian_kernel initialization needs a circulant operator")
    return gaussian_kernel(op.kernel.shape, width).reshape(-1)


@dataclass(frozen=True)
class InitStrategy:
    """How ``phi`` is initialized: ``prior`` draw, ``fixed`` value or a registered ``heuristic``."""

    kind: str = "fixed"
    phi0: tuple[float, ...] | None = None
    name: str | None = None
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("prior", "fixed", "heuristic"):
            raise ValueError(f"unknown init strategy {self.kind!r}")
        if self.kind == "heuristic" and self.name not in _INIT_REGISTRY:
            raise ValueError(f"unknown init heuristic {self.name!r}; known: {sorted(_INIT_REGISTRY)}")
        if self.phi0 is not None:
            object.__setattr__(self, "phi0", tuple(float(v) for v in np.ravel(self.phi0)))

    @classmethod
    def fixed(cls, phi0=None) -> "InitStrategy":
        return cls("fixed", phi0)

    @classmethod
    def from_prior(cls) -> "InitStrategy":
        return cls("prior")

    @classmethod
    def heuristic(cls, name: str, **options) -> "InitStrategy":
        return cls("heuristic", None, name, options)

    def resolve(self, op: SpectralOperator, y, langevin: LangevinConfig, rng) -> SpectralOperator:
        if self.kind == "fixed":
            phi = op.phi if self.phi0 is None else np.asarray(self.phi0)
        elif self.kind == "prior":
            prior = langevin.prior
            shape = op.phi.shape
            if prior.kind == "laplace":
                phi = rng.laplace(0.0, 1.0 / prior.lam, shape)
            elif prior.kind == "gaussian":
                phi = rng.standard_normal(shape) / np.sqrt(prior.lam)
            else:
                raise ValueError("cannot draw an initial phi from a flat prior")
        else:
            phi = np.asarray(_INIT_REGISTRY[self.name](op, y, rng, **self.options))
        if langevin.project_simplex:
            phi = project_kernel_simplex(phi)
        return op.with_phi(phi)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "phi0": None if self.phi0 is None else list(self.phi0),
                "name": self.name, "options": dict(self.options)}


def two_regime_m(T: int, t_switch: int, m: int) -> tuple[int, ...]:
    """``M_t = 0`` for ``t >= t_switch`` and ``m`` below it, for ``t = 0..T-1``."""
    return tuple(m if t < t_switch else 0 for t in range(T))


@dataclass(frozen=True)
class PcgsConfig:
    N: int = 1
    M: Sequence[int] | Callable[[int], int] = ()
    ddrm: DdrmParams = field(default_factory=DdrmParams)
    langevin: LangevinConfig = field(default_factory=LangevinConfig)
    phi_init: InitStrategy = field(default_factory=InitStrategy)
    trace_granularity: str = "per_t"

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N!r}")
        if self.trace_granularity not in ("per_t", "per_inner"):
            raise ValueError(f"unknown trace granularity {self.trace_granularity!r}")
        if not callable(self.M):
            object.__setattr__(self, "M", tuple(int(m) for m in self.M))
            if any(m < 0 for m in self.M):
                raise ValueError("M_t must be nonnegative")

    def m_table(self, T: int) -> tuple[int, ...]:
        if callable(self.M):
            table = tuple(int(self.M(t)) for t in range(T))
        elif len(self.M) == 0:
            table = (0,) * T
        else:
            table = self.M
        if len(table) != T:
            raise ValueError(f"M has {len(table)} entries but the schedule has T={T}")
        if any(m < 0 for m in table):
            raise ValueError("M_t must be nonnegative")
        return table

    def to_dict(self, T: int | None = None) -> dict:
        m = list(self.m_table(T)) if T is not None else (None if callable(self.M) else list(self.M))
        return {
            "N": int(self.N),
            "M": m,
            "ddrm": self.ddrm.to_dict(),
            "langevin": self.langevin.to_dict(),
            "phi_init": self.phi_init.to_dict(),
            "trace_granularity": self.trace_granularity,
        }


class TrimmingError(RuntimeError):
    pass


class LatentStore:
    """Holds the latents drawn in the current cycle and refuses stale reads.

    Within a cycle, once step ``t`` has begun only ``x_{t+1}, ..., x_T`` drawn
    in this cycle may be read; anything older was trimmed.
    """

    def __init__(self, T: int):
        self.T = T
        self._fresh: dict[int, LatentState] = {}
        self.step = T

    def begin_cycle(self):
        self._fresh.clear()
        self.step = self.T

    def begin_step(self, t: int):
        self.step = t

    def put(self, state: LatentState):
        self._fresh[state.t] = state

    def get(self, t: int) -> LatentState:
        if t < self.step or t not in self._fresh:
            raise TrimmingError(f"x_{t} read during step t={self.step} before being resampled this cycle")
        return self._fresh[t]


@dataclass(frozen=True)
class GibbsStep:
    """One sampling step: draws ``sample``, conditions on ``given``, discards ``trimmed``."""

    sample: frozenset
    given: frozenset
    trimmed: frozenset = frozenset()
    label: str = ""

    @classmethod
    def of(cls, sample, given=(), trimmed=(), label=""):
        return cls(frozenset(sample), frozenset(given), frozenset(trimmed), label)


def validate_schedule(steps: Sequence[GibbsStep], cycles: int = 2) -> None:
    """Raise ``TrimmingError`` if a trimmed variable is conditioned on before it is resampled.

    The schedule is unrolled ``cycles`` times so that conditioning across the
    cycle boundary is checked too.
    """
    stale: set = set()
    for c in range(cycles):
        for i, st in enumerate(steps):
            bad = st.given & stale
            if bad:
                name = st.label or f"step {i + 1}"
                raise TrimmingError(f"{name} (cycle {c + 1}) conditions on trimmed {sorted(bad)}")
            stale -= st.sample
            stale |= st.trimmed - st.sample


def pcgs_schedule(T: int, M: Sequence[int]) -> list[GibbsStep]:
    """Abstract step list of the partially collapsed sampler for validation."""
    xs = [f"x{t}" for t in range(T + 1)]
    steps = [GibbsStep.of({xs[T]}, {"phi"}, xs[:T], f"x{T}")]
    for t in range(T - 1, -1, -1):
        above = set(xs[t + 1:])
        steps.append(GibbsStep.of({xs[t]}, above | {"phi"}, xs[:t], f"x{t}"))
        for m in range(1, M[t] + 1):
            steps.append(GibbsStep.of({"phi"}, above | {xs[t]}, xs[:t], f"phi@t={t},m={m}"))
            steps.append(GibbsStep.of({xs[t]}, above | {"phi"}, xs[:t], f"x{t},m={m}"))
    return steps


def _snapshot(op, y, x_hat, counter, phi_updates, **where):
    rec = dict(where)
    rec["residual"] = op.residual_norm(x_hat, y)
    rec["phi"] = op.phi.tolist()
    rec["denoiser_evals"] = counter.calls
    rec["phi_updates"] = phi_updates
    return rec


def run_gibbsddrm(op: SpectralOperator, y, schedule: NoiseSchedule, denoiser: Denoiser,
                  config: PcgsConfig, rng: np.random.Generator) -> RestorationResult:
    start = time.perf_counter()
    T = schedule.T
    M = config.m_table(T)
    validate_schedule(pcgs_schedule(T, M))
    params, lcfg = config.ddrm, config.langevin
    sigma_y = params.sigma_y
    op = config.phi_init.resolve(op, y, lcfg, rng)
    counter = CountingDenoiser(denoiser)
    store = LatentStore(T)
    trace: list[dict] = []
    events: list[tuple[str, int, int]] = []
    phi_updates = 0
    per_inner = config.trace_granularity == "per_inner"
    after = np.concatenate([np.cumsum(np.asarray(M[::-1]))[::-1][1:], [0]]).astype(int) if T else []

    for n in range(1, config.N + 1):
        K = 0
        store.begin_cycle()
        state = sample_xT(op, y, schedule, params, rng)
        check_finite(state.x, {"cycle": n, "op": "x", "t": T, "m": 0})
        store.put(state)
        events.append(("x", T, 0))
        for t in range(T - 1, -1, -1):
            store.begin_step(t)
            x_next = store.get(t + 1)
            x_hat = counter(x_next.x, x_next.sigma)
            state, _ = _sample_xt(op, x_next, y, schedule, params, counter, rng, x_hat=x_hat)
            check_finite(state.x, {"cycle": n, "op": "x", "t": t, "m": 0})
            events.append(("x", t, 0))
            for m in range(1, M[t] + 1):
                op = sample_phi(op, state, counter, y, sigma_y, lcfg, rng)
                K += 1
                phi_updates += 1
                check_finite(op.phi, {"cycle": n, "op": "phi", "t": t, "m": m})
                if K != after[t] + m:
                    raise AssertionError(f"phi-update count K={K} inconsistent at t={t}, m={m}")
                events.append(("phi", t, m))
                state, _ = _sample_xt(op, store.get(t + 1), y, schedule, params, counter, rng, x_hat=x_hat)
                check_finite(state.x, {"cycle": n, "op": "x", "t": t, "m": m})
                events.append(("x", t, m))
                if per_inner:
                    trace.append(_snapshot(op, y, x_hat, counter, phi_updates, cycle=n, t=t, m=m, K=K))
            store.put(state)
            if not per_inner or M[t] == 0:
                trace.append(_snapshot(op, y, x_hat, counter, phi_updates, cycle=n, t=t, m=M[t], K=K))

    return RestorationResult(
        x0=state.x,
        phi=op.phi,
        trace=trace,
        events=events,
        denoiser_evals=counter.calls,
        phi_updates=phi_updates,
        timing={"seconds": time.perf_counter() - start},
        config={"mode": "gibbsddrm", "pcgs": config.to_dict(T), "schedule": schedule.to_dict()},
    )


def run_blocked_gibbs(op: SpectralOperator, y, schedule: NoiseSchedule, denoiser: Denoiser,
                      config: PcgsConfig, rng: np.random.Generator,
                      phi_updates_per_round: int | None = None) -> RestorationResult:
    """Alternate full DDRM sweeps (``phi`` fixed) with ``phi`` updates against the swept ``x_0``.

    ``phi_updates_per_round`` defaults to ``sum(M_t)`` so one round spends the
    same ``phi`` budget as one partially collapsed cycle.
    """
    start = time.perf_counter()
    T = schedule.T
    if phi_updates_per_round is None:
        phi_updates_per_round = sum(config.m_table(T))
    params, lcfg = config.ddrm, config.langevin
    op = config.phi_init.resolve(op, y, lcfg, rng)
    counter = CountingDenoiser(denoiser)
    trace: list[dict] = []
    events: list[tuple[str, int, int]] = []
    phi_updates = 0
    for n in range(1, config.N + 1):
        state = sample_xT(op, y, schedule, params, rng)
        check_finite(state.x, {"cycle": n, "op": "x", "t": T, "m": 0})
        events.append(("x", T, 0))
        for _ in range(T):
            state, x_hat = _sample_xt(op, state, y, schedule, params, counter, rng)
            check_finite(state.x, {"cycle": n, "op": "x", "t": state.t, "m": 0})
            events.append(("x", state.t, 0))
            trace.append(_snapshot(op, y, x_hat, counter, phi_updates, cycle=n, t=state.t, m=0))
        for m in range(1, phi_updates_per_round + 1):
            op = langevin_run(op, state.x, y, params.sigma_y, lcfg, rng)
            phi_updates += 1
            check_finite(op.phi, {"cycle": n, "op": "phi", "t": 0, "m": m})
            events.append(("phi", 0, m))
            trace.append(_snapshot(op, y, state.x, counter, phi_updates, cycle=n, t=0, m=m))
    return RestorationResult(
        x0=state.x,
        phi=op.phi,
        trace=trace,
        events=events,
        denoiser_evals=counter.calls,
        phi_updates=phi_updates,
        timing={"seconds": time.perf_counter() - start},
        config={"mode": "blocked", "pcgs": config.to_dict(T), "phi_updates_per_round": phi_updates_per_round,
                "schedule": schedule.to_dict()},
    )
