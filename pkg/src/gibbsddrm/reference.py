"""Exact-conditional Gibbs samplers on the linear-Gaussian toy chain.

Four orderings of the same target ``p(x_{0:T}, phi | y)``:

``sampler1``  full conditionals, ``x_T`` down to ``x_0`` then ``phi``;
``sampler2``  the partially collapsed order, conditioning on the previous
              sweep's lower latents (``psi``) that ``pcgs`` later trims;
``sampler3``  as ``sampler2`` but drawing ``psi`` jointly with each step;
``pcgs``      the trimmed order used by ``run_gibbsddrm``.

Every chain is vectorized over ``n_chains`` independent copies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .oracle import ToyModel
from .pcgs import GibbsStep, validate_schedule

__all__ = ["VARIANTS", "ReferenceChain", "run_reference_samplers", "reference_schedule"]

VARIANTS = ("sampler1", "sampler2", "sampler3", "pcgs")


@dataclass
class ReferenceChain:
    x: np.ndarray  # (n_samples, T+1, d)
    phi: np.ndarray  # (n_samples,)
    phi_index: np.ndarray
    variant: str

    @property
    def x0(self) -> np.ndarray:
        return self.x[:, 0, :]


def reference_schedule(variant: str, T: int, M) -> list[GibbsStep]:
    """Abstract step list of one sweep, in the form checked by ``validate_schedule``."""
    xs = [f"x{t}" for t in range(T + 1)]
    allx = set(xs)
    steps: list[GibbsStep] = []
    if variant == "sampler1":
        for t in range(T, -1, -1):
            steps.append(GibbsStep.of({xs[t]}, (allx - {xs[t]}) | {"phi"}, (), f"x{t}"))
        steps.append(GibbsStep.of({"phi"}, allx, (), "phi"))
        return steps
    if variant in ("sampler2", "sampler3"):
        joint = variant == "sampler3"
        for t in range(T, -1, -1):
            below = set(xs[:t])
            sample = {xs[t]} | (below if joint else set())
            given = (allx - sample) | {"phi"}
            steps.append(GibbsStep.of(sample, given, (), f"x{t}"))
            for m in range(1, (M[t] if t < T else 0) + 1):
                psample = {"phi"} | (below if joint else set())
                steps.append(GibbsStep.of(psample, allx - psample, (), f"phi@t={t},m={m}"))
                steps.append(GibbsStep.of(sample, given, (), f"x{t},m={m}"))
        return steps
    if variant == "pcgs":
        from .pcgs import pcgs_schedule

        return pcgs_schedule(T, M)
    raise ValueError(f"unknown reference sampler {variant!r}; expected one of {VARIANTS}")


class _Chains:
    def __init__(self, toy: ToyModel, n: int, rng: np.random.Generator):
        self.toy, self.n, self.rng = toy, n, rng
        d, T = toy.d, toy.T
        x0 = toy.prior_mean + np.sqrt(toy.prior_var) * rng.standard_normal((n, d))
        xs = [x0]
        for t in range(1, T + 1):
            inc = np.sqrt(toy.sigmas[t] ** 2 - toy.sigmas[t - 1] ** 2)
            xs.append(xs[-1] + inc * rng.standard_normal((n, d)))
        self.x = np.stack(xs, axis=1)
        self.k = rng.choice(toy.K, size=n, p=toy.phi_weights)

    def draw_x(self, target: tuple[int, ...], given: tuple[int, ...]):
        """Draw ``x_target | x_given, phi, y`` for every chain."""
        toy, n = self.toy, self.n
        target, given = tuple(sorted(target)), tuple(sorted(given))
        dim = len(target) * toy.d
        eps = self.rng.standard_normal((n, dim))
        xg = self.x[:, list(given), :].reshape(n, -1)
        out = np.empty((n, dim))
        for k in range(toy.K):
            sel = self.k == k
            if not np.any(sel):
                continue
            gain, offset, chol = toy.conditional(k, target, given)
            out[sel] = offset + xg[sel] @ gain.T + eps[sel] @ chol.T
        self.x[:, list(target), :] = out.reshape(n, len(target), toy.d)

    def draw_phi(self, given: tuple[int, ...]):
        """Draw ``phi | x_given, y`` for every chain."""
        xg = self.x[:, list(sorted(given)), :].reshape(self.n, -1)
        logp = self.toy.phi_log_posterior(tuple(sorted(given)), xg)
        logp -= logp.max(axis=1, keepdims=True)
        p = np.exp(logp)
        p /= p.sum(axis=1, keepdims=True)
        u = self.rng.random((self.n, 1))
        self.k = np.minimum((np.cumsum(p, axis=1) < u).sum(axis=1), self.toy.K - 1)


def _sweep(ch: _Chains, variant: str, M):
    T = ch.toy.T
    allx = tuple(range(T + 1))
    if variant == "sampler1":
        for t in range(T, -1, -1):
            ch.draw_x((t,), tuple(s for s in allx if s != t))
        ch.draw_phi(allx)
        return
    if variant == "pcgs":
        ch.draw_x((T,), ())
        for t in range(T - 1, -1, -1):
            above = tuple(range(t + 1, T + 1))
            ch.draw_x((t,), above)
            for _ in range(M[t]):
                ch.draw_phi((t,) + above)
                ch.draw_x((t,), above)
        return
    joint = variant == "sampler3"
    for t in range(T, -1, -1):
        below = tuple(range(t))
        above = tuple(range(t + 1, T + 1))
        target = below + (t,) if joint else (t,)
        given = above if joint else below + above
        ch.draw_x(target, given)
        for _ in range(M[t] if t < T else 0):
            if joint:
                ch.draw_phi((t,) + above)
                if below:
                    ch.draw_x(below, (t,) + above)
            else:
                ch.draw_phi(allx)
            ch.draw_x(target, given)


def run_reference_samplers(toy: ToyModel, variant: str, sweeps: int, rng: np.random.Generator,
                           n_chains: int = 1, burn_in: int = 0, M=None) -> ReferenceChain:
    """Run ``sweeps`` recorded sweeps (after ``burn_in``) of ``n_chains`` parallel chains.

    ``M`` gives the inner ``phi`` counts ``M_t`` for ``t = 0..T-1`` (default
    one each).  Samples are the state at the end of every recorded sweep.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown reference sampler {variant!r}; expected one of {VARIANTS}")
    if not isinstance(toy, ToyModel):
        raise ValueError("run_reference_samplers needs a ToyModel")
    if sweeps < 1 or n_chains < 1 or burn_in < 0:
        raise ValueError("sweeps and n_chains must be positive, burn_in nonnegative")
    T = toy.T
    M = (1,) * T if M is None else tuple(int(m) for m in M)
    if len(M) != T or any(m < 0 for m in M):
        raise ValueError(f"M must have {T} nonnegative entries")
    validate_schedule(reference_schedule(variant, T, M))
    ch = _Chains(toy, n_chains, rng)
    xs, ks = [], []
    for i in range(burn_in + sweeps):
        _sweep(ch, variant, M)
        if i >= burn_in:
            xs.append(ch.x.copy())
            ks.append(ch.k.copy())
    x = np.concatenate(xs, axis=0)
    k = np.concatenate(ks, axis=0)
    return ReferenceChain(x, toy.phi_values[k], k, variant)
