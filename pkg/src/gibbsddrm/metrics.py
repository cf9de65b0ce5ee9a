"""Restoration metrics: MSE, PSNR and shift-aligned kernel error."""

from __future__ import annotations

import math

import numpy as np

__all__ = ["mse", "psnr", "align_kernel", "kernel_error", "compute_metrics"]


def mse(x_ref, x_est) -> float:
    a, b = np.asarray(x_ref), np.asarray(x_est)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.mean(np.abs(a - b) ** 2))


def psnr(x_ref, x_est, data_range: float = 1.0) -> float:
    """``10 log10(range^2 / MSE)``; ``inf`` when the arrays are identical."""
    if not data_range > 0:
        raise ValueError("data_range must be positive")
    err = mse(x_ref, x_est)
    if err == 0:
        return math.inf
    return 10.0 * math.log10(data_range**2 / err)


def align_kernel(k_ref, k_est):
    """Circular shift of ``k_est`` closest to ``k_ref``.

    Shifts wrap within the kernel array.  Returns ``(aligned, shift)``;
    rolling ``k_est`` by ``shift`` gives ``aligned``.
    """
    a = np.asarray(k_ref, dtype=float)
    b = np.asarray(k_est, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    best, best_shift, best_err = b, (0,) * b.ndim, np.inf
    for shift in np.ndindex(*a.shape):
        signed = tuple(s if s <= n // 2 else s - n for s, n in zip(shift, a.shape))
        rolled = np.roll(b, signed, axis=tuple(range(b.ndim)))
        err = float(np.sum((rolled - a) ** 2))
        if err < best_err - 1e-15:
            best, best_shift, best_err = rolled, signed, err
    return best, best_shift


def kernel_error(k_ref, k_est, align: bool = True) -> float:
    """``||k_est - k_ref|| / ||k_ref||`` after the best circular alignment."""
    a = np.asarray(k_ref, dtype=float)
    b = align_kernel(a, k_est)[0] if align else np.asarray(k_est, dtype=float)
    denom = float(np.linalg.norm(a))
    if denom == 0:
        raise ValueError("reference kernel is zero")
    return float(np.linalg.norm(b - a)) / denom


def compute_metrics(x_ref, x_est, phi_ref=None, phi_est=None, data_range: float = 1.0) -> dict:
    """PSNR and MSE on the raw arrays, kernel error after alignment.

    When kernels are given, ``psnr_aligned_db`` undoes the signal shift that
    pairs with the kernel shift.  Infinite PSNR is stored as ``None`` with
    ``psnr_infinite`` set.
    """
    x_ref = np.asarray(x_ref)
    x_est = np.asarray(x_est)
    err = mse(x_ref, x_est)
    p = psnr(x_ref, x_est, data_range)
    out = {
        "mse": err,
        "psnr_db": None if math.isinf(p) else p,
        "psnr_infinite": math.isinf(p),
        "data_range": float(data_range),
    }
    if phi_ref is not None and phi_est is not None:
        k_ref = np.asarray(phi_ref, dtype=float)
        k_est = np.asarray(phi_est, dtype=float).reshape(k_ref.shape)
        _, shift = align_kernel(k_ref, k_est)
        out["kernel_error_l2_normalized"] = kernel_error(k_ref, k_est)
        out["kernel_shift"] = list(shift)
        # rolling the kernel by +s moves the blur output by +s, so the signal moves by -s
        x_shift = np.roll(x_est.reshape(x_ref.shape), tuple(-s for s in shift),
                          axis=tuple(range(len(shift))))
        pa = psnr(x_ref, x_shift, data_range)
        out["psnr_aligned_db"] = None if math.isinf(pa) else pa
    return out
