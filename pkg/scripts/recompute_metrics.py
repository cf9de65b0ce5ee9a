"""Recompute PSNR, MSE and kernel error of a stored result without importing gibbsddrm.

usage: python3 scripts/recompute_metrics.py PROBLEM_DIR RESULT_DIR

PROBLEM_DIR is the output of ``gibbsddrm generate``; RESULT_DIR is one
``seed_<n>`` directory of ``gibbsddrm restore``.  Exits 1 if any stored metric
differs from the recomputed value by more than 1e-9 relative.
"""

import json
import math
import sys
from pathlib import Path

import numpy as np


def read_vector(path):
    rows = [r.strip() for r in Path(path).read_text().splitlines() if r.strip()]
    return np.array([float(r.split(",")[0]) for r in rows])


def best_shift_error(k_ref, k_est):
    best, best_shift = math.inf, None
    for shift in np.ndindex(*k_ref.shape):
        rolled = np.roll(k_est, shift, axis=tuple(range(k_ref.ndim)))
        err = np.linalg.norm(rolled - k_ref) / np.linalg.norm(k_ref)
        if err < best:
            best, best_shift = err, shift
    return best, best_shift


def main(argv):
    if len(argv) != 2:
        print(__doc__, file=sys.stderr)
        return 2
    problem, result = Path(argv[0]), Path(argv[1])
    manifest = json.loads((problem / "manifest.json").read_text())
    doc = json.loads((result / "result.json").read_text())
    shape, kshape = tuple(manifest["signal_shape"]), tuple(manifest["kernel_shape"])
    x_ref = read_vector(problem / manifest["files"]["signal"]).reshape(shape)
    k_ref = read_vector(problem / manifest["files"]["kernel"]).reshape(kshape)
    x_est = read_vector(result / "x0.csv").reshape(shape)
    k_est = read_vector(result / "phi.csv").reshape(kshape)
    rng = manifest["data_range"]
    mse = float(np.mean((x_ref - x_est) ** 2))
    psnr = math.inf if mse == 0 else 10 * math.log10(rng**2 / mse)
    kerr, _ = best_shift_error(k_ref, k_est)
    stored = doc["metrics"]
    checks = {
        "mse": (mse, stored["mse"]),
        "psnr_db": (psnr, math.inf if stored["psnr_infinite"] else stored["psnr_db"]),
        "kernel_error_l2_normalized": (kerr, stored["kernel_error_l2_normalized"]),
    }
    ok = True
    for name, (mine, theirs) in checks.items():
        same = mine == theirs or abs(mine - theirs) <= 1e-9 * max(abs(mine), 1e-300)
        ok &= same
        print(f"{name}: recomputed {mine!r} stored {theirs!r} {'ok' if same else 'MISMATCH'}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
