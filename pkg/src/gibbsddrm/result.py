"""Restoration output container and its JSON serialization."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

__all__ = ["RestorationResult", "SamplingError", "array_to_json", "array_from_json", "canonical_json"]


class SamplingError(RuntimeError):
    """A sampler produced a non-finite value; ``step`` names where."""

    def __init__(self, message: str, step: dict | None = None):
        super().__init__(message)
        self.step = step or {}


def array_to_json(a) -> Any:
    """Real arrays become nested lists; complex arrays become ``{"re": ..., "im": ...}``."""
    a = np.asarray(a)
    if np.iscomplexobj(a):
        return {"re": a.real.tolist(), "im": a.imag.tolist()}
    return a.tolist()


def array_from_json(obj) -> np.ndarray:
    if isinstance(obj, dict):
        return np.asarray(obj["re"], dtype=float) + 1j * np.asarray(obj["im"], dtype=float)
    return np.asarray(obj, dtype=float)


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return array_to_json(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if math.isfinite(v) else None
    return value


def canonical_json(doc) -> bytes:
    return json.dumps(_jsonable(doc), sort_keys=True, separators=(",", ":")).encode()


@dataclass
class RestorationResult:
    x0: np.ndarray
    phi: np.ndarray
    trace: list[dict] = field(default_factory=list)
    events: list[tuple[str, int, int]] = field(default_factory=list)
    denoiser_evals: int = 0
    phi_updates: int = 0
    metrics: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    seed: int | None = None
    status: str = "ok"
    error: dict | None = None

    def to_dict(self, include_timing: bool = True) -> dict:
        doc = {
            "status": self.status,
            "seed": self.seed,
            "x0_estimate": array_to_json(self.x0),
            "phi_estimate": array_to_json(self.phi),
            "metrics": _jsonable(self.metrics),
            "counters": {"denoiser_evals": int(self.denoiser_evals), "phi_updates": int(self.phi_updates)},
            "trace": _jsonable(self.trace),
            "events": [[op, int(t), int(m)] for op, t, m in self.events],
            "config": _jsonable(self.config),
            "error": _jsonable(self.error),
        }
        if include_timing:
            doc["timing"] = _jsonable(self.timing)
        return doc

    def canonical_bytes(self) -> bytes:
        """Byte form used for determinism checks; wall-clock timing is excluded."""
        return canonical_json(self.to_dict(include_timing=False))

    def to_json(self, include_timing: bool = True) -> str:
        return json.dumps(_jsonable(self.to_dict(include_timing)), indent=2, sort_keys=True)
