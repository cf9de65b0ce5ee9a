"""Array files: CSV vectors, binary PGM images and small JSON helpers.

CSV holds one value per line written with ``repr`` so that floats round-trip
exactly; complex values are written ``re,im``.  PGM is the binary ``P5``
variant with maxval 255.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

__all__ = [
    "write_csv",
    "read_csv",
    "write_pgm",
    "read_pgm",
    "write_json",
    "read_json",
    "save_array",
    "load_array",
]


def write_csv(path, values) -> None:
    a = np.asarray(values)
    if a.ndim != 1:
        a = a.reshape(-1)
    lines = []
    if np.iscomplexobj(a):
        for v in a:
            lines.append(f"{float(v.real)!r},{float(v.imag)!r}")
    else:
        lines = [repr(float(v)) for v in a]
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv(path) -> np.ndarray:
    text = Path(path).read_text()
    rows = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not rows:
        return np.zeros(0)
    try:
        if any("," in r for r in rows):
            parts = [r.split(",") for r in rows]
            if any(len(p) != 2 for p in parts):
                raise ValueError("complex rows must have exactly two fields")
            return np.array([complex(float(a), float(b)) for a, b in parts])
        return np.array([float(r) for r in rows])
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None


def write_pgm(path, image, data_range: float = 1.0) -> None:
    """Quantize ``image`` in ``[0, data_range]`` to 8 bits and write a P5 file."""
    img = np.asarray(image, dtype=float)
    if img.ndim != 2:
        raise ValueError("PGM images must be 2-D")
    q = np.clip(np.rint(img / data_range * 255.0), 0, 255).astype(np.uint8)
    h, w = q.shape
    Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode("ascii") + q.tobytes())


def _pgm_tokens(data: bytes, count: int):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    tokens, i = [], 0
    while len(tokens) < count:
        while i < len(data) and data[i:i + 1].isspace():
            i += 1
        if data[i:i + 1] == b"#":
            while i < len(data) and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        j = i
        while j < len(data) and not data[j:j + 1].isspace():
            j += 1
        tokens.append(data[i:j])
        i = j
    return tokens, i + 1


def read_pgm(path, data_range: float = 1.0) -> np.ndarray:
    """Read an 8-bit P5 file and scale it to ``[0, data_range]``."""
    data = Path(path).read_bytes()
    (magic, w, h, maxval), off = _pgm_tokens(data, 4)
    if magic != b"P5":
        raise ValueError(f"{path}: not a binary PGM (magic {magic!r})")
    w, h, maxval = int(w), int(h), int(maxval)
    if maxval != 255:
        raise ValueError(f"{path}: only 8-bit PGM is supported (maxval {maxval})")
    pix = np.frombuffer(data, dtype=np.uint8, count=w * h, offset=off)
    return pix.reshape(h, w).astype(float) * (data_range / 255.0)


def write_json(path, doc) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())


def save_array(path, a, data_range: float = 1.0) -> None:
    """CSV for vectors, PGM for 2-D arrays, chosen by file suffix."""
    path = Path(path)
    if path.suffix == ".pgm":
        write_pgm(path, a, data_range)
    else:
        write_csv(path, a)


def load_array(path, data_range: float = 1.0) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    if path.suffix == ".pgm":
        return read_pgm(path, data_range)
    return read_csv(path)
