"""
16-bit binary PGM previews of amplitude, phase and diffraction images.

Format: "P5\\n<width> <height>\\n65535\\n" followed by big-endian uint16
samples, row-major. Values map linearly from [vmin, vmax] to [0, 65535]
and are clipped.
"""

import re
from pathlib import Path

import numpy as np

from ptychoforge.errors import ArgumentError, FormatError

MAXVAL = 65535
_HEADER = re.compile(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s")


def to_samples(image: np.ndarray, vmin: float, vmax: float) -> np.ndarray:
    if not vmax > vmin:
        raise ArgumentError(f"PGM range needs max > min, got [{vmin}, {vmax}]")
    scaled = (np.asarray(image, dtype=np.float64) - vmin) / (vmax - vmin)
    return np.rint(np.clip(scaled, 0.0, 1.0) * MAXVAL).astype(">u2")


def export_pgm(image: np.ndarray, path: str | Path, vmin: float | None = None,
               vmax: float | None = None) -> Path:
    """Write `image` as a P5 PGM. The range defaults to the image's own min/max."""
    image = np.asarray(image)
    if image.ndim != 2:
        raise ArgumentError(f"PGM export needs a 2-D image, got shape {image.shape}")
    if vmin is None and vmax is None:
        vmin, vmax = float(image.min()), float(image.max())
        if vmax == vmin:
            vmax = vmin + 1.0
    elif vmin is None or vmax is None:
        raise ArgumentError("give both vmin and vmax, or neither")
    samples = to_samples(image, vmin, vmax)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = f"P5\n{image.shape[1]} {image.shape[0]}\n{MAXVAL}\n".encode("ascii")
    path.write_bytes(header + samples.tobytes())
    return path


def read_pgm(path: str | Path) -> np.ndarray:
    """Samples of a 16-bit P5 file as uint16 (height, width)."""
    raw = Path(path).read_bytes()
    m = _HEADER.match(raw)
    if m is None:
        raise FormatError(f"{path}: not a binary PGM (expected magic 'P5')", 0)
    width, height, maxval = (int(g) for g in m.groups())
    if maxval != MAXVAL:
        raise FormatError(f"{path}: only maxval {MAXVAL} is supported, got {maxval}", m.start(3))
    start = m.end()
    need = width * height * 2
    if len(raw) - start < need:
        raise FormatError(f"{path}: truncated pixel data ({len(raw) - start} of {need} bytes)", len(raw))
    return np.frombuffer(raw, dtype=">u2", count=width * height, offset=start).reshape(height, width).astype(np.uint16)


def log_preview(frame: np.ndarray) -> np.ndarray:
    """log10(1 + I) for viewing diffraction frames."""
    return np.log10(1.0 + np.maximum(np.asarray(frame, dtype=np.float64), 0.0))
