"""
Array, FFT and random-number primitives shared by every other module.

Images are plain numpy arrays: RealImage2D is float64 (H, W), ComplexField2D
is complex128 (H, W). Transforms also accept stacks (..., H, W) and act on the
last two axes.

The random generator is numpy's PCG64 (PCG-XSL-RR 128/64), whose stream for
a given seed is identical on every platform numpy supports.
"""

import zlib
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from ptychoforge.errors import ArgumentError, NumericError, ShapeError

RealImage2D = NDArray[np.float64]
ComplexField2D = NDArray[np.complex128]

RNG_ALGORITHM = "PCG64"


# ── Random numbers ───────────────────────────────────────────────────────────

@dataclass
class SeededRng:
    """Single-owner seeded generator. Do not share between threads."""
    seed: int
    algorithm: str = RNG_ALGORITHM
    generator: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        if self.seed < 0 or self.seed >= 2**64:
            raise ArgumentError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        self.generator = np.random.Generator(np.random.PCG64(self.seed))


def derive_seed(base: int, label: str) -> int:
    """Stable 64-bit sub-seed for a named pipeline stage."""
    seq = np.random.SeedSequence(base, spawn_key=(zlib.crc32(label.encode("utf-8")),))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def rng_uniform(rng: SeededRng, n: int, lo: float, hi: float) -> NDArray[np.float64]:
    """n draws from [lo, hi), advancing the generator."""
    if not lo < hi:
        raise ArgumentError(f"rng_uniform needs lo < hi, got lo={lo}, hi={hi}")
    if n < 0:
        raise ArgumentError(f"rng_uniform needs n >= 0, got {n}")
    return rng.generator.uniform(lo, hi, size=n)


def random_complex(rng: SeededRng, shape: tuple, scale: float = 1.0) -> ComplexField2D:
    """Circular complex Gaussian noise with E|z|^2 = scale^2."""
    g = rng.generator.standard_normal((2, *shape))
    return (scale / np.sqrt(2.0)) * (g[0] + 1j * g[1])


# ── Fourier transforms ───────────────────────────────────────────────────────

def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def _check_fft_shape(field: np.ndarray) -> None:
    if field.ndim < 2:
        raise ShapeError(f"expected at least 2 dimensions, got shape {field.shape}")
    h, w = field.shape[-2:]
    if not (_is_power_of_two(h) and _is_power_of_two(w)):
        raise ShapeError(f"FFT size must be a power of two in both axes, got {h}x{w}")


def fft2c(field: np.ndarray) -> ComplexField2D:
    """Unitary centered 2-D DFT over the last two axes (zero frequency at N//2)."""
    _check_fft_shape(field)
    axes = (-2, -1)
    shifted = np.fft.ifftshift(field, axes=axes)
    return np.fft.fftshift(np.fft.fft2(shifted, axes=axes, norm="ortho"), axes=axes)


def ifft2c(field: np.ndarray) -> ComplexField2D:
    """Inverse of fft2c."""
    _check_fft_shape(field)
    axes = (-2, -1)
    shifted = np.fft.ifftshift(field, axes=axes)
    return np.fft.fftshift(np.fft.ifft2(shifted, axes=axes, norm="ortho"), axes=axes)


def energy(field: np.ndarray) -> float:
    """Sum of |x|^2."""
    return float(np.sum(np.abs(field) ** 2))


def ensure_finite(array: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(array)):
        raise NumericError(f"{what} contains NaN or Inf")
    return array
