import numpy as np
import pytest
from numpy.testing import assert_allclose

from ptychoforge.errors import ArgumentError, NumericError, ShapeError
from ptychoforge.numerics import (
    SeededRng, derive_seed, energy, ensure_finite, fft2c, ifft2c, random_complex, rng_uniform,
)


def test_fft2c_preserves_energy(rng):
    field = random_complex(rng, (32, 32))
    assert_allclose(energy(fft2c(field)), energy(field), rtol=1e-12)


def test_ifft2c_inverts_fft2c(rng):
    field = random_complex(rng, (3, 16, 8))
    assert_allclose(ifft2c(fft2c(field)), field, atol=1e-12)


def test_centered_delta_transforms_to_flat_spectrum():
    n = 16
    delta = np.zeros((n, n), dtype=np.complex128)
    delta[n // 2, n // 2] = 1.0
    assert_allclose(fft2c(delta), np.full((n, n), 1.0 / n), atol=1e-14)


def test_constant_transforms_to_center_peak():
    n = 8
    spectrum = fft2c(np.ones((n, n), dtype=np.complex128))
    assert spectrum[n // 2, n // 2] == pytest.approx(n)
    spectrum[n // 2, n // 2] = 0
    assert np.abs(spectrum).max() < 1e-12


@pytest.mark.parametrize("shape", [(12, 16), (16, 12), (16,)])
def test_fft_rejects_unsupported_shapes(shape):
    with pytest.raises(ShapeError):
        fft2c(np.zeros(shape))


def test_same_seed_same_stream():
    a = rng_uniform(SeededRng(42), 5, 0.0, 1.0)
    b = rng_uniform(SeededRng(42), 5, 0.0, 1.0)
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, rng_uniform(SeededRng(43), 5, 0.0, 1.0))


def test_rng_uniform_range_and_errors(rng):
    draws = rng_uniform(rng, 1000, -2.0, 3.0)
    assert draws.min() >= -2.0 and draws.max() < 3.0
    with pytest.raises(ArgumentError):
        rng_uniform(rng, 3, 1.0, 1.0)
    with pytest.raises(ArgumentError):
        rng_uniform(rng, -1, 0.0, 1.0)


@pytest.mark.parametrize("seed", [-1, 2**64])
def test_seed_must_fit_64_bits(seed):
    with pytest.raises(ArgumentError):
        SeededRng(seed)


def test_derive_seed_is_stable_per_label():
    assert derive_seed(7, "object") == derive_seed(7, "object")
    assert derive_seed(7, "object") != derive_seed(7, "noise")
    assert derive_seed(7, "object") != derive_seed(8, "object")
    assert 0 <= derive_seed(7, "object") < 2**64


def test_random_complex_scale(rng):
    z = random_complex(rng, (200, 200), scale=0.5)
    assert np.mean(np.abs(z) ** 2) == pytest.approx(0.25, rel=0.05)


def test_ensure_finite():
    ok = np.array([1.0, 2.0])
    assert ensure_finite(ok, "values") is ok
    with pytest.raises(NumericError, match="values"):
        ensure_finite(np.array([1.0, np.nan]), "values")
