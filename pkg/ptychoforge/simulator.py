"""
Synthetic ptychography: etched test objects, Airy-like probes and far-field
diffraction stacks.

All randomness comes from the SeededRng passed in (make_test_object,
add_poisson, perturb_probe); diffract itself is deterministic.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy import ndimage
from skimage.draw import disk, polygon

from ptychoforge.errors import ArgumentError
from ptychoforge.geometry import ScanGrid, check_windows
from ptychoforge.numerics import ComplexField2D, SeededRng, fft2c, ifft2c, random_complex

logger = logging.getLogger(__name__)

FWHM_PER_SIGMA = 2.0 * np.sqrt(2.0 * np.log(2.0))
# Airy intensity FWHM in units of λ/D
AIRY_FWHM = 1.029
DIFFRACT_CHUNK = 256


# ── Data types ───────────────────────────────────────────────────────────────

@dataclass
class ObjectSample:
    transmission: ComplexField2D
    a_min: float
    phi_max: float

    @property
    def amplitude(self) -> NDArray[np.float64]:
        return np.abs(self.transmission)

    @property
    def phase(self) -> NDArray[np.float64]:
        return np.angle(self.transmission)

    @property
    def shape(self) -> tuple[int, int]:
        return self.transmission.shape


@dataclass
class Probe:
    field: ComplexField2D
    fwhm_px: float

    @property
    def size(self) -> int:
        return self.field.shape[0]


@dataclass
class DiffractionStack:
    frames: NDArray[np.float64]
    grid: ScanGrid
    photon_budget: float | None = None  # None means noiseless

    def __post_init__(self):
        if self.frames.ndim != 3 or self.frames.shape[0] != len(self.grid):
            raise ArgumentError(
                f"stack of shape {self.frames.shape} does not match a grid of {len(self.grid)} positions"
            )

    def __len__(self) -> int:
        return self.frames.shape[0]

    @property
    def frame_size(self) -> int:
        return self.frames.shape[-1]


# ── Object ───────────────────────────────────────────────────────────────────

def _etch_mask(height: int, width: int, rng: SeededRng) -> NDArray[np.bool_]:
    """Random discs and polygons covering roughly a third of the field."""
    g = rng.generator
    mask = np.zeros((height, width), dtype=bool)
    n_features = max(1, (height * width) // 500)
    for _ in range(n_features):
        cy, cx = g.uniform(0, height), g.uniform(0, width)
        if g.uniform() < 0.5:
            radius = g.uniform(3.0, 10.0)
            rr, cc = disk((cy, cx), radius, shape=mask.shape)
        else:
            n_vertices = int(g.integers(3, 7))
            angles = np.sort(g.uniform(0, 2 * np.pi, n_vertices))
            radii = g.uniform(4.0, 14.0, n_vertices)
            rr, cc = polygon(cy + radii * np.sin(angles), cx + radii * np.cos(angles), shape=mask.shape)
        mask[rr, cc] = True
    return mask


def make_test_object(height: int, width: int, rng: SeededRng, a_min: float = 0.7,
                     phi_max: float = 1.0, blur_px: float = 3.0) -> ObjectSample:
    """Two-level etched pattern: amplitude in {a_min, 1}, phase in {0, phi_max}, then blurred.

    The blur kernel is a normalized Gaussian whose FWHM is `blur_px`.
    """
    if not 0.0 < a_min <= 1.0:
        raise ArgumentError(f"a_min must be in (0, 1], got {a_min}")
    if not 0.0 <= phi_max < np.pi:
        raise ArgumentError(f"phi_max must be in [0, pi), got {phi_max}")
    if blur_px < 0:
        raise ArgumentError(f"blur_px must be non-negative, got {blur_px}")
    if height <= 0 or width <= 0:
        raise ArgumentError(f"object size must be positive, got {height}x{width}")

    etched = _etch_mask(height, width, rng).astype(np.float64)
    if blur_px > 0:
        etched = ndimage.gaussian_filter(etched, sigma=blur_px / FWHM_PER_SIGMA, mode="reflect")
        etched = np.clip(etched, 0.0, 1.0)

    amplitude = 1.0 - (1.0 - a_min) * etched
    phase = phi_max * etched
    transmission = amplitude * np.exp(1j * phase)
    logger.debug("object %dx%d, etched fraction %.3f", height, width, float(np.mean(etched > 0.5)))
    return ObjectSample(transmission=transmission, a_min=a_min, phi_max=phi_max)


# ── Probe ────────────────────────────────────────────────────────────────────

def measure_fwhm(field: np.ndarray) -> float:
    """Full width at half maximum of |field|^2 along the row through its peak."""
    intensity = np.abs(field) ** 2
    r0, c0 = np.unravel_index(int(np.argmax(intensity)), intensity.shape)
    row = intensity[r0]
    half = row[c0] / 2.0
    if half <= 0:
        return 0.0

    def crossing(direction: int) -> float:
        c = c0
        while 0 <= c + direction < row.size and row[c + direction] >= half:
            c += direction
        nxt = c + direction
        if not 0 <= nxt < row.size:
            return float(c)
        # linear interpolation between the last sample above and the first below
        frac = (row[c] - half) / (row[c] - row[nxt])
        return c + direction * frac

    return crossing(+1) - crossing(-1)


def _airy_probe(frame_size: int, radius: float) -> ComplexField2D:
    k = np.arange(frame_size) - frame_size // 2
    kr = np.hypot(k[:, None], k[None, :])
    # anti-aliased aperture edge so the FWHM varies continuously with radius
    aperture = np.clip(radius + 0.5 - kr, 0.0, 1.0)
    field = ifft2c(aperture.astype(np.complex128))
    return field / np.sqrt(np.sum(np.abs(field) ** 2))


def make_probe(frame_size: int, fwhm_px: float) -> Probe:
    """Focused probe: inverse transform of a filled circular pupil, unit energy.

    The pupil radius is tuned so the intensity FWHM matches `fwhm_px`.
    """
    if fwhm_px < 2:
        raise ArgumentError(f"probe FWHM must be at least 2 px, got {fwhm_px}")
    if fwhm_px > frame_size / 4:
        raise ArgumentError(f"probe FWHM {fwhm_px} px too large for a {frame_size} px window")
    if frame_size < 8 * fwhm_px:
        logger.warning("window %d px is narrower than 8x the FWHM; probe tails will be clipped", frame_size)

    r0 = AIRY_FWHM * frame_size / (2.0 * fwhm_px)
    candidates = np.linspace(0.6 * r0, 1.4 * r0, 161)
    errors = [abs(measure_fwhm(_airy_probe(frame_size, r)) - fwhm_px) for r in candidates]
    best = float(candidates[int(np.argmin(errors))])
    field = _airy_probe(frame_size, best)
    logger.debug("probe pupil radius %.3f px gives FWHM %.3f px", best, measure_fwhm(field))
    return Probe(field=field, fwhm_px=float(fwhm_px))


def tail_energy_fraction(probe: Probe, radius: float | None = None) -> float:
    """Fraction of probe energy farther than `radius` (default: the FWHM) from the window center."""
    radius = probe.fwhm_px if radius is None else radius
    n = probe.size
    k = np.arange(n) - n // 2
    r = np.hypot(k[:, None], k[None, :])
    intensity = np.abs(probe.field) ** 2
    return float(intensity[r > radius].sum() / intensity.sum())


def perturb_probe(probe: Probe, rng: SeededRng, level: float = 0.1) -> Probe:
    """Multiplicative complex noise of relative size `level`, renormalized to unit energy."""
    noisy = probe.field * (1.0 + random_complex(rng, probe.field.shape, scale=level))
    noisy /= np.sqrt(np.sum(np.abs(noisy) ** 2))
    return Probe(field=noisy, fwhm_px=probe.fwhm_px)


# ── Measurement ──────────────────────────────────────────────────────────────

def window_indices(positions: np.ndarray, frame_size: int) -> tuple[np.ndarray, np.ndarray]:
    """Fancy-index arrays selecting (J, N, N) windows from an object."""
    span = np.arange(frame_size)
    rows = positions[:, 0, None, None] + span[None, :, None]
    cols = positions[:, 1, None, None] + span[None, None, :]
    return rows, cols


def _diffract_chunk(transmission, probe_field, positions):
    rows, cols = window_indices(positions, probe_field.shape[0])
    exit_waves = probe_field[None] * transmission[rows, cols]
    return np.abs(fft2c(exit_waves)) ** 2


def diffract(obj: ObjectSample, probe: Probe, grid: ScanGrid, workers: int = 1) -> DiffractionStack:
    """Noiseless far-field intensities |fft2c(P · O_window)|^2, ordered by grid index."""
    check_windows(grid, obj.shape, probe.size)
    chunks = [grid.positions[i:i + DIFFRACT_CHUNK] for i in range(0, len(grid), DIFFRACT_CHUNK)]
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda p: _diffract_chunk(obj.transmission, probe.field, p), chunks))
    else:
        parts = [_diffract_chunk(obj.transmission, probe.field, p) for p in chunks]
    frames = np.concatenate(parts, axis=0) if parts else np.zeros((0, probe.size, probe.size))
    return DiffractionStack(frames=frames, grid=grid, photon_budget=None)


def add_poisson(stack: DiffractionStack, photon_budget: float, rng: SeededRng) -> DiffractionStack:
    """Scale each frame to `photon_budget` expected photons, then draw Poisson counts."""
    if not photon_budget > 0:
        raise ArgumentError(f"photon budget must be positive, got {photon_budget}")
    sums = stack.frames.sum(axis=(1, 2), keepdims=True)
    scale = np.divide(photon_budget, sums, out=np.zeros_like(sums), where=sums > 0)
    counts = rng.generator.poisson(stack.frames * scale).astype(np.float64)
    return DiffractionStack(frames=counts, grid=stack.grid, photon_budget=float(photon_budget))


def select_frames(stack: DiffractionStack, indices: np.ndarray, grid: ScanGrid) -> DiffractionStack:
    """Measured frames for a sub-grid (e.g. a sparse scan)."""
    return DiffractionStack(frames=stack.frames[indices], grid=grid, photon_budget=stack.photon_budget)
