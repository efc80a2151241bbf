"""
Training triplets: (normalized diffraction frame, amplitude patch, phase patch).

Normalization scales are measured on the training portion only and stored
with the dataset so validation, test and inference frames are scaled the same
way.
"""

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from ptychoforge.errors import ArgumentError, FormatError, NumericError, ShapeError
from ptychoforge.geometry import ScanGrid, check_window, check_windows
from ptychoforge.numerics import SeededRng
from ptychoforge.simulator import DiffractionStack, window_indices
from ptychoforge.tensor_io import load_bundle, save_bundle

logger = logging.getLogger(__name__)

VAL_FRACTION = 0.1
TRAIN_ROW_FRACTION = 0.62  # 100 of 161 scan lines


@dataclass(frozen=True)
class NormMeta:
    diff_scale: float
    amp_scale: float


@dataclass
class TripletDataset:
    diffraction: NDArray[np.float64]
    amplitude: NDArray[np.float64]
    phase: NDArray[np.float64]
    grid: ScanGrid
    norm_meta: NormMeta

    def __post_init__(self):
        shapes = {self.diffraction.shape, self.amplitude.shape, self.phase.shape}
        if len(shapes) != 1 or self.diffraction.ndim != 3:
            raise ShapeError(
                f"triplet arrays must share (J, N, N); got {self.diffraction.shape}, "
                f"{self.amplitude.shape}, {self.phase.shape}"
            )
        if self.diffraction.shape[0] != len(self.grid):
            raise ShapeError(f"{self.diffraction.shape[0]} triplets for a grid of {len(self.grid)} positions")

    def __len__(self) -> int:
        return self.diffraction.shape[0]

    @property
    def frame_size(self) -> int:
        return self.diffraction.shape[-1]


@dataclass(frozen=True)
class SplitIndex:
    train_ids: NDArray[np.int64]
    val_ids: NDArray[np.int64]
    seed: int


# ── Building ─────────────────────────────────────────────────────────────────

def extract_patch(image: np.ndarray, position, frame_size: int) -> np.ndarray:
    """Copy of the frame_size x frame_size sub-image whose top-left corner is `position`."""
    r, c = check_window(position, image.shape, frame_size)
    return image[r:r + frame_size, c:c + frame_size].copy()


def build_triplets(stack: DiffractionStack, amplitude_image: np.ndarray, phase_image: np.ndarray,
                   grid: ScanGrid | None = None, train_ids: np.ndarray | None = None) -> TripletDataset:
    """Pair every frame with its amplitude and phase patches and normalize.

    diff_scale is the largest training-frame value and amp_scale the largest
    training-patch amplitude; phase passes through unscaled.
    """
    grid = stack.grid if grid is None else grid
    if len(grid) != len(stack):
        raise ArgumentError(f"grid has {len(grid)} positions but stack has {len(stack)} frames")
    if amplitude_image.shape != phase_image.shape:
        raise ArgumentError(f"amplitude {amplitude_image.shape} and phase {phase_image.shape} images differ")
    n = stack.frame_size
    check_windows(grid, amplitude_image.shape, n)

    rows, cols = window_indices(grid.positions, n)
    amplitude = np.asarray(amplitude_image, dtype=np.float64)[rows, cols]
    phase = np.asarray(phase_image, dtype=np.float64)[rows, cols]
    frames = np.asarray(stack.frames, dtype=np.float64)

    fit = np.arange(len(stack)) if train_ids is None else np.asarray(train_ids)
    if fit.size == 0:
        raise ArgumentError("normalization needs at least one training triplet")
    diff_scale = float(frames[fit].max())
    amp_scale = float(amplitude[fit].max())
    if diff_scale <= 0 or amp_scale <= 0:
        raise NumericError(f"degenerate normalization scales diff={diff_scale}, amp={amp_scale}")

    logger.info("built %d triplets (diff_scale %.4g, amp_scale %.4g)", len(stack), diff_scale, amp_scale)
    return TripletDataset(
        diffraction=frames / diff_scale,
        amplitude=amplitude / amp_scale,
        phase=phase,
        grid=grid,
        norm_meta=NormMeta(diff_scale=diff_scale, amp_scale=amp_scale),
    )


def denormalize(dataset: TripletDataset) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Raw (diffraction, amplitude, phase) recovered from the stored scales."""
    meta = dataset.norm_meta
    return dataset.diffraction * meta.diff_scale, dataset.amplitude * meta.amp_scale, dataset.phase.copy()


def subset(dataset: TripletDataset, indices: np.ndarray) -> TripletDataset:
    """Triplets at `indices`, keeping the parent's normalization."""
    idx = np.asarray(indices, dtype=np.int64)
    grid = ScanGrid(positions=dataset.grid.positions[idx], rows=1, cols=int(idx.size),
                    step_px=dataset.grid.step_px)
    return TripletDataset(
        diffraction=dataset.diffraction[idx],
        amplitude=dataset.amplitude[idx],
        phase=dataset.phase[idx],
        grid=grid,
        norm_meta=dataset.norm_meta,
    )


# ── Splits ───────────────────────────────────────────────────────────────────

def split_90_10(count: int, seed: int) -> SplitIndex:
    """Seeded permutation; the first 90% train, the last round(0.1·J) validate."""
    if count < 10:
        raise ArgumentError(f"a 90-10 split needs at least 10 triplets, got {count}")
    perm = SeededRng(seed).generator.permutation(count).astype(np.int64)
    n_val = int(round(VAL_FRACTION * count))
    return SplitIndex(train_ids=perm[:count - n_val], val_ids=perm[count - n_val:], seed=seed)


def train_test_rows(grid: ScanGrid, train_fraction: float = TRAIN_ROW_FRACTION) -> tuple[np.ndarray, np.ndarray]:
    """Contiguous split by scan line: the first rows train, the remaining rows test."""
    if not 0.0 < train_fraction < 1.0:
        raise ArgumentError(f"train_fraction must be in (0, 1), got {train_fraction}")
    if grid.rows < 2:
        raise ArgumentError("a row split needs at least two scan lines")
    n_rows = min(grid.rows - 1, max(1, int(round(train_fraction * grid.rows))))
    cut = n_rows * grid.cols
    all_ids = np.arange(len(grid), dtype=np.int64)
    return all_ids[:cut], all_ids[cut:]


# ── Persistence ──────────────────────────────────────────────────────────────

def save_dataset(dataset: TripletDataset, path: str | Path) -> Path:
    """PTYB bundle; triplet arrays are stored as float32."""
    grid = dataset.grid
    return save_bundle(path, {
        "diffraction": dataset.diffraction.astype(np.float32),
        "amplitude": dataset.amplitude.astype(np.float32),
        "phase": dataset.phase.astype(np.float32),
        "positions": grid.positions.astype(np.float64),
        "grid_shape": np.array([grid.rows, grid.cols, grid.step_px], dtype=np.float64),
        "norm": np.array([dataset.norm_meta.diff_scale, dataset.norm_meta.amp_scale], dtype=np.float64),
    })


def load_dataset(path: str | Path) -> TripletDataset:
    tensors = load_bundle(path)
    missing = {"diffraction", "amplitude", "phase", "positions", "grid_shape", "norm"} - tensors.keys()
    if missing:
        raise FormatError(f"{path}: dataset bundle lacks {sorted(missing)}", 0)
    rows, cols, step = (int(v) for v in tensors["grid_shape"])
    grid = ScanGrid(positions=tensors["positions"].astype(np.int64), rows=rows, cols=cols, step_px=step)
    diff_scale, amp_scale = (float(v) for v in tensors["norm"])
    return TripletDataset(
        diffraction=tensors["diffraction"].astype(np.float64),
        amplitude=tensors["amplitude"].astype(np.float64),
        phase=tensors["phase"].astype(np.float64),
        grid=grid,
        norm_meta=NormMeta(diff_scale=diff_scale, amp_scale=amp_scale),
    )
