"""
Scan geometry: experiment-to-pixel conversion and raster scan grids.

Positions are integer object-pixel offsets of the top-left corner of each
N_p x N_p probe window, stored row-major as an (J, 2) int64 array.
"""

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field

from ptychoforge.errors import ArgumentError, GeometryError, FormatError

GRID_CSV_COLUMNS = ["row_px", "col_px"]


# ── Experiment geometry ──────────────────────────────────────────────────────

def pixel_size(wavelength: float, detector_distance: float, detector_pixel: float,
               frame_size: int) -> float:
    """Real-space object pixel for far-field sampling: λz / (N_p · p_det)."""
    for name, val in (("wavelength", wavelength), ("detector_distance", detector_distance),
                      ("detector_pixel", detector_pixel), ("frame_size", frame_size)):
        if not val > 0:
            raise ArgumentError(f"{name} must be positive, got {val}")
    return wavelength * detector_distance / (frame_size * detector_pixel)


class Geometry(BaseModel):
    """Far-field geometry. Wavelength is a tool default; the beam energy is not published."""
    model_config = ConfigDict(extra="forbid")

    wavelength: float = Field(default=1.24e-10, gt=0, description="Photon wavelength in meters (tool default, 10 keV).")
    detector_distance: float = Field(default=9.0, gt=0, description="Sample-to-detector distance in meters.")
    detector_pixel: float = Field(default=55e-6, gt=0, description="Detector pixel pitch in meters.")
    frame_size: int = Field(default=64, gt=0, description="Detector frame size N_p in pixels (tool default).")

    @property
    def object_pixel(self) -> float:
        return pixel_size(self.wavelength, self.detector_distance, self.detector_pixel, self.frame_size)


def field_of_view(geometry: Geometry) -> float:
    """Width in meters of one probe window."""
    return geometry.frame_size * geometry.object_pixel


def overlap_fraction(step: float, width: float) -> float:
    """Linear overlap of two windows of `width` displaced by `step`."""
    if width <= 0:
        raise ArgumentError(f"width must be positive, got {width}")
    return min(1.0, max(0.0, (width - step) / width))


# ── Scan grids ───────────────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class ScanGrid:
    positions: NDArray[np.int64]
    rows: int
    cols: int
    step_px: int

    def __post_init__(self):
        if self.positions.shape != (self.rows * self.cols, 2):
            raise ArgumentError(
                f"positions shape {self.positions.shape} does not match a {self.rows}x{self.cols} grid"
            )

    def __len__(self) -> int:
        return self.rows * self.cols

    def __eq__(self, other) -> bool:
        if not isinstance(other, ScanGrid):
            return NotImplemented
        return (self.rows, self.cols, self.step_px) == (other.rows, other.cols, other.step_px) \
            and np.array_equal(self.positions, other.positions)

    def extent(self, frame_size: int) -> tuple[int, int]:
        """Smallest (height, width) canvas holding every window."""
        if len(self) == 0:
            return (0, 0)
        far = self.positions.max(axis=0) + frame_size
        return int(far[0]), int(far[1])


def raster_positions(rows: int, cols: int, step_px: int, margin_px: int = 0) -> ScanGrid:
    """Row-major raster: position(i, j) = (margin + i·step, margin + j·step)."""
    if rows <= 0 or cols <= 0:
        raise ArgumentError(f"grid needs at least one row and column, got {rows}x{cols}")
    if step_px < 0 or margin_px < 0:
        raise ArgumentError("step and margin must be non-negative")
    ii, jj = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    positions = np.stack([margin_px + ii.ravel() * step_px,
                          margin_px + jj.ravel() * step_px], axis=1).astype(np.int64)
    return ScanGrid(positions=positions, rows=rows, cols=cols, step_px=step_px)


def subsample_indices(grid: ScanGrid, factor: int) -> NDArray[np.int64]:
    """Indices into `grid` of the rows/cols whose index is a multiple of `factor`."""
    if factor < 1:
        raise ArgumentError(f"subsampling factor must be >= 1, got {factor}")
    keep_rows = np.arange(0, grid.rows, factor)
    keep_cols = np.arange(0, grid.cols, factor)
    return (keep_rows[:, None] * grid.cols + keep_cols[None, :]).ravel().astype(np.int64)


def subsample_grid(grid: ScanGrid, factor: int) -> ScanGrid:
    idx = subsample_indices(grid, factor)
    return ScanGrid(
        positions=grid.positions[idx].copy(),
        rows=math.ceil(grid.rows / factor),
        cols=math.ceil(grid.cols / factor),
        step_px=grid.step_px * factor,
    )


def grid_rows_slice(grid: ScanGrid, row_start: int, row_stop: int) -> tuple[ScanGrid, NDArray[np.int64]]:
    """Contiguous scan lines [row_start, row_stop) and their indices in `grid`."""
    if not 0 <= row_start < row_stop <= grid.rows:
        raise ArgumentError(f"row range [{row_start}, {row_stop}) outside 0..{grid.rows}")
    idx = np.arange(row_start * grid.cols, row_stop * grid.cols, dtype=np.int64)
    sub = ScanGrid(positions=grid.positions[idx].copy(), rows=row_stop - row_start,
                   cols=grid.cols, step_px=grid.step_px)
    return sub, idx


def centered_margin(object_size: int, count: int, step_px: int, frame_size: int) -> int:
    """Margin that centers `count` windows on an object of `object_size` pixels."""
    span = (count - 1) * step_px + frame_size
    if span > object_size:
        raise GeometryError(f"scan span {span} px exceeds object size {object_size} px")
    return (object_size - span) // 2


def check_windows(grid: ScanGrid, object_shape: tuple[int, int], frame_size: int) -> None:
    """Raise GeometryError unless every window lies inside the object."""
    if len(grid) == 0:
        return
    lo = grid.positions.min(axis=0)
    hi = grid.positions.max(axis=0) + frame_size
    if lo.min() < 0 or hi[0] > object_shape[0] or hi[1] > object_shape[1]:
        raise GeometryError(
            f"probe windows span rows [{lo[0]}, {hi[0]}) cols [{lo[1]}, {hi[1]}) "
            f"outside object of shape {tuple(object_shape)}"
        )


def check_window(position, object_shape: tuple[int, int], frame_size: int) -> tuple[int, int]:
    r, c = int(position[0]), int(position[1])
    if r < 0 or c < 0 or r + frame_size > object_shape[0] or c + frame_size > object_shape[1]:
        raise GeometryError(
            f"window at ({r}, {c}) of size {frame_size} outside object of shape {tuple(object_shape)}"
        )
    return r, c


# ── CSV ──────────────────────────────────────────────────────────────────────

def save_grid_csv(grid: ScanGrid, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df = pd.DataFrame(grid.positions, columns=GRID_CSV_COLUMNS)
    df.to_csv(path, index=False, lineterminator="\n")
    return path


def load_grid_csv(path: str | Path, rows: int | None = None, cols: int | None = None) -> ScanGrid:
    """Read a grid CSV. Row/col counts and step are inferred when not given."""
    df = pd.read_csv(path)
    if list(df.columns) != GRID_CSV_COLUMNS:
        raise FormatError(f"{path}: expected header {','.join(GRID_CSV_COLUMNS)}, got {','.join(df.columns)}")
    positions = df.to_numpy(dtype=np.int64)
    if rows is None or cols is None:
        rows = int(np.unique(positions[:, 0]).size)
        cols = int(np.unique(positions[:, 1]).size)
    uniq = np.unique(positions[:, 1])
    step = int(uniq[1] - uniq[0]) if uniq.size > 1 else 0
    if step == 0:
        uniq_r = np.unique(positions[:, 0])
        step = int(uniq_r[1] - uniq_r[0]) if uniq_r.size > 1 else 0
    return ScanGrid(positions=positions, rows=rows, cols=cols, step_px=step)
