"""
Stitching per-position predictions into a full field, and the quality
metrics used to compare reconstructions against a reference.

ePIE leaves a global complex scalar (phase offset and scale) undetermined,
so complex comparisons first absorb the best-fitting scalar.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from ptychoforge.errors import ArgumentError
from ptychoforge.geometry import ScanGrid, check_windows
from ptychoforge.simulator import window_indices

DEFAULT_THRESHOLD_FRAC = 0.05
METRICS_COLUMNS = ["run_id", "factor", "train_size", "amp_mae", "phase_mae", "nmse", "ms_per_frame"]


# ── Canvas ───────────────────────────────────────────────────────────────────

@dataclass
class StitchCanvas:
    sum: np.ndarray
    count: np.ndarray
    weight: np.ndarray

    @property
    def covered(self) -> np.ndarray:
        return self.count > 0

    @property
    def final(self) -> np.ndarray:
        """sum / weight on covered pixels; uncovered pixels are 0 (see `covered`)."""
        return np.divide(self.sum, self.weight, out=np.zeros_like(self.sum), where=self.weight > 0)


def stitch_average(patches: np.ndarray, grid: ScanGrid, canvas_shape: tuple[int, int],
                   weights: np.ndarray | None = None) -> StitchCanvas:
    """Average overlapping patches on a canvas.

    `weights` (e.g. |P|^2) switches to weighted averaging; by default every
    patch pixel counts once.
    """
    if patches.ndim != 3 or patches.shape[0] != len(grid) or patches.shape[1] != patches.shape[2]:
        raise ArgumentError(f"patches of shape {patches.shape} do not match a grid of {len(grid)} positions")
    n = patches.shape[-1]
    check_windows(grid, canvas_shape, n)
    rows, cols = window_indices(grid.positions, n)

    total = np.zeros(canvas_shape, dtype=np.result_type(patches.dtype, np.float64))
    count = np.zeros(canvas_shape, dtype=np.int64)
    np.add.at(count, (rows, cols), 1)
    if weights is None:
        np.add.at(total, (rows, cols), patches)
        weight = count.astype(np.float64)
    else:
        w = np.broadcast_to(weights, patches.shape)
        np.add.at(total, (rows, cols), patches * w)
        weight = np.zeros(canvas_shape, dtype=np.float64)
        np.add.at(weight, (rows, cols), w)
    return StitchCanvas(sum=total, count=count, weight=weight)


def illumination_map(probe_field: np.ndarray, grid: ScanGrid, canvas_shape: tuple[int, int]) -> np.ndarray:
    """Σ_j |P(r − r_j)|^2 on the canvas."""
    n = probe_field.shape[0]
    check_windows(grid, canvas_shape, n)
    rows, cols = window_indices(grid.positions, n)
    acc = np.zeros(canvas_shape, dtype=np.float64)
    np.add.at(acc, (rows, cols), np.broadcast_to(np.abs(probe_field) ** 2, (len(grid), n, n)))
    return acc


def illuminated_mask(probe_field: np.ndarray, grid: ScanGrid, canvas_shape: tuple[int, int],
                     threshold_frac: float = DEFAULT_THRESHOLD_FRAC) -> np.ndarray:
    """Pixels whose accumulated illumination is at least threshold_frac of the maximum."""
    if not 0.0 < threshold_frac < 1.0:
        raise ArgumentError(f"threshold_frac must be in (0, 1), got {threshold_frac}")
    acc = illumination_map(probe_field, grid, canvas_shape)
    peak = acc.max() if acc.size else 0.0
    if peak <= 0:
        return np.zeros(canvas_shape, dtype=bool)
    return acc >= threshold_frac * peak


# ── Metrics ──────────────────────────────────────────────────────────────────

def wrap_phase(x: np.ndarray) -> np.ndarray:
    """Map angles to (−π, π]."""
    return np.pi - np.mod(np.pi - x, 2.0 * np.pi)


def _mask_or_all(mask, shape) -> np.ndarray:
    mask = np.ones(shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if mask.shape != tuple(shape):
        raise ArgumentError(f"mask {mask.shape} does not match image {tuple(shape)}")
    if not mask.any():
        raise ArgumentError("metric mask is empty")
    return mask


def wrapped_phase_mae(pred: np.ndarray, ref: np.ndarray, mask: np.ndarray | None = None) -> float:
    if pred.shape != ref.shape:
        raise ArgumentError(f"shapes differ: {pred.shape} vs {ref.shape}")
    mask = _mask_or_all(mask, pred.shape)
    return float(np.mean(np.abs(wrap_phase(pred[mask] - ref[mask]))))


def amplitude_mae(pred: np.ndarray, ref: np.ndarray, mask: np.ndarray | None = None) -> float:
    if pred.shape != ref.shape:
        raise ArgumentError(f"shapes differ: {pred.shape} vs {ref.shape}")
    mask = _mask_or_all(mask, pred.shape)
    return float(np.mean(np.abs(pred[mask] - ref[mask])))


def alignment_scalar(rec: np.ndarray, ref: np.ndarray, mask: np.ndarray) -> complex:
    """Least-squares c minimizing Σ_mask |c·rec − ref|^2 (0 when rec vanishes)."""
    denom = float(np.sum(np.abs(rec[mask]) ** 2))
    if denom == 0.0:
        return 0j
    return complex(np.sum(ref[mask] * np.conj(rec[mask])) / denom)


def aligned_complex_nmse(rec: np.ndarray, ref: np.ndarray, mask: np.ndarray | None = None) -> float:
    """NMSE after absorbing the global complex scalar; 1 when rec is zero on the mask."""
    if rec.shape != ref.shape:
        raise ArgumentError(f"shapes differ: {rec.shape} vs {ref.shape}")
    mask = _mask_or_all(mask, rec.shape)
    ref_energy = float(np.sum(np.abs(ref[mask]) ** 2))
    if ref_energy == 0.0:
        raise ArgumentError("reference is zero on the mask")
    if not np.any(rec[mask]):
        return 1.0
    c = alignment_scalar(rec, ref, mask)
    return float(np.sum(np.abs(c * rec[mask] - ref[mask]) ** 2) / ref_energy)


@dataclass
class MetricsRecord:
    amp_mae: float
    phase_mae_wrapped: float
    nmse_complex: float
    region: str


def evaluate(rec: np.ndarray, truth: np.ndarray, mask: np.ndarray, region: str = "") -> MetricsRecord:
    """Align `rec` to `truth` with one complex scalar, then score amplitude, phase and NMSE."""
    mask = _mask_or_all(mask, rec.shape)
    aligned = alignment_scalar(rec, truth, mask) * rec
    return MetricsRecord(
        amp_mae=amplitude_mae(np.abs(aligned), np.abs(truth), mask),
        phase_mae_wrapped=wrapped_phase_mae(np.angle(aligned), np.angle(truth), mask),
        nmse_complex=aligned_complex_nmse(rec, truth, mask),
        region=region or f"{int(mask.sum())} px",
    )


def append_metrics_csv(path: str | Path, rows: list[dict]) -> Path:
    """Append rows (keys = METRICS_COLUMNS) to the metrics table, writing the header once."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df = pd.DataFrame(rows, columns=METRICS_COLUMNS)
    df.to_csv(path, mode="a", header=not path.exists(), index=False, lineterminator="\n",
              float_format="%.10g")
    return path
