"""
ePIE: sequential ptychographic phase retrieval of object and probe.

Per iteration the positions are visited in a fresh seeded random order. At
each position the exit wave is propagated to the detector, its modulus is
replaced by the measured one, and the back-propagated difference updates the
object (always) and the probe (from `probe_update_start` on).

The object and probe updates mutate their arrays in place and return them.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from ptychoforge.errors import ArgumentError, DataError, NumericError, ShapeError
from ptychoforge.geometry import ScanGrid, check_window, check_windows
from ptychoforge.numerics import ComplexField2D, SeededRng, fft2c, ifft2c
from ptychoforge.settings import progress
from ptychoforge.simulator import DiffractionStack, Probe, perturb_probe, window_indices

logger = logging.getLogger(__name__)

ERROR_CHUNK = 256


# ── Config & state ───────────────────────────────────────────────────────────

class EpieConfig(BaseModel):
    """ePIE schedule. Step sizes follow the original ePIE convention (1.0)."""
    model_config = ConfigDict(extra="forbid")

    iterations: int = Field(default=400, ge=0, description="Full passes over all scan positions.")
    alpha: float = Field(default=1.0, gt=0.0, le=2.0, description="Object update step.")
    beta: float = Field(default=1.0, gt=0.0, le=2.0, description="Probe update step.")
    probe_update_start: int = Field(default=5, ge=0, description="First iteration index that updates the probe.")
    shuffle_seed: int = Field(default=0, ge=0, lt=2**64, description="Seed of the per-iteration position order.")
    probe_noise: float = Field(default=0.1, ge=0.0, description="Relative complex noise on the initial probe.")
    log_every: int = Field(default=50, ge=1, description="Log the data error every N iterations.")


@dataclass
class EpieState:
    object_est: ComplexField2D
    probe_est: ComplexField2D
    error_history: list[float] = field(default_factory=list)

    @property
    def iterations_done(self) -> int:
        return len(self.error_history)


# ── Single-position operators ────────────────────────────────────────────────

def exit_wave(object_est: ComplexField2D, probe_est: ComplexField2D, position) -> ComplexField2D:
    """ψ(r) = P(r) · O(r + r_j) over the probe window."""
    n = probe_est.shape[0]
    r, c = check_window(position, object_est.shape, n)
    return probe_est * object_est[r:r + n, c:c + n]


def _project(farfield: ComplexField2D, amplitude: np.ndarray) -> ComplexField2D:
    mag = np.abs(farfield)
    # zero-modulus pixels take phase 0
    unit = np.divide(farfield, mag, out=np.ones_like(farfield), where=mag > 0)
    return unit * amplitude


def modulus_project(farfield: ComplexField2D, measured: np.ndarray) -> ComplexField2D:
    """Replace |Ψ| by √I, keeping the phase of Ψ (phase 0 where Ψ == 0)."""
    if farfield.shape != measured.shape:
        raise ShapeError(f"far field {farfield.shape} and measurement {measured.shape} differ")
    if np.any(measured < 0):
        raise DataError("measured intensity contains negative values")
    return _project(farfield, np.sqrt(measured))


def update_object(object_est: ComplexField2D, probe_est: ComplexField2D, position,
                  delta_psi: ComplexField2D, alpha: float) -> ComplexField2D:
    """O(r + r_j) += α · conj(P) / max|P|^2 · Δψ inside the window only."""
    n = probe_est.shape[0]
    r, c = check_window(position, object_est.shape, n)
    norm = float(np.max(np.abs(probe_est) ** 2))
    if norm == 0.0:
        raise NumericError("probe estimate is identically zero")
    object_est[r:r + n, c:c + n] += (alpha / norm) * np.conj(probe_est) * delta_psi
    return object_est


def update_probe(object_est: ComplexField2D, probe_est: ComplexField2D, position,
                 delta_psi: ComplexField2D, beta: float) -> ComplexField2D:
    """P(r) += β · conj(O(r + r_j)) / max|O_patch|^2 · Δψ."""
    n = probe_est.shape[0]
    r, c = check_window(position, object_est.shape, n)
    patch = object_est[r:r + n, c:c + n]
    norm = float(np.max(np.abs(patch) ** 2))
    if norm == 0.0:
        raise NumericError(f"object patch at ({r}, {c}) is identically zero")
    probe_est += (beta / norm) * np.conj(patch) * delta_psi
    return probe_est


# ── Convergence monitor ──────────────────────────────────────────────────────

def data_error(state: EpieState, stack: DiffractionStack) -> float:
    """Σ_j Σ_q (|fft2c(ψ_j)| − √I_j)^2 / Σ_j Σ_q I_j."""
    if len(stack) == 0:
        raise ArgumentError("data_error needs a non-empty stack")
    if state.probe_est.shape != stack.frames.shape[1:]:
        raise ShapeError(f"probe {state.probe_est.shape} does not match frames {stack.frames.shape[1:]}")
    check_windows(stack.grid, state.object_est.shape, stack.frame_size)
    total = float(stack.frames.sum())
    if total <= 0:
        raise NumericError("stack carries no intensity")
    mismatch = 0.0
    for start in range(0, len(stack), ERROR_CHUNK):
        pos = stack.grid.positions[start:start + ERROR_CHUNK]
        rows, cols = window_indices(pos, stack.frame_size)
        psi = state.probe_est[None] * state.object_est[rows, cols]
        model = np.abs(fft2c(psi))
        mismatch += float(np.sum((model - np.sqrt(stack.frames[start:start + ERROR_CHUNK])) ** 2))
    return mismatch / total


# ── Driver ───────────────────────────────────────────────────────────────────

def initial_guess(object_shape: tuple[int, int], probe: Probe, rng: SeededRng,
                  noise: float = 0.1) -> tuple[ComplexField2D, ComplexField2D]:
    """Flat 1+0i object and a noise-perturbed copy of the probe."""
    obj = np.ones(object_shape, dtype=np.complex128)
    return obj, perturb_probe(probe, rng, level=noise).field


def reconstruct(stack: DiffractionStack, grid: ScanGrid | None, config: EpieConfig,
                init_object: ComplexField2D, init_probe: ComplexField2D,
                callback: Callable[[int, EpieState], None] | None = None) -> EpieState:
    """Run `config.iterations` ePIE passes starting from copies of the initial estimates.

    `grid` may be None to use the positions the stack was measured at.
    """
    grid = stack.grid if grid is None else grid
    if len(grid) != len(stack):
        raise ArgumentError(f"grid has {len(grid)} positions but stack has {len(stack)} frames")
    if init_probe.shape != stack.frames.shape[1:]:
        raise ShapeError(f"initial probe {init_probe.shape} does not match frames {stack.frames.shape[1:]}")
    if np.any(stack.frames < 0):
        raise DataError("measured intensity contains negative values")
    check_windows(grid, init_object.shape, stack.frame_size)

    state = EpieState(object_est=np.array(init_object, dtype=np.complex128),
                      probe_est=np.array(init_probe, dtype=np.complex128))
    amplitudes = np.sqrt(stack.frames)
    order_rng = SeededRng(config.shuffle_seed)
    positions = grid.positions
    n = stack.frame_size

    for it in progress(range(config.iterations), desc="ePIE", total=config.iterations):
        update_pr = it >= config.probe_update_start
        for j in order_rng.generator.permutation(len(grid)):
            r, c = int(positions[j, 0]), int(positions[j, 1])
            psi = state.probe_est * state.object_est[r:r + n, c:c + n]
            revised = ifft2c(_project(fft2c(psi), amplitudes[j]))
            delta = revised - psi
            # both updates see the estimates from before this position
            probe_before = state.probe_est.copy() if update_pr else state.probe_est
            if update_pr:
                update_probe(state.object_est, state.probe_est, (r, c), delta, config.beta)
            update_object(state.object_est, probe_before, (r, c), delta, config.alpha)
        err = data_error(state, stack)
        state.error_history.append(err)
        if (it + 1) % config.log_every == 0 or it + 1 == config.iterations:
            logger.info("ePIE iteration %d/%d: data error %.3e", it + 1, config.iterations, err)
        if callback is not None:
            callback(it, state)
    return state


def remove_global_phase(object_est: ComplexField2D, mask: np.ndarray) -> ComplexField2D:
    """Rotate so the mean over `mask` has phase 0 (keeps labels away from the ±π wrap)."""
    mean = complex(np.mean(object_est[mask]))
    if mean == 0:
        return object_est.copy()
    return object_est * (abs(mean) / mean)


def save_error_history_csv(history: list[float], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df = pd.DataFrame({"iteration": np.arange(len(history)), "error": history})
    df.to_csv(path, index=False, lineterminator="\n", float_format="%.17g")
    return path
