"""
Studies on simulated scans: sparse sampling, training-set size and speed.

Every study starts from the same scene (object, probe, raster scan and
diffraction stack, all from seeds) and the same training data: labels from
ePIE on the full scan (or the ground truth), a contiguous row split into
training and test lines, and a seeded 90-10 validation split inside the
training lines. Metrics are always taken against the simulated object on the
illuminated part of the test region.

Usage:
    from ptychoforge.experiments import ExperimentConfig, prepare_scene, run_sparsity_sweep
    config = ExperimentConfig.model_validate_json(Path("data/configs/reference.json").read_text())
    report = run_sparsity_sweep(config)
"""

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ptychoforge.dataset import (
    NormMeta, SplitIndex, TripletDataset, build_triplets, load_dataset, save_dataset, split_90_10, subset,
    train_test_rows,
)
from ptychoforge.epie import EpieConfig, EpieState, initial_guess, reconstruct, remove_global_phase
from ptychoforge.errors import ArgumentError, ConfigurationError
from ptychoforge.geometry import (
    Geometry, ScanGrid, centered_margin, grid_rows_slice, raster_positions, subsample_grid, subsample_indices,
)
from ptychoforge.imaging import export_pgm
from ptychoforge.network import Architecture, ModelParams, reference_architecture
from ptychoforge.numerics import SeededRng, derive_seed
from ptychoforge.settings import progress
from ptychoforge.simulator import (
    DiffractionStack, ObjectSample, Probe, add_poisson, diffract, make_probe, make_test_object, select_frames,
)
from ptychoforge.stitching import (
    DEFAULT_THRESHOLD_FRAC, MetricsRecord, alignment_scalar, append_metrics_csv, evaluate, illuminated_mask,
    stitch_average,
)
from ptychoforge.tensor_io import load_bundle, save_bundle
from ptychoforge.training import TrainConfig, TrainResult, predict, train

logger = logging.getLogger(__name__)

SMALLEST_TRAIN_SIZE = 800
TIMING_COLUMNS = ["method", "ms_per_frame", "total_s"]
MAX_REPEAT_SPREAD = 0.2

# GPU figures quoted for the beamline experiment; printed for context only.
LITERATURE_VALUES = {
    "speedup_vs_epie": 300.0,
    "nn_ms_per_frame": 1.0,
    "train_minutes_at_800": 1.0,
}


# ── Configuration ────────────────────────────────────────────────────────────

class SimulationConfig(BaseModel):
    """Synthetic scan: etched object, focused probe and a centered raster."""
    model_config = ConfigDict(extra="forbid")

    geometry: Geometry = Field(default_factory=Geometry)
    object_size: int = Field(default=256, gt=0, description="Object height and width in pixels.")
    fwhm_px: float = Field(default=6.0, ge=2.0, description="Probe intensity FWHM in object pixels.")
    step_px: int = Field(default=3, ge=1, description="Raster step in object pixels.")
    grid_rows: int = Field(default=32, ge=1)
    grid_cols: int = Field(default=32, ge=1)
    a_min: float = Field(default=0.7, gt=0.0, le=1.0, description="Amplitude of etched features.")
    phi_max: float = Field(default=1.0, ge=0.0, lt=np.pi, description="Phase of etched features in radians.")
    blur_px: float = Field(default=3.0, ge=0.0, description="FWHM of the smoothing kernel.")
    photon_budget: float | None = Field(default=None, gt=0, description="Expected photons per frame; null is noiseless.")

    @property
    def frame_size(self) -> int:
        return self.geometry.frame_size


class ExperimentConfig(BaseModel):
    """Everything one study run needs. Unknown keys are rejected."""
    model_config = ConfigDict(extra="forbid")

    seed: int = Field(default=0, ge=0, lt=2**64, description="Base seed; stage seeds derive from it.")
    simulation: SimulationConfig = Field(default_factory=SimulationConfig)
    epie: EpieConfig = Field(default_factory=EpieConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    architecture: Architecture = Field(default_factory=reference_architecture)
    label_source: Literal["epie", "truth"] = Field(
        default="epie", description="Training labels from ePIE on the full scan, or the simulated object.")
    train_fraction: float = Field(default=0.62, gt=0.0, lt=1.0, description="Share of scan lines used for training.")
    sparsity_factors: list[int] = Field(default_factory=lambda: [1, 2, 3, 4, 5])
    train_sizes: list[int] | None = Field(
        default=None, description="Training-set sizes; null means [full, full/2, full/4, full/8, 800].")
    threshold_frac: float = Field(default=DEFAULT_THRESHOLD_FRAC, gt=0.0, lt=1.0)
    probe_weighted: bool = Field(default=False, description="Weight stitched patches by |P|^2.")
    out_dir: str = Field(default="runs/reference")

    @field_validator("sparsity_factors")
    @classmethod
    def _factors_valid(cls, v: list[int]) -> list[int]:
        if not v:
            raise ValueError("at least one sparsity factor is required")
        if any(f < 1 for f in v):
            raise ValueError("sparsity factors must be >= 1")
        return v

    @field_validator("train_sizes")
    @classmethod
    def _sizes_valid(cls, v: list[int] | None) -> list[int] | None:
        if v is not None and any(s < 1 for s in v):
            raise ValueError("training sizes must be >= 1")
        return v

    @model_validator(mode="after")
    def _frame_matches_network(self):
        if self.architecture.input_size != self.simulation.frame_size:
            raise ValueError(
                f"network input {self.architecture.input_size} px differs from frame size "
                f"{self.simulation.frame_size} px"
            )
        return self

    def stage_seeds(self) -> dict[str, int]:
        """Every seed a run uses, by stage."""
        return {
            "base": self.seed,
            "object": derive_seed(self.seed, "object"),
            "noise": derive_seed(self.seed, "noise"),
            "probe_init": derive_seed(self.seed, "probe_init"),
            "split": derive_seed(self.seed, "split"),
            "epie_shuffle": self.epie.shuffle_seed,
            "train": self.train.seed,
        }


# ── Scene & training data ────────────────────────────────────────────────────

@dataclass
class Scene:
    obj: ObjectSample
    probe: Probe
    grid: ScanGrid
    stack: DiffractionStack

    @property
    def canvas_shape(self) -> tuple[int, int]:
        return self.obj.shape


@dataclass
class TrainingData:
    dataset: TripletDataset
    split: SplitIndex
    train_rows: np.ndarray
    test_rows: np.ndarray
    n_train_lines: int
    labels: np.ndarray | None = None  # complex label image the patches were cut from
    epie_state: EpieState | None = None
    epie_seconds: float = 0.0


def prepare_scene(config: ExperimentConfig, workers: int = 1) -> Scene:
    """Object, probe, centered raster scan and measured stack, all from `config.seed`."""
    sim = config.simulation
    seeds = config.stage_seeds()
    obj = make_test_object(sim.object_size, sim.object_size, SeededRng(seeds["object"]),
                           a_min=sim.a_min, phi_max=sim.phi_max, blur_px=sim.blur_px)
    probe = make_probe(sim.frame_size, sim.fwhm_px)
    margin = min(centered_margin(sim.object_size, sim.grid_rows, sim.step_px, sim.frame_size),
                 centered_margin(sim.object_size, sim.grid_cols, sim.step_px, sim.frame_size))
    grid = raster_positions(sim.grid_rows, sim.grid_cols, sim.step_px, margin)
    stack = diffract(obj, probe, grid, workers=workers)
    if sim.photon_budget is not None:
        stack = add_poisson(stack, sim.photon_budget, SeededRng(seeds["noise"]))
    logger.info("scene: %dx%d object, %d positions, %d px frames, %s",
                sim.object_size, sim.object_size, len(grid), sim.frame_size,
                "noiseless" if sim.photon_budget is None else f"{sim.photon_budget:g} photons/frame")
    return Scene(obj=obj, probe=probe, grid=grid, stack=stack)


def run_epie(config: ExperimentConfig, scene: Scene, stack: DiffractionStack) -> tuple[EpieState, float]:
    """ePIE on `stack` from the standard initial guess; returns the state and wall seconds."""
    init_obj, init_probe = initial_guess(scene.canvas_shape, scene.probe,
                                         SeededRng(config.stage_seeds()["probe_init"]),
                                         noise=config.epie.probe_noise)
    t0 = time.perf_counter()
    state = reconstruct(stack, stack.grid, config.epie, init_obj, init_probe)
    return state, time.perf_counter() - t0


def epie_labels(config: ExperimentConfig, scene: Scene, object_est: np.ndarray) -> np.ndarray:
    """ePIE object with its mean phase over the illuminated scan removed."""
    mask = illuminated_mask(scene.probe.field, scene.grid, scene.canvas_shape, config.threshold_frac)
    return remove_global_phase(object_est, mask)


def build_training_data(config: ExperimentConfig, scene: Scene, labels: np.ndarray | None = None) -> TrainingData:
    """Labels, triplets and splits for the scene.

    Pass `labels` (a complex image) to reuse an existing reconstruction instead of running ePIE.
    """
    grid = scene.grid
    train_rows, test_rows = train_test_rows(grid, config.train_fraction)
    n_train_lines = len(train_rows) // grid.cols
    state, seconds = None, 0.0
    if labels is None and config.label_source == "epie":
        state, seconds = run_epie(config, scene, scene.stack)
        labels = epie_labels(config, scene, state.object_est)
    elif labels is None:
        labels = scene.obj.transmission.copy()

    dataset = build_triplets(scene.stack, np.abs(labels), np.angle(labels), grid, train_ids=train_rows)
    inner = split_90_10(len(train_rows), config.stage_seeds()["split"])
    split = SplitIndex(train_ids=train_rows[inner.train_ids], val_ids=train_rows[inner.val_ids], seed=inner.seed)
    logger.info("training data: %d train / %d val / %d test triplets (%s labels)",
                len(split.train_ids), len(split.val_ids), len(test_rows), config.label_source)
    return TrainingData(dataset=dataset, split=split, train_rows=train_rows, test_rows=test_rows,
                        n_train_lines=n_train_lines, labels=labels, epie_state=state, epie_seconds=seconds)


def save_training_data(data: TrainingData, directory: str | Path) -> tuple[Path, Path]:
    """dataset.ptyb plus split.ptyb (train/val/test ids, split seed, training lines)."""
    directory = Path(directory)
    dataset_path = save_dataset(data.dataset, directory / "dataset.ptyb")
    split_path = save_bundle(directory / "split.ptyb", {
        "train_ids": data.split.train_ids.astype(np.float64),
        "val_ids": data.split.val_ids.astype(np.float64),
        "test_ids": data.test_rows.astype(np.float64),
        # 64-bit seed as two exact 32-bit halves
        "meta": np.array([data.split.seed >> 32, data.split.seed & 0xFFFFFFFF, data.n_train_lines], dtype=np.float64),
    })
    return dataset_path, split_path


def load_training_data(directory: str | Path) -> TrainingData:
    directory = Path(directory)
    dataset = load_dataset(directory / "dataset.ptyb")
    parts = load_bundle(directory / "split.ptyb")
    hi, lo, n_train_lines = (int(v) for v in parts["meta"])
    seed = (hi << 32) | lo
    train_ids = parts["train_ids"].astype(np.int64)
    val_ids = parts["val_ids"].astype(np.int64)
    return TrainingData(
        dataset=dataset,
        split=SplitIndex(train_ids=train_ids, val_ids=val_ids, seed=seed),
        train_rows=np.sort(np.concatenate([train_ids, val_ids])),
        test_rows=parts["test_ids"].astype(np.int64),
        n_train_lines=n_train_lines,
    )


def held_out_grid(scene: Scene, data: TrainingData) -> tuple[ScanGrid, np.ndarray]:
    """Scan lines held out of training."""
    return grid_rows_slice(scene.grid, data.n_train_lines, scene.grid.rows)


def train_model(config: ExperimentConfig, data: TrainingData, split: SplitIndex | None = None,
                workers: int = 1) -> TrainResult:
    return train(data.dataset, split or data.split, config.train, architecture=config.architecture,
                 workers=workers)


# ── Reports ──────────────────────────────────────────────────────────────────

@dataclass
class CellResult:
    method: Literal["epie", "nn"]
    factor: int
    train_size: int
    metrics: MetricsRecord
    ms_per_frame: float
    n_points: int
    seconds: float = 0.0
    val_mae: float | None = None
    image: np.ndarray | None = field(default=None, repr=False)  # aligned complex reconstruction

    @property
    def key(self) -> str:
        return f"{self.method}_f{self.factor}_n{self.train_size}"


@dataclass
class TimingRow:
    method: str
    ms_per_frame: float
    total_s: float


@dataclass
class RunReport:
    run_id: str
    cells: list[CellResult] = field(default_factory=list)
    timing: list[TimingRow] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def metrics_rows(self) -> list[dict]:
        return [{
            "run_id": f"{self.run_id}/{c.method}",
            "factor": c.factor,
            "train_size": c.train_size,
            "amp_mae": c.metrics.amp_mae,
            "phase_mae": c.metrics.phase_mae_wrapped,
            "nmse": c.metrics.nmse_complex,
            "ms_per_frame": c.ms_per_frame,
        } for c in self.cells]

    def cell(self, method: str, factor: int | None = None, train_size: int | None = None) -> CellResult:
        for c in self.cells:
            if c.method == method and (factor is None or c.factor == factor) \
                    and (train_size is None or c.train_size == train_size):
                return c
        raise KeyError(f"no {method} cell for factor={factor} train_size={train_size}")


def stitch_prediction(params: ModelParams, frames: np.ndarray, grid: ScanGrid, norm: NormMeta,
                      canvas_shape: tuple[int, int], probe: Probe | None = None):
    """Predict every frame, average amplitude and phase onto the canvas.

    Returns (complex image, coverage mask, ms per frame). With `probe`, patches
    are weighted by |P|^2.
    """
    report = predict(params, frames / norm.diff_scale, warmup=True)
    weights = None if probe is None else np.abs(probe.field) ** 2
    amp = stitch_average(report.amplitude * norm.amp_scale, grid, canvas_shape, weights=weights)
    phase = stitch_average(report.phase, grid, canvas_shape, weights=weights)
    image = amp.final * np.exp(1j * phase.final)
    return image, amp.covered, report.mean_ms


def _score(image: np.ndarray, truth: np.ndarray, mask: np.ndarray, region: str):
    metrics = evaluate(image, truth, mask, region=region)
    return metrics, alignment_scalar(image, truth, mask) * image


def _region_mask(scene: Scene, grid: ScanGrid, config: ExperimentConfig) -> np.ndarray:
    mask = illuminated_mask(scene.probe.field, grid, scene.canvas_shape, config.threshold_frac)
    if not mask.any():
        raise ConfigurationError("the evaluation region is empty; the scan is too small for this split")
    return mask


def evaluate_nn(config: ExperimentConfig, scene: Scene, params: ModelParams, norm: NormMeta,
                grid: ScanGrid, frames: np.ndarray, factor: int, train_size: int) -> CellResult:
    probe = scene.probe if config.probe_weighted else None
    image, _, ms = stitch_prediction(params, frames, grid, norm, scene.canvas_shape, probe=probe)
    mask = _region_mask(scene, grid, config)
    metrics, aligned = _score(image, scene.obj.transmission, mask, f"illuminated test region, {int(mask.sum())} px")
    return CellResult(method="nn", factor=factor, train_size=train_size, metrics=metrics,
                      ms_per_frame=ms, n_points=len(grid), image=aligned)


def _ensure_model(config: ExperimentConfig, data: TrainingData, params: ModelParams | None,
                  workers: int) -> ModelParams:
    if params is not None:
        if params.architecture.input_size != data.dataset.frame_size:
            raise ConfigurationError(
                f"model expects {params.architecture.input_size} px frames, dataset has {data.dataset.frame_size}"
            )
        return params
    logger.info("no trained model given; training one on the full-density scan")
    return train_model(config, data, workers=workers).params


def run_sparsity_sweep(config: ExperimentConfig, scene: Scene | None = None, data: TrainingData | None = None,
                       params: ModelParams | None = None, run_id: str = "sparsity",
                       workers: int = 1) -> RunReport:
    """ePIE and the network on the same sub-sampled test scans, one trained model for all factors."""
    scene = scene or prepare_scene(config, workers)
    data = data or build_training_data(config, scene)
    params = _ensure_model(config, data, params, workers)
    held_out, held_idx = held_out_grid(scene, data)
    held_stack = select_frames(scene.stack, held_idx, held_out)
    truth = scene.obj.transmission
    report = RunReport(run_id=run_id)
    n_train = len(data.split.train_ids)

    for factor in progress(config.sparsity_factors, desc="sparsity", total=len(config.sparsity_factors)):
        idx = subsample_indices(held_out, factor)
        sparse = subsample_grid(held_out, factor)
        sparse_stack = select_frames(held_stack, idx, sparse)
        mask = _region_mask(scene, sparse, config)
        region = f"illuminated test region at factor {factor}, {int(mask.sum())} px"

        state, seconds = run_epie(config, scene, sparse_stack)
        metrics, aligned = _score(state.object_est, truth, mask, region)
        report.cells.append(CellResult(method="epie", factor=factor, train_size=n_train, metrics=metrics,
                                       ms_per_frame=1e3 * seconds / len(sparse), n_points=len(sparse),
                                       seconds=seconds, image=aligned))

        report.cells.append(evaluate_nn(config, scene, params, data.dataset.norm_meta, sparse,
                                        sparse_stack.frames, factor, n_train))
        logger.info("factor %d: %d points, ePIE NMSE %.3e, NN NMSE %.3e", factor, len(sparse),
                    report.cells[-2].metrics.nmse_complex, report.cells[-1].metrics.nmse_complex)

    full_points = len(held_out)
    report.extra["dose_reduction"] = {c.factor: full_points / c.n_points for c in report.cells if c.method == "nn"}
    report.extra["n_points"] = {c.factor: c.n_points for c in report.cells if c.method == "nn"}
    return report


def resolve_train_sizes(config: ExperimentConfig, available: int) -> list[int]:
    """Configured sizes, or the halving ladder down to 800 that fits `available`."""
    if config.train_sizes is not None:
        too_big = [s for s in config.train_sizes if s > available]
        if too_big:
            raise ConfigurationError(f"training sizes {too_big} exceed the {available} available triplets")
        return list(config.train_sizes)
    ladder = [available, available // 2, available // 4, available // 8, SMALLEST_TRAIN_SIZE]
    sizes = []
    for s in ladder:
        if 1 <= s <= available and s not in sizes:
            sizes.append(s)
    if SMALLEST_TRAIN_SIZE > available:
        logger.warning("only %d training triplets; the %d-sample cell is skipped", available, SMALLEST_TRAIN_SIZE)
    return sizes


def run_training_size_sweep(config: ExperimentConfig, scene: Scene | None = None,
                            data: TrainingData | None = None, run_id: str = "train_size",
                            workers: int = 1) -> RunReport:
    """Fresh network per size on a subset of the first `size` training ids plus the fixed validation set."""
    scene = scene or prepare_scene(config, workers)
    data = data or build_training_data(config, scene)
    sizes = resolve_train_sizes(config, len(data.split.train_ids))
    held_out, held_idx = held_out_grid(scene, data)
    frames = scene.stack.frames[held_idx]
    report = RunReport(run_id=run_id)

    for size in progress(sizes, desc="train sizes", total=len(sizes)):
        picked = np.concatenate([data.split.train_ids[:size], data.split.val_ids])
        part = subset(data.dataset, picked)
        split = SplitIndex(train_ids=np.arange(size), val_ids=np.arange(size, picked.size), seed=data.split.seed)
        result = train(part, split, config.train, architecture=config.architecture, workers=workers)
        cell = evaluate_nn(config, scene, result.params, data.dataset.norm_meta, held_out, frames, 1, size)
        cell.seconds = result.seconds
        cell.val_mae = result.best_val_mae
        report.cells.append(cell)
        logger.info("size %d: val MAE %.4f, test amp MAE %.4f, %.1f s", size, cell.val_mae,
                    cell.metrics.amp_mae, result.seconds)

    report.extra["training_seconds"] = {c.train_size: c.seconds for c in report.cells}
    report.extra["val_mae"] = {c.train_size: c.val_mae for c in report.cells}
    return report


@dataclass
class SpeedReport:
    timing: list[TimingRow]
    ratio: float
    nn_repeat_ms: list[float]

    @property
    def spread(self) -> float:
        """(max − min) / median of the repeated network timings."""
        runs = np.asarray(self.nn_repeat_ms)
        mid = float(np.median(runs))
        return float((runs.max() - runs.min()) / mid) if mid > 0 else 0.0

    @property
    def stable(self) -> bool:
        return self.spread < MAX_REPEAT_SPREAD


def benchmark_speed(config: ExperimentConfig, scene: Scene | None = None, data: TrainingData | None = None,
                    params: ModelParams | None = None, repeats: int = 3, workers: int = 1) -> SpeedReport:
    """Network ms/frame (warm-up excluded) against ePIE wall time per frame on the same test stack."""
    scene = scene or prepare_scene(config, workers)
    data = data or build_training_data(config, scene)
    params = _ensure_model(config, data, params, workers)
    held_out, held_idx = held_out_grid(scene, data)
    stack = select_frames(scene.stack, held_idx, held_out)
    if len(stack) == 0:
        raise ArgumentError("cannot benchmark an empty stack")
    frames = stack.frames / data.dataset.norm_meta.diff_scale

    runs = []
    for _ in range(max(1, repeats)):
        runs.append(predict(params, frames, warmup=True).mean_ms)
    nn_ms = float(np.median(runs))
    nn_total = nn_ms * len(stack) / 1e3

    _, epie_total = run_epie(config, scene, stack)
    epie_ms = 1e3 * epie_total / len(stack)
    ratio = epie_ms / nn_ms if nn_ms > 0 else float("inf")
    logger.info("speed: NN %.3f ms/frame, ePIE %.3f ms/frame amortized, ratio %.1f", nn_ms, epie_ms, ratio)
    report = SpeedReport(
        timing=[TimingRow("nn", nn_ms, nn_total), TimingRow("epie", epie_ms, epie_total)],
        ratio=ratio,
        nn_repeat_ms=runs,
    )
    if not report.stable:
        logger.warning("network timings spread %.0f%% across %d repeats", 100 * report.spread, len(runs))
    return report


# ── Output ───────────────────────────────────────────────────────────────────

def save_timing_csv(rows: list[TimingRow], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df = pd.DataFrame([[r.method, r.ms_per_frame, r.total_s] for r in rows], columns=TIMING_COLUMNS)
    df.to_csv(path, index=False, lineterminator="\n", float_format="%.6g")
    return path


def write_report(report: RunReport, out_dir: str | Path) -> list[Path]:
    """metrics.csv (appended), timing.csv and amplitude/phase PGM previews per cell."""
    out_dir = Path(out_dir)
    written = [append_metrics_csv(out_dir / "metrics.csv", report.metrics_rows())]
    if report.timing:
        written.append(save_timing_csv(report.timing, out_dir / "timing.csv"))
    previews = out_dir / "previews" / report.run_id
    for c in report.cells:
        if c.image is None:
            continue
        written.append(export_pgm(np.abs(c.image), previews / f"{c.key}_amp.pgm", 0.0, 1.0))
        written.append(export_pgm(np.angle(c.image), previews / f"{c.key}_phase.pgm", -np.pi, np.pi))
    return written


def print_report(report: RunReport) -> None:
    """Console table of a report in the project's summary style."""
    print(f"\n  Run: {report.run_id}")
    print(f"  {'method':<6} {'factor':>6} {'size':>6} {'points':>6} {'amp MAE':>9} {'phase MAE':>10} "
          f"{'NMSE':>10} {'ms/frame':>9}")
    for c in report.cells:
        m = c.metrics
        print(f"  {c.method:<6} {c.factor:>6} {c.train_size:>6} {c.n_points:>6} {m.amp_mae:>9.4f} "
              f"{m.phase_mae_wrapped:>10.4f} {m.nmse_complex:>10.3e} {c.ms_per_frame:>9.3f}")
    for key, val in report.extra.items():
        print(f"  {key}: {val}")


def print_speed(speed: SpeedReport) -> None:
    print("\n  Speed benchmark (CPU)")
    for row in speed.timing:
        print(f"  {row.method:<5}: {row.ms_per_frame:.3f} ms/frame, {row.total_s:.2f} s total")
    print(f"  ePIE / NN      : {speed.ratio:.1f}x")
    verdict = "stable" if speed.stable else f"unstable, limit {MAX_REPEAT_SPREAD:.0%}"
    print(f"  Repeat spread  : {speed.spread:.1%} over {len(speed.nn_repeat_ms)} runs ({verdict})")


def print_literature_values() -> None:
    print("\n  Literature values (GPU, beamline data; not reproduced here):")
    print(f"    speed-up over ePIE      : ~{LITERATURE_VALUES['speedup_vs_epie']:.0f}x")
    print(f"    inference per scan point: ~{LITERATURE_VALUES['nn_ms_per_frame']:.0f} ms")
    print(f"    training on 800 samples : <{LITERATURE_VALUES['train_minutes_at_800']:.0f} min")
