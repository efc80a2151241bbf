"""
Training and inference for the diffraction-to-image network.

ADAM with bias correction, a reduce-on-plateau learning-rate controller,
minibatch training with best-validation checkpointing, and timed batch
inference. Minibatches are split into micro-batches whose gradients are
summed in a fixed order, so the result does not depend on the worker count.
"""

import json
import logging
import time
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from ptychoforge.dataset import SplitIndex, TripletDataset
from ptychoforge.errors import ArgumentError, FormatError, ShapeError
from ptychoforge.network import (
    Architecture, ModelParams, count_parameters, init_params, mae_loss, model_backward, model_forward,
    reference_architecture,
)
from ptychoforge.numerics import SeededRng, derive_seed
from ptychoforge.settings import progress
from ptychoforge.tensor_io import load_bundle, save_bundle

logger = logging.getLogger(__name__)

UNNORMALIZED_MAX = 10.0
LOSS_CURVE_COLUMNS = ["epoch", "train_mae", "val_mae", "lr"]


# ── ADAM ─────────────────────────────────────────────────────────────────────

@dataclass
class AdamState:
    m: "OrderedDict[str, np.ndarray]"
    v: "OrderedDict[str, np.ndarray]"
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0


def _tensors(params) -> dict:
    return params.tensors if isinstance(params, ModelParams) else params


def adam_init(params: "ModelParams | dict", lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> AdamState:
    tensors = _tensors(params)
    return AdamState(m=OrderedDict((k, np.zeros_like(v)) for k, v in tensors.items()),
                     v=OrderedDict((k, np.zeros_like(v)) for k, v in tensors.items()),
                     lr=lr, beta1=beta1, beta2=beta2, eps=eps)


def adam_step(params: "ModelParams | dict", grads: dict, state: AdamState):
    """One bias-corrected ADAM update, applied in place. Returns (params, state)."""
    tensors = _tensors(params)
    if list(grads) != list(tensors) or list(state.m) != list(tensors):
        raise ShapeError("gradients, moments and parameters must share names and order")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for name, p in tensors.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeError(f"gradient for {name} has shape {g.shape}, parameter has {p.shape}")
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= (state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)).astype(p.dtype, copy=False)
    return params, state


# ── Learning-rate plateau controller ─────────────────────────────────────────

class PlateauScheduler:
    """Multiply lr by `factor` once the best validation loss has not improved
    for `patience` consecutive epochs. Improvement means strictly lower."""

    def __init__(self, lr: float, patience: int = 5, factor: float = 0.5):
        if patience < 1:
            raise ArgumentError(f"patience must be >= 1, got {patience}")
        if not 0.0 < factor < 1.0:
            raise ArgumentError(f"factor must be in (0, 1), got {factor}")
        self.lr = lr
        self.patience = patience
        self.factor = factor
        self.best = np.inf
        self.wait = 0

    def step(self, val_loss: float) -> float:
        if val_loss < self.best:
            self.best = val_loss
            self.wait = 0
        else:
            self.wait += 1
            if self.wait >= self.patience:
                self.lr *= self.factor
                self.wait = 0
                logger.info("validation loss plateaued; learning rate reduced to %.3g", self.lr)
        return self.lr


def plateau_scheduler(history: list[float], patience: int, factor: float, lr: float) -> float:
    """Learning rate after replaying a validation-loss history from `lr`."""
    if len(history) == 0:
        raise ArgumentError("plateau_scheduler needs a non-empty loss history")
    sched = PlateauScheduler(lr, patience=patience, factor=factor)
    for loss in history:
        sched.step(loss)
    return sched.lr


# ── Training ─────────────────────────────────────────────────────────────────

class TrainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    batch_size: int = Field(default=64, ge=1)
    max_epochs: int = Field(default=100, ge=0)
    learning_rate: float = Field(default=1e-3, gt=0, description="Starting ADAM learning rate.")
    plateau_patience: int = Field(default=5, ge=1, description="Epochs without improvement before lr is cut.")
    lr_factor: float = Field(default=0.5, gt=0, lt=1)
    min_lr: float = Field(default=1e-6, gt=0, description="Training stops once lr falls below this.")
    seed: int = Field(default=0, ge=0, lt=2**64)
    micro_batch: int = Field(default=8, ge=1, description="Samples per forward/backward chunk.")
    precision: Literal["float32", "float64"] = "float32"


@dataclass
class EpochRecord:
    epoch: int
    train_mae: float
    val_mae: float
    lr: float


@dataclass
class TrainResult:
    params: ModelParams
    curves: list[EpochRecord]
    best_epoch: int
    seconds: float
    extra: dict = field(default_factory=dict)

    @property
    def best_val_mae(self) -> float:
        return min(r.val_mae for r in self.curves)


def _chunk_grads(params: ModelParams, diff, amp, phase):
    pa, pp, cache = model_forward(params, diff)
    loss, ga, gp = mae_loss(pa, pp, amp, phase)
    return loss, model_backward(params, cache, ga, gp)


def _batch_loss_and_grads(params, diff, amp, phase, micro_batch, pool):
    total = diff.shape[0]
    bounds = [(s, min(s + micro_batch, total)) for s in range(0, total, micro_batch)]
    jobs = [(diff[a:b], amp[a:b], phase[a:b]) for a, b in bounds]
    if pool is not None:
        results = list(pool.map(lambda j: _chunk_grads(params, *j), jobs))
    else:
        results = [_chunk_grads(params, *j) for j in jobs]
    loss = 0.0
    grads = OrderedDict((k, np.zeros_like(v)) for k, v in params.tensors.items())
    for (a, b), (chunk_loss, chunk_grads) in zip(bounds, results):
        w = (b - a) / total
        loss += w * chunk_loss
        for k in grads:
            grads[k] += w * chunk_grads[k]
    return loss, grads


def evaluate(params: ModelParams, dataset: TripletDataset, ids: np.ndarray, micro_batch: int = 32) -> float:
    """Mean MAE (amplitude + phase) over the triplets at `ids`."""
    if len(ids) == 0:
        raise ArgumentError("cannot evaluate on an empty index set")
    total = 0.0
    for start in range(0, len(ids), micro_batch):
        sel = ids[start:start + micro_batch]
        pa, pp, _ = model_forward(params, dataset.diffraction[sel])
        loss, _, _ = mae_loss(pa, pp, dataset.amplitude[sel], dataset.phase[sel])
        total += loss * len(sel)
    return total / len(ids)


def train(dataset: TripletDataset, split: SplitIndex, config: TrainConfig,
          architecture: Architecture | None = None, workers: int = 1) -> TrainResult:
    """Minibatch ADAM on the training ids; returns the parameters of the best validation epoch.

    Epoch 0 in the curves is the untrained network.
    """
    if len(dataset) == 0 or len(split.train_ids) == 0:
        raise ArgumentError("training needs a non-empty dataset and training split")
    if len(split.val_ids) == 0:
        raise ArgumentError("training needs a non-empty validation split")
    arch = architecture or reference_architecture()
    if dataset.frame_size != arch.input_size:
        raise ShapeError(f"dataset frames are {dataset.frame_size} px, network expects {arch.input_size}")

    dtype = np.dtype(config.precision)
    params = init_params(arch, derive_seed(config.seed, "init"), dtype=dtype)
    diff = dataset.diffraction.astype(dtype)
    amp = dataset.amplitude.astype(dtype)
    phase = dataset.phase.astype(dtype)
    data = TripletDataset(diff, amp, phase, dataset.grid, dataset.norm_meta)

    adam = adam_init(params, lr=config.learning_rate)
    sched = PlateauScheduler(config.learning_rate, config.plateau_patience, config.lr_factor)
    shuffle = SeededRng(derive_seed(config.seed, "shuffle"))
    train_ids = np.asarray(split.train_ids)
    val_ids = np.asarray(split.val_ids)

    start_time = time.perf_counter()
    val0 = evaluate(params, data, val_ids, config.micro_batch)
    curves = [EpochRecord(0, evaluate(params, data, train_ids, config.micro_batch), val0, adam.lr)]
    best, best_epoch = params.copy(), 0
    sched.step(val0)
    logger.info("epoch 0: val MAE %.4f (untrained)", val0)

    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for epoch in progress(range(1, config.max_epochs + 1), desc="train", total=config.max_epochs):
            order = train_ids[shuffle.generator.permutation(len(train_ids))]
            running = 0.0
            for s in range(0, len(order), config.batch_size):
                sel = order[s:s + config.batch_size]
                loss, grads = _batch_loss_and_grads(params, diff[sel], amp[sel], phase[sel],
                                                    config.micro_batch, pool)
                adam_step(params, grads, adam)
                running += loss * len(sel)
            train_mae = running / len(order)
            val_mae = evaluate(params, data, val_ids, config.micro_batch)
            curves.append(EpochRecord(epoch, train_mae, val_mae, adam.lr))
            if val_mae < min(r.val_mae for r in curves[:-1]):
                best, best_epoch = params.copy(), epoch
            logger.info("epoch %d: train MAE %.4f, val MAE %.4f, lr %.3g", epoch, train_mae, val_mae, adam.lr)
            adam.lr = sched.step(val_mae)
            if adam.lr < config.min_lr:
                logger.info("learning rate %.3g below min_lr %.3g; stopping", adam.lr, config.min_lr)
                break
    finally:
        if pool is not None:
            pool.shutdown()

    seconds = time.perf_counter() - start_time
    return TrainResult(params=best, curves=curves, best_epoch=best_epoch, seconds=seconds)


# ── Inference ────────────────────────────────────────────────────────────────

@dataclass
class PredictionReport:
    amplitude: np.ndarray
    phase: np.ndarray
    ms_per_frame: np.ndarray
    warnings: list[str] = field(default_factory=list)

    @property
    def mean_ms(self) -> float:
        return float(np.mean(self.ms_per_frame)) if self.ms_per_frame.size else 0.0

    @property
    def p95_ms(self) -> float:
        return float(np.percentile(self.ms_per_frame, 95)) if self.ms_per_frame.size else 0.0


def predict(params: ModelParams, frames: np.ndarray, batch_size: int = 64, warmup: bool = False) -> PredictionReport:
    """Batched inference on normalized frames with per-frame wall time.

    With `warmup`, the first batch is run once untimed before measuring.
    """
    single = frames.ndim == 2
    batch = frames[None] if single else frames
    warnings = []
    if batch.size and float(batch.max()) > UNNORMALIZED_MAX:
        msg = (f"input maximum {float(batch.max()):.3g} is far above 1; "
               "frames look unnormalized (divide by the dataset diff_scale)")
        logger.warning(msg)
        warnings.append(msg)

    amps, phases, times = [], [], []
    if warmup and len(batch):
        model_forward(params, batch[:batch_size])
    for s in range(0, len(batch), batch_size):
        chunk = batch[s:s + batch_size]
        t0 = time.perf_counter()
        pa, pp, _ = model_forward(params, chunk)
        elapsed_ms = (time.perf_counter() - t0) * 1e3
        amps.append(pa)
        phases.append(pp)
        times.extend([elapsed_ms / len(chunk)] * len(chunk))

    n = params.architecture.input_size
    amplitude = np.concatenate(amps) if amps else np.zeros((0, n, n))
    phase = np.concatenate(phases) if phases else np.zeros((0, n, n))
    if single:
        amplitude, phase = amplitude[0], phase[0]
    return PredictionReport(amplitude=amplitude, phase=phase, ms_per_frame=np.asarray(times), warnings=warnings)


# ── Persistence ──────────────────────────────────────────────────────────────

def save_model(params: ModelParams, weights_path: str | Path, descriptor_path: str | Path) -> tuple[Path, Path]:
    """PTYB weight bundle plus a JSON architecture descriptor."""
    weights_path = save_bundle(weights_path, dict(params.tensors))
    descriptor = {
        "architecture": params.architecture.model_dump(),
        "layers": [s.model_dump() for s in params.architecture.layers()],
        "parameter_count": count_parameters(params.architecture),
        "init_seed": params.init_seed,
        "dtype": str(next(iter(params.tensors.values())).dtype),
    }
    descriptor_path = Path(descriptor_path)
    descriptor_path.parent.mkdir(parents=True, exist_ok=True)
    descriptor_path.write_text(json.dumps(descriptor, indent=2) + "\n", encoding="utf-8")
    return weights_path, descriptor_path


def load_model(weights_path: str | Path, descriptor_path: str | Path) -> ModelParams:
    descriptor = json.loads(Path(descriptor_path).read_text(encoding="utf-8"))
    arch = Architecture.model_validate(descriptor["architecture"])
    tensors = load_bundle(weights_path)
    names = [s.name for s in arch.layers()]
    if set(tensors) != set(names):
        raise FormatError(f"{weights_path}: weight names do not match the descriptor", 0)
    dtype = np.dtype(descriptor.get("dtype", "float64"))
    ordered = OrderedDict((n, tensors[n].astype(dtype)) for n in names)
    return ModelParams(tensors=ordered, architecture=arch, init_seed=int(descriptor["init_seed"]))


def loss_curves_frame(curves: list[EpochRecord]) -> pd.DataFrame:
    return pd.DataFrame([[r.epoch, r.train_mae, r.val_mae, r.lr] for r in curves], columns=LOSS_CURVE_COLUMNS)


def save_loss_curves_csv(curves: list[EpochRecord], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    loss_curves_frame(curves).to_csv(path, index=False, lineterminator="\n", float_format="%.10g")
    return path
