"""
ptychoforge command line: one subcommand per pipeline stage.

Stages read their inputs from and write their outputs under the run
directory (`out_dir` in the config, or --out):

    simulate/  object.ptyt probe.ptyt stack.ptyt grid.csv
    epie/      object.ptyt probe.ptyt error_history.csv
    dataset/   dataset.ptyb split.ptyb
    train/     weights.ptyb model.json loss_curves.csv
    predict/   frameNNNNN_{amp,phase,diffraction}.pgm
    stitch/    nn_object.ptyt nn_{amplitude,phase}.ptyt mask.ptyt [epie_object.ptyt] metrics.csv *.pgm
    sweep/     <study>/metrics.csv previews/
    bench/     timing.csv

Each stage also writes manifest.json (input/output hashes, seeds, versions,
argv). Exit codes: 0 success, 1 invalid configuration, 2 missing input file,
3 format or metric failure.

Usage:
    ptychoforge simulate --config data/configs/reference.json
    ptychoforge sweep --config data/configs/reference.json --factors 1,5
"""

import argparse
import hashlib
import logging
import platform
import sys
from importlib import metadata
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from ptychoforge.epie import initial_guess, reconstruct, save_error_history_csv
from ptychoforge.errors import (
    ConfigurationError, FormatError, MissingInputError, NumericError, PtychoError,
)
from ptychoforge.experiments import (
    CellResult, ExperimentConfig, Scene, benchmark_speed, build_training_data, epie_labels, evaluate_nn,
    held_out_grid, load_training_data, prepare_scene, print_literature_values, print_report, print_speed,
    run_sparsity_sweep, run_training_size_sweep, save_timing_csv, save_training_data, train_model, write_report,
)
from ptychoforge.geometry import field_of_view, load_grid_csv, overlap_fraction, save_grid_csv
from ptychoforge.imaging import export_pgm, log_preview
from ptychoforge.network import count_parameters
from ptychoforge.numerics import SeededRng, derive_seed, ensure_finite
from ptychoforge.settings import configure_logging, worker_count
from ptychoforge.simulator import DiffractionStack, ObjectSample, Probe
from ptychoforge.stitching import alignment_scalar, append_metrics_csv, evaluate, illuminated_mask
from ptychoforge.tensor_io import load_tensor, save_tensor
from ptychoforge.training import load_model, predict, save_loss_curves_csv, save_model

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_MISSING = 2
EXIT_FAILURE = 3

STAGES = ["simulate", "epie", "dataset", "train", "predict", "stitch", "sweep", "bench"]
STAGE_HELP = {
    "simulate": "simulate object, probe and diffraction stack",
    "epie": "reconstruct with ePIE",
    "dataset": "build training triplets and splits",
    "train": "train the network",
    "predict": "predict single frames and render previews",
    "stitch": "stitch predictions over the test region",
    "sweep": "sparse-sampling or training-size study",
    "bench": "inference vs ePIE timing",
}
MANIFEST_PACKAGES = ["numpy", "scipy", "scikit-image", "pandas", "pydantic"]


# ── Configuration ────────────────────────────────────────────────────────────

class CliConfig(ExperimentConfig):
    """ExperimentConfig plus the options only the command line uses."""
    model_config = ConfigDict(extra="forbid")

    run_id: str = Field(default="reference", description="Label written into metrics tables.")
    preview_frames: list[int] = Field(default_factory=lambda: [0], description="Frames `predict` renders.")

    def resolved(self, seed: int | None = None, out_dir: str | None = None) -> "CliConfig":
        """Apply command-line overrides and make every stage seed explicit."""
        base = self.seed if seed is None else seed
        epie = self.epie
        train = self.train
        if seed is not None or "shuffle_seed" not in epie.model_fields_set:
            epie = epie.model_copy(update={"shuffle_seed": derive_seed(base, "epie_shuffle")})
        if seed is not None or "seed" not in train.model_fields_set:
            train = train.model_copy(update={"seed": derive_seed(base, "train")})
        update = {"seed": base, "epie": epie, "train": train}
        if out_dir is not None:
            update["out_dir"] = out_dir
        return self.model_copy(update=update)


class RunManifest(BaseModel):
    stage: str
    argv: list[str]
    config: dict
    seeds: dict[str, int]
    inputs: dict[str, str] = Field(description="Path → sha256 of every file read.")
    outputs: dict[str, str] = Field(description="Path → sha256 of every file written.")
    versions: dict[str, str]


def _validation_message(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        path = ".".join(str(p) for p in e["loc"]) or "<root>"
        lines.append(f"{path}: {e['msg']}")
    return "invalid config: " + "; ".join(lines)


def load_config(path: str | Path) -> CliConfig:
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(path)
    try:
        return CliConfig.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as e:
        raise ConfigurationError(_validation_message(e)) from e


# ── Manifest ─────────────────────────────────────────────────────────────────

def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def _versions() -> dict[str, str]:
    versions = {"python": platform.python_version()}
    for name in ["ptychoforge", *MANIFEST_PACKAGES]:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "unknown"
    return versions


def write_manifest(stage: str, config: CliConfig, inputs: list[Path], outputs: list[Path],
                   argv: list[str] | None = None) -> Path:
    """Record everything needed to rerun `stage` next to its outputs."""
    stage_dir = Path(config.out_dir) / stage
    manifest = RunManifest(
        stage=stage,
        argv=list(sys.argv if argv is None else argv),
        config=config.model_dump(mode="json"),
        seeds=config.stage_seeds(),
        inputs={str(p): sha256_file(p) for p in sorted(set(inputs), key=str)},
        outputs={str(p): sha256_file(p) for p in sorted(set(outputs), key=str)},
        versions=_versions(),
    )
    path = stage_dir / "manifest.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return path


# ── Artifact helpers ─────────────────────────────────────────────────────────

def _stage_dir(config: CliConfig, stage: str) -> Path:
    d = Path(config.out_dir) / stage
    d.mkdir(parents=True, exist_ok=True)
    return d


def _need(path: Path) -> Path:
    if not path.is_file():
        raise MissingInputError(path)
    return path


def _scene_files(config: CliConfig) -> list[Path]:
    d = Path(config.out_dir) / "simulate"
    return [_need(d / name) for name in ("object.ptyt", "probe.ptyt", "stack.ptyt", "grid.csv")]


def load_scene(config: CliConfig) -> Scene:
    """Scene as written by `simulate`."""
    obj_path, probe_path, stack_path, grid_path = _scene_files(config)
    sim = config.simulation
    grid = load_grid_csv(grid_path, sim.grid_rows, sim.grid_cols)
    obj = ObjectSample(load_tensor(obj_path).astype(np.complex128), sim.a_min, sim.phi_max)
    probe = Probe(load_tensor(probe_path).astype(np.complex128), sim.fwhm_px)
    stack = DiffractionStack(load_tensor(stack_path).astype(np.float64), grid, sim.photon_budget)
    return Scene(obj=obj, probe=probe, grid=grid, stack=stack)


def _dataset_files(config: CliConfig) -> list[Path]:
    d = Path(config.out_dir) / "dataset"
    return [_need(d / "dataset.ptyb"), _need(d / "split.ptyb")]


def _model_files(config: CliConfig) -> list[Path]:
    d = Path(config.out_dir) / "train"
    return [_need(d / "weights.ptyb"), _need(d / "model.json")]


def _epie_object(config: CliConfig) -> Path:
    return Path(config.out_dir) / "epie" / "object.ptyt"


def _saved(path: Path) -> Path:
    print(f"  Saved → {path}")
    return path


# ── Stages ───────────────────────────────────────────────────────────────────

def cmd_simulate(config: CliConfig, args) -> tuple[list[Path], list[Path]]:
    scene = prepare_scene(config, worker_count(args.deterministic))
    d = _stage_dir(config, "simulate")
    sim = config.simulation
    outputs = [
        save_tensor(d / "object.ptyt", scene.obj.transmission),
        save_tensor(d / "probe.ptyt", scene.probe.field),
        save_tensor(d / "stack.ptyt", scene.stack.frames),
        save_grid_csv(scene.grid, d / "grid.csv"),
        export_pgm(scene.obj.amplitude, d / "object_amp.pgm", 0.0, 1.0),
        export_pgm(scene.obj.phase, d / "object_phase.pgm", -np.pi, np.pi),
    ]
    print("Simulated scan")
    print(f"  Positions      : {len(scene.grid)} ({scene.grid.rows} x {scene.grid.cols}, step {sim.step_px} px)")
    print(f"  Frames         : {scene.stack.frames.shape[1]} x {scene.stack.frames.shape[2]}")
    print(f"  Object         : {scene.obj.shape[0]} x {scene.obj.shape[1]}")
    print(f"  Overlap (FWHM) : {overlap_fraction(sim.step_px, sim.fwhm_px):.0%}")
    print(f"  Field of view  : {field_of_view(sim.geometry) * 1e9:.1f} nm")
    print(f"  Photon budget  : {'noiseless' if sim.photon_budget is None else f'{sim.photon_budget:g} / frame'}")
    for p in outputs:
        _saved(p)
    return [], outputs


def cmd_reconstruct_epie(config: CliConfig, args) -> tuple[list[Path], list[Path]]:
    inputs = _scene_files(config)
    scene = load_scene(config)
    init_obj, init_probe = initial_guess(scene.canvas_shape, scene.probe,
                                         SeededRng(config.stage_seeds()["probe_init"]),
                                         noise=config.epie.probe_noise)
    state = reconstruct(scene.stack, scene.grid, config.epie, init_obj, init_probe)
    d = _stage_dir(config, "epie")
    mask = illuminated_mask(scene.probe.field, scene.grid, scene.canvas_shape, config.threshold_frac)
    metrics = evaluate(state.object_est, scene.obj.transmission, mask)
    ensure_finite(np.array([metrics.nmse_complex, metrics.amp_mae]), "ePIE metrics")
    labels = epie_labels(config, scene, state.object_est)
    outputs = [
        save_tensor(d / "object.ptyt", state.object_est),
        save_tensor(d / "probe.ptyt", state.probe_est),
        save_error_history_csv(state.error_history, d / "error_history.csv"),
        export_pgm(np.abs(labels), d / "amplitude.pgm", 0.0, float(np.abs(labels)[mask].max())),
        export_pgm(np.angle(labels), d / "phase.pgm", -np.pi, np.pi),
    ]
    print("ePIE reconstruction")
    print(f"  Iterations     : {config.epie.iterations}")
    if state.error_history:
        print(f"  Final error    : {state.error_history[-1]:.3e}")
    print(f"  Aligned NMSE   : {metrics.nmse_complex:.3e} ({metrics.region})")
    for p in outputs:
        _saved(p)
    return inputs, outputs


def cmd_make_dataset(config: CliConfig, args) -> tuple[list[Path], list[Path]]:
    inputs = _scene_files(config)
    scene = load_scene(config)
    labels = None
    if config.label_source == "epie":
        obj_path = _need(_epie_object(config))
        inputs.append(obj_path)
        labels = epie_labels(config, scene, load_tensor(obj_path).astype(np.complex128))
    data = build_training_data(config, scene, labels=labels)
    outputs = list(save_training_data(data, _stage_dir(config, "dataset")))
    meta = data.dataset.norm_meta
    print("Training dataset")
    print(f"  Triplets       : {len(data.dataset)} ({config.label_source} labels)")
    print(f"  Train / val    : {len(data.split.train_ids)} / {len(data.split.val_ids)}")
    print(f"  Test           : {len(data.test_rows)} (last {scene.grid.rows - data.n_train_lines} scan lines)")
    print(f"  Scales         : diffraction {meta.diff_scale:.4g}, amplitude {meta.amp_scale:.4g}")
    for p in outputs:
        _saved(p)
    return inputs, outputs


def cmd_train(config: CliConfig, args) -> tuple[list[Path], list[Path]]:
    inputs = _dataset_files(config)
    data = load_training_data(inputs[0].parent)
    result = train_model(config, data, workers=worker_count(args.deterministic))
    d = _stage_dir(config, "train")
    weights, descriptor = save_model(result.params, d / "weights.ptyb", d / "model.json")
    curves = save_loss_curves_csv(result.curves, d / "loss_curves.csv")
    ensure_finite(np.array([r.val_mae for r in result.curves]), "validation loss")
    print("Training")
    print(f"  Parameters     : {count_parameters(result.params.architecture)}")
    print(f"  Epochs run     : {len(result.curves) - 1}")
    print(f"  Val MAE        : {result.curves[0].val_mae:.4f} (untrained) → {result.best_val_mae:.4f} "
          f"(epoch {result.best_epoch})")
    print(f"  Wall time      : {result.seconds:.1f} s")
    outputs = [weights, descriptor, curves]
    for p in outputs:
        _saved(p)
    return inputs, outputs


def cmd_predict(config: CliConfig, args) -> tuple[list[Path], list[Path]]:
    inputs = _model_files(config) + _dataset_files(config) + _scene_files(config)
    params = load_model(*inputs[:2])
    norm = load_training_data(inputs[2].parent).dataset.norm_meta
    scene = load_scene(config)
    idx = np.asarray(args.frames or config.preview_frames, dtype=np.int64)
    if idx.size == 0 or idx.min() < 0 or idx.max() >= len(scene.stack):
        raise ConfigurationError(f"frame indices must be in [0, {len(scene.stack)})")
    raw = scene.stack.frames[idx]
    report = predict(params, raw / norm.diff_scale)
    d = _stage_dir(config, "predict")
    outputs = []
    print("Prediction")
    for k, j in enumerate(idx):
        stem = d / f"frame{int(j):05d}"
        amp = report.amplitude[k] * norm.amp_scale
        outputs.append(_saved(export_pgm(amp, stem.with_name(stem.name + "_amp.pgm"), 0.0, 1.0)))
        outputs.append(_saved(export_pgm(report.phase[k], stem.with_name(stem.name + "_phase.pgm"),
                                         -np.pi, np.pi)))
        outputs.append(_saved(export_pgm(log_preview(raw[k]), stem.with_name(stem.name + "_diffraction.pgm"))))
    print(f"  Frames         : {len(idx)}")
    print(f"  ms / frame     : {report.mean_ms:.3f} mean, {report.p95_ms:.3f} p95")
    for w in report.warnings:
        print(f"  [WARNING] {w}")
    return inputs, outputs


def cmd_stitch(config: CliConfig, args) -> tuple[list[Path], list[Path]]:
    inputs = _model_files(config) + _dataset_files(config) + _scene_files(config)
    params = load_model(*inputs[:2])
    data = load_training_data(inputs[2].parent)
    scene = load_scene(config)
    held_out, held_idx = held_out_grid(scene, data)
    cell = evaluate_nn(config, scene, params, data.dataset.norm_meta, held_out,
                       scene.stack.frames[held_idx], 1, len(data.split.train_ids))
    d = _stage_dir(config, "stitch")
    metrics_path = d / "metrics.csv"
    metrics_path.unlink(missing_ok=True)
    rows = [cell]
    mask = illuminated_mask(scene.probe.field, held_out, scene.canvas_shape, config.threshold_frac)
    outputs = [
        save_tensor(d / "nn_object.ptyt", cell.image),
        save_tensor(d / "nn_amplitude.ptyt", np.abs(cell.image)),
        save_tensor(d / "nn_phase.ptyt", np.angle(cell.image)),
        save_tensor(d / "mask.ptyt", mask),
        export_pgm(np.abs(cell.image), d / "nn_amplitude.pgm", 0.0, 1.0),
        export_pgm(np.angle(cell.image), d / "nn_phase.pgm", -np.pi, np.pi),
    ]
    epie_path = _epie_object(config)
    if epie_path.is_file():
        inputs.append(epie_path)
        rec = load_tensor(epie_path).astype(np.complex128)
        metrics = evaluate(rec, scene.obj.transmission, mask, region=cell.metrics.region)
        aligned = np.where(mask, alignment_scalar(rec, scene.obj.transmission, mask) * rec, 0)
        outputs.append(save_tensor(d / "epie_object.ptyt", aligned))
        outputs.append(export_pgm(np.abs(aligned), d / "epie_amplitude.pgm", 0.0, 1.0))
        outputs.append(export_pgm(np.angle(aligned), d / "epie_phase.pgm", -np.pi, np.pi))
        rows.append(CellResult(method="epie", factor=1, train_size=cell.train_size, metrics=metrics,
                               ms_per_frame=float("nan"), n_points=len(scene.grid)))
    for c in rows:
        ensure_finite(np.array([c.metrics.amp_mae, c.metrics.phase_mae_wrapped, c.metrics.nmse_complex]),
                      f"{c.method} metrics")
    outputs.append(append_metrics_csv(metrics_path, [{
        "run_id": f"{config.run_id}/{c.method}", "factor": c.factor, "train_size": c.train_size,
        "amp_mae": c.metrics.amp_mae, "phase_mae": c.metrics.phase_mae_wrapped,
        "nmse": c.metrics.nmse_complex, "ms_per_frame": c.ms_per_frame,
    } for c in rows]))
    print("Stitched test region")
    for c in rows:
        print(f"  {c.method:<5}: amp MAE {c.metrics.amp_mae:.4f}, phase MAE {c.metrics.phase_mae_wrapped:.4f}, "
              f"NMSE {c.metrics.nmse_complex:.3e}")
    for p in outputs:
        _saved(p)
    return inputs, outputs


def _sweep_inputs(config: CliConfig):
    """Scene, training data and model from earlier stages when present."""
    inputs = _scene_files(config)
    scene = load_scene(config)
    data, params = None, None
    dataset_dir = Path(config.out_dir) / "dataset"
    if (dataset_dir / "dataset.ptyb").is_file():
        inputs += _dataset_files(config)
        data = load_training_data(dataset_dir)
    weights, descriptor = Path(config.out_dir) / "train" / "weights.ptyb", Path(config.out_dir) / "train" / "model.json"
    if data is not None and weights.is_file() and descriptor.is_file():
        inputs += [weights, descriptor]
        params = load_model(weights, descriptor)
    return inputs, scene, data, params


def cmd_sweep(config: CliConfig, args) -> tuple[list[Path], list[Path]]:
    workers = worker_count(args.deterministic)
    inputs, scene, data, params = _sweep_inputs(config)
    if args.study == "sizes":
        report = run_training_size_sweep(config, scene, data, run_id=config.run_id, workers=workers)
    else:
        report = run_sparsity_sweep(config, scene, data, params, run_id=config.run_id, workers=workers)
    out = _stage_dir(config, "sweep") / args.study
    (out / "metrics.csv").unlink(missing_ok=True)
    outputs = write_report(report, out)
    print_report(report)
    _saved(outputs[0])
    print(f"  Previews       : {len(outputs) - 1} PGM files under {out / 'previews'}")
    return inputs, outputs


def cmd_bench(config: CliConfig, args) -> tuple[list[Path], list[Path]]:
    inputs, scene, data, params = _sweep_inputs(config)
    speed = benchmark_speed(config, scene, data, params, workers=worker_count(args.deterministic))
    path = save_timing_csv(speed.timing, _stage_dir(config, "bench") / "timing.csv")
    print_speed(speed)
    print_literature_values()
    _saved(path)
    return inputs, [path]


COMMANDS = {
    "simulate": cmd_simulate,
    "epie": cmd_reconstruct_epie,
    "dataset": cmd_make_dataset,
    "train": cmd_train,
    "predict": cmd_predict,
    "stitch": cmd_stitch,
    "sweep": cmd_sweep,
    "bench": cmd_bench,
}


# ── Entry point ──────────────────────────────────────────────────────────────

def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON run config.")
    common.add_argument("--seed", type=int, default=None, help="Override the base seed.")
    common.add_argument("--deterministic", action="store_true", help="Serial, bit-reproducible execution.")
    common.add_argument("--out", default=None, help="Run directory (overrides out_dir).")
    common.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING, ...")

    parser = argparse.ArgumentParser(prog="ptychoforge", description="Ptychography simulation, ePIE and "
                                     "diffraction-to-image network studies.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in STAGES:
        p = sub.add_parser(name, parents=[common], help=STAGE_HELP[name])
        if name == "predict":
            p.add_argument("--frames", type=_int_list, default=None, help="Frame indices, e.g. 0,17,512.")
        if name == "sweep":
            p.add_argument("--factors", type=_int_list, default=None, help="Sparsity factors, e.g. 1,5.")
            p.add_argument("--study", choices=["sparsity", "sizes"], default="sparsity")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        config = load_config(args.config).resolved(seed=args.seed, out_dir=args.out)
        if args.command == "sweep" and args.factors:
            # validate the override through the schema
            config = CliConfig.model_validate({**config.model_dump(), "sparsity_factors": args.factors})
        inputs, outputs = COMMANDS[args.command](config, args)
        write_manifest(args.command, config, [Path(args.config), *inputs], outputs,
                       argv=["ptychoforge", *(sys.argv[1:] if argv is None else argv)])
    except MissingInputError as e:
        print(f"[ERROR] {e}", file=sys.stderr)
        return EXIT_MISSING
    except ValidationError as e:
        print(f"[ERROR] {_validation_message(e)}", file=sys.stderr)
        return EXIT_CONFIG
    except (FormatError, NumericError) as e:
        print(f"[ERROR] {e}", file=sys.stderr)
        return EXIT_FAILURE
    except PtychoError as e:
        print(f"[ERROR] {e}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
