"""
Phase 2: Sparse Sampling, Training-Set Size and Speed Studies

Builds one scene and one training set, then runs the three studies and
appends every cell to a single metrics table:

  1. Sparse sampling: ePIE vs the network on the held-out scan lines,
     sub-sampled by each configured factor (one trained model throughout).
  2. Training-set size: a fresh network per size, down to 800 samples.
  3. Speed: network ms/frame against amortized ePIE time per frame.

Usage:
    python run_studies.py
    PTYCHOFORGE_CONFIG=data/configs/training_study.json python run_studies.py
"""

import sys
from pathlib import Path

from pydantic import ValidationError

from ptychoforge.cli import CliConfig
from ptychoforge.experiments import (
    benchmark_speed, build_training_data, prepare_scene, print_literature_values,
    print_report, print_speed, run_sparsity_sweep, run_training_size_sweep, save_timing_csv, train_model,
    write_report,
)
from ptychoforge.settings import configure_logging, env_str, worker_count

CONFIG_PATH = env_str("PTYCHOFORGE_CONFIG", "./data/configs/training_study.json")


def main() -> int:
    configure_logging()
    try:
        config = CliConfig.model_validate_json(Path(CONFIG_PATH).read_text(encoding="utf-8")).resolved()
    except FileNotFoundError:
        print(f"[ERROR] config not found: {CONFIG_PATH}")
        return 2
    except ValidationError as e:
        print(f"[ERROR] invalid config {CONFIG_PATH}:\n{e}")
        return 1

    workers = worker_count()
    out_dir = Path(config.out_dir) / "studies"
    print(f"Studies on {CONFIG_PATH}")
    print(f"  Output dir : {out_dir}")
    print(f"  Workers    : {workers}\n")

    scene = prepare_scene(config, workers)
    data = build_training_data(config, scene)
    model = train_model(config, data, workers=workers)

    sparsity = run_sparsity_sweep(config, scene, data, model.params, run_id=f"{config.run_id}-sparsity",
                                  workers=workers)
    write_report(sparsity, out_dir)
    print_report(sparsity)

    sizes = run_training_size_sweep(config, scene, data, run_id=f"{config.run_id}-sizes", workers=workers)
    write_report(sizes, out_dir)
    print_report(sizes)

    speed = benchmark_speed(config, scene, data, model.params, workers=workers)
    path = save_timing_csv(speed.timing, out_dir / "timing.csv")
    print_speed(speed)
    print_literature_values()
    print(f"\n  Saved → {out_dir / 'metrics.csv'}")
    print(f"  Saved → {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
