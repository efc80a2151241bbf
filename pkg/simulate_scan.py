"""
Phase 1: Simulated Scan → ePIE → Training Data → Network

Runs the pipeline stages in order against one config, so that the study
phase (run_studies.py) and the individual `ptychoforge` subcommands find
their inputs under the run directory.

Usage:
    python simulate_scan.py
    PTYCHOFORGE_CONFIG=data/configs/training_study.json python simulate_scan.py
"""

import sys

from ptychoforge.cli import main as cli_main
from ptychoforge.settings import env_str

CONFIG_PATH = env_str("PTYCHOFORGE_CONFIG", "./data/configs/reference.json")
PIPELINE = ["simulate", "epie", "dataset", "train", "stitch"]


def main() -> int:
    print(f"Running pipeline on {CONFIG_PATH}")
    for stage in PIPELINE:
        print(f"\n--- {stage} ---")
        code = cli_main([stage, "--config", CONFIG_PATH, "--deterministic"])
        if code != 0:
            print(f"[ERROR] stage '{stage}' failed with exit code {code}")
            return code
    print("\nPipeline complete.")
    return 0


if __name__ == "__main__":
    sys.exit(main())
