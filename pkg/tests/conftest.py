import numpy as np
import pytest

from ptychoforge.experiments import ExperimentConfig
from ptychoforge.geometry import centered_margin, raster_positions
from ptychoforge.numerics import SeededRng
from ptychoforge.simulator import diffract, make_probe, make_test_object


@pytest.fixture
def rng():
    return SeededRng(1234)


@pytest.fixture
def small_object():
    return make_test_object(64, 64, SeededRng(7))


@pytest.fixture
def small_probe():
    return make_probe(16, 3.0)


@pytest.fixture
def small_grid():
    margin = centered_margin(64, 6, 4, 16)
    return raster_positions(6, 6, 4, margin)


@pytest.fixture
def small_stack(small_object, small_probe, small_grid):
    return diffract(small_object, small_probe, small_grid)


@pytest.fixture
def tmp_out(tmp_path):
    out = tmp_path / "run"
    out.mkdir()
    return out


def assert_bit_identical(a: np.ndarray, b: np.ndarray) -> None:
    assert a.dtype == b.dtype and a.shape == b.shape
    assert a.tobytes() == b.tobytes()


def small_config_dict(out_dir) -> dict:
    """A 6x6 scan over a 64 px object with 16 px frames and a two-block network."""
    return {
        "seed": 1,
        "out_dir": str(out_dir),
        "simulation": {
            "geometry": {"frame_size": 16},
            "object_size": 64,
            "fwhm_px": 3.0,
            "step_px": 4,
            "grid_rows": 6,
            "grid_cols": 6,
        },
        "epie": {"iterations": 3, "probe_update_start": 1},
        "train": {"batch_size": 8, "max_epochs": 1, "micro_batch": 4, "precision": "float64"},
        "architecture": {"input_size": 16, "encoder_channels": [2, 4], "decoder_channels": [4, 2]},
        "sparsity_factors": [1, 5],
    }


@pytest.fixture
def small_config(tmp_out):
    return ExperimentConfig.model_validate(small_config_dict(tmp_out))
