from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_array_equal
from pydantic import ValidationError

from ptychoforge.cli import load_config
from ptychoforge.dataset import SplitIndex
from ptychoforge.errors import ConfigurationError
from ptychoforge.experiments import (
    MAX_REPEAT_SPREAD, ExperimentConfig, SpeedReport, TimingRow, benchmark_speed, build_training_data,
    evaluate_nn, held_out_grid, load_training_data, prepare_scene, resolve_train_sizes, run_epie,
    run_sparsity_sweep, run_training_size_sweep, save_training_data, train_model, write_report,
)
from ptychoforge.network import Architecture, init_params
from ptychoforge.stitching import evaluate, illuminated_mask
from tests.conftest import small_config_dict

REPO = Path(__file__).resolve().parents[1]


@pytest.fixture
def truth_config(tmp_out):
    return ExperimentConfig.model_validate({**small_config_dict(tmp_out), "label_source": "truth"})


# ── Configuration ────────────────────────────────────────────────────────────

def test_defaults_describe_the_reference_scan():
    config = ExperimentConfig()
    assert config.simulation.grid_rows * config.simulation.grid_cols == 1024
    assert config.simulation.frame_size == config.architecture.input_size == 64
    assert config.sparsity_factors == [1, 2, 3, 4, 5]


@pytest.mark.parametrize("update", [
    {"sparsity_factors": []},
    {"sparsity_factors": [0, 2]},
    {"train_sizes": [0]},
    {"threshold_frac": 1.5},
    {"label_source": "oracle"},
    {"unexpected": 1},
    {"architecture": {"input_size": 32}},
])
def test_invalid_configs_are_rejected(update):
    with pytest.raises(ValidationError):
        ExperimentConfig.model_validate(update)


def test_stage_seeds_are_distinct():
    seeds = ExperimentConfig(seed=5).stage_seeds()
    derived = [seeds[k] for k in ("object", "noise", "probe_init", "split")]
    assert len(set(derived)) == 4
    assert seeds["base"] == 5


def test_default_training_size_ladder():
    config = ExperimentConfig()
    assert resolve_train_sizes(config, 14490) == [14490, 7245, 3622, 1811, 800]
    assert resolve_train_sizes(config, 500) == [500, 250, 125, 62]


def test_explicit_training_sizes_must_fit():
    config = ExperimentConfig(train_sizes=[100, 50])
    assert resolve_train_sizes(config, 100) == [100, 50]
    with pytest.raises(ConfigurationError):
        resolve_train_sizes(config, 99)


# ── Scene & training data ────────────────────────────────────────────────────

def test_scene_is_reproducible(small_config):
    a = prepare_scene(small_config)
    b = prepare_scene(small_config)
    assert a.stack.frames.tobytes() == b.stack.frames.tobytes()
    assert a.grid == b.grid
    assert a.canvas_shape == (64, 64)
    assert_array_equal(a.grid.positions[0], [14, 14])


def test_noisy_scene(small_config):
    config = small_config.model_copy(update={
        "simulation": small_config.simulation.model_copy(update={"photon_budget": 1e5}),
    })
    scene = prepare_scene(config)
    assert scene.stack.photon_budget == 1e5
    assert np.all(scene.stack.frames == np.round(scene.stack.frames))


def test_training_data_splits_by_scan_line(truth_config):
    scene = prepare_scene(truth_config)
    data = build_training_data(truth_config, scene)
    assert data.n_train_lines == 4
    assert len(data.split.train_ids) + len(data.split.val_ids) == 24
    assert len(data.split.val_ids) == 2
    assert_array_equal(data.test_rows, np.arange(24, 36))
    assert data.epie_state is None
    held_out, idx = held_out_grid(scene, data)
    assert held_out.rows == 2
    assert_array_equal(idx, data.test_rows)


def test_epie_labels_have_zero_mean_phase(small_config):
    scene = prepare_scene(small_config)
    data = build_training_data(small_config, scene)
    assert data.epie_state is not None and data.epie_state.iterations_done == 3
    mask = illuminated_mask(scene.probe.field, scene.grid, scene.canvas_shape, small_config.threshold_frac)
    assert abs(np.angle(np.mean(data.labels[mask]))) < 1e-12


def test_training_data_round_trip(truth_config, tmp_path):
    scene = prepare_scene(truth_config)
    data = build_training_data(truth_config, scene)
    save_training_data(data, tmp_path / "dataset")
    loaded = load_training_data(tmp_path / "dataset")
    assert loaded.split.seed == data.split.seed
    assert loaded.n_train_lines == data.n_train_lines
    assert_array_equal(loaded.split.val_ids, data.split.val_ids)
    assert_array_equal(loaded.test_rows, data.test_rows)
    assert_array_equal(loaded.train_rows, data.train_rows)


# ── Studies ──────────────────────────────────────────────────────────────────

def test_sparsity_sweep(small_config, tmp_path):
    report = run_sparsity_sweep(small_config, run_id="sweep")
    assert [(c.method, c.factor) for c in report.cells] == [("epie", 1), ("nn", 1), ("epie", 5), ("nn", 5)]
    assert report.extra["n_points"] == {1: 12, 5: 2}
    assert report.extra["dose_reduction"] == {1: 1.0, 5: 6.0}
    nn = report.cell("nn", factor=5)
    assert nn.image.shape == (64, 64)
    assert 0.0 <= nn.metrics.nmse_complex <= 1.0 + 1e-9

    written = write_report(report, tmp_path / "out")
    table = pd.read_csv(tmp_path / "out" / "metrics.csv")
    assert len(table) == 4
    assert set(table["run_id"]) == {"sweep/epie", "sweep/nn"}
    assert len(written) == 1 + 2 * 4


def test_one_model_serves_every_factor(truth_config):
    scene = prepare_scene(truth_config)
    data = build_training_data(truth_config, scene)
    params = train_model(truth_config, data).params
    report = run_sparsity_sweep(truth_config, scene, data, params)
    again = run_sparsity_sweep(truth_config, scene, data, params)
    for a, b in zip(report.cells, again.cells):
        if a.method == "nn":
            assert a.metrics.nmse_complex == b.metrics.nmse_complex


def test_training_size_sweep(truth_config):
    config = truth_config.model_copy(update={"train_sizes": [10, 21]})
    report = run_training_size_sweep(config, run_id="sizes")
    assert [c.train_size for c in report.cells] == [10, 21]
    assert set(report.extra["val_mae"]) == {10, 21}
    assert all(c.seconds > 0 for c in report.cells)


def test_size_cells_match_training_on_the_parent_ids(truth_config):
    config = truth_config.model_copy(update={"train_sizes": [10]})
    scene = prepare_scene(config)
    data = build_training_data(config, scene)
    report = run_training_size_sweep(config, scene, data)
    split = SplitIndex(train_ids=data.split.train_ids[:10], val_ids=data.split.val_ids, seed=data.split.seed)
    direct = train_model(config, data, split=split)
    assert report.cell("nn", train_size=10).val_mae == pytest.approx(direct.best_val_mae, rel=1e-12)


def test_speed_benchmark(truth_config):
    speed = benchmark_speed(truth_config, repeats=2)
    assert [row.method for row in speed.timing] == ["nn", "epie"]
    assert len(speed.nn_repeat_ms) == 2
    assert speed.spread >= 0
    assert speed.stable == (speed.spread < MAX_REPEAT_SPREAD)
    assert speed.ratio > 0


def test_repeat_spread_is_relative_to_the_median():
    speed = SpeedReport(timing=[TimingRow("nn", 2.0, 1.0)], ratio=1.0, nn_repeat_ms=[1.8, 2.0, 2.5])
    assert speed.spread == pytest.approx(0.35)
    assert not speed.stable


def test_model_must_match_the_frames(truth_config):
    scene = prepare_scene(truth_config)
    data = build_training_data(truth_config, scene)
    wrong = init_params(Architecture(input_size=8, encoder_channels=[2], decoder_channels=[2]), 0)
    with pytest.raises(ConfigurationError):
        run_sparsity_sweep(truth_config, scene, data, wrong)


# ── Reference acceptance (slow) ──────────────────────────────────────────────

def _shipped(name):
    return load_config(REPO / "data" / "configs" / name).resolved()


@pytest.mark.slow
def test_reference_epie_converges():
    config = ExperimentConfig(seed=0)
    scene = prepare_scene(config)
    state, _ = run_epie(config, scene, scene.stack)
    assert state.error_history[-1] < 1e-4
    mask = illuminated_mask(scene.probe.field, scene.grid, scene.canvas_shape, config.threshold_frac)
    assert evaluate(state.object_est, scene.obj.transmission, mask).nmse_complex < 1e-3


@pytest.mark.slow
def test_training_halves_validation_error():
    config = _shipped("training_study.json")
    scene = prepare_scene(config)
    data = build_training_data(config, scene)
    result = train_model(config, data)
    assert result.best_val_mae < 0.5 * result.curves[0].val_mae
    held_out, idx = held_out_grid(scene, data)
    cell = evaluate_nn(config, scene, result.params, data.dataset.norm_meta, held_out,
                       scene.stack.frames[idx], 1, len(data.split.train_ids))
    assert cell.metrics.amp_mae < 0.15


@pytest.mark.slow
def test_reference_sparse_scan_favours_the_network():
    config = _shipped("reference.json").model_copy(update={"sparsity_factors": [1, 3, 5]})
    report = run_sparsity_sweep(config)
    for method in ("epie", "nn"):
        assert report.cell(method, factor=1).metrics.nmse_complex < 1e-2, method
    assert report.cell("nn", factor=5).metrics.amp_mae <= report.cell("epie", factor=5).metrics.amp_mae
    assert report.cell("epie", factor=3).metrics.nmse_complex > report.cell("epie", factor=1).metrics.nmse_complex


@pytest.mark.slow
def test_reference_network_beats_epie_per_frame():
    config = _shipped("reference.json")
    scene = prepare_scene(config)
    data = build_training_data(config, scene)
    speed = benchmark_speed(config, scene, data)
    assert speed.ratio >= 5
    assert speed.spread < MAX_REPEAT_SPREAD


@pytest.mark.slow
def test_800_samples_stay_close_to_the_full_set():
    config = _shipped("training_study.json")
    scene = prepare_scene(config)
    data = build_training_data(config, scene)
    full = len(data.split.train_ids)
    report = run_training_size_sweep(config.model_copy(update={"train_sizes": [full, 800]}), scene, data)
    assert report.extra["val_mae"][800] <= 3 * report.extra["val_mae"][full]
