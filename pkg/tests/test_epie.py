import numpy as np
import pytest
from numpy.testing import assert_allclose

from ptychoforge.epie import (
    EpieConfig, EpieState, data_error, exit_wave, initial_guess, modulus_project, reconstruct,
    remove_global_phase, save_error_history_csv, update_object, update_probe,
)
from ptychoforge.errors import DataError, GeometryError, NumericError, ShapeError
from ptychoforge.geometry import centered_margin, raster_positions
from ptychoforge.numerics import SeededRng, fft2c, ifft2c
from ptychoforge.simulator import DiffractionStack, diffract, make_probe, make_test_object


# ── Operators ────────────────────────────────────────────────────────────────

def test_modulus_projection_keeps_phase():
    farfield = np.array([[3 + 4j, 0j], [-2j, 1 + 0j]])
    measured = np.array([[4.0, 9.0], [1.0, 0.0]])
    projected = modulus_project(farfield, measured)
    assert_allclose(projected, [[(3 + 4j) / 5 * 2, 3 + 0j], [-1j, 0j]])


def test_modulus_projection_checks_inputs():
    with pytest.raises(ShapeError):
        modulus_project(np.ones((2, 2), complex), np.ones((2, 3)))
    with pytest.raises(DataError):
        modulus_project(np.ones((2, 2), complex), -np.ones((2, 2)))


def test_update_object_touches_only_the_window():
    obj = np.ones((8, 8), dtype=np.complex128)
    probe = np.full((4, 4), 2.0 + 0j)
    d = np.full((4, 4), 1.0 - 2.0j)
    update_object(obj, probe, (2, 3), d, alpha=1.0)
    # conj(P) / max|P|^2 = 2 / 4
    assert_allclose(obj[2:6, 3:7], 1.0 + d / 2)
    outside = np.ones((8, 8), dtype=bool)
    outside[2:6, 3:7] = False
    assert np.all(obj[outside] == 1.0)


def test_update_probe_step():
    obj = np.full((8, 8), 0.5 + 0j)
    probe = np.zeros((4, 4), dtype=np.complex128)
    update_probe(obj, probe, (0, 0), np.ones((4, 4), complex), beta=1.0)
    assert_allclose(probe, 2.0)


def test_zero_probe_cannot_update():
    with pytest.raises(NumericError):
        update_object(np.ones((8, 8), complex), np.zeros((4, 4), complex), (0, 0), np.ones((4, 4)), 1.0)


def test_exit_wave_window_checks():
    obj = np.arange(64, dtype=np.complex128).reshape(8, 8)
    assert_allclose(exit_wave(obj, np.ones((2, 2), complex), (1, 2)), [[10, 11], [18, 19]])
    with pytest.raises(GeometryError):
        exit_wave(obj, np.ones((4, 4), complex), (6, 0))


# ── Data error ───────────────────────────────────────────────────────────────

def test_data_error_of_truth_vanishes(small_object, small_probe, small_stack):
    state = EpieState(small_object.transmission.copy(), small_probe.field.copy())
    assert data_error(state, small_stack) < 1e-24


def test_data_error_of_empty_object_is_one(small_probe, small_stack):
    state = EpieState(np.zeros((64, 64), complex), small_probe.field.copy())
    assert data_error(state, small_stack) == pytest.approx(1.0)


def test_data_error_needs_intensity(small_object, small_probe, small_grid):
    dark = DiffractionStack(np.zeros((36, 16, 16)), small_grid)
    with pytest.raises(NumericError):
        data_error(EpieState(small_object.transmission, small_probe.field), dark)


# ── Reconstruction ───────────────────────────────────────────────────────────

def test_zero_iterations_return_the_initial_guess(small_probe, small_stack):
    init_obj, init_probe = initial_guess((64, 64), small_probe, SeededRng(1))
    state = reconstruct(small_stack, small_stack.grid, EpieConfig(iterations=0), init_obj, init_probe)
    assert state.iterations_done == 0
    assert_allclose(state.object_est, init_obj)
    assert_allclose(state.probe_est, init_probe)
    assert state.object_est is not init_obj


def test_truth_is_a_fixed_point(small_object, small_probe, small_stack):
    config = EpieConfig(iterations=400, probe_update_start=0, shuffle_seed=4, log_every=400)
    state = reconstruct(small_stack, small_stack.grid, config, small_object.transmission, small_probe.field)
    assert_allclose(state.object_est, small_object.transmission, atol=1e-10)
    assert_allclose(state.probe_est, small_probe.field, atol=1e-10)
    assert len(state.error_history) == 400
    assert max(state.error_history) <= 1e-10


def test_error_decreases_with_known_probe(small_probe, small_stack):
    init_obj, _ = initial_guess((64, 64), small_probe, SeededRng(1))
    config = EpieConfig(iterations=20, probe_update_start=1000, shuffle_seed=2)
    state = reconstruct(small_stack, small_stack.grid, config, init_obj, small_probe.field)
    assert state.iterations_done == 20
    assert state.error_history[-1] < state.error_history[0]


def test_reconstruction_is_seeded(small_probe, small_stack):
    init_obj, init_probe = initial_guess((64, 64), small_probe, SeededRng(1))
    config = EpieConfig(iterations=3, probe_update_start=1, shuffle_seed=11)
    a = reconstruct(small_stack, small_stack.grid, config, init_obj, init_probe)
    b = reconstruct(small_stack, small_stack.grid, config, init_obj, init_probe)
    assert a.object_est.tobytes() == b.object_est.tobytes()
    assert a.error_history == b.error_history


def test_reconstruction_rejects_negative_intensity(small_probe, small_stack):
    frames = small_stack.frames.copy()
    frames[0, 0, 0] = -1.0
    bad = DiffractionStack(frames, small_stack.grid)
    with pytest.raises(DataError):
        reconstruct(bad, None, EpieConfig(iterations=1), np.ones((64, 64), complex), small_probe.field)


def test_callback_sees_every_iteration(small_probe, small_stack):
    seen = []
    reconstruct(small_stack, small_stack.grid, EpieConfig(iterations=2), np.ones((64, 64), complex),
                small_probe.field, callback=lambda it, state: seen.append((it, state.iterations_done)))
    assert seen == [(0, 1), (1, 2)]


def test_single_position_pass_matches_the_update_operators(small_object, small_probe):
    grid = raster_positions(1, 1, 4, 10)
    stack = diffract(small_object, small_probe, grid)
    init_obj, init_probe = initial_guess((64, 64), small_probe, SeededRng(5))
    config = EpieConfig(iterations=1, probe_update_start=0, alpha=0.8, beta=0.6)
    state = reconstruct(stack, grid, config, init_obj, init_probe)

    psi = exit_wave(init_obj, init_probe, (10, 10))
    delta = ifft2c(modulus_project(fft2c(psi), stack.frames[0])) - psi
    expected_probe = update_probe(init_obj.copy(), init_probe.copy(), (10, 10), delta, 0.6)
    expected_obj = update_object(init_obj.copy(), init_probe.copy(), (10, 10), delta, 0.8)
    assert_allclose(state.probe_est, expected_probe, atol=1e-12)
    assert_allclose(state.object_est, expected_obj, atol=1e-12)


def test_noiseless_scan_converges_in_400_iterations():
    obj = make_test_object(32, 32, SeededRng(21))
    probe = make_probe(16, 4.0)
    grid = raster_positions(8, 8, 2, centered_margin(32, 8, 2, 16))
    stack = diffract(obj, probe, grid)
    init_obj, _ = initial_guess((32, 32), probe, SeededRng(3))
    config = EpieConfig(iterations=400, probe_update_start=400, shuffle_seed=8, log_every=400)
    state = reconstruct(stack, grid, config, init_obj, probe.field)
    assert state.error_history[-1] < 1e-4
    assert state.error_history[-1] < state.error_history[0]


def test_remove_global_phase():
    obj = np.full((4, 4), 0.8 * np.exp(1j * 0.7))
    mask = np.ones((4, 4), dtype=bool)
    assert_allclose(remove_global_phase(obj, mask), 0.8, atol=1e-14)


def test_error_history_csv(tmp_path):
    path = save_error_history_csv([0.5, 0.25], tmp_path / "err.csv")
    assert path.read_text().splitlines() == ["iteration,error", "0,0.5", "1,0.25"]
