import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from pydantic import ValidationError

from ptychoforge.errors import ArgumentError, ShapeError
from ptychoforge.network import (
    Architecture, ModelParams, conv2d_backward, conv2d_forward, count_parameters, init_params, mae_loss,
    maxpool2, maxpool2_backward, model_backward, model_forward, reference_architecture, relu,
    tiny_architecture, upsample2, upsample2_backward,
)
from tests.gradcheck import central_difference, relative_error


@pytest.fixture
def gen():
    return np.random.default_rng(2024)


# ── Layers ───────────────────────────────────────────────────────────────────

def test_identity_kernel(gen):
    x = gen.standard_normal((1, 5, 5))
    kernel = np.zeros((1, 1, 3, 3))
    kernel[0, 0, 1, 1] = 1.0
    out, _ = conv2d_forward(x, kernel, np.zeros(1))
    assert_allclose(out, x)


def test_ones_kernel_counts_neighbours_with_zero_padding():
    out, _ = conv2d_forward(np.ones((1, 4, 4)), np.ones((1, 1, 3, 3)), np.zeros(1))
    assert out[0, 1, 1] == 9
    assert out[0, 0, 0] == 4
    assert out[0, 0, 2] == 6


def test_bias_only():
    out, _ = conv2d_forward(np.ones((2, 3, 3)), np.zeros((4, 2, 3, 3)), np.full(4, 2.5))
    assert out.shape == (4, 3, 3)
    assert np.all(out == 2.5)


def test_conv_shape_checks():
    with pytest.raises(ShapeError):
        conv2d_forward(np.ones((2, 3, 3)), np.zeros((4, 3, 3, 3)), np.zeros(4))
    with pytest.raises(ShapeError):
        conv2d_forward(np.ones((1, 3, 3)), np.zeros((4, 1, 2, 2)), np.zeros(4))
    with pytest.raises(ShapeError):
        conv2d_forward(np.ones((1, 3, 3)), np.zeros((4, 1, 3, 3)), np.zeros(3))


def test_maxpool_ties_go_to_the_first_pixel():
    x = np.ones((1, 1, 2, 2))
    out, cache = maxpool2(x)
    assert out.shape == (1, 1, 1, 1)
    grad = maxpool2_backward(np.ones_like(out), cache)
    assert_array_equal(grad[0, 0], [[1, 0], [0, 0]])


def test_maxpool_picks_block_maxima():
    x = np.array([[1, 5, 2, 0], [3, 4, 8, 1], [0, 0, 1, 1], [9, 0, 1, 2]], dtype=float)
    out, _ = maxpool2(x)
    assert_array_equal(out, [[5, 8], [9, 2]])
    with pytest.raises(ShapeError):
        maxpool2(np.ones((3, 4)))


def test_upsample_and_its_adjoint():
    x = np.array([[1.0, 2.0], [3.0, 4.0]])
    up = upsample2(x)
    assert_array_equal(up[:2, :2], 1.0)
    assert_array_equal(up[2:, 2:], 4.0)
    assert_array_equal(upsample2_backward(np.ones((4, 4))), np.full((2, 2), 4.0))


def test_relu():
    out, mask = relu(np.array([-1.0, 0.0, 2.0]))
    assert_array_equal(out, [0.0, 0.0, 2.0])
    assert_array_equal(mask, [False, False, True])


# ── Finite-difference checks ─────────────────────────────────────────────────
# Linear probe loss L = Σ out · R so dL/d(out) = R.

def test_conv_gradients_match_finite_differences(gen):
    x = gen.standard_normal((2, 3, 5, 5))
    kernel = gen.standard_normal((4, 3, 3, 3))
    bias = gen.standard_normal(4)
    r = gen.standard_normal((2, 4, 5, 5))

    def loss():
        return float(np.sum(conv2d_forward(x, kernel, bias)[0] * r))

    _, cache = conv2d_forward(x, kernel, bias)
    gx, gk, gb = conv2d_backward(r, cache)
    assert relative_error(gx, central_difference(loss, x)) < 1e-7
    assert relative_error(gk, central_difference(loss, kernel)) < 1e-7
    assert relative_error(gb, central_difference(loss, bias)) < 1e-7


def test_conv_gradient_for_a_single_image(gen):
    x = gen.standard_normal((2, 4, 4))
    kernel = gen.standard_normal((3, 2, 1, 1))
    r = gen.standard_normal((3, 4, 4))
    _, cache = conv2d_forward(x, kernel, np.zeros(3))
    gx, _, _ = conv2d_backward(r, cache)
    assert gx.shape == x.shape
    numeric = central_difference(lambda: float(np.sum(conv2d_forward(x, kernel, np.zeros(3))[0] * r)), x)
    assert relative_error(gx, numeric) < 1e-7


def test_maxpool_gradient(gen):
    x = gen.standard_normal((2, 3, 4, 6))
    r = gen.standard_normal((2, 3, 2, 3))
    _, cache = maxpool2(x)
    numeric = central_difference(lambda: float(np.sum(maxpool2(x)[0] * r)), x)
    assert relative_error(maxpool2_backward(r, cache), numeric) < 1e-7


def test_upsample_gradient(gen):
    x = gen.standard_normal((2, 3, 3))
    r = gen.standard_normal((2, 6, 6))
    numeric = central_difference(lambda: float(np.sum(upsample2(x) * r)), x)
    assert relative_error(upsample2_backward(r), numeric) < 1e-7


def test_whole_network_gradients(gen):
    params = init_params(tiny_architecture(), seed=3)
    # positive biases keep every ReLU input off the kink at 0
    for name, tensor in params.tensors.items():
        if name.endswith(".bias"):
            tensor[...] = gen.uniform(0.05, 0.1, tensor.shape)
    frames = gen.uniform(0.0, 1.0, (2, 8, 8))
    r_amp = gen.standard_normal((2, 8, 8))
    r_phase = gen.standard_normal((2, 8, 8))

    def loss():
        amp, phase, _ = model_forward(params, frames)
        return float(np.sum(amp * r_amp) + np.sum(phase * r_phase))

    _, _, cache = model_forward(params, frames)
    grads = model_backward(params, cache, r_amp, r_phase)
    assert list(grads) == list(params.tensors)
    for name, tensor in params.tensors.items():
        numeric = central_difference(loss, tensor)
        assert relative_error(grads[name], numeric) < 1e-6, name


def test_mae_loss_and_subgradient():
    pred_amp = np.array([[1.0, 2.0]])
    true_amp = np.array([[0.0, 3.0]])
    pred_phase = np.zeros((1, 2))
    true_phase = np.array([[0.5, 0.5]])
    loss, ga, gp = mae_loss(pred_amp, pred_phase, true_amp, true_phase)
    assert loss == pytest.approx(1.0 + 0.5)
    assert_allclose(ga, [[0.5, -0.5]])
    assert_allclose(gp, [[-0.5, -0.5]])
    with pytest.raises(ArgumentError):
        mae_loss(pred_amp, pred_phase, true_amp[:, :1], true_phase)


# ── Architecture & model ─────────────────────────────────────────────────────

def test_reference_parameter_count():
    arch = reference_architecture()
    sizes = {s.name: int(np.prod(s.shape)) for s in arch.layers()}
    encoder = sum(v for k, v in sizes.items() if k.startswith("enc"))
    amp_decoder = sum(v for k, v in sizes.items() if k.startswith("amp."))
    phase_decoder = sum(v for k, v in sizes.items() if k.startswith("phase."))
    assert encoder == 286432
    assert amp_decoder == phase_decoder == 96897
    assert count_parameters(arch) == 480226
    assert sizes["enc0.conv1.weight"] + sizes["enc0.conv1.bias"] == 320
    assert sizes["amp.out.weight"] + sizes["amp.out.bias"] == 17


def test_architecture_validation():
    with pytest.raises(ValidationError):
        Architecture(input_size=60)
    with pytest.raises(ValidationError):
        Architecture(decoder_channels=[64, 32])
    with pytest.raises(ValidationError):
        Architecture(kernel_size=4)


def test_init_is_seeded_and_biases_start_at_zero():
    a = init_params(tiny_architecture(), seed=9)
    b = init_params(tiny_architecture(), seed=9)
    for name in a.tensors:
        assert a[name].tobytes() == b[name].tobytes()
    assert not np.any(a["enc0.conv1.bias"])
    limit = np.sqrt(6.0 / 9)
    assert np.abs(a["enc0.conv1.weight"]).max() <= limit


def test_output_shapes_and_phase_range():
    params = init_params(tiny_architecture(), seed=1)
    frames = np.random.default_rng(0).uniform(size=(3, 8, 8))
    amp, phase, _ = model_forward(params, frames)
    assert amp.shape == phase.shape == (3, 8, 8)
    assert np.all(np.abs(phase) < np.pi)
    single_amp, single_phase, _ = model_forward(params, frames[0])
    assert single_amp.shape == (8, 8)
    assert_allclose(single_amp, amp[0])


def test_zero_heads_predict_zero():
    params = init_params(tiny_architecture(), seed=1)
    for head in ("amp", "phase"):
        params[f"{head}.out.weight"][:] = 0.0
        params[f"{head}.out.bias"][:] = 0.0
    amp, phase, _ = model_forward(params, np.ones((2, 8, 8)))
    assert not np.any(amp)
    assert not np.any(phase)


def test_forward_rejects_wrong_frame_size():
    params = init_params(tiny_architecture(), seed=1)
    with pytest.raises(ShapeError):
        model_forward(params, np.ones((2, 16, 16)))


def test_params_follow_the_descriptor():
    params = init_params(tiny_architecture(), seed=1)
    bad = params.copy()
    bad.tensors["enc0.conv1.bias"] = np.zeros(3)
    with pytest.raises(ShapeError):
        ModelParams(bad.tensors, bad.architecture, bad.init_seed)
    assert params.astype(np.float32)["enc0.conv1.weight"].dtype == np.float32
