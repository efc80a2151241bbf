"""
Encoder / dual-decoder convolutional network with hand-written gradients.

Tensors are batch-first (B, C, H, W). The encoder is a stack of blocks
[conv3x3 → ReLU → conv3x3 → ReLU → maxpool2]; each decoder is a stack of
stages [upsample2 → conv3x3 → ReLU] followed by a 1x1 conv to one channel.
The amplitude head is linear, the phase head is π·tanh.

Every *_forward returns (output, cache); the matching *_backward takes the
upstream gradient and that cache.
"""

from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ptychoforge.errors import ArgumentError, ShapeError
from ptychoforge.numerics import SeededRng

HEADS = ("amp", "phase")


# ── Layers ───────────────────────────────────────────────────────────────────

def _as_batch(x: np.ndarray) -> tuple[np.ndarray, bool]:
    if x.ndim == 3:
        return x[None], True
    if x.ndim == 4:
        return x, False
    raise ShapeError(f"expected (C, H, W) or (B, C, H, W), got shape {x.shape}")


def conv2d_forward(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray):
    """Stride-1, zero-padded ('same') cross-correlation plus bias."""
    xb, squeeze = _as_batch(x)
    b, c, h, w = xb.shape
    if kernel.ndim != 4 or kernel.shape[1] != c or kernel.shape[2] != kernel.shape[3] \
            or kernel.shape[2] % 2 == 0:
        raise ShapeError(f"kernel {kernel.shape} incompatible with {c} input channels")
    o, _, k, _ = kernel.shape
    if bias.shape != (o,):
        raise ShapeError(f"bias {bias.shape} does not match {o} output channels")
    p = k // 2
    padded = np.pad(xb, ((0, 0), (0, 0), (p, p), (p, p))) if p else xb
    windows = sliding_window_view(padded, (k, k), axis=(2, 3))  # (B, C, H, W, k, k)
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(b * h * w, c * k * k)
    out = cols @ kernel.reshape(o, c * k * k).T + bias
    out = out.reshape(b, h, w, o).transpose(0, 3, 1, 2)
    out = np.ascontiguousarray(out)
    cache = (cols, kernel, xb.shape, squeeze)
    return (out[0] if squeeze else out), cache


def conv2d_backward(grad_out: np.ndarray, cache):
    """Exact gradients (grad_input, grad_kernel, grad_bias) of conv2d_forward."""
    cols, kernel, in_shape, squeeze = cache
    b, c, h, w = in_shape
    o, _, k, _ = kernel.shape
    g = grad_out[None] if squeeze else grad_out
    if g.shape != (b, o, h, w):
        raise ShapeError(f"grad_out {grad_out.shape} does not match forward output {(b, o, h, w)}")
    g2 = g.transpose(0, 2, 3, 1).reshape(b * h * w, o)
    grad_kernel = (g2.T @ cols).reshape(kernel.shape)
    grad_bias = g2.sum(axis=0)
    grad_cols = (g2 @ kernel.reshape(o, c * k * k)).reshape(b, h, w, c, k, k)
    p = k // 2
    grad_padded = np.zeros((b, c, h + 2 * p, w + 2 * p), dtype=grad_cols.dtype)
    for i in range(k):
        for j in range(k):
            grad_padded[:, :, i:i + h, j:j + w] += grad_cols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
    grad_input = grad_padded[:, :, p:p + h, p:p + w] if p else grad_padded
    if squeeze:
        grad_input = grad_input[0]
    return np.ascontiguousarray(grad_input), grad_kernel, grad_bias


def maxpool2(x: np.ndarray):
    """2x2 max pooling, stride 2."""
    h, w = x.shape[-2:]
    if h % 2 or w % 2:
        raise ShapeError(f"maxpool2 needs even height and width, got {h}x{w}")
    lead = x.shape[:-2]
    blocks = x.reshape(*lead, h // 2, 2, w // 2, 2)
    blocks = np.moveaxis(blocks, -3, -2).reshape(*lead, h // 2, w // 2, 4)
    # argmax returns the first maximum: ties go to the top-left pixel
    arg = np.argmax(blocks, axis=-1)
    out = np.take_along_axis(blocks, arg[..., None], axis=-1)[..., 0]
    return out, (arg, x.shape)


def maxpool2_backward(grad_out: np.ndarray, cache) -> np.ndarray:
    arg, in_shape = cache
    h, w = in_shape[-2:]
    lead = in_shape[:-2]
    onehot = (arg[..., None] == np.arange(4)).astype(grad_out.dtype) * grad_out[..., None]
    grad = onehot.reshape(*lead, h // 2, w // 2, 2, 2)
    grad = np.moveaxis(grad, -2, -3).reshape(in_shape)
    return grad


def upsample2(x: np.ndarray) -> np.ndarray:
    """Nearest-neighbour 2x upsampling: each pixel becomes a 2x2 block."""
    return np.repeat(np.repeat(x, 2, axis=-2), 2, axis=-1)


def upsample2_backward(grad_out: np.ndarray) -> np.ndarray:
    """Sum of each 2x2 block."""
    h, w = grad_out.shape[-2:]
    lead = grad_out.shape[:-2]
    return grad_out.reshape(*lead, h // 2, 2, w // 2, 2).sum(axis=(-3, -1))


def relu(x: np.ndarray):
    mask = x > 0
    return x * mask, mask


def relu_backward(grad_out: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return grad_out * mask


# ── Architecture ─────────────────────────────────────────────────────────────

class LayerSpec(BaseModel):
    name: str
    shape: list[int]


class Architecture(BaseModel):
    """Layer descriptor; parameter shapes and count are pure functions of it."""
    model_config = ConfigDict(extra="forbid")

    input_size: int = Field(default=64, gt=0, description="Square input frame size N_p.")
    in_channels: int = Field(default=1, gt=0)
    encoder_channels: list[int] = Field(default=[32, 64, 128], min_length=1)
    decoder_channels: list[int] = Field(default=[64, 32, 16], min_length=1)
    kernel_size: int = Field(default=3, gt=0)

    @model_validator(mode="after")
    def _check(self):
        if len(self.encoder_channels) != len(self.decoder_channels):
            raise ValueError("decoder must have one stage per encoder block")
        if self.input_size % (2 ** len(self.encoder_channels)):
            raise ValueError(f"input_size must be divisible by 2^{len(self.encoder_channels)}")
        if self.kernel_size % 2 == 0:
            raise ValueError("kernel_size must be odd")
        return self

    @property
    def latent_size(self) -> int:
        return self.input_size // 2 ** len(self.encoder_channels)

    def layers(self) -> list[LayerSpec]:
        k = self.kernel_size
        specs: list[LayerSpec] = []

        def conv(name, c_in, c_out, size):
            specs.append(LayerSpec(name=f"{name}.weight", shape=[c_out, c_in, size, size]))
            specs.append(LayerSpec(name=f"{name}.bias", shape=[c_out]))

        prev = self.in_channels
        for i, ch in enumerate(self.encoder_channels):
            conv(f"enc{i}.conv1", prev, ch, k)
            conv(f"enc{i}.conv2", ch, ch, k)
            prev = ch
        latent = prev
        for head in HEADS:
            prev = latent
            for i, ch in enumerate(self.decoder_channels):
                conv(f"{head}.up{i}", prev, ch, k)
                prev = ch
            conv(f"{head}.out", prev, 1, 1)
        return specs


def reference_architecture() -> Architecture:
    return Architecture()


def tiny_architecture() -> Architecture:
    """8x8 input, channels 2→4; used for end-to-end gradient checks."""
    return Architecture(input_size=8, encoder_channels=[2, 4], decoder_channels=[4, 2])


def count_parameters(arch: Architecture) -> int:
    return int(sum(np.prod(spec.shape) for spec in arch.layers()))


@dataclass
class ModelParams:
    tensors: "OrderedDict[str, np.ndarray]"
    architecture: Architecture
    init_seed: int

    def __post_init__(self):
        expected = {s.name: tuple(s.shape) for s in self.architecture.layers()}
        if list(self.tensors) != list(expected):
            raise ShapeError("parameter names do not follow the architecture descriptor")
        for name, shape in expected.items():
            if self.tensors[name].shape != shape:
                raise ShapeError(f"{name} has shape {self.tensors[name].shape}, descriptor says {shape}")

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def copy(self) -> "ModelParams":
        return ModelParams(OrderedDict((k, v.copy()) for k, v in self.tensors.items()),
                           self.architecture, self.init_seed)

    def astype(self, dtype) -> "ModelParams":
        return ModelParams(OrderedDict((k, v.astype(dtype)) for k, v in self.tensors.items()),
                           self.architecture, self.init_seed)


def init_params(arch: Architecture, seed: int, dtype=np.float64) -> ModelParams:
    """Kernels uniform in ±sqrt(6 / fan_in), biases zero."""
    rng = SeededRng(seed)
    tensors: OrderedDict[str, np.ndarray] = OrderedDict()
    for spec in arch.layers():
        if spec.name.endswith(".bias"):
            tensors[spec.name] = np.zeros(spec.shape, dtype=dtype)
        else:
            fan_in = spec.shape[1] * spec.shape[2] * spec.shape[3]
            limit = np.sqrt(6.0 / fan_in)
            tensors[spec.name] = rng.generator.uniform(-limit, limit, size=spec.shape).astype(dtype)
    return ModelParams(tensors=tensors, architecture=arch, init_seed=seed)


# ── Model ────────────────────────────────────────────────────────────────────

def model_forward(params: ModelParams, frames: np.ndarray):
    """Map diffraction frames to (amplitude, phase, cache).

    `frames` is one (N, N) frame or a (B, N, N) batch; outputs match.
    """
    arch = params.architecture
    single = frames.ndim == 2
    x = frames[None] if single else frames
    if x.ndim != 3 or x.shape[1:] != (arch.input_size, arch.input_size):
        raise ShapeError(f"expected frames of size {arch.input_size}x{arch.input_size}, got {frames.shape}")
    x = x[:, None].astype(params[next(iter(params.tensors))].dtype, copy=False)

    cache: dict = {"single": single}
    enc = []
    for i in range(len(arch.encoder_channels)):
        y1, c1 = conv2d_forward(x, params[f"enc{i}.conv1.weight"], params[f"enc{i}.conv1.bias"])
        a1, m1 = relu(y1)
        y2, c2 = conv2d_forward(a1, params[f"enc{i}.conv2.weight"], params[f"enc{i}.conv2.bias"])
        a2, m2 = relu(y2)
        x, cp = maxpool2(a2)
        enc.append((c1, m1, c2, m2, cp))
    cache["enc"] = enc
    latent = x

    outputs = {}
    for head in HEADS:
        x = latent
        stages = []
        for i in range(len(arch.decoder_channels)):
            u = upsample2(x)
            y, c = conv2d_forward(u, params[f"{head}.up{i}.weight"], params[f"{head}.up{i}.bias"])
            x, m = relu(y)
            stages.append((c, m))
        z, c_out = conv2d_forward(x, params[f"{head}.out.weight"], params[f"{head}.out.bias"])
        z = z[:, 0]
        if head == "phase":
            t = np.tanh(z)
            outputs[head] = np.pi * t
            cache["phase_tanh"] = t
        else:
            outputs[head] = z
        cache[head] = (stages, c_out)

    amp, phase = outputs["amp"], outputs["phase"]
    if single:
        amp, phase = amp[0], phase[0]
    return amp, phase, cache


def model_backward(params: ModelParams, cache, grad_amp: np.ndarray, grad_phase: np.ndarray):
    """Gradients of a scalar loss w.r.t. every parameter, given dL/d(amp) and dL/d(phase)."""
    arch = params.architecture
    if cache["single"]:
        grad_amp, grad_phase = grad_amp[None], grad_phase[None]
    grads: dict[str, np.ndarray] = {}

    grad_latent = None
    for head, g in (("amp", grad_amp), ("phase", grad_phase)):
        if head == "phase":
            t = cache["phase_tanh"]
            g = g * np.pi * (1.0 - t * t)
        stages, c_out = cache[head]
        gx, gw, gb = conv2d_backward(g[:, None], c_out)
        grads[f"{head}.out.weight"], grads[f"{head}.out.bias"] = gw, gb
        for i in reversed(range(len(arch.decoder_channels))):
            c, m = stages[i]
            gy = relu_backward(gx, m)
            gu, gw, gb = conv2d_backward(gy, c)
            grads[f"{head}.up{i}.weight"], grads[f"{head}.up{i}.bias"] = gw, gb
            gx = upsample2_backward(gu)
        grad_latent = gx if grad_latent is None else grad_latent + gx

    gx = grad_latent
    for i in reversed(range(len(arch.encoder_channels))):
        c1, m1, c2, m2, cp = cache["enc"][i]
        ga2 = maxpool2_backward(gx, cp)
        gy2 = relu_backward(ga2, m2)
        ga1, gw, gb = conv2d_backward(gy2, c2)
        grads[f"enc{i}.conv2.weight"], grads[f"enc{i}.conv2.bias"] = gw, gb
        gy1 = relu_backward(ga1, m1)
        gx, gw, gb = conv2d_backward(gy1, c1)
        grads[f"enc{i}.conv1.weight"], grads[f"enc{i}.conv1.bias"] = gw, gb

    return OrderedDict((name, grads[name]) for name in params.tensors)


def mae_loss(pred_amp, pred_phase, true_amp, true_phase):
    """L = mean|Δamp| + mean|Δphase| and its subgradients sign(Δ)/N per head."""
    if pred_amp.shape != true_amp.shape or pred_phase.shape != true_phase.shape:
        raise ArgumentError(
            f"prediction shapes {pred_amp.shape}/{pred_phase.shape} do not match "
            f"targets {true_amp.shape}/{true_phase.shape}"
        )
    d_amp = pred_amp - true_amp
    d_phase = pred_phase - true_phase
    loss = float(np.mean(np.abs(d_amp)) + np.mean(np.abs(d_phase)))
    return loss, np.sign(d_amp) / d_amp.size, np.sign(d_phase) / d_phase.size
