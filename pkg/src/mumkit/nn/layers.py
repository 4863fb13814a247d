"""3x3 convolution, batch norm, ReLU, nearest upsampling and MSE with manual backward.

Every ``*_forward`` returns its output together with the trace its
``*_backward`` needs. Arithmetic is float64 throughout.
"""

from dataclasses import dataclass
from typing import Literal

import numpy as np

from mumkit.errors import ShapeError
from mumkit.tensorgrid import FeatureBatch

KERNEL = 3
PADDING = 1

BNMode = Literal["train", "eval"]


@dataclass
class ConvLayer:
    """3x3 cross-correlation with zero padding 1 and stride 1 or 2."""

    weight: np.ndarray  # (out_channels, in_channels, 3, 3)
    bias: np.ndarray  # (out_channels,)
    stride: int = 1

    def __post_init__(self) -> None:
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weight.ndim != 4 or self.weight.shape[2:] != (KERNEL, KERNEL):
            raise ShapeError(f"conv weight must be (o, i, 3, 3), got {self.weight.shape}")
        if self.bias.shape != (self.weight.shape[0],):
            raise ShapeError(
                f"conv bias shape {self.bias.shape} does not match "
                f"{self.weight.shape[0]} output channels"
            )
        if self.stride not in (1, 2):
            raise ShapeError(f"conv stride must be 1 or 2, got {self.stride}")

    @classmethod
    def init(
        cls, in_channels: int, out_channels: int, stride: int, rng: np.random.Generator
    ) -> "ConvLayer":
        """He-normal weights, zero bias."""
        fan_in = in_channels * KERNEL * KERNEL
        weight = rng.normal(0.0, np.sqrt(2.0 / fan_in),
                            size=(out_channels, in_channels, KERNEL, KERNEL))
        return cls(weight=weight, bias=np.zeros(out_channels), stride=stride)

    @property
    def in_channels(self) -> int:
        return int(self.weight.shape[1])

    @property
    def out_channels(self) -> int:
        return int(self.weight.shape[0])


@dataclass
class ConvTrace:
    layer: ConvLayer
    cols: np.ndarray  # (n, in_channels*9, out_h*out_w)
    input_shape: tuple[int, int, int, int]
    out_hw: tuple[int, int]


def _output_hw(h: int, w: int, stride: int) -> tuple[int, int]:
    return (h + 2 * PADDING - KERNEL) // stride + 1, (w + 2 * PADDING - KERNEL) // stride + 1


def conv_forward(x: FeatureBatch, layer: ConvLayer) -> tuple[FeatureBatch, ConvTrace]:
    n, c, h, w = x.shape
    if c != layer.in_channels:
        raise ShapeError(f"conv expects {layer.in_channels} input channels, got {c}")
    s = layer.stride
    oh, ow = _output_hw(h, w, s)

    padded = np.pad(x.data, ((0, 0), (0, 0), (PADDING, PADDING), (PADDING, PADDING)))
    cols = np.empty((n, c, KERNEL, KERNEL, oh, ow))
    for ky in range(KERNEL):
        for kx in range(KERNEL):
            cols[:, :, ky, kx] = padded[:, :, ky:ky + s * oh:s, kx:kx + s * ow:s]
    cols = cols.reshape(n, c * KERNEL * KERNEL, oh * ow)

    w2 = layer.weight.reshape(layer.out_channels, -1)
    out = np.matmul(w2, cols) + layer.bias[None, :, None]
    trace = ConvTrace(layer=layer, cols=cols, input_shape=x.shape, out_hw=(oh, ow))
    return FeatureBatch(out.reshape(n, layer.out_channels, oh, ow)), trace


def conv_backward(
    trace: ConvTrace, grad_out: FeatureBatch
) -> tuple[FeatureBatch, np.ndarray, np.ndarray]:
    """Return (grad_x, grad_weight, grad_bias)."""
    layer = trace.layer
    n, c, h, w = trace.input_shape
    oh, ow = trace.out_hw
    if grad_out.shape != (n, layer.out_channels, oh, ow):
        raise ShapeError(
            f"conv grad_out shape {grad_out.shape} does not match output "
            f"{(n, layer.out_channels, oh, ow)}"
        )
    s = layer.stride
    g = grad_out.data.reshape(n, layer.out_channels, oh * ow)

    grad_w = np.einsum("nop,nkp->ok", g, trace.cols).reshape(layer.weight.shape)
    grad_b = g.sum(axis=(0, 2))

    w2 = layer.weight.reshape(layer.out_channels, -1)
    grad_cols = np.matmul(w2.T, g).reshape(n, c, KERNEL, KERNEL, oh, ow)
    grad_padded = np.zeros((n, c, h + 2 * PADDING, w + 2 * PADDING))
    for ky in range(KERNEL):
        for kx in range(KERNEL):
            grad_padded[:, :, ky:ky + s * oh:s, kx:kx + s * ow:s] += grad_cols[:, :, ky, kx]
    grad_x = grad_padded[:, :, PADDING:PADDING + h, PADDING:PADDING + w]
    return FeatureBatch(grad_x), grad_w, grad_b


@dataclass
class BatchNormLayer:
    """Per-channel batch normalisation; running_var holds the biased variance."""

    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = 0.1
    eps: float = 1e-5

    def __post_init__(self) -> None:
        for name in ("gamma", "beta", "running_mean", "running_var"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        shapes = {a.shape for a in (self.gamma, self.beta, self.running_mean, self.running_var)}
        if len(shapes) != 1 or self.gamma.ndim != 1:
            raise ShapeError(f"batch norm buffers must share one 1-d shape, got {shapes}")
        if not 0.0 <= self.momentum <= 1.0:
            raise ShapeError(f"batch norm momentum must lie in [0, 1], got {self.momentum}")
        if self.eps <= 0.0:
            raise ShapeError(f"batch norm eps must be > 0, got {self.eps}")

    @classmethod
    def init(cls, channels: int, momentum: float = 0.1, eps: float = 1e-5) -> "BatchNormLayer":
        return cls(
            gamma=np.ones(channels),
            beta=np.zeros(channels),
            running_mean=np.zeros(channels),
            running_var=np.ones(channels),
            momentum=momentum,
            eps=eps,
        )

    @property
    def channels(self) -> int:
        return int(self.gamma.shape[0])


@dataclass
class BatchNormTrace:
    layer: BatchNormLayer
    mode: BNMode
    x_hat: np.ndarray
    inv_std: np.ndarray  # (channels,)


def _check_bn_input(x: FeatureBatch, layer: BatchNormLayer) -> None:
    if x.c != layer.channels:
        raise ShapeError(f"batch norm expects {layer.channels} channels, got {x.c}")


def _bcast(v: np.ndarray) -> np.ndarray:
    return v[None, :, None, None]


def bn_forward_train(
    x: FeatureBatch, layer: BatchNormLayer
) -> tuple[FeatureBatch, BatchNormTrace]:
    """Normalise with batch statistics over (n, h, w) and update running stats."""
    _check_bn_input(x, layer)
    mean = x.data.mean(axis=(0, 2, 3))
    var = x.data.var(axis=(0, 2, 3))
    inv_std = 1.0 / np.sqrt(var + layer.eps)
    x_hat = (x.data - _bcast(mean)) * _bcast(inv_std)
    y = _bcast(layer.gamma) * x_hat + _bcast(layer.beta)

    m = layer.momentum
    layer.running_mean = (1.0 - m) * layer.running_mean + m * mean
    layer.running_var = (1.0 - m) * layer.running_var + m * var
    return FeatureBatch(y), BatchNormTrace(layer, "train", x_hat, inv_std)


def bn_forward_eval(
    x: FeatureBatch, layer: BatchNormLayer
) -> tuple[FeatureBatch, BatchNormTrace]:
    """Normalise with the running statistics; never writes them."""
    _check_bn_input(x, layer)
    inv_std = 1.0 / np.sqrt(layer.running_var + layer.eps)
    x_hat = (x.data - _bcast(layer.running_mean)) * _bcast(inv_std)
    y = _bcast(layer.gamma) * x_hat + _bcast(layer.beta)
    return FeatureBatch(y), BatchNormTrace(layer, "eval", x_hat, inv_std)


def bn_forward(
    x: FeatureBatch, layer: BatchNormLayer, mode: BNMode
) -> tuple[FeatureBatch, BatchNormTrace]:
    if mode == "train":
        return bn_forward_train(x, layer)
    return bn_forward_eval(x, layer)


def bn_backward(
    trace: BatchNormTrace, grad_out: FeatureBatch
) -> tuple[FeatureBatch, np.ndarray, np.ndarray]:
    """Return (grad_x, grad_gamma, grad_beta) for either mode."""
    dy = grad_out.data
    if dy.shape != trace.x_hat.shape:
        raise ShapeError(f"bn grad_out shape {dy.shape} != {trace.x_hat.shape}")
    grad_gamma = (dy * trace.x_hat).sum(axis=(0, 2, 3))
    grad_beta = dy.sum(axis=(0, 2, 3))
    dx_hat = dy * _bcast(trace.layer.gamma)

    if trace.mode == "eval":
        return FeatureBatch(dx_hat * _bcast(trace.inv_std)), grad_gamma, grad_beta

    count = dy.shape[0] * dy.shape[2] * dy.shape[3]
    sum_dx_hat = dx_hat.sum(axis=(0, 2, 3))
    sum_dx_hat_xhat = (dx_hat * trace.x_hat).sum(axis=(0, 2, 3))
    grad_x = (
        _bcast(trace.inv_std / count)
        * (count * dx_hat - _bcast(sum_dx_hat) - trace.x_hat * _bcast(sum_dx_hat_xhat))
    )
    return FeatureBatch(grad_x), grad_gamma, grad_beta


def relu_forward(x: FeatureBatch) -> tuple[FeatureBatch, np.ndarray]:
    """Return the activation and the boolean pass-through mask."""
    mask = x.data > 0.0
    # np.maximum keeps NaN, so a poisoned batch reaches the loss
    return FeatureBatch(np.maximum(x.data, 0.0)), mask


def relu_backward(mask: np.ndarray, grad_out: FeatureBatch) -> FeatureBatch:
    return FeatureBatch(np.where(mask, grad_out.data, 0.0))


def upsample_nearest_forward(x: FeatureBatch) -> FeatureBatch:
    """Replicate every element into a 2x2 block."""
    return FeatureBatch(np.repeat(np.repeat(x.data, 2, axis=2), 2, axis=3))


def upsample_nearest_backward(grad_out: FeatureBatch) -> FeatureBatch:
    n, c, h, w = grad_out.shape
    if h % 2 or w % 2:
        raise ShapeError(f"upsample grad plane {h}x{w} must have even sides")
    blocks = grad_out.data.reshape(n, c, h // 2, 2, w // 2, 2)
    return FeatureBatch(blocks.sum(axis=(3, 5)))


@dataclass
class MseTrace:
    diff: np.ndarray
    weight: np.ndarray | None
    count: int


def mse_forward(
    pred: FeatureBatch, target: FeatureBatch, weight: np.ndarray | None = None
) -> tuple[float, MseTrace]:
    """Mean over all elements of weight * (pred - target)^2.

    ``weight`` broadcasts against (n, c, h, w); heatmap losses pass the
    per-keypoint visibility as an (n, c, 1, 1) array.
    """
    if pred.shape != target.shape:
        raise ShapeError(f"mse shape mismatch: {pred.shape} vs {target.shape}")
    diff = pred.data - target.data
    if weight is not None:
        weight = np.broadcast_to(np.asarray(weight, dtype=np.float64), diff.shape)
        sq = weight * diff * diff
    else:
        sq = diff * diff
    return float(sq.mean()), MseTrace(diff=diff, weight=weight, count=diff.size)


def mse_backward(trace: MseTrace, scale: float = 1.0) -> FeatureBatch:
    """Gradient of ``scale * loss`` w.r.t. the prediction."""
    grad = (2.0 * scale / trace.count) * trace.diff
    if trace.weight is not None:
        grad = grad * trace.weight
    return FeatureBatch(grad)
