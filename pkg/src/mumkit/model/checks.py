"""Finite-difference verification of every layer and of the mixed network path."""

from typing import Callable

import numpy as np
from loguru import logger

from mumkit.mixing import MaskStack, MixSpec, generate_mask, mix, mix_backward, unmix, unmix_backward
from mumkit.model.config import PoseNetConfig, UnmixSite
from mumkit.model.posenet import PoseNet
from mumkit.nn.gradcheck import GradcheckReport, gradcheck, nudge_from_zero
from mumkit.nn.layers import (
    BatchNormLayer,
    ConvLayer,
    bn_backward,
    bn_forward,
    conv_backward,
    conv_forward,
    mse_backward,
    mse_forward,
    relu_backward,
    relu_forward,
    upsample_nearest_backward,
    upsample_nearest_forward,
)
from mumkit.tensorgrid import FeatureBatch

LINEAR_TOLERANCE = 1e-6
TOLERANCE = 1e-4

# small network that still has every layer type, both strides and a mix at every site
CHECK_NET = PoseNetConfig(
    stage_channels=(2, 3, 3, 4),
    stage_strides=(1, 2, 1, 2),
    decoder_channels=3,
    n_keypoints=2,
    input_size=(16, 16),
    heatmap_size=(16, 16),
    unmix_site=UnmixSite.AFTER_DECODER,
)
CHECK_MIX = MixSpec(n_group=2, n_tiles_h=2, n_tiles_w=2, mix_prob=1.0)


def _linear_loss(w: np.ndarray) -> Callable[[FeatureBatch], float]:
    return lambda y: float(np.sum(w * y.data))


def check_conv(rng: np.random.Generator, stride: int) -> GradcheckReport:
    layer = ConvLayer.init(2, 3, stride, rng)
    layer.bias[...] = rng.normal(size=layer.bias.shape)
    x = rng.normal(size=(2, 2, 6, 6))
    y, trace = conv_forward(FeatureBatch(x), layer)
    w = rng.normal(size=y.shape)
    gx, gw, gb = conv_backward(trace, FeatureBatch(w))
    loss = _linear_loss(w)
    return gradcheck(
        f"conv stride {stride}",
        lambda: loss(conv_forward(FeatureBatch(x), layer)[0]),
        {"x": x, "weight": layer.weight, "bias": layer.bias},
        {"x": gx.data, "weight": gw, "bias": gb},
        tolerance=LINEAR_TOLERANCE,
    )


def check_batch_norm(rng: np.random.Generator, mode: str) -> GradcheckReport:
    layer = BatchNormLayer.init(3)
    layer.gamma[...] = rng.uniform(0.5, 1.5, size=3)
    layer.beta[...] = rng.normal(size=3)
    layer.running_mean = rng.normal(size=3)
    layer.running_var = rng.uniform(0.5, 2.0, size=3)
    x = rng.normal(0.0, 2.0, size=(3, 3, 4, 4))
    y, trace = bn_forward(FeatureBatch(x), layer, mode)  # type: ignore[arg-type]
    w = rng.normal(size=y.shape)
    gx, gg, gb = bn_backward(trace, FeatureBatch(w))
    loss = _linear_loss(w)
    return gradcheck(
        f"batch norm ({mode})",
        lambda: loss(bn_forward(FeatureBatch(x), layer, mode)[0]),  # type: ignore[arg-type]
        {"x": x, "gamma": layer.gamma, "beta": layer.beta},
        {"x": gx.data, "gamma": gg, "beta": gb},
        tolerance=LINEAR_TOLERANCE if mode == "eval" else TOLERANCE,
    )


def check_relu(rng: np.random.Generator) -> GradcheckReport:
    x = nudge_from_zero(rng.normal(size=(2, 2, 4, 4)), margin=1e-2)
    y, mask = relu_forward(FeatureBatch(x))
    w = rng.normal(size=y.shape)
    loss = _linear_loss(w)
    return gradcheck(
        "relu",
        lambda: loss(relu_forward(FeatureBatch(x))[0]),
        {"x": x},
        {"x": relu_backward(mask, FeatureBatch(w)).data},
        tolerance=LINEAR_TOLERANCE,
    )


def check_upsample(rng: np.random.Generator) -> GradcheckReport:
    x = rng.normal(size=(2, 2, 3, 4))
    w = rng.normal(size=(2, 2, 6, 8))
    loss = _linear_loss(w)
    return gradcheck(
        "upsample",
        lambda: loss(upsample_nearest_forward(FeatureBatch(x))),
        {"x": x},
        {"x": upsample_nearest_backward(FeatureBatch(w)).data},
        tolerance=LINEAR_TOLERANCE,
    )


def check_mse(rng: np.random.Generator) -> GradcheckReport:
    pred = rng.normal(size=(2, 3, 4, 4))
    target = FeatureBatch(rng.normal(size=(2, 3, 4, 4)))
    weight = (rng.random(size=(2, 3, 1, 1)) < 0.7).astype(np.float64)
    _, trace = mse_forward(FeatureBatch(pred), target, weight)
    return gradcheck(
        "mse",
        lambda: mse_forward(FeatureBatch(pred), target, weight)[0],
        {"pred": pred},
        {"pred": mse_backward(trace).data},
        tolerance=TOLERANCE,
    )


def check_mixing(rng: np.random.Generator) -> GradcheckReport:
    spec = MixSpec(n_group=3, n_tiles_h=2, n_tiles_w=2)
    masks = [generate_mask(spec, rng) for _ in range(3)]
    stack = MaskStack()
    for k, m in enumerate(masks):
        stack.push(f"site{k}", m)
    x = rng.normal(size=(6, 2, 4, 4))
    w = rng.normal(size=x.shape)
    loss = _linear_loss(w)
    mixed_report = gradcheck(
        "mix",
        lambda: loss(mix(FeatureBatch(x), masks[0])),
        {"x": x},
        {"x": mix_backward(FeatureBatch(w), masks[0]).data},
        tolerance=LINEAR_TOLERANCE,
    )
    unmix_report = gradcheck(
        "unmix",
        lambda: loss(unmix(FeatureBatch(x), stack)),
        {"x": x},
        {"x": unmix_backward(FeatureBatch(w), stack).data},
        tolerance=LINEAR_TOLERANCE,
    )
    mixed_report.errors.update({f"unmix.{k}": v for k, v in unmix_report.errors.items()})
    mixed_report.name = "mix / unmix"
    return mixed_report


def check_network(rng: np.random.Generator, mixed: bool) -> GradcheckReport:
    """Full encoder/decoder in train mode; ``mixed`` replays a frozen all-sites plan."""
    net = PoseNet(CHECK_NET, rng)
    for bn in net.bn_layers().values():
        bn.beta[...] = rng.normal(0.0, 0.1, size=bn.beta.shape)
    x = rng.normal(size=(2, 1, 16, 16))
    plan = net.draw_plan(CHECK_MIX, rng) if mixed else None

    def forward() -> tuple[FeatureBatch, object]:
        if plan is None:
            return net.forward_train(FeatureBatch(x))
        heatmaps, _, trace = net.forward_student(FeatureBatch(x), CHECK_MIX, plan=plan)
        return heatmaps, trace

    heatmaps, trace = forward()
    w = rng.normal(size=heatmaps.shape)
    grads, gx = net.backward(trace, FeatureBatch(w))  # type: ignore[arg-type]
    loss = _linear_loss(w)
    arrays = {"images": x, **net.parameters()}
    analytic = {"images": gx.data, **grads}
    return gradcheck(
        "posenet (mixed, frozen masks)" if mixed else "posenet (plain)",
        lambda: loss(forward()[0]),
        arrays,
        analytic,
        tolerance=TOLERANCE,
    )


def run_gradcheck_suite(seed: int = 0) -> list[GradcheckReport]:
    """Every layer type, mixing, and the network with and without mixing."""
    rng = np.random.default_rng(seed)
    reports = [
        check_conv(rng, 1),
        check_conv(rng, 2),
        check_batch_norm(rng, "train"),
        check_batch_norm(rng, "eval"),
        check_relu(rng),
        check_upsample(rng),
        check_mse(rng),
        check_mixing(rng),
        check_network(rng, mixed=False),
        check_network(rng, mixed=True),
    ]
    for report in reports:
        if report.passed:
            logger.info(report.summary())
        else:
            logger.error(report.summary())
    return reports
