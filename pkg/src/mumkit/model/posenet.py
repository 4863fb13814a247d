"""Toy 4-stage encoder + 2-block decoder heatmap network with mix hook points.

The forward pass records every layer it runs on a tape (:class:`ForwardTrace`)
so that backward can replay it in reverse, mixing and unmixing included.
"""

import copy
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from loguru import logger

from mumkit.errors import ConfigurationError, ShapeError, StaleTraceError
from mumkit.mixing import (
    MaskStack,
    MixingMask,
    MixSpec,
    generate_mask,
    mix,
    mix_backward,
    unmix,
    unmix_backward,
)
from mumkit.model.config import N_STAGES, PoseNetConfig, UnmixSite
from mumkit.nn.layers import (
    BatchNormLayer,
    BNMode,
    ConvLayer,
    bn_backward,
    bn_forward,
    conv_backward,
    conv_forward,
    relu_backward,
    relu_forward,
    upsample_nearest_backward,
    upsample_nearest_forward,
)
from mumkit.nn.optim import AdamState, adam_step
from mumkit.tensorgrid import FeatureBatch

ENCODER_NAMES = tuple(f"enc{k}" for k in range(1, N_STAGES + 1))
DECODER_NAMES = ("dec1", "dec2")
HEAD_NAME = "head"


@dataclass
class MixPlan:
    """Masks one student forward applies: the image-level mask and per-stage masks."""

    image_mask: MixingMask | None = None
    stage_masks: dict[int, MixingMask] = field(default_factory=dict)
    decisions: dict[int, bool] = field(default_factory=dict)


@dataclass
class ForwardTrace:
    owner: int
    version: int
    bn_mode: BNMode
    tape: list[tuple[str, str, Any]] = field(default_factory=list)
    stack: MaskStack = field(default_factory=MaskStack)
    plan: MixPlan | None = None
    unmix_count: int = 0
    consumed: bool = False
    # (site, features right after a mix), for visualisation
    taps: list[tuple[str, FeatureBatch]] = field(default_factory=list)


@dataclass
class _Block:
    conv: ConvLayer
    bn: BatchNormLayer | None


class PoseNet:
    """Encoder stages: conv3x3(stride) -> BN -> ReLU. Decoder blocks: upsample
    -> conv3x3 -> BN -> ReLU. Head: conv3x3 to K heatmaps."""

    def __init__(self, cfg: PoseNetConfig, rng: np.random.Generator | None = None) -> None:
        self.cfg = cfg
        rng = rng if rng is not None else np.random.default_rng(cfg.init_seed)
        self.blocks: dict[str, _Block] = {}

        in_ch = cfg.input_channels
        for name, out_ch, stride in zip(ENCODER_NAMES, cfg.stage_channels, cfg.stage_strides):
            self.blocks[name] = _Block(
                ConvLayer.init(in_ch, out_ch, stride, rng),
                BatchNormLayer.init(out_ch, cfg.bn_momentum, cfg.bn_eps),
            )
            in_ch = out_ch
        for name in DECODER_NAMES:
            self.blocks[name] = _Block(
                ConvLayer.init(in_ch, cfg.decoder_channels, 1, rng),
                BatchNormLayer.init(cfg.decoder_channels, cfg.bn_momentum, cfg.bn_eps),
            )
            in_ch = cfg.decoder_channels
        self.blocks[HEAD_NAME] = _Block(ConvLayer.init(in_ch, cfg.n_keypoints, 1, rng), None)
        self.version = 0

    # -- parameters -------------------------------------------------------

    def parameters(self) -> dict[str, np.ndarray]:
        """Live trainable arrays by dotted name."""
        params: dict[str, np.ndarray] = {}
        for name, block in self.blocks.items():
            params[f"{name}.conv.weight"] = block.conv.weight
            params[f"{name}.conv.bias"] = block.conv.bias
            if block.bn is not None:
                params[f"{name}.bn.gamma"] = block.bn.gamma
                params[f"{name}.bn.beta"] = block.bn.beta
        return params

    def bn_layers(self) -> dict[str, BatchNormLayer]:
        return {f"{n}.bn": b.bn for n, b in self.blocks.items() if b.bn is not None}

    def buffers(self) -> dict[str, np.ndarray]:
        """BN running statistics by dotted name."""
        out: dict[str, np.ndarray] = {}
        for name, bn in self.bn_layers().items():
            out[f"{name}.running_mean"] = bn.running_mean
            out[f"{name}.running_var"] = bn.running_var
        return out

    def state_dict(self) -> dict[str, np.ndarray]:
        """Copies of all trainables and buffers."""
        state = {k: v.copy() for k, v in self.parameters().items()}
        state.update({k: v.copy() for k, v in self.buffers().items()})
        return state

    def set_buffer(self, name: str, value: np.ndarray) -> None:
        layer_name, attr = name.rsplit(".", 1)
        bn = self.bn_layers().get(layer_name)
        if bn is None or attr not in ("running_mean", "running_var"):
            raise ShapeError(f"unknown buffer {name!r}")
        current = getattr(bn, attr)
        setattr(bn, attr, np.asarray(value, dtype=np.float64).reshape(current.shape).copy())

    def load_state(self, tensors: dict[str, np.ndarray], prefix: str = "") -> None:
        """Load trainables and buffers; flat arrays are reshaped to the live shapes.

        Raises:
            ShapeError: a tensor is missing or has the wrong element count
        """
        params = self.parameters()
        for name, live in list(params.items()) + list(self.buffers().items()):
            key = prefix + name
            if key not in tensors:
                raise ShapeError(f"state is missing {key!r}")
            value = np.asarray(tensors[key], dtype=np.float64)
            if value.size != live.size:
                raise ShapeError(
                    f"{key!r} has {value.size} elements, expected {live.size}"
                )
            if name in params:
                live[...] = value.reshape(live.shape)
            else:
                self.set_buffer(name, value)
        self.version += 1

    def clone(self) -> "PoseNet":
        twin = copy.deepcopy(self)
        twin.version = 0
        return twin

    def apply_gradients(self, grads: dict[str, np.ndarray], optimizer: AdamState) -> None:
        """One Adam step on the live parameters; invalidates outstanding traces."""
        adam_step(self.parameters(), grads, optimizer)
        self.version += 1

    # -- forward ----------------------------------------------------------

    def _check_input(self, images: FeatureBatch) -> None:
        expected = (self.cfg.input_channels, *self.cfg.input_size)
        if images.shape[1:] != expected:
            raise ShapeError(f"network expects (n, {expected}), got {images.shape}")

    def _block_forward(
        self, name: str, x: FeatureBatch, bn_mode: BNMode, trace: ForwardTrace, upsample: bool
    ) -> FeatureBatch:
        block = self.blocks[name]
        if upsample:
            x = upsample_nearest_forward(x)
            trace.tape.append(("upsample", name, None))
        x, conv_trace = conv_forward(x, block.conv)
        trace.tape.append(("conv", name, conv_trace))
        if block.bn is None:
            return x
        x, bn_trace = bn_forward(x, block.bn, bn_mode)
        trace.tape.append(("bn", name, bn_trace))
        x, relu_mask = relu_forward(x)
        trace.tape.append(("relu", name, relu_mask))
        return x

    def _mix(self, x: FeatureBatch, site: str, mask: MixingMask, trace: ForwardTrace) -> FeatureBatch:
        trace.stack.push(site, mask)
        trace.tape.append(("mix", site, mask))
        mixed = mix(x, mask)
        trace.taps.append((site, mixed))
        return mixed

    def _unmix(self, x: FeatureBatch, site: str, trace: ForwardTrace) -> FeatureBatch:
        applied = trace.stack.copy()
        trace.tape.append(("unmix", site, applied))
        trace.unmix_count += len(applied)
        return unmix(x, applied)

    def _forward(
        self, images: FeatureBatch, bn_mode: BNMode, plan: MixPlan | None
    ) -> tuple[FeatureBatch, ForwardTrace]:
        self._check_input(images)
        trace = ForwardTrace(owner=id(self), version=self.version, bn_mode=bn_mode, plan=plan)
        site = self.cfg.unmix_site
        x = images

        if plan is not None and plan.image_mask is not None:
            x = self._mix(x, "input", plan.image_mask, trace)
        for k, name in enumerate(ENCODER_NAMES, start=1):
            x = self._block_forward(name, x, bn_mode, trace, upsample=False)
            if plan is None:
                continue
            if k in plan.stage_masks:
                x = self._mix(x, f"layer{k}", plan.stage_masks[k], trace)
            if (site is UnmixSite.AFTER_LAYER2 and k == 2) or (
                site is UnmixSite.AFTER_ENCODER and k == N_STAGES
            ):
                x = self._unmix(x, f"layer{k}", trace)
        for name in DECODER_NAMES:
            x = self._block_forward(name, x, bn_mode, trace, upsample=True)
        x = self._block_forward(HEAD_NAME, x, bn_mode, trace, upsample=False)
        if plan is not None and site is UnmixSite.AFTER_DECODER:
            x = self._unmix(x, "heatmaps", trace)
        return x, trace

    def forward_plain(self, images: FeatureBatch, bn_mode: BNMode = "eval") -> FeatureBatch:
        """Straight encoder -> decoder pass without mixing. Eval mode is pure."""
        heatmaps, _ = self._forward(images, bn_mode, plan=None)
        return heatmaps

    def forward_train(self, images: FeatureBatch) -> tuple[FeatureBatch, ForwardTrace]:
        """Train-mode plain pass that keeps the trace for backward."""
        return self._forward(images, "train", plan=None)

    def draw_plan(self, spec: MixSpec, rng: np.random.Generator) -> MixPlan:
        """Draw the image-level mask and one Bernoulli(mix_prob) per candidate stage.

        A decision is drawn for every candidate stage even when mix_prob is 0,
        so MUM and Pose-MUM consume the random stream identically.
        """
        plan = MixPlan()
        if spec.image_mix:
            plan.image_mask = generate_mask(spec, rng)
        for k in self.cfg.mix_stages():
            decided = bool(rng.random() < spec.mix_prob)
            plan.decisions[k] = decided
            if decided:
                plan.stage_masks[k] = generate_mask(spec, rng)
        return plan

    def forward_student(
        self,
        images: FeatureBatch,
        spec: MixSpec,
        rng: np.random.Generator | None = None,
        plan: MixPlan | None = None,
    ) -> tuple[FeatureBatch, MaskStack, ForwardTrace]:
        """Train-mode mixed forward: image mix, stochastic stage mixes, unmix, decode.

        Pass ``plan`` to replay fixed masks without touching ``rng``.

        Raises:
            ConfigurationError: the batch is not whole groups, or a mix site is
                not divisible by the tile grid
        """
        if images.n % spec.n_group != 0:
            raise ConfigurationError(
                f"student batch of {images.n} is not a multiple of n_group={spec.n_group}"
            )
        self.cfg.check_mix_divisibility(spec)
        if plan is None:
            if rng is None:
                raise ConfigurationError("forward_student needs either rng or plan")
            plan = self.draw_plan(spec, rng)
        heatmaps, trace = self._forward(images, "train", plan)
        logger.debug(
            f"student forward: {len(trace.stack)} masks at {trace.stack.sites()}"
        )
        return heatmaps, trace.stack, trace

    # -- backward ---------------------------------------------------------

    def backward(
        self, trace: ForwardTrace, grad_heatmaps: FeatureBatch
    ) -> tuple[dict[str, np.ndarray], FeatureBatch]:
        """Return (parameter gradients, gradient w.r.t. the input images).

        Raises:
            StaleTraceError: the trace belongs to another network or the
                parameters changed since it was recorded
        """
        if trace.consumed:
            raise StaleTraceError("trace was already consumed by a backward pass")
        if trace.owner != id(self) or trace.version != self.version:
            raise StaleTraceError(
                f"trace recorded at version {trace.version}, network is at "
                f"{self.version}"
            )
        trace.consumed = True
        grads = {name: np.zeros_like(p) for name, p in self.parameters().items()}
        g = grad_heatmaps
        for kind, name, record in reversed(trace.tape):
            if kind == "conv":
                g, grad_w, grad_b = conv_backward(record, g)
                grads[f"{name}.conv.weight"] += grad_w
                grads[f"{name}.conv.bias"] += grad_b
            elif kind == "bn":
                g, grad_gamma, grad_beta = bn_backward(record, g)
                grads[f"{name}.bn.gamma"] += grad_gamma
                grads[f"{name}.bn.beta"] += grad_beta
            elif kind == "relu":
                g = relu_backward(record, g)
            elif kind == "upsample":
                g = upsample_nearest_backward(g)
            elif kind == "mix":
                g = mix_backward(g, record)
            elif kind == "unmix":
                g = unmix_backward(g, record)
        return grads, g

    def backward_student(
        self, trace: ForwardTrace, grad_heatmaps: FeatureBatch
    ) -> dict[str, np.ndarray]:
        """Exact parameter gradients of a forward_student / forward_train call."""
        grads, _ = self.backward(trace, grad_heatmaps)
        return grads
