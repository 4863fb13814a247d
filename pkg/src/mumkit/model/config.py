"""Configuration of the 4-stage heatmap network."""

from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from mumkit.errors import ConfigurationError
from mumkit.mixing.types import MixSpec

N_STAGES = 4
DECODER_UPSAMPLINGS = 2


class UnmixSite(Enum):
    """Where the stacked masks are undone."""

    AFTER_LAYER2 = "after_layer2"
    AFTER_ENCODER = "after_encoder"
    AFTER_DECODER = "after_decoder"


# encoder stages whose output may receive a feature-level mix for each site;
# a mix directly in front of the unmix would be undone at once
MIX_STAGES: dict[UnmixSite, tuple[int, ...]] = {
    UnmixSite.AFTER_LAYER2: (1,),
    UnmixSite.AFTER_ENCODER: (1, 2, 3),
    UnmixSite.AFTER_DECODER: (1, 2, 3, 4),
}


class PoseNetConfig(BaseModel):
    """Sizes are (h, w). Defaults: 64x48 grayscale input, 16x12 heatmaps."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    stage_channels: tuple[int, int, int, int] = (8, 16, 32, 32)
    stage_strides: tuple[int, int, int, int] = (2, 2, 2, 2)
    decoder_channels: int = Field(default=16, ge=1)
    n_keypoints: int = Field(default=8, ge=1)
    input_channels: int = Field(default=1, ge=1)
    input_size: tuple[int, int] = (64, 48)
    heatmap_size: tuple[int, int] = (16, 12)
    unmix_site: UnmixSite = UnmixSite.AFTER_ENCODER
    bn_momentum: float = Field(default=0.1, ge=0.0, le=1.0)
    bn_eps: float = Field(default=1e-5, gt=0.0)
    init_seed: int = 0

    @field_validator("stage_strides")
    @classmethod
    def _strides_are_one_or_two(cls, v: tuple[int, ...]) -> tuple[int, ...]:
        if any(s not in (1, 2) for s in v):
            raise ValueError(f"stage strides must be 1 or 2, got {v}")
        return v

    @field_validator("stage_channels")
    @classmethod
    def _channels_positive(cls, v: tuple[int, ...]) -> tuple[int, ...]:
        if any(c < 1 for c in v):
            raise ValueError(f"stage channels must be >= 1, got {v}")
        return v

    @model_validator(mode="after")
    def _geometry_consistent(self) -> "PoseNetConfig":
        h, w = self.input_size
        total = 1
        for s in self.stage_strides:
            total *= s
        if h % total or w % total:
            raise ValueError(
                f"input_size {self.input_size} is not divisible by the total "
                f"encoder stride {total}"
            )
        eh, ew = self.stage_sizes()[-1]
        up = 2**DECODER_UPSAMPLINGS
        if (eh * up, ew * up) != tuple(self.heatmap_size):
            raise ValueError(
                f"decoder output {(eh * up, ew * up)} does not match "
                f"heatmap_size {self.heatmap_size}"
            )
        return self

    def stage_sizes(self) -> list[tuple[int, int]]:
        """Output (h, w) of each encoder stage."""
        h, w = self.input_size
        sizes = []
        for s in self.stage_strides:
            h, w = h // s, w // s
            sizes.append((h, w))
        return sizes

    def mix_stages(self) -> tuple[int, ...]:
        return MIX_STAGES[self.unmix_site]

    def check_mix_divisibility(self, spec: MixSpec) -> None:
        """Every plane that can be mixed or unmixed must split into spec's tile grid.

        Raises:
            ConfigurationError: naming the first offending site and dimension
        """
        sizes = self.stage_sizes()
        planes: list[tuple[str, tuple[int, int]]] = [("input", tuple(self.input_size))]
        planes += [(f"layer{k}", sizes[k - 1]) for k in self.mix_stages()]
        if self.unmix_site is UnmixSite.AFTER_LAYER2:
            planes.append(("layer2", sizes[1]))
        elif self.unmix_site is UnmixSite.AFTER_ENCODER:
            planes.append(("layer4", sizes[3]))
        else:
            planes.append(("heatmaps", tuple(self.heatmap_size)))

        for site, (h, w) in planes:
            if h % spec.n_tiles_h:
                raise ConfigurationError(
                    f"mix site {site}: height {h} is not divisible by "
                    f"n_tiles_h={spec.n_tiles_h}"
                )
            if w % spec.n_tiles_w:
                raise ConfigurationError(
                    f"mix site {site}: width {w} is not divisible by "
                    f"n_tiles_w={spec.n_tiles_w}"
                )
