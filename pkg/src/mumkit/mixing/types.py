"""Data types for tile mixing: the mix spec, masks and the mask stack."""

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from mumkit.errors import ShapeError


class MixSpec(BaseModel):
    """Group/tile configuration shared by MUM and Pose-MUM."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    n_group: int = Field(default=4, ge=2)
    n_tiles_h: int = Field(default=4, ge=1)
    n_tiles_w: int = Field(default=3, ge=1)
    # probability of a feature-level mix after each candidate encoder stage
    mix_prob: float = Field(default=0.5, ge=0.0, le=1.0)
    # image-level mix ahead of stage 1
    image_mix: bool = True
    # every generated permutation is the identity (debugging / visualisation)
    identity_masks: bool = False
    seed: int = 0


@dataclass(frozen=True)
class MixingMask:
    """Per-tile permutations over group members, gather convention.

    ``perms[i, j, g]`` is the group member whose tile (i, j) ends up in output
    member g.
    """

    perms: np.ndarray

    def __post_init__(self) -> None:
        perms = np.asarray(self.perms, dtype=np.int64)
        if perms.ndim != 3:
            raise ShapeError(
                f"mask perms must be (n_tiles_h, n_tiles_w, n_group), got {perms.shape}"
            )
        n_group = perms.shape[2]
        counts = np.zeros(perms.shape[:2] + (n_group,), dtype=np.int64)
        if perms.size and (perms.min() < 0 or perms.max() >= n_group):
            raise ShapeError(f"mask entries must lie in [0, {n_group})")
        for g in range(n_group):
            counts[..., g] = (perms == g).sum(axis=2)
        if not np.all(counts == 1):
            raise ShapeError("every mask cell must be a permutation of the group")
        perms.setflags(write=False)
        object.__setattr__(self, "perms", perms)

    @classmethod
    def identity(cls, n_group: int, n_tiles_h: int, n_tiles_w: int) -> "MixingMask":
        perms = np.broadcast_to(np.arange(n_group), (n_tiles_h, n_tiles_w, n_group))
        return cls(perms.copy())

    @property
    def n_group(self) -> int:
        return int(self.perms.shape[2])

    @property
    def grid(self) -> tuple[int, int]:
        return int(self.perms.shape[0]), int(self.perms.shape[1])

    def cell(self, i: int, j: int) -> tuple[int, ...]:
        return tuple(int(s) for s in self.perms[i, j])

    def is_identity(self) -> bool:
        return bool(np.all(self.perms == np.arange(self.n_group)))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MixingMask):
            return NotImplemented
        return self.perms.shape == other.perms.shape and bool(
            np.all(self.perms == other.perms)
        )

    def __hash__(self) -> int:
        return hash(self.perms.tobytes())


@dataclass
class MaskStack:
    """Masks in application order; unmixing consumes them last-to-first."""

    entries: list[tuple[str, MixingMask]] = field(default_factory=list)

    def push(self, site_label: str, mask: MixingMask) -> None:
        self.entries.append((site_label, mask))

    def masks(self) -> list[MixingMask]:
        return [mask for _, mask in self.entries]

    def sites(self) -> list[str]:
        return [site for site, _ in self.entries]

    def copy(self) -> "MaskStack":
        return MaskStack(list(self.entries))

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[tuple[str, MixingMask]]:
        return iter(self.entries)
