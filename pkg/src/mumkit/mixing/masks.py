"""Generation, inversion, application and stacking of tile mixing masks."""

import numpy as np
from loguru import logger

from mumkit.errors import ConfigurationError, ShapeError
from mumkit.mixing.types import MaskStack, MixingMask, MixSpec
from mumkit.tensorgrid import FeatureBatch, tile_bounds


def generate_mask(spec: MixSpec, rng: np.random.Generator) -> MixingMask:
    """Draw an independent uniform permutation of the group for every tile cell."""
    if spec.identity_masks:
        return MixingMask.identity(spec.n_group, spec.n_tiles_h, spec.n_tiles_w)

    n_cells = spec.n_tiles_h * spec.n_tiles_w
    rows = np.tile(np.arange(spec.n_group), (n_cells, 1))
    perms = rng.permuted(rows, axis=1)
    return MixingMask(perms.reshape(spec.n_tiles_h, spec.n_tiles_w, spec.n_group))


def invert(mask: MixingMask) -> MixingMask:
    """Cellwise inverse permutation."""
    return MixingMask(np.argsort(mask.perms, axis=2, kind="stable"))


def mix(batch: FeatureBatch, mask: MixingMask) -> FeatureBatch:
    """Rearrange tiles across group members.

    In tile (i, j), output member g receives the tile of input member
    ``mask.perms[i, j, g]``; all channels move together. A batch holding k
    consecutive groups gets the same mask applied to each group.

    Raises:
        ConfigurationError: batch size is not a multiple of the group size, or
            the plane is not divisible by the mask's tile grid
    """
    n_group = mask.n_group
    if batch.n % n_group != 0:
        raise ConfigurationError(
            f"batch of {batch.n} images cannot be split into groups of {n_group}"
        )
    grid_h, grid_w = mask.grid
    regions = tile_bounds(grid_h, grid_w, batch.h, batch.w)

    group_offsets = (np.arange(batch.n // n_group) * n_group)[:, None]
    out = np.empty_like(batch.data)
    for index, region in enumerate(regions):
        i, j = divmod(index, grid_w)
        sources = (group_offsets + mask.perms[i, j][None, :]).ravel()
        ys, xs = region.slices()
        out[:, :, ys, xs] = batch.data[sources, :, ys, xs]
    return FeatureBatch(out)


def unmix(batch: FeatureBatch, stack: MaskStack) -> FeatureBatch:
    """Undo every mask of the stack, last-to-first."""
    result = batch
    for _, mask in reversed(stack.entries):
        result = mix(result, invert(mask))
    return result


def mix_backward(grad_out: FeatureBatch, mask: MixingMask) -> FeatureBatch:
    """Gradient of mix w.r.t. its input: route tiles back with the inverse."""
    return mix(grad_out, invert(mask))


def unmix_backward(grad_out: FeatureBatch, stack: MaskStack) -> FeatureBatch:
    """Gradient of unmix w.r.t. its input: reapply the masks first-to-last."""
    result = grad_out
    for _, mask in stack.entries:
        result = mix(result, mask)
    return result


def compose(outer: MixingMask, inner: MixingMask) -> MixingMask:
    """Mask equivalent to applying ``inner`` and then ``outer``."""
    if outer.perms.shape != inner.perms.shape:
        raise ShapeError(
            f"cannot compose masks of shapes {outer.perms.shape} and {inner.perms.shape}"
        )
    return MixingMask(np.take_along_axis(inner.perms, outer.perms, axis=2))


def mask_to_text(mask: MixingMask) -> str:
    """One line per tile cell: ``i j : s0 s1 ... s{N_G-1}``."""
    grid_h, grid_w = mask.grid
    lines = []
    for i in range(grid_h):
        for j in range(grid_w):
            sources = " ".join(str(s) for s in mask.cell(i, j))
            lines.append(f"{i} {j} : {sources}")
    return "\n".join(lines) + "\n"


def mask_from_text(text: str) -> MixingMask:
    """Parse the output of :func:`mask_to_text`."""
    cells: dict[tuple[int, int], list[int]] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            coords, sources = line.split(":")
            i, j = (int(v) for v in coords.split())
            cells[(i, j)] = [int(v) for v in sources.split()]
        except ValueError as e:
            logger.error(f"Malformed mask line {line_no}: {raw!r}")
            raise ConfigurationError(f"malformed mask line {line_no}: {raw!r}") from e

    if not cells:
        raise ConfigurationError("mask text holds no cells")
    grid_h = max(i for i, _ in cells) + 1
    grid_w = max(j for _, j in cells) + 1
    if len(cells) != grid_h * grid_w:
        raise ConfigurationError(
            f"mask text has {len(cells)} cells, expected {grid_h}x{grid_w}"
        )
    n_group = len(next(iter(cells.values())))
    perms = np.zeros((grid_h, grid_w, n_group), dtype=np.int64)
    for (i, j), sources in cells.items():
        if len(sources) != n_group:
            raise ConfigurationError(f"cell ({i}, {j}) has {len(sources)} entries")
        perms[i, j] = sources
    return MixingMask(perms)
