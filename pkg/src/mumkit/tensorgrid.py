"""Dense (n, c, h, w) feature batches and exact tile partitioning."""

from dataclasses import dataclass

import numpy as np

from mumkit.errors import ConfigurationError, ShapeError


@dataclass
class FeatureBatch:
    """Batch of feature maps stored as a C-contiguous float64 array.

    Element (n, c, y, x) lives at flat offset ((n*C + c)*H + y)*W + x; the
    dataset and checkpoint formats depend on this row-major layout.
    """

    data: np.ndarray

    def __post_init__(self) -> None:
        data = np.ascontiguousarray(self.data, dtype=np.float64)
        if data.ndim != 4:
            raise ShapeError(
                f"FeatureBatch needs a 4-d (n, c, h, w) array, got ndim={data.ndim}"
            )
        if min(data.shape) < 1:
            raise ShapeError(f"FeatureBatch dims must be >= 1, got {data.shape}")
        self.data = data

    @classmethod
    def zeros(cls, n: int, c: int, h: int, w: int) -> "FeatureBatch":
        return cls(np.zeros((n, c, h, w), dtype=np.float64))

    @classmethod
    def from_flat(
        cls, flat: np.ndarray, shape: tuple[int, int, int, int]
    ) -> "FeatureBatch":
        """Build a batch from a flat element array and an (n, c, h, w) shape."""
        flat = np.asarray(flat, dtype=np.float64).ravel()
        expected = int(np.prod(shape))
        if flat.size != expected:
            raise ShapeError(
                f"flat data has {flat.size} elements, shape {shape} needs {expected}"
            )
        return cls(flat.reshape(shape))

    @property
    def shape(self) -> tuple[int, int, int, int]:
        n, c, h, w = self.data.shape
        return n, c, h, w

    @property
    def n(self) -> int:
        return self.shape[0]

    @property
    def c(self) -> int:
        return self.shape[1]

    @property
    def h(self) -> int:
        return self.shape[2]

    @property
    def w(self) -> int:
        return self.shape[3]

    def flat(self) -> np.ndarray:
        return self.data.ravel()

    def copy(self) -> "FeatureBatch":
        return FeatureBatch(self.data.copy())

    def select(self, indices: list[int] | np.ndarray) -> "FeatureBatch":
        """Return a new batch holding the given members, in the given order."""
        return FeatureBatch(self.data[np.asarray(indices, dtype=np.intp)])

    @staticmethod
    def concat(batches: list["FeatureBatch"]) -> "FeatureBatch":
        return FeatureBatch(np.concatenate([b.data for b in batches], axis=0))


@dataclass(frozen=True)
class TileRegion:
    """Half-open pixel rectangle [y0, y1) x [x0, x1)."""

    y0: int
    y1: int
    x0: int
    x1: int

    @property
    def height(self) -> int:
        return self.y1 - self.y0

    @property
    def width(self) -> int:
        return self.x1 - self.x0

    def slices(self) -> tuple[slice, slice]:
        return slice(self.y0, self.y1), slice(self.x0, self.x1)


def tile_bounds(grid_h: int, grid_w: int, h: int, w: int) -> list[TileRegion]:
    """Split an h x w plane into grid_h x grid_w equal tiles, row-major.

    Raises:
        ConfigurationError: if a tile count is < 1 or does not divide its dimension
    """
    if grid_h < 1 or grid_w < 1:
        raise ConfigurationError(
            f"tile counts must be >= 1, got grid_h={grid_h}, grid_w={grid_w}"
        )
    if h % grid_h != 0:
        raise ConfigurationError(
            f"height h={h} is not divisible by grid_h={grid_h}"
        )
    if w % grid_w != 0:
        raise ConfigurationError(f"width w={w} is not divisible by grid_w={grid_w}")

    th, tw = h // grid_h, w // grid_w
    return [
        TileRegion(i * th, (i + 1) * th, j * tw, (j + 1) * tw)
        for i in range(grid_h)
        for j in range(grid_w)
    ]


def copy_tile(
    src: FeatureBatch,
    src_index: int,
    dst: FeatureBatch,
    dst_index: int,
    region: TileRegion,
) -> None:
    """Copy every channel of one region from src[src_index] into dst[dst_index]."""
    if src.shape[1:] != dst.shape[1:]:
        raise ShapeError(
            f"copy_tile needs equal (c, h, w), got {src.shape[1:]} and {dst.shape[1:]}"
        )
    if not 0 <= src_index < src.n:
        raise ShapeError(f"src_index {src_index} out of range for n={src.n}")
    if not 0 <= dst_index < dst.n:
        raise ShapeError(f"dst_index {dst_index} out of range for n={dst.n}")
    if not (0 <= region.y0 < region.y1 <= src.h and 0 <= region.x0 < region.x1 <= src.w):
        raise ShapeError(f"region {region} outside plane {src.h}x{src.w}")

    ys, xs = region.slices()
    dst.data[dst_index, :, ys, xs] = src.data[src_index, :, ys, xs]


def mean_pool(batch: FeatureBatch, factor: int = 2) -> FeatureBatch:
    """Average non-overlapping factor x factor blocks."""
    n, c, h, w = batch.shape
    if h % factor or w % factor:
        raise ConfigurationError(
            f"plane {h}x{w} is not divisible by pooling factor {factor}"
        )
    pooled = batch.data.reshape(n, c, h // factor, factor, w // factor, factor)
    return FeatureBatch(pooled.mean(axis=(3, 5)))
