"""Rendering of figures to grayscale images and of keypoints to Gaussian heatmaps."""

import numpy as np

from mumkit.data.skeleton import SkeletonSpec


def _segment_distance(
    xx: np.ndarray, yy: np.ndarray, a: np.ndarray, b: np.ndarray
) -> np.ndarray:
    """Distance of every pixel centre to the segment a-b."""
    d = b - a
    length_sq = float(d @ d)
    if length_sq == 0.0:
        return np.hypot(xx - a[0], yy - a[1])
    t = np.clip(((xx - a[0]) * d[0] + (yy - a[1]) * d[1]) / length_sq, 0.0, 1.0)
    return np.hypot(xx - (a[0] + t * d[0]), yy - (a[1] + t * d[1]))


def _limb_coverage(
    xx: np.ndarray, yy: np.ndarray, a: np.ndarray, b: np.ndarray, thickness: float
) -> np.ndarray:
    """Stroke coverage, falling off linearly over one pixel at the edge."""
    dist = _segment_distance(xx, yy, a, b)
    return np.clip(thickness / 2.0 + 0.5 - dist, 0.0, 1.0)


def render_image(
    keypoints: np.ndarray,
    spec: SkeletonSpec,
    image_size: tuple[int, int] = (64, 48),
    visibility: np.ndarray | None = None,
) -> np.ndarray:
    """Draw anti-aliased limbs plus a blob per visible joint; values in [0, 1].

    Limb coverage falls off linearly over one pixel at the stroke edge. Hidden
    joints keep their limbs but lose their blob.
    """
    h, w = image_size
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    image = np.zeros((h, w))
    for child, par in spec.edges():
        coverage = _limb_coverage(xx, yy, keypoints[par], keypoints[child], spec.thickness)
        image = np.maximum(image, spec.intensities[child] * coverage)

    if visibility is None:
        visibility = np.ones(spec.n_keypoints, dtype=bool)
    blob_sigma = spec.thickness
    for k in np.flatnonzero(visibility):
        d2 = (xx - keypoints[k, 0]) ** 2 + (yy - keypoints[k, 1]) ** 2
        image = np.maximum(image, np.exp(-d2 / (2.0 * blob_sigma**2)))
    return np.clip(image, 0.0, 1.0)


def render_clutter(
    rng: np.random.Generator,
    image_size: tuple[int, int],
    n_limbs: int,
    length_range: tuple[float, float],
    intensity_range: tuple[float, float],
    thickness: float = 2.0,
) -> np.ndarray:
    """Loose limbs at random places, each with a blob at both ends.

    The blobs look like joints but carry no label.
    """
    h, w = image_size
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    image = np.zeros((h, w))
    for _ in range(n_limbs):
        a = np.array([rng.uniform(0.0, w - 1), rng.uniform(0.0, h - 1)])
        angle = rng.uniform(0.0, 2.0 * np.pi)
        b = a + rng.uniform(*length_range) * np.array([np.cos(angle), np.sin(angle)])
        intensity = rng.uniform(*intensity_range)
        image = np.maximum(image, intensity * _limb_coverage(xx, yy, a, b, thickness))
        for end in (a, b):
            d2 = (xx - end[0]) ** 2 + (yy - end[1]) ** 2
            image = np.maximum(image, intensity * np.exp(-d2 / (2.0 * thickness**2)))
    return image


def add_pixel_noise(image: np.ndarray, rng: np.random.Generator, std: float) -> np.ndarray:
    """Gaussian pixel noise, clipped back to [0, 1]. ``std=0`` returns a copy."""
    if std == 0.0:
        return image.copy()
    return np.clip(image + rng.normal(0.0, std, image.shape), 0.0, 1.0)


def heatmap_centres(
    keypoints: np.ndarray, image_size: tuple[int, int], out_size: tuple[int, int]
) -> np.ndarray:
    """Keypoints scaled to heatmap pixels, rounded half-up and clamped, as (K, 2) ints."""
    h, w = image_size
    oh, ow = out_size
    cx = np.floor(keypoints[:, 0] * (ow / w) + 0.5)
    cy = np.floor(keypoints[:, 1] * (oh / h) + 0.5)
    cx = np.clip(cx, 0, ow - 1)
    cy = np.clip(cy, 0, oh - 1)
    return np.stack([cx, cy], axis=1).astype(np.int64)


def render_heatmaps(
    keypoints: np.ndarray,
    visibility: np.ndarray,
    sigma: float = 2.0,
    out_size: tuple[int, int] = (16, 12),
    image_size: tuple[int, int] = (64, 48),
) -> np.ndarray:
    """(K, h', w') maps exp(-d^2 / 2 sigma^2) around each visible keypoint, zeros otherwise."""
    oh, ow = out_size
    yy, xx = np.mgrid[0:oh, 0:ow].astype(np.float64)
    centres = heatmap_centres(keypoints, image_size, out_size)
    heatmaps = np.zeros((len(keypoints), oh, ow))
    for k in np.flatnonzero(visibility):
        cx, cy = centres[k]
        heatmaps[k] = np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2.0 * sigma**2))
    return heatmaps


def decode_heatmaps(heatmaps: np.ndarray, image_size: tuple[int, int]) -> np.ndarray:
    """Argmax of every channel, mapped back to image pixels.

    Args:
        heatmaps: (n, K, h', w') or (K, h', w') array

    Returns:
        (..., K, 2) float64 (x, y) coordinates; ties resolve to the first
        maximum in row-major order, so an all-zero channel decodes to (0, 0)
    """
    h, w = image_size
    oh, ow = heatmaps.shape[-2:]
    flat = heatmaps.reshape(*heatmaps.shape[:-2], oh * ow)
    idx = flat.argmax(axis=-1)
    ys, xs = np.divmod(idx, ow)
    return np.stack([xs * (w / ow), ys * (h / oh)], axis=-1).astype(np.float64)
