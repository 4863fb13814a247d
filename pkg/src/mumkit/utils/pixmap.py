"""Binary portable pixmaps (P5 grayscale, P6 colour) for visualisations."""

from pathlib import Path

import numpy as np

from mumkit.errors import CorruptDataError, ShapeError

SCALING_NOTE = "min-max scaled per montage"


def to_uint8(values: np.ndarray) -> np.ndarray:
    """Min-max scale to 0..255 over the whole array; a constant array maps to 0."""
    values = np.asarray(values, dtype=np.float64)
    lo, hi = float(values.min()), float(values.max())
    if hi <= lo:
        return np.zeros(values.shape, dtype=np.uint8)
    return np.floor((values - lo) / (hi - lo) * 255.0 + 0.5).astype(np.uint8)


def montage(planes: np.ndarray, columns: int | None = None, pad: int = 1) -> np.ndarray:
    """Tile (n, h, w) planes into one grid image, separated by ``pad`` background pixels."""
    planes = np.asarray(planes, dtype=np.float64)
    if planes.ndim != 3:
        raise ShapeError(f"montage expects (n, h, w), got {planes.shape}")
    n, h, w = planes.shape
    columns = columns or n
    rows = -(-n // columns)
    out = np.full((rows * h + (rows - 1) * pad, columns * w + (columns - 1) * pad), planes.min())
    for k in range(n):
        r, c = divmod(k, columns)
        out[r * (h + pad):r * (h + pad) + h, c * (w + pad):c * (w + pad) + w] = planes[k]
    return out


def encode_pnm(pixels: np.ndarray, comment: str = SCALING_NOTE) -> bytes:
    """P5 for (h, w) uint8, P6 for (h, w, 3) uint8."""
    pixels = np.asarray(pixels)
    if pixels.dtype != np.uint8:
        raise ShapeError(f"pixmap needs uint8 pixels, got {pixels.dtype}")
    if pixels.ndim == 2:
        magic = b"P5"
    elif pixels.ndim == 3 and pixels.shape[2] == 3:
        magic = b"P6"
    else:
        raise ShapeError(f"pixmap needs (h, w) or (h, w, 3), got {pixels.shape}")
    h, w = pixels.shape[:2]
    header = magic + f"\n# {comment}\n{w} {h}\n255\n".encode("ascii")
    return header + np.ascontiguousarray(pixels).tobytes()


def write_pnm(path: str | Path, pixels: np.ndarray, comment: str = SCALING_NOTE) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_pnm(pixels, comment))


def write_scaled_pgm(path: str | Path, values: np.ndarray) -> None:
    """Grayscale picture of a float array, min-max scaled as one montage."""
    write_pnm(path, to_uint8(values))


def read_pnm(path: str | Path) -> np.ndarray:
    """Parse a P5/P6 file written by :func:`write_pnm` (comments allowed in the header)."""
    payload = Path(path).read_bytes()
    tokens: list[bytes] = []
    offset = 0
    while len(tokens) < 4:
        while offset < len(payload) and payload[offset:offset + 1].isspace():
            offset += 1
        if payload[offset:offset + 1] == b"#":
            offset = payload.index(b"\n", offset) + 1
            continue
        start = offset
        while offset < len(payload) and not payload[offset:offset + 1].isspace():
            offset += 1
        if start == offset:
            raise CorruptDataError(f"{path}: truncated pixmap header")
        tokens.append(payload[start:offset])
    offset += 1  # single whitespace byte after maxval
    magic, w, h, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if magic not in (b"P5", b"P6") or maxval != 255:
        raise CorruptDataError(f"{path}: unsupported pixmap {magic!r} maxval {maxval}")
    channels = 1 if magic == b"P5" else 3
    body = payload[offset:]
    if len(body) != w * h * channels:
        raise CorruptDataError(f"{path}: expected {w * h * channels} pixel bytes, got {len(body)}")
    pixels = np.frombuffer(body, dtype=np.uint8)
    return pixels.reshape(h, w) if channels == 1 else pixels.reshape(h, w, 3)
