"""Named float64 array checkpoints (``MMK1`` format).

Layout: magic ``MMK1``, then per entry: u32 name length, UTF-8 name bytes,
u64 element count, that many little-endian float64 values. Shapes are not
stored; the loading side reshapes against its own arrays.
"""

import struct
from pathlib import Path

import numpy as np
from loguru import logger

from mumkit.errors import CorruptDataError

MAGIC = b"MMK1"


def encode_checkpoint(tensors: dict[str, np.ndarray]) -> bytes:
    parts = [MAGIC]
    for name, array in tensors.items():
        encoded = name.encode("utf-8")
        values = np.ascontiguousarray(array, dtype="<f8").ravel()
        parts.append(struct.pack("<I", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<Q", values.size))
        parts.append(values.tobytes())
    return b"".join(parts)


def decode_checkpoint(payload: bytes, source: str = "<bytes>") -> dict[str, np.ndarray]:
    if payload[:4] != MAGIC:
        raise CorruptDataError(f"{source}: bad checkpoint magic {payload[:4]!r}")
    tensors: dict[str, np.ndarray] = {}
    offset = 4

    def take(size: int) -> bytes:
        nonlocal offset
        if offset + size > len(payload):
            raise CorruptDataError(
                f"{source}: truncated checkpoint at byte {offset} "
                f"(needed {size}, have {len(payload) - offset})"
            )
        chunk = payload[offset:offset + size]
        offset += size
        return chunk

    while offset < len(payload):
        (name_len,) = struct.unpack("<I", take(4))
        raw_name = take(name_len)
        try:
            name = raw_name.decode("utf-8")
        except UnicodeDecodeError as e:
            raise CorruptDataError(
                f"{source}: array name at byte {offset - name_len} is not UTF-8"
            ) from e
        (count,) = struct.unpack("<Q", take(8))
        tensors[name] = np.frombuffer(take(8 * count), dtype="<f8").astype(np.float64)
    return tensors


def save_checkpoint(path: str | Path, tensors: dict[str, np.ndarray]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_checkpoint(tensors))
    logger.debug(f"Saved checkpoint with {len(tensors)} arrays to {path}")


def load_checkpoint(path: str | Path) -> dict[str, np.ndarray]:
    """Return flat float64 arrays keyed by name."""
    path = Path(path)
    logger.debug(f"Loading checkpoint from {path}")
    return decode_checkpoint(path.read_bytes(), source=str(path))
