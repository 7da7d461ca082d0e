"""Binary checkpoint files.

Layout (little endian)::

    magic      8 bytes  b"CLZCKPT1"
    header     u32 length + UTF-8 JSON (config hash, geometry, rng state, ...)
    count      u32 number of records
    record     u16 name length + UTF-8 name
               u8 ndim + ndim * u32 dims
               float32 payload of prod(dims) values
"""

import json
import struct
from pathlib import Path
from typing import Any

import numpy as np

from clozecheck.exceptions import CheckpointCorruptError


MAGIC = b"CLZCKPT1"


def save_checkpoint(path: Path, tensors: dict[str, np.ndarray], header: dict[str, Any]) -> None:
    """Write ``tensors`` (stored as float32) and a JSON ``header`` to ``path``."""
    path.parent.mkdir(parents=True, exist_ok=True)
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    parts = [MAGIC, struct.pack("<I", len(head)), head, struct.pack("<I", len(tensors))]
    for name, array in tensors.items():
        encoded = name.encode("utf-8")
        data = np.ascontiguousarray(array, dtype="<f4")
        parts.append(struct.pack("<H", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<B", data.ndim))
        parts.append(struct.pack(f"<{data.ndim}I", *data.shape))
        parts.append(data.tobytes())
    path.write_bytes(b"".join(parts))


class _Reader:
    def __init__(self, buf: bytes, path: Path) -> None:
        self.buf = buf
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            msg = f"{self.path}: truncated at byte {self.pos} (wanted {n} more)"
            raise CheckpointCorruptError(msg)
        chunk = self.buf[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str) -> tuple[Any, ...]:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_checkpoint(path: Path) -> tuple[dict[str, Any], dict[str, np.ndarray]]:
    """Read a checkpoint written by ``save_checkpoint``.

    Raises:
        CheckpointCorruptError: If the file is missing, truncated, has a bad
            magic, a bad header or trailing bytes.
    """
    try:
        buf = path.read_bytes()
    except OSError as e:
        msg = f"Cannot read checkpoint {path}: {e}"
        raise CheckpointCorruptError(msg) from e

    reader = _Reader(buf, path)
    if reader.take(len(MAGIC)) != MAGIC:
        msg = f"{path}: not a clozecheck checkpoint"
        raise CheckpointCorruptError(msg)

    (head_len,) = reader.unpack("<I")
    try:
        header = json.loads(reader.take(head_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        msg = f"{path}: unreadable header: {e}"
        raise CheckpointCorruptError(msg) from e

    (count,) = reader.unpack("<I")
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = reader.unpack("<H")
        name = reader.take(name_len).decode("utf-8", errors="replace")
        (ndim,) = reader.unpack("<B")
        shape = reader.unpack(f"<{ndim}I")
        size = int(np.prod(shape)) if ndim else 1
        data = np.frombuffer(reader.take(4 * size), dtype="<f4").reshape(shape)
        tensors[name] = data.astype(np.float32)

    if reader.pos != len(buf):
        msg = f"{path}: {len(buf) - reader.pos} unexpected trailing bytes"
        raise CheckpointCorruptError(msg)
    return header, tensors
