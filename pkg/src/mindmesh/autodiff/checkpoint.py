"""The ``MMCK`` checkpoint format.

Layout (little endian)::

    b"MMCK" | u32 version | u32 count
    count x ( u32 name_len | utf-8 name | u32 ndim | ndim x u32 dim | f32 payload )

Entries keep insertion order, so writing the same state twice gives
identical bytes.
"""

from __future__ import annotations

import io
import os
import struct

import numpy as np

from ..errors import DataError

MAGIC = b"MMCK"
VERSION = 1


def dumps(state: dict[str, np.ndarray]) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<II", VERSION, len(state)))
    for name, arr in state.items():
        arr = np.asarray(arr)
        raw = name.encode("utf-8")
        buf.write(struct.pack("<I", len(raw)))
        buf.write(raw)
        buf.write(struct.pack("<I", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        buf.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return buf.getvalue()


def loads(blob: bytes) -> dict[str, np.ndarray]:
    if blob[:4] != MAGIC:
        raise DataError("not an MMCK checkpoint (bad magic)")
    version, count = struct.unpack_from("<II", blob, 4)
    if version != VERSION:
        raise DataError(f"unsupported MMCK version {version}")
    pos = 12
    state = {}
    try:
        for _ in range(count):
            (n,) = struct.unpack_from("<I", blob, pos)
            pos += 4
            name = blob[pos:pos + n].decode("utf-8")
            pos += n
            (ndim,) = struct.unpack_from("<I", blob, pos)
            pos += 4
            shape = struct.unpack_from(f"<{ndim}I", blob, pos)
            pos += 4 * ndim
            size = int(np.prod(shape)) if ndim else 1
            arr = np.frombuffer(blob, dtype="<f4", count=size, offset=pos).reshape(shape)
            pos += 4 * size
            state[name] = arr.astype(np.float32)
    except (struct.error, ValueError) as exc:
        raise DataError(f"truncated MMCK checkpoint: {exc}") from exc
    if pos != len(blob):
        raise DataError(f"trailing bytes in MMCK checkpoint ({len(blob) - pos})")
    return state


def save(path: str | os.PathLike, state: dict[str, np.ndarray]):
    with open(path, "wb") as fh:
        fh.write(dumps(state))


def load(path: str | os.PathLike) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        return loads(fh.read())
