"""Versioned binary parameter files.

Layout (little endian)::

    b"TCNN"  u32 version  u32 meta_len  meta (utf-8 JSON)
    u32 n_arrays, then per array: u16 name_len, name, u8 ndim, ndim x u32 dims
    float32 blobs in table order
    u32 CRC32 of everything before it
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

MAGIC = b"TCNN"
VERSION = 1


class CheckpointError(ValueError):
    pass


def dumps_params(arrays: dict[str, np.ndarray], meta: dict | None = None) -> bytes:
    meta_raw = json.dumps(meta or {}, sort_keys=True).encode()
    out = [MAGIC, struct.pack("<II", VERSION, len(meta_raw)), meta_raw, struct.pack("<I", len(arrays))]
    names = sorted(arrays)
    for name in names:
        a = arrays[name]
        raw = name.encode()
        out.append(struct.pack("<H", len(raw)) + raw + struct.pack("<B", a.ndim) + struct.pack(f"<{a.ndim}I", *a.shape))
    for name in names:
        out.append(np.ascontiguousarray(arrays[name], dtype="<f4").tobytes())
    body = b"".join(out)
    return body + struct.pack("<I", zlib.crc32(body))


def loads_params(blob: bytes) -> tuple[dict[str, np.ndarray], dict]:
    if len(blob) < 16 or blob[:4] != MAGIC:
        raise CheckpointError("not a parameter file")
    body, (crc,) = blob[:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(body) != crc:
        raise CheckpointError("checksum mismatch: file is corrupt")
    version, meta_len = struct.unpack_from("<II", body, 4)
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    pos = 12
    meta = json.loads(body[pos: pos + meta_len])
    pos += meta_len
    (n,) = struct.unpack_from("<I", body, pos)
    pos += 4
    table = []
    for _ in range(n):
        (ln,) = struct.unpack_from("<H", body, pos)
        name = body[pos + 2: pos + 2 + ln].decode()
        pos += 2 + ln
        (nd,) = struct.unpack_from("<B", body, pos)
        shape = struct.unpack_from(f"<{nd}I", body, pos + 1)
        pos += 1 + 4 * nd
        table.append((name, shape))
    arrays = {}
    for name, shape in table:
        count = int(np.prod(shape)) if shape else 1
        arrays[name] = np.frombuffer(body, dtype="<f4", count=count, offset=pos).reshape(shape).astype(np.float32)
        pos += 4 * count
    if pos != len(body):
        raise CheckpointError("parameter table does not match payload size")
    return arrays, meta


def save_params(path: str | Path, arrays: dict[str, np.ndarray], meta: dict | None = None) -> None:
    Path(path).write_bytes(dumps_params(arrays, meta))


def load_params(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    return loads_params(Path(path).read_bytes())
