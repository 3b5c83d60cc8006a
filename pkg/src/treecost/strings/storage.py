"""Binary dictionary files and rule text files.

Dictionary layout (little endian)::

    b"TCSD"  u32 version  u32 dim  u32 count
    count x (u32 key_bytes, utf-8 key, u8 provenance bits: 1 prefix, 2 suffix)
    count x dim float32 vectors
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .patterns import dumps_rules, loads_rules, Rule
from .selection import SubstringDictionary

MAGIC = b"TCSD"
VERSION = 1
_BITS = {"prefix": 1, "suffix": 2}


class DictionaryFormatError(ValueError):
    pass


def dumps_dictionary(d: SubstringDictionary) -> bytes:
    if not d.trained:
        if d.entries:
            raise ValueError("dictionary vectors have not been trained")
    keys = d.keys()
    parts = [MAGIC, struct.pack("<III", VERSION, d.dim, len(keys))]
    for k in keys:
        raw = k.encode("utf-8")
        bits = sum(_BITS[t] for t in d.provenance.get(k, ()))
        parts.append(struct.pack("<I", len(raw)) + raw + struct.pack("<B", bits))
    if keys:
        parts.append(np.stack([d.entries[k] for k in keys]).astype("<f4").tobytes())
    return b"".join(parts)


def loads_dictionary(blob: bytes) -> SubstringDictionary:
    if blob[:4] != MAGIC:
        raise DictionaryFormatError("not a substring dictionary file")
    version, dim, count = struct.unpack_from("<III", blob, 4)
    if version != VERSION:
        raise DictionaryFormatError(f"unsupported dictionary version {version}")
    pos = 16
    keys, prov = [], {}
    try:
        for _ in range(count):
            (n,) = struct.unpack_from("<I", blob, pos)
            key = blob[pos + 4: pos + 4 + n].decode("utf-8")
            (bits,) = struct.unpack_from("<B", blob, pos + 4 + n)
            pos += 5 + n
            keys.append(key)
            prov[key] = {t for t, b in _BITS.items() if bits & b}
        vecs = np.frombuffer(blob, dtype="<f4", count=count * dim, offset=pos).reshape(count, dim)
    except (struct.error, ValueError, UnicodeDecodeError) as e:
        raise DictionaryFormatError(f"truncated or corrupt dictionary: {e}") from None
    if pos + vecs.nbytes != len(blob):
        raise DictionaryFormatError("trailing bytes after dictionary vectors")
    entries = {k: vecs[i].astype(np.float32) for i, k in enumerate(keys)}
    return SubstringDictionary(entries=entries, provenance=prov, dim=dim)


def save_dictionary(d: SubstringDictionary, path: str | Path) -> None:
    Path(path).write_bytes(dumps_dictionary(d))


def load_dictionary(path: str | Path) -> SubstringDictionary:
    return loads_dictionary(Path(path).read_bytes())


def save_rules(rules: list[Rule], path: str | Path) -> None:
    Path(path).write_text(dumps_rules(rules), encoding="utf-8")


def load_rules(path: str | Path) -> list[Rule]:
    return loads_rules(Path(path).read_text(encoding="utf-8"))
