"""Binary checkpoint files.

Layout (all integers little-endian)::

    offset 0   8 bytes   magic b"OPPOCKPT"
    offset 8   uint32    format version (1)
    offset 12  uint32    reserved, 0
    offset 16  uint64    header length H in bytes
    offset 24  H bytes   UTF-8 JSON header
    offset 24+H          array blob

The header holds ``{"meta": {...}, "arrays": [{"name", "dtype", "shape",
"offset", "nbytes"}, ...]}``; offsets are relative to the start of the blob.
Arrays are raw little-endian ``<f8`` / ``<i8`` / ``<u8`` / ``|b1`` data in C
order.  Parameter vectors are stored with their segment table in the meta
block so a reader can name every float.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import CheckpointFormatError

MAGIC = b"OPPOCKPT"
VERSION = 1
_DTYPES = {"f8": "<f8", "i8": "<i8", "u8": "<u8", "b1": "|b1"}


def _code(a: np.ndarray) -> str:
    if a.dtype == np.float64:
        return "f8"
    if a.dtype == np.int64:
        return "i8"
    if a.dtype == np.uint64:
        return "u8"
    if a.dtype == np.bool_:
        return "b1"
    raise TypeError(f"unsupported checkpoint dtype {a.dtype}")


def dumps(arrays: dict[str, np.ndarray], meta: dict) -> bytes:
    table = []
    blobs = []
    offset = 0
    for name in sorted(arrays):
        a = np.ascontiguousarray(arrays[name])
        code = _code(a)
        raw = a.astype(_DTYPES[code], copy=False).tobytes()
        table.append({"name": name, "dtype": code, "shape": list(a.shape), "offset": offset, "nbytes": len(raw)})
        blobs.append(raw)
        offset += len(raw)
    header = json.dumps({"meta": meta, "arrays": table}, sort_keys=True).encode()
    return MAGIC + struct.pack("<IIQ", VERSION, 0, len(header)) + header + b"".join(blobs)


def loads(data: bytes) -> tuple[dict[str, np.ndarray], dict]:
    if len(data) < 24 or data[:8] != MAGIC:
        raise CheckpointFormatError("not a checkpoint file (bad magic)")
    version, _, hlen = struct.unpack("<IIQ", data[8:24])
    if version != VERSION:
        raise CheckpointFormatError(f"unsupported checkpoint version {version}")
    try:
        header = json.loads(data[24 : 24 + hlen].decode())
        blob = data[24 + hlen :]
        arrays = {}
        for entry in header["arrays"]:
            start, n = entry["offset"], entry["nbytes"]
            if start + n > len(blob):
                raise CheckpointFormatError(f"array {entry['name']} runs past end of file")
            a = np.frombuffer(blob[start : start + n], dtype=_DTYPES[entry["dtype"]])
            arrays[entry["name"]] = a.reshape(entry["shape"]).copy()
        return arrays, header["meta"]
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, ValueError) as e:
        if isinstance(e, CheckpointFormatError):
            raise
        raise CheckpointFormatError(f"corrupted checkpoint header: {e}") from None


def save(path, arrays: dict[str, np.ndarray], meta: dict) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(dumps(arrays, meta))
    tmp.replace(path)


def load(path) -> tuple[dict[str, np.ndarray], dict]:
    return loads(Path(path).read_bytes())
