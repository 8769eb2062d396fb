"""Binary model container: magic, version, JSON metadata, named tensors.

Layout (all integers little-endian):

    magic   4 bytes  b"TGMF"
    version u32      currently 1
    mlen    u64      metadata length
    meta    mlen bytes of canonical UTF-8 JSON
    count   u32      number of tensors
    per tensor:
        nlen  u16, name UTF-8
        dtype u8   (0=float32, 1=float64, 2=int64)
        ndim  u8, dims u32 each
        raw little-endian values

Tensors are written sorted by name, metadata JSON has sorted keys, so equal
models serialize to identical bytes. Values round-trip bit-exactly.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"TGMF"
VERSION = 1

_DTYPE_TAGS = {"float32": 0, "float64": 1, "int64": 2}
_TAG_DTYPES = {v: np.dtype(k) for k, v in _DTYPE_TAGS.items()}


class ModelFormatError(ValueError):
    pass


def save_model(path: str | Path, meta: dict, tensors: dict[str, np.ndarray]) -> None:
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<I", VERSION)
    mbytes = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    blob += struct.pack("<Q", len(mbytes))
    blob += mbytes
    blob += struct.pack("<I", len(tensors))
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name])
        if arr.dtype.name not in _DTYPE_TAGS:
            raise ModelFormatError(f"unsupported dtype {arr.dtype} for tensor {name!r}")
        nbytes = name.encode("utf-8")
        blob += struct.pack("<H", len(nbytes))
        blob += nbytes
        blob += struct.pack("<BB", _DTYPE_TAGS[arr.dtype.name], arr.ndim)
        blob += struct.pack(f"<{arr.ndim}I", *arr.shape)
        blob += arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes()
    Path(path).write_bytes(bytes(blob))


def load_model(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    raw = Path(path).read_bytes()
    view = memoryview(raw)
    ofs = 0

    def take(n: int) -> memoryview:
        nonlocal ofs
        if ofs + n > len(raw):
            raise ModelFormatError(f"{path}: truncated model file")
        part = view[ofs : ofs + n]
        ofs += n
        return part

    if bytes(take(4)) != MAGIC:
        raise ModelFormatError(f"{path}: not a model container")
    (version,) = struct.unpack("<I", take(4))
    if version != VERSION:
        raise ModelFormatError(f"{path}: unsupported format version {version}")
    (mlen,) = struct.unpack("<Q", take(8))
    meta = json.loads(bytes(take(mlen)).decode("utf-8"))
    (count,) = struct.unpack("<I", take(4))
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (nlen,) = struct.unpack("<H", take(2))
        name = bytes(take(nlen)).decode("utf-8")
        tag, ndim = struct.unpack("<BB", take(2))
        if tag not in _TAG_DTYPES:
            raise ModelFormatError(f"{path}: unknown dtype tag {tag}")
        shape = struct.unpack(f"<{ndim}I", take(4 * ndim))
        dt = _TAG_DTYPES[tag].newbyteorder("<")
        n = int(np.prod(shape, dtype=np.int64)) if ndim else 1
        arr = np.frombuffer(take(n * dt.itemsize), dtype=dt).reshape(shape)
        tensors[name] = arr.astype(_TAG_DTYPES[tag]).copy()
    if ofs != len(raw):
        raise ModelFormatError(f"{path}: trailing bytes after tensor directory")
    return meta, tensors
