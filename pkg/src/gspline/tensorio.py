"""On-disk tensor format.

Layout: magic ``GST1`` (4 bytes) | version u32 LE | rank u32 LE |
rank x u32 LE dims | dtype tag u8 (0 = float32 LE, 1 = float64 LE) |
row-major payload. Round trips are bit-identical at the declared dtype.
"""

from __future__ import annotations

import io
import struct

import numpy as np

from .errors import BadMagic, TruncatedPayload, UnsupportedVersion

MAGIC = b"GST1"
VERSION = 1
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_TAGS = {np.dtype("float32"): 0, np.dtype("float64"): 1}


def write_tensor(fh, tensor):
    """Serialize a float32/float64 ndarray to an open binary stream."""
    tensor = np.ascontiguousarray(tensor)
    if tensor.dtype not in _TAGS:
        tensor = tensor.astype(np.float64)
    tag = _TAGS[tensor.dtype]
    fh.write(MAGIC)
    fh.write(struct.pack("<II", VERSION, tensor.ndim))
    fh.write(struct.pack(f"<{tensor.ndim}I", *tensor.shape))
    fh.write(struct.pack("<B", tag))
    fh.write(tensor.astype(_DTYPES[tag], copy=False).tobytes())


def read_tensor(fh):
    """Inverse of :func:`write_tensor`; raises on malformed headers."""
    magic = fh.read(4)
    if magic != MAGIC:
        raise BadMagic(f"expected {MAGIC!r}, got {magic!r}")
    header = fh.read(8)
    if len(header) < 8:
        raise TruncatedPayload("header truncated")
    version, rank = struct.unpack("<II", header)
    if version != VERSION:
        raise UnsupportedVersion(f"version {version}")
    dims_raw = fh.read(4 * rank)
    if len(dims_raw) < 4 * rank:
        raise TruncatedPayload("dims truncated")
    dims = struct.unpack(f"<{rank}I", dims_raw) if rank else ()
    tag_raw = fh.read(1)
    if not tag_raw:
        raise TruncatedPayload("missing dtype tag")
    tag = tag_raw[0]
    if tag not in _DTYPES:
        raise UnsupportedVersion(f"dtype tag {tag}")
    dtype = _DTYPES[tag]
    count = int(np.prod(dims, dtype=np.int64)) if dims else 1
    payload = fh.read(count * dtype.itemsize)
    if len(payload) < count * dtype.itemsize:
        raise TruncatedPayload(
            f"payload has {len(payload)} bytes, expected {count * dtype.itemsize}"
        )
    return np.frombuffer(payload, dtype=dtype).reshape(dims).copy()


def save_tensor(path, tensor):
    with open(path, "wb") as fh:
        write_tensor(fh, tensor)


def load_tensor(path):
    with open(path, "rb") as fh:
        return read_tensor(fh)


def tensor_bytes(tensor):
    buf = io.BytesIO()
    write_tensor(buf, tensor)
    return buf.getvalue()
