"""Raw tensor files shared by noise patches and the ``edl`` subcommands.

Layout: ``b"NGDC"``, then little-endian u16 version (1), height, width,
channels, then ``height * width * channels`` little-endian float32 values,
row-major and channel-interleaved.
"""

from __future__ import annotations

import os
import struct

import numpy as np

MAGIC = b"NGDC"
VERSION = 1
_HEADER = struct.Struct("<4sHHHH")


class TensorFormatError(ValueError):
    pass


def encode_tensor(arr: np.ndarray) -> bytes:
    a = np.asarray(arr)
    if a.ndim == 2:
        a = a[:, :, None]
    if a.ndim != 3:
        raise TensorFormatError("tensor must be (H, W, C)")
    h, w, c = a.shape
    if max(h, w, c) > 0xFFFF:
        raise TensorFormatError(f"dimension too large for the u16 header: {a.shape}")
    body = np.ascontiguousarray(a, dtype="<f4").tobytes()
    return _HEADER.pack(MAGIC, VERSION, h, w, c) + body


def decode_tensor(data: bytes) -> np.ndarray:
    if len(data) < _HEADER.size:
        raise TensorFormatError("truncated header")
    magic, version, h, w, c = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise TensorFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise TensorFormatError(f"unsupported version {version}")
    n = h * w * c
    if len(data) != _HEADER.size + 4 * n:
        raise TensorFormatError(f"payload size {len(data) - _HEADER.size} does not match {h}x{w}x{c}")
    arr = np.frombuffer(data, dtype="<f4", count=n, offset=_HEADER.size)
    return arr.astype(np.float32).reshape(h, w, c)


def write_tensor(arr: np.ndarray, path) -> None:
    with open(os.fspath(path), "wb") as fh:
        fh.write(encode_tensor(arr))


def read_tensor(path) -> np.ndarray:
    with open(os.fspath(path), "rb") as fh:
        return decode_tensor(fh.read())
