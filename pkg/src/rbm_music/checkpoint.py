"""Binary checkpoint format.

Layout, little-endian throughout::

    magic   4s   b"RBM1"
    version u16
    D, P    u32, u32
    b       D x f64
    c       P x f64
    W       D*P x f64, row-major
    crc     u32  CRC32 of every preceding byte
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from .rbm import RbmParams

MAGIC = b"RBM1"
VERSION = 1
_HEADER = struct.Struct("<4sHII")


class CheckpointError(ValueError):
    pass


def dumps(params: RbmParams) -> bytes:
    payload = (_HEADER.pack(MAGIC, VERSION, params.D, params.P)
               + params.b.astype("<f8").tobytes()
               + params.c.astype("<f8").tobytes()
               + np.ascontiguousarray(params.W).astype("<f8").tobytes())
    return payload + struct.pack("<I", zlib.crc32(payload))


def loads(data: bytes) -> RbmParams:
    if len(data) < _HEADER.size + 4:
        raise CheckpointError("checkpoint too short")
    magic, version, D, P = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise CheckpointError(f"bad checkpoint magic {magic!r}")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    expected = _HEADER.size + 8 * (D + P + D * P) + 4
    if len(data) != expected:
        raise CheckpointError(f"checkpoint is {len(data)} bytes, header implies {expected}")
    (crc,) = struct.unpack_from("<I", data, len(data) - 4)
    if zlib.crc32(data[:-4]) != crc:
        raise CheckpointError("checkpoint CRC mismatch")
    arr = np.frombuffer(data, dtype="<f8", offset=_HEADER.size, count=D + P + D * P)
    return RbmParams(arr[D + P:].reshape(D, P), arr[:D], arr[D:D + P])


def save(path, params: RbmParams):
    with open(path, "wb") as f:
        f.write(dumps(params))


def load(path) -> RbmParams:
    with open(path, "rb") as f:
        return loads(f.read())
