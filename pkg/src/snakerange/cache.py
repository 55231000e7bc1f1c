"""Binary point-cloud cache.

Layout (little endian): magic b"SNKC", u32 version, u8 dimension, u64 point
count, count * dimension f64 coordinates (row major), u32 provenance length,
UTF-8 provenance.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .snake import PointCloud

MAGIC = b"SNKC"
VERSION = 1
_HEAD = struct.Struct("<4sIBQ")
_LEN = struct.Struct("<I")


class CacheError(ValueError):
    pass


def save_cloud(cloud: PointCloud, path) -> None:
    d = cloud.dimension
    if not 1 <= d <= 255:
        raise CacheError("dimension must fit in one byte")
    prov = cloud.provenance.encode("utf-8")
    data = (_HEAD.pack(MAGIC, VERSION, d, len(cloud))
            + np.ascontiguousarray(cloud.points, dtype="<f8").tobytes()
            + _LEN.pack(len(prov)) + prov)
    Path(path).write_bytes(data)


def load_cloud(path, d: int | None = None) -> PointCloud:
    """Read a cache file; ``d`` (if given) must match the stored dimension."""
    buf = Path(path).read_bytes()
    if len(buf) < _HEAD.size:
        raise CacheError("truncated header")
    magic, version, dim, count = _HEAD.unpack_from(buf)
    if magic != MAGIC:
        raise CacheError("not a point-cloud cache (bad magic)")
    if version != VERSION:
        raise CacheError(f"unsupported cache version {version} (expected {VERSION})")
    if d is not None and dim != d:
        raise CacheError(f"dimension mismatch: file has d={dim}, expected d={d}")
    body = count * dim * 8
    end = _HEAD.size + body
    if len(buf) < end + _LEN.size:
        raise CacheError(f"truncated data: need {end + _LEN.size} bytes, have {len(buf)}")
    (plen,) = _LEN.unpack_from(buf, end)
    if len(buf) != end + _LEN.size + plen:
        raise CacheError("length mismatch in provenance block")
    pts = np.frombuffer(buf, dtype="<f8", count=count * dim, offset=_HEAD.size).reshape(count, dim)
    prov = buf[end + _LEN.size:].decode("utf-8")
    return PointCloud(pts.astype(np.float64), prov)
