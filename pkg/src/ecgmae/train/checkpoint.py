"""Binary checkpoint container (``ECGC``).

Layout: magic, u32 version, u32-length-prefixed JSON block (config and
metadata), u32 array count, then per array a u16-prefixed name, u8-prefixed
numpy dtype string, u8 rank, u64 dims and the little-endian payload,
finally a CRC32 of everything before it.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from ..errors import CorruptFile, ShapeMismatch, VersionMismatch

MAGIC = b"ECGC"
VERSION = 1


@dataclass
class Checkpoint:
    config: dict
    arrays: dict[str, np.ndarray] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)
    version: int = VERSION

    def group(self, prefix: str) -> dict[str, np.ndarray]:
        p = prefix + "."
        return {k[len(p):]: v for k, v in self.arrays.items() if k.startswith(p)}

    def load_into(self, module, prefix: str):
        state = self.group(prefix)
        if not state:
            raise ShapeMismatch(f"checkpoint has no {prefix!r} parameters")
        module.load_state_dict(state)
        return module


def _le(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    if arr.dtype.byteorder == ">":
        arr = arr.astype(arr.dtype.newbyteorder("<"))
    return arr


def to_bytes(ckpt: Checkpoint) -> bytes:
    block = json.dumps({"config": ckpt.config, "meta": ckpt.meta}, sort_keys=True,
                       separators=(",", ":")).encode("utf-8")
    parts = [MAGIC, struct.pack("<II", ckpt.version, len(block)), block,
             struct.pack("<I", len(ckpt.arrays))]
    for name, arr in ckpt.arrays.items():
        arr = _le(np.asarray(arr))
        nb = name.encode("utf-8")
        tag = arr.dtype.str.encode("ascii")
        parts.append(struct.pack("<H", len(nb)) + nb)
        parts.append(struct.pack("<B", len(tag)) + tag)
        parts.append(struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(arr.tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def from_bytes(buf: bytes) -> Checkpoint:
    if len(buf) < 16 or buf[:4] != MAGIC:
        raise CorruptFile("not an ECGC checkpoint")
    body, (crc,) = buf[:-4], struct.unpack("<I", buf[-4:])
    if zlib.crc32(body) != crc:
        raise CorruptFile("checkpoint CRC mismatch (truncated or modified)")
    version, nblock = struct.unpack_from("<II", body, 4)
    if version != VERSION:
        raise VersionMismatch(f"checkpoint version {version}, expected {VERSION}")
    off = 12
    try:
        head = json.loads(body[off:off + nblock].decode("utf-8"))
        off += nblock
        (count,) = struct.unpack_from("<I", body, off)
        off += 4
        arrays = {}
        for _ in range(count):
            (n,) = struct.unpack_from("<H", body, off)
            name = body[off + 2:off + 2 + n].decode("utf-8")
            off += 2 + n
            (t,) = struct.unpack_from("<B", body, off)
            dtype = np.dtype(body[off + 1:off + 1 + t].decode("ascii"))
            off += 1 + t
            (ndim,) = struct.unpack_from("<B", body, off)
            shape = struct.unpack_from(f"<{ndim}Q", body, off + 1)
            off += 1 + 8 * ndim
            size = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
            if off + size > len(body):
                raise CorruptFile(f"array {name!r} truncated")
            arrays[name] = np.frombuffer(body, dtype=dtype, count=size // dtype.itemsize,
                                         offset=off).reshape(shape).copy()
            off += size
    except (struct.error, ValueError, UnicodeDecodeError) as exc:
        if isinstance(exc, CorruptFile):
            raise
        raise CorruptFile(f"malformed checkpoint: {exc}") from None
    if off != len(body):
        raise CorruptFile("trailing bytes after array table")
    return Checkpoint(head["config"], arrays, head["meta"], version)


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    with open(path, "wb") as fh:
        fh.write(to_bytes(ckpt))


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        return from_bytes(fh.read())
