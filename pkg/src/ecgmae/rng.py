"""Named random streams derived from a single root seed."""

import zlib

import numpy as np


def stream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for ``name`` under root ``seed``.

    The stream key is a CRC32 of the name, so streams are stable across
    processes (unlike ``hash``).
    """
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, zlib.crc32(name.encode("utf-8"))])
    return np.random.Generator(np.random.PCG64(ss))
