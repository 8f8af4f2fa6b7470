"""Seeding and file helpers shared by the experiment commands."""

from __future__ import annotations

import os
import tempfile
import zlib
from pathlib import Path

import numpy as np


def child_seed(seed: int, name: str) -> np.random.SeedSequence:
    """Seed sequence for the sub-experiment ``name`` under a root ``seed``.

    Names map to spawn keys through CRC32, so a sub-experiment's stream does not
    depend on which other sub-experiments run or in what order.
    """
    return np.random.SeedSequence(seed, spawn_key=(zlib.crc32(name.encode("utf-8")),))


def rng_for(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng(child_seed(seed, name))


def int_seed(seed: int, name: str) -> int:
    """A 63-bit integer drawn from the named stream, for libraries taking int seeds."""
    return int(child_seed(seed, name).generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))
