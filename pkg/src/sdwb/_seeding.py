"""Deterministic derivation of independent random streams."""

from __future__ import annotations

import zlib

import numpy as np


def _key(part: int | str | float) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    if isinstance(part, float):
        return zlib.crc32(repr(part).encode("utf-8"))
    if part < 0:
        raise ValueError(f"stream keys must be nonnegative, got {part}")
    return int(part)


def seed_sequence(seed: int | None, *keys: int | str | float) -> np.random.SeedSequence:
    """Child seed sequence of ``seed`` addressed by ``keys``.

    The same ``(seed, keys)`` always yields the same stream, and distinct key
    tuples yield statistically independent streams. Strings and floats are
    hashed with CRC32 so tags such as ``"boot"`` or a bandwidth value can be
    used directly.
    """
    if seed is not None and seed < 0:
        raise ValueError(f"seed must be nonnegative, got {seed}")
    return np.random.SeedSequence(entropy=seed, spawn_key=tuple(_key(k) for k in keys))


def derive_rng(seed: int | None, *keys: int | str | float) -> np.random.Generator:
    return np.random.default_rng(seed_sequence(seed, *keys))
