"""Deterministic sub-streams derived from one root seed.

A stream is fixed by (root seed, purpose label, index), so work split across
any number of workers draws the same numbers as a serial run.
"""

from __future__ import annotations

import os
import zlib

import numpy as np

SEED_ENV_VAR = "SUNWEHRL_SEED"
DEFAULT_SEED = 0


def _label_key(label: str) -> int:
    return zlib.crc32(label.encode("utf-8"))


def stream(seed: int, label: str, index: int = 0) -> np.random.Generator:
    if seed < 0 or index < 0:
        raise ValueError("seed and index must be non-negative")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(_label_key(label), int(index)))
    return np.random.Generator(np.random.PCG64(ss))


def resolve_seed(flag_value: int | None) -> int:
    """Flag wins; otherwise the environment variable; otherwise the package default."""
    if flag_value is not None:
        return int(flag_value)
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None and env.strip():
        return int(env)
    return DEFAULT_SEED
