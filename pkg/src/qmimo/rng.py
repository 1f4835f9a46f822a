"""Counter-based random streams.

Every Monte Carlo work unit gets its own Philox4x64 stream: the 64-bit key is
the unit's seed and the second 64-bit word of the 256-bit counter carries the
trial index. Streams for different trials never overlap, so results do not
depend on the order or the process in which trials are evaluated.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def trial_generator(seed: int, trial: int) -> np.random.Generator:
    """Generator for trial ``trial`` of the work unit keyed by ``seed``."""
    return np.random.Generator(
        np.random.Philox(key=seed & _MASK64, counter=[0, trial & _MASK64, 0, 0])
    )


def stream_generator(seed: int) -> np.random.Generator:
    return trial_generator(seed, 0)


def derive_seed(master: int, *parts) -> int:
    """Stable 64-bit seed from a master seed and a tuple of identifying values.

    Uses BLAKE2b over the canonical ``repr`` of the parts, so the result is
    identical across processes, platforms and Python hash randomization.
    """
    text = "|".join([str(int(master))] + [repr(p) for p in parts])
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")
