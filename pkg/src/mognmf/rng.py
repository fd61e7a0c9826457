"""Deterministic random streams.

Every random draw in the package flows from one 64-bit seed through a
named sub-stream ("init", "noise", "field/2", ...), so varying one
pipeline component never reshuffles the others.  Philox is used as the
bit generator: it is counter-based, 64-bit, and produces identical
streams on every platform.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def substream(seed: int, *names) -> np.random.Generator:
    """Return the generator for the sub-stream identified by `names`.

    The same (seed, names) pair always yields the same stream; distinct
    names yield statistically independent streams.
    """
    label = "/".join(str(n) for n in names)
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    words = [int.from_bytes(digest[i : i + 8], "little") for i in (0, 8, 16, 24)]
    entropy = [int(seed) & _MASK64, *words]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
