"""Deterministic RNG stream derivation.

All randomness in the package flows from a single master seed. Independent
streams (per sample, per epoch, per subsystem) are derived from integer key
tuples so that results never depend on call order or worker count.
"""

import numpy as np

# Stream identifiers; keep values stable, they are part of the reproducibility
# contract for generated datasets and training runs.
STREAM_POSE = 1
STREAM_CAMERA = 2
STREAM_SKIN = 3
STREAM_INIT = 4
STREAM_DROPOUT = 5
STREAM_SHUFFLE = 6
STREAM_AUGMENT = 7
STREAM_VALIDATION = 8


def sub_rng(seed: int, *keys: int) -> np.random.Generator:
    """Return a Generator for the stream addressed by (seed, *keys)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, keys)]))
