"""Seeded, splittable random streams for reproducible parallel runs."""

import numpy as np


def substream(seed, *indices):
    """Return a Generator for the substream (seed, *indices).

    Streams are derived from a counter-based Philox generator keyed by the
    seed and the index path only, so results do not depend on worker count
    or scheduling order.
    """
    entropy = (int(seed),) + tuple(int(i) for i in indices)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
