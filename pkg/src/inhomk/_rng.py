"""Counter-based random streams keyed by (master seed, indices...)."""

import numpy as np


def stream(seed, *key):
    """
    Philox generator whose key is derived from ``(seed, *key)``.

    Distinct keys give independent streams; a stream never depends on how many
    other streams were drawn before it, so results do not depend on scheduling.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *(int(k) for k in key)])
    return np.random.Generator(np.random.Philox(key=ss.generate_state(2, np.uint64)))


def as_generator(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return stream(0 if seed is None else seed)
