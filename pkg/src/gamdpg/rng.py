"""Named, independent random streams derived from one master seed.

Every stochastic operation in the package takes an explicit generator
obtained from ``stream(seed, *names)``.  Streams with different name
tuples are statistically independent, so e.g. growing the training
split never perturbs the validation or test splits.
"""

import hashlib

import numpy as np


def _words(part):
    """Map one key component to 32-bit entropy words."""
    if isinstance(part, (bool, np.bool_)):
        return [int(part)]
    if isinstance(part, (int, np.integer)):
        v = int(part)
        sign = 1 if v >= 0 else 0
        v = abs(v)
        out = [sign]
        while True:
            out.append(v & 0xFFFFFFFF)
            v >>= 32
            if v == 0:
                return out
    digest = hashlib.blake2b(repr(part).encode("utf-8"), digest_size=8).digest()
    return [int.from_bytes(digest[:4], "little"), int.from_bytes(digest[4:], "little")]


def seed_sequence(seed, *names):
    entropy = list(_words(seed))
    for name in names:
        entropy.extend(_words(name))
    return np.random.SeedSequence(entropy)


def stream(seed, *names):
    """Deterministic generator for the key ``(seed, *names)``."""
    return np.random.default_rng(seed_sequence(seed, *names))
