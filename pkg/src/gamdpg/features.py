"""Feature vectors φ(x) under a feature mask.

The registry holds one motif feature, four distractor features with
little predictive value for motif containment, and two optional length
components M = |x|/max_len and v = M².  Ordering is frozen so λ vectors
are comparable across runs; the distractor definitions are a repo
convention (substring, boundary-bit, and parity tests).
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .sequences import SeqBatch, contains_pattern

# registry order; names appear verbatim in λ checkpoints
BINARY_FEATURE_NAMES = (
    "motif",
    "sub_11110",
    "sub_00100",
    "first_bit_1",
    "last_bit_1",
    "sub_0101",
    "parity_even",
)
LENGTH_FEATURE_NAMES = ("M", "v")
_DISTRACTOR_PATTERNS = {
    "sub_11110": [1, 1, 1, 1, 0],
    "sub_00100": [0, 0, 1, 0, 0],
    "sub_0101": [0, 1, 0, 1],
}


@dataclass(frozen=True)
class FeatureMask:
    binary_mask: str  # 7 chars over {0,1}, registry order
    length_on: bool = False

    def __post_init__(self):
        if len(self.binary_mask) != 7 or any(c not in "01" for c in self.binary_mask):
            raise ConfigurationError(f"bad binary mask {self.binary_mask!r}")

    @property
    def active_names(self):
        names = [
            name
            for name, bit in zip(BINARY_FEATURE_NAMES, self.binary_mask)
            if bit == "1"
        ]
        if self.length_on:
            names.extend(LENGTH_FEATURE_NAMES)
        return tuple(names)

    @property
    def num_active(self):
        return self.binary_mask.count("1") + 2 * self.length_on

    def __str__(self):
        return ("Mv" if self.length_on else "") + self.binary_mask


def parse_mask(text):
    """Accepts exactly `1001111`-style 7-bit strings, optionally
    prefixed `Mv` to enable the two length components."""
    length_on = text.startswith("Mv")
    bits = text[2:] if length_on else text
    if len(bits) != 7:
        raise ConfigurationError(
            f"mask {text!r} must have 7 mask bits, got {len(bits)}"
        )
    for c in bits:
        if c not in "01":
            raise ConfigurationError(f"mask {text!r} has invalid character {c!r}")
    return FeatureMask(bits, length_on)


def phi_batch(batch, mask, motif, max_len):
    """(N, num_active) float64 feature matrix in registry order."""
    codes, lengths = batch.codes, batch.lengths
    n = len(batch)
    columns = {}
    for name, mask_bit in zip(BINARY_FEATURE_NAMES, mask.binary_mask):
        if mask_bit != "1":
            continue
        if name == "motif":
            pattern = [int(c) for c in motif]
            col = contains_pattern(codes, lengths, pattern)
        elif name in _DISTRACTOR_PATTERNS:
            col = contains_pattern(codes, lengths, _DISTRACTOR_PATTERNS[name])
        elif name == "first_bit_1":
            col = (lengths > 0) & ((codes & np.uint64(1)) == 1)
        elif name == "last_bit_1":
            shift = np.maximum(lengths - 1, 0).astype(np.uint64)
            col = (lengths > 0) & (((codes >> shift) & np.uint64(1)) == 1)
        else:  # parity_even
            col = np.bitwise_count(codes) % 2 == 0
        columns[name] = col.astype(np.float64)
    out = np.empty((n, mask.num_active))
    for j, name in enumerate(mask.active_names):
        if name == "M":
            out[:, j] = lengths / max_len
        elif name == "v":
            out[:, j] = (lengths / max_len) ** 2
        else:
            out[:, j] = columns[name]
    if mask.length_on and np.any(lengths > max_len):
        warnings.warn("sequence longer than max_len: M, v exceed 1", stacklevel=2)
    return out


def phi(x, mask, motif, max_len):
    """Feature vector of a single sequence."""
    return phi_batch(SeqBatch.single(x), mask, motif, max_len)[0]


def data_moment(dataset, mask, motif, max_len):
    """Mean feature vector over a dataset (Monte Carlo data moment)."""
    if len(dataset) == 0:
        raise ConfigurationError("data moment of an empty dataset")
    return phi_batch(dataset, mask, motif, max_len).mean(axis=0)
