"""Binary sequences and their packed batch representation.

A sequence is an ordered payload of bits; the end-of-sequence
terminator is implicit and never stored.  Batches pack each payload
LSB-first into a single uint64 word, which keeps substring tests and
dataset handling cheap; this caps payload length at 63 bits (the
default generation cap is 60).
"""

from dataclasses import dataclass, field

import numpy as np

# symbol ids used by policies
BIT0, BIT1, EOS = 0, 1, 2
VOCAB_SIZE = 3
MAX_PACKED_LEN = 63


@dataclass(frozen=True)
class Sequence:
    """Immutable bit payload; ``truncated`` marks generation-cap cutoffs."""

    bits: tuple
    truncated: bool = False

    def __post_init__(self):
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("sequence bits must be 0 or 1")

    def __len__(self):
        return len(self.bits)

    def __str__(self):
        return "".join(str(b) for b in self.bits)

    @classmethod
    def from_text(cls, text, truncated=False):
        return cls(tuple(int(c) for c in text.strip()), truncated)


def pack_bits(bits):
    code = 0
    for i, b in enumerate(bits):
        code |= int(b) << i
    return code


def unpack_bits(code, length):
    return tuple((int(code) >> i) & 1 for i in range(length))


@dataclass
class SeqBatch:
    """Column-packed batch: one uint64 payload word per sequence."""

    codes: np.ndarray
    lengths: np.ndarray
    truncated: np.ndarray = None

    def __post_init__(self):
        self.codes = np.asarray(self.codes, dtype=np.uint64)
        self.lengths = np.asarray(self.lengths, dtype=np.int64)
        if self.truncated is None:
            self.truncated = np.zeros(self.codes.shape[0], dtype=bool)
        else:
            self.truncated = np.asarray(self.truncated, dtype=bool)
        if self.lengths.size and int(self.lengths.max()) > MAX_PACKED_LEN:
            raise ValueError("packed batches support payloads up to 63 bits")

    def __len__(self):
        return int(self.codes.shape[0])

    def __getitem__(self, i):
        if isinstance(i, (int, np.integer)):
            return Sequence(
                unpack_bits(self.codes[i], int(self.lengths[i])),
                bool(self.truncated[i]),
            )
        return SeqBatch(self.codes[i], self.lengths[i], self.truncated[i])

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @classmethod
    def from_sequences(cls, seqs):
        seqs = list(seqs)
        codes = np.array([pack_bits(s.bits) for s in seqs], dtype=np.uint64)
        lengths = np.array([len(s) for s in seqs], dtype=np.int64)
        trunc = np.array([s.truncated for s in seqs], dtype=bool)
        return cls(codes, lengths, trunc)

    @classmethod
    def single(cls, seq):
        return cls.from_sequences([seq])

    def token_counts(self):
        """Tokens per sequence: payload bits plus terminator when present."""
        return self.lengths + np.where(self.truncated, 0, 1)

    def bits_matrix(self, width=None):
        """(B, width) 0/1 matrix, zero padded past each payload."""
        if width is None:
            width = int(self.lengths.max()) if len(self) else 0
        shifts = np.arange(width, dtype=np.uint64)
        bits = (self.codes[:, None] >> shifts[None, :]) & np.uint64(1)
        bits = bits.astype(np.int8)
        bits[np.arange(width)[None, :] >= self.lengths[:, None]] = 0
        return bits

    def symbols_matrix(self):
        """Target symbols (B, T): payload bits, then EOS unless truncated.

        Steps past each sequence's token count are padded with EOS and
        must be masked with ``step_mask``.
        """
        tokens = self.token_counts()
        width = int(tokens.max()) if len(self) else 0
        sym = self.bits_matrix(width).astype(np.int8)
        cols = np.arange(width)[None, :]
        sym[cols >= self.lengths[:, None]] = EOS
        return sym

    def step_mask(self):
        tokens = self.token_counts()
        width = int(tokens.max()) if len(self) else 0
        return np.arange(width)[None, :] < tokens[:, None]

    def concat(self, other):
        return SeqBatch(
            np.concatenate([self.codes, other.codes]),
            np.concatenate([self.lengths, other.lengths]),
            np.concatenate([self.truncated, other.truncated]),
        )


def contains_pattern(codes, lengths, pattern_bits):
    """Vectorized substring containment test on packed payloads."""
    codes = np.asarray(codes, dtype=np.uint64)
    lengths = np.asarray(lengths, dtype=np.int64)
    m = len(pattern_bits)
    if m == 0:
        raise ValueError("empty pattern")
    pat = np.uint64(pack_bits(pattern_bits))
    window = np.uint64((1 << m) - 1)
    out = np.zeros(codes.shape, dtype=bool)
    max_len = int(lengths.max()) if lengths.size else 0
    for k in range(max_len - m + 1):
        hit = ((codes >> np.uint64(k)) & window) == pat
        out |= hit & (lengths >= k + m)
    return out
