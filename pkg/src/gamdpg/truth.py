"""Exact "white noise filtered by motif" process.

The true distribution is uniform over length-n binary strings that
contain a fixed motif substring.  A substring-containment automaton
plus a suffix-count dynamic program give exact counting, entropy,
log-probabilities, and exact ancestral sampling without rejection.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InfeasibleProcessError
from .rng import stream
from .sequences import SeqBatch, Sequence

LN2 = math.log(2.0)


def _validate_motif(motif):
    if not motif:
        raise ConfigurationError("motif must be a nonempty bit string")
    if any(c not in "01" for c in motif):
        raise ConfigurationError(f"motif must contain only 0/1, got {motif!r}")


@dataclass(frozen=True)
class MotifAutomaton:
    """Substring-containment DFA with an absorbing accept state."""

    motif: str
    transition: np.ndarray  # (m+1, 2) next-state table

    @property
    def num_states(self):
        return len(self.motif) + 1

    @property
    def accept_state(self):
        return len(self.motif)

    def run(self, bits, state=0):
        for b in bits:
            state = int(self.transition[state, b])
        return state

    def accepts(self, bits):
        return self.run(bits) == self.accept_state


def build_motif_automaton(motif):
    """Failure-function construction: state s = length of the longest
    prefix of the motif that is a suffix of the input read so far."""
    _validate_motif(motif)
    m = len(motif)
    pattern = [int(c) for c in motif]
    trans = np.zeros((m + 1, 2), dtype=np.int64)
    # fail ~ automaton state of the longest proper suffix of prefix_s
    fail = 0
    for b in (0, 1):
        trans[0, b] = 1 if pattern[0] == b else 0
    for s in range(1, m):
        for b in (0, 1):
            trans[s, b] = s + 1 if pattern[s] == b else trans[fail, b]
        fail = int(trans[fail, pattern[s]])
    trans[m, 0] = m
    trans[m, 1] = m
    return MotifAutomaton(motif, trans)


@dataclass
class CompletionTable:
    """counts[p][s] = number of suffixes of length n-p that lead from
    automaton state s into the accept state.  Arbitrary-precision ints;
    floats appear only in probability ratios."""

    automaton: MotifAutomaton
    n: int
    counts: list  # (n+1) rows of (m+1) python ints

    @property
    def total(self):
        return self.counts[0][0]


def completion_table(motif, n):
    auto = build_motif_automaton(motif)
    if len(motif) > n:
        raise ConfigurationError(
            f"motif of length {len(motif)} cannot occur in strings of length {n}"
        )
    m = auto.accept_state
    trans = auto.transition
    counts = [[0] * (m + 1) for _ in range(n + 1)]
    counts[n][m] = 1
    for p in range(n - 1, -1, -1):
        row, nxt = counts[p], counts[p + 1]
        for s in range(m + 1):
            row[s] = nxt[trans[s, 0]] + nxt[trans[s, 1]]
    return CompletionTable(auto, n, counts)


def count_containing(motif, n):
    """Exact number of length-n binary strings containing the motif."""
    return completion_table(motif, n).total


def true_entropy(motif, n):
    """Entropy of the uniform filtered process, in nats per sequence."""
    count = count_containing(motif, n)
    if count == 0:
        raise InfeasibleProcessError(f"no length-{n} strings contain {motif!r}")
    return math.log(count)


def true_entropy_per_token(motif, n):
    """Entropy divided by the n+1 generated tokens (payload + terminator)."""
    return true_entropy(motif, n) / (n + 1)


def true_logprob(x, motif, n):
    """log p_true(x): -log(count) on valid strings, else -inf."""
    auto = build_motif_automaton(motif)
    if len(x) != n or not auto.accepts(x.bits) or x.truncated:
        return -math.inf
    return -true_entropy(motif, n)


def true_log_potential(x, motif, n):
    """Unnormalized form: white-noise log-mass plus the hard filter,
    i.e. -n*ln2 on valid strings and -inf elsewhere."""
    auto = build_motif_automaton(motif)
    if len(x) != n or not auto.accepts(x.bits) or x.truncated:
        return -math.inf
    return -n * LN2


class TruthModel:
    """Scorer/sampler bundle for one (motif, n) process."""

    def __init__(self, motif, n):
        self.motif = motif
        self.n = n
        self.table = completion_table(motif, n)
        if self.table.total == 0:
            raise InfeasibleProcessError(f"no length-{n} strings contain {motif!r}")
        self.entropy = math.log(self.table.total)
        auto = self.table.automaton
        m = auto.accept_state
        # bit-emission probabilities per (position, state); exact ratios
        # of big ints, correctly rounded to float64
        prob1 = np.zeros((n, m + 1))
        valid = np.zeros((n, m + 1), dtype=bool)
        for p in range(n):
            row, nxt = self.table.counts[p], self.table.counts[p + 1]
            for s in range(m + 1):
                if row[s] > 0:
                    valid[p, s] = True
                    prob1[p, s] = nxt[auto.transition[s, 1]] / row[s]
        self._prob1 = prob1
        self._valid = valid
        self._trans = auto.transition

    def logprob_batch(self, batch):
        """log p_true per sequence; -inf off support."""
        from .sequences import contains_pattern

        pattern = [int(c) for c in self.motif]
        ok = (
            (batch.lengths == self.n)
            & ~batch.truncated
            & contains_pattern(batch.codes, batch.lengths, pattern)
        )
        out = np.full(len(batch), -math.inf)
        out[ok] = -self.entropy
        return out

    def log_potential_batch(self, batch):
        """Unnormalized wn(x)*F(x) in log space."""
        out = self.logprob_batch(batch)
        out[np.isfinite(out)] = -self.n * LN2
        return out

    def sample_batch(self, size, rng):
        """Exact i.i.d. uniform draws over valid strings (vectorized DP walk)."""
        states = np.zeros(size, dtype=np.int64)
        codes = np.zeros(size, dtype=np.uint64)
        for p in range(self.n):
            p1 = self._prob1[p, states]
            bits = (rng.random(size) < p1).astype(np.uint64)
            codes |= bits << np.uint64(p)
            states = self._trans[states, bits.astype(np.int64)]
        return SeqBatch(codes, np.full(size, self.n, dtype=np.int64))


def sample_true(table, rng):
    """One exact uniform draw over valid strings, walking the count DP."""
    if table.total == 0:
        raise InfeasibleProcessError("process has no valid outcomes")
    auto = table.automaton
    bits = []
    state = 0
    for p in range(table.n):
        row = table.counts[p][state]
        c1 = table.counts[p + 1][auto.transition[state, 1]]
        b = 1 if rng.random() < c1 / row else 0
        bits.append(b)
        state = int(auto.transition[state, b])
    return Sequence(tuple(bits))


def make_splits(motif, n, d_size, v_size, t_size, seed):
    """(D, V, T) as i.i.d. draws from the true process.

    Each split uses its own named RNG stream derived from the master
    seed, so resizing one split never changes the others.
    """
    model = TruthModel(motif, n)
    out = []
    for name, size in (("D", d_size), ("V", v_size), ("T", t_size)):
        out.append(model.sample_batch(size, stream(seed, "split", name, motif, n)))
    return tuple(out)


def dump_split(path, batch, motif, n, seed, split):
    """One ASCII bit string per line under a metadata header."""
    with open(path, "w") as fh:
        fh.write(f"# motif={motif} n={n} seed={seed} split={split}\n")
        for seq in batch:
            fh.write(str(seq) + "\n")


def load_split(path):
    meta = {}
    seqs = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    k, _, v = tok.partition("=")
                    meta[k] = v
                continue
            seqs.append(Sequence.from_text(line))
    return SeqBatch.from_sequences(seqs), meta
