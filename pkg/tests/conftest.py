"""Shared enumeration oracles for estimator tests.

At a small generation cap every policy outcome is enumerable:
terminated sequences of payload length < cap plus truncated ones at
exactly cap.  Exact expectations over that space oracle the Monte
Carlo estimators.
"""

import itertools

import numpy as np

from gamdpg.policy import logprob_batch
from gamdpg.sequences import SeqBatch, Sequence


def all_outcomes(cap):
    seqs = []
    for length in range(cap):
        for bits in itertools.product((0, 1), repeat=length):
            seqs.append(Sequence(bits))
    for bits in itertools.product((0, 1), repeat=cap):
        seqs.append(Sequence(bits, truncated=True))
    return seqs


def outcome_batch(cap):
    return SeqBatch.from_sequences(all_outcomes(cap))


def outcome_index(outcomes):
    return {(str(s), s.truncated): i for i, s in enumerate(outcomes)}


def exact_policy_probs(params, batch):
    probs = np.exp(logprob_batch(params, batch))
    assert abs(probs.sum() - 1.0) < 1e-9
    return probs


def exact_potential_dist(gp, batch):
    """(normalized probabilities, exact logZ) of an unnormalized model
    over the enumerated outcome space."""
    logp = gp.log_potential_batch(batch)
    m = logp.max()
    w = np.exp(logp - m)
    z = w.sum()
    return w / z, float(m + np.log(z))


def count_samples(samples, index):
    counts = np.zeros(len(index))
    for s in samples:
        counts[index[(str(s), s.truncated)]] += 1
    return counts


def chi_square_binned(counts, probs, n_draws, min_expected=50.0):
    """Chi-square p-value with small-expectation cells pooled."""
    from scipy import stats

    expected = probs * n_draws
    order = np.argsort(-expected)
    obs_bins, exp_bins = [], []
    tail_obs = tail_exp = 0.0
    for i in order:
        if expected[i] >= min_expected:
            obs_bins.append(counts[i])
            exp_bins.append(expected[i])
        else:
            tail_obs += counts[i]
            tail_exp += expected[i]
    if tail_exp > 0:
        obs_bins.append(tail_obs)
        exp_bins.append(tail_exp)
    exp_bins = np.array(exp_bins)
    exp_bins *= np.sum(obs_bins) / exp_bins.sum()
    return stats.chisquare(obs_bins, exp_bins).pvalue
