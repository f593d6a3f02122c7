"""Tests for the exact filtered-process engine, oracled by brute-force
enumeration of all 2^n strings at small n."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from gamdpg.errors import ConfigurationError, InfeasibleProcessError
from gamdpg.rng import stream
from gamdpg.sequences import Sequence
from gamdpg.truth import (
    TruthModel,
    build_motif_automaton,
    completion_table,
    count_containing,
    dump_split,
    load_split,
    make_splits,
    sample_true,
    true_entropy,
    true_entropy_per_token,
    true_log_potential,
    true_logprob,
)


def enumerate_containing(motif, n):
    """Oracle: all length-n bit strings with motif as substring."""
    return [
        format(i, f"0{n}b") if n else ""
        for i in range(2**n)
        if motif in format(i, f"0{n}b")
    ]


def bits_of(text):
    return tuple(int(c) for c in text)


# ---------------------------------------------------------------- automaton


def test_automaton_accepts_containment():
    auto = build_motif_automaton("11")
    assert auto.accepts(bits_of("011"))
    assert not auto.accepts(bits_of("010"))


def test_automaton_state_is_prefix_length():
    auto = build_motif_automaton("101")
    assert auto.num_states == 4
    assert auto.run(bits_of("10")) == 2


def test_automaton_accept_absorbing():
    auto = build_motif_automaton("101")
    state = auto.run(bits_of("101000"))
    assert state == auto.accept_state


def test_automaton_rejects_bad_motifs():
    with pytest.raises(ConfigurationError):
        build_motif_automaton("")
    with pytest.raises(ConfigurationError):
        build_motif_automaton("10a")


@given(
    motif=st.text(alphabet="01", min_size=1, max_size=4),
    text=st.text(alphabet="01", max_size=16),
)
def test_automaton_matches_str_containment(motif, text):
    auto = build_motif_automaton(motif)
    assert auto.accepts(bits_of(text)) == (motif in text)


# ----------------------------------------------------------------- counting


def test_count_small_case():
    assert count_containing("11", 3) == 3  # 011, 110, 111


def test_count_full_length_motif():
    assert count_containing("10011", 5) == 1


def test_count_motif_longer_than_n():
    with pytest.raises(ConfigurationError):
        count_containing("101", 2)


@given(
    motif=st.text(alphabet="01", min_size=1, max_size=4),
    extra=st.integers(min_value=0, max_value=8),
)
@settings(max_examples=60, deadline=None)
def test_count_matches_enumeration(motif, extra):
    n = min(len(motif) + extra, 12)
    assert count_containing(motif, n) == len(enumerate_containing(motif, n))


def test_count_self_consistency_n30():
    # the DP count equals 2^30 minus the avoiding count computed by an
    # independent forward DP over non-accept states
    motif = "1000101000101"
    n = 30
    auto = build_motif_automaton(motif)
    m = auto.accept_state
    avoid = [0] * m
    avoid[0] = 1
    for _ in range(n):
        nxt = [0] * m
        for s in range(m):
            for b in (0, 1):
                t = int(auto.transition[s, b])
                if t < m:
                    nxt[t] += avoid[s]
        avoid = nxt
    assert count_containing(motif, n) == 2**n - sum(avoid)


# ------------------------------------------------------------ entropy, logp


def test_entropy_values():
    assert true_entropy("11", 3) == pytest.approx(math.log(3))
    assert true_entropy("10011", 5) == 0.0
    assert true_entropy("1", 1) == 0.0
    assert true_entropy_per_token("11", 3) == pytest.approx(math.log(3) / 4)


def test_entropy_monotone_in_n():
    for motif in ("11", "101", "1000101000101"):
        lo = len(motif)
        values = [true_entropy(motif, n) for n in range(lo, lo + 10)]
        assert all(b >= a for a, b in zip(values, values[1:]))


def test_logprob_on_and_off_support():
    assert true_logprob(Sequence(bits_of("011")), "11", 3) == pytest.approx(
        math.log(1 / 3)
    )
    assert true_logprob(Sequence(bits_of("010")), "11", 3) == -math.inf
    assert true_logprob(Sequence(bits_of("0110")), "11", 3) == -math.inf
    truncated = Sequence(bits_of("011"), truncated=True)
    assert true_logprob(truncated, "11", 3) == -math.inf


@given(
    motif=st.text(alphabet="01", min_size=1, max_size=3),
    extra=st.integers(min_value=0, max_value=7),
)
@settings(max_examples=30, deadline=None)
def test_logprob_normalized(motif, extra):
    n = len(motif) + extra
    total = sum(
        math.exp(true_logprob(Sequence(bits_of(t)), motif, n))
        for t in enumerate_containing(motif, n)
    )
    assert total == pytest.approx(1.0, abs=1e-12)


def test_log_potential_is_white_noise_mass():
    assert true_log_potential(Sequence(bits_of("011")), "11", 3) == pytest.approx(
        -3 * math.log(2)
    )
    assert true_log_potential(Sequence(bits_of("010")), "11", 3) == -math.inf


# ----------------------------------------------------------------- sampling


def test_sample_true_valid_by_construction():
    table = completion_table("101", 8)
    rng = stream(0, "test", "sample")
    for _ in range(200):
        seq = sample_true(table, rng)
        assert len(seq) == 8
        assert "101" in str(seq)


def test_sample_true_uniform_n3():
    table = completion_table("11", 3)
    rng = stream(1, "test", "uniform3")
    draws = [str(sample_true(table, rng)) for _ in range(30000)]
    sigma = math.sqrt((1 / 3) * (2 / 3) / 30000)
    for s in ("011", "110", "111"):
        freq = draws.count(s) / 30000
        assert abs(freq - 1 / 3) < 3 * sigma


def test_sample_true_first_bit_conditional():
    table = completion_table("11", 3)
    rng = stream(2, "test", "firstbit")
    n_draws = 30000
    ones = sum(sample_true(table, rng).bits[0] for _ in range(n_draws))
    sigma = math.sqrt((2 / 3) * (1 / 3) / n_draws)
    assert abs(ones / n_draws - 2 / 3) < 3 * sigma


def test_sample_batch_chi_square_n8():
    motif, n = "101", 8
    valid = enumerate_containing(motif, n)
    model = TruthModel(motif, n)
    size = 60 * len(valid)  # >= 50 expected per cell
    batch = model.sample_batch(size, stream(3, "test", "chi2"))
    observed = dict.fromkeys(valid, 0)
    for seq in batch:
        observed[str(seq)] += 1
    result = stats.chisquare(list(observed.values()))
    assert result.pvalue > 0.01


def test_sample_batch_deterministic():
    model = TruthModel("101", 8)
    a = model.sample_batch(50, stream(4, "test", "pair"))
    b = model.sample_batch(50, stream(4, "test", "pair"))
    assert np.array_equal(a.codes, b.codes)


def test_truth_model_scoring():
    model = TruthModel("11", 3)
    batch = make_splits("11", 3, 4, 1, 1, seed=9)[0]
    lp = model.logprob_batch(batch)
    assert np.allclose(lp, math.log(1 / 3))
    pot = model.log_potential_batch(batch)
    assert np.allclose(pot, -3 * math.log(2))


def test_infeasible_sampling_raises():
    table = completion_table("11", 2)
    table.counts[0][0] = 0
    with pytest.raises(InfeasibleProcessError):
        sample_true(table, stream(0, "test", "dead"))


# ------------------------------------------------------------------- splits


def test_splits_sizes_and_validity():
    d, v, t = make_splits("1000101000101", 30, 500, 100, 200, seed=1234)
    assert (len(d), len(v), len(t)) == (500, 100, 200)
    for batch in (d, v, t):
        assert np.all(batch.lengths == 30)
        for seq in batch:
            assert "1000101000101" in str(seq)


def test_splits_deterministic():
    a = make_splits("101", 8, 50, 20, 30, seed=77)
    b = make_splits("101", 8, 50, 20, 30, seed=77)
    for x, y in zip(a, b):
        assert np.array_equal(x.codes, y.codes)


def test_splits_independent_of_other_sizes():
    # growing |D| must not perturb V or T
    _, v1, t1 = make_splits("101", 8, 50, 20, 30, seed=5)
    _, v2, t2 = make_splits("101", 8, 5000, 20, 30, seed=5)
    assert np.array_equal(v1.codes, v2.codes)
    assert np.array_equal(t1.codes, t2.codes)


def test_splits_differ_across_seeds_and_names():
    d1, v1, _ = make_splits("101", 8, 50, 50, 50, seed=5)
    d2, _, _ = make_splits("101", 8, 50, 50, 50, seed=6)
    assert not np.array_equal(d1.codes, d2.codes)
    assert not np.array_equal(d1.codes, v1.codes)


# ----------------------------------------------------------------------- io


def test_dump_load_roundtrip(tmp_path):
    d, _, _ = make_splits("101", 8, 25, 1, 1, seed=3)
    path = tmp_path / "d.txt"
    dump_split(path, d, "101", 8, 3, "D")
    assert path.read_text().splitlines()[0] == "# motif=101 n=8 seed=3 split=D"
    loaded, meta = load_split(path)
    assert meta == {"motif": "101", "n": "8", "seed": "3", "split": "D"}
    assert np.array_equal(loaded.codes, d.codes)
    assert np.array_equal(loaded.lengths, d.lengths)
