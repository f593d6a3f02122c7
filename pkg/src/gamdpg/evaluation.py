"""Metrics over trained models: test cross-entropy, motif frequency,
cross-entropy of the unnormalized model via an estimated log partition
function, and per-|D| ratio statistics across paired runs.

Canonical unit is nats per token, counting the payload bits plus the
terminator; per-sequence numbers are available everywhere through
``per="seq"``.  All reported ratios are unit-free.
"""

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .policy import logprob_batch, sample_batch
from .rng import stream
from .sequences import contains_pattern

_CHUNK = 4096


def _seq_logprobs(model, batch):
    """Per-sequence log-probabilities under a policy (PolicyParams), an
    object exposing logprob_batch, or a bare callable over batches."""
    if hasattr(model, "flat") and hasattr(model, "hyper"):
        fn = lambda b: logprob_batch(model, b)
    elif hasattr(model, "logprob_batch"):
        fn = model.logprob_batch
    elif callable(model):
        fn = model
    else:
        raise ConfigurationError(
            f"cannot score sequences with {type(model).__name__}"
        )
    out = np.empty(len(batch))
    for a in range(0, len(batch), _CHUNK):
        out[a : a + _CHUNK] = fn(batch[a : a + _CHUNK])
    return out


def _denominator(batch, per):
    if per == "token":
        return float(batch.token_counts().sum())
    if per == "seq":
        return float(len(batch))
    raise ConfigurationError(f"per must be 'token' or 'seq', got {per!r}")


def cross_entropy(t, model, per="token"):
    """Empirical cross-entropy −(1/N) Σ log model(x) over the batch t,
    with N the total token count (payload + terminator) or the sequence
    count."""
    if len(t) == 0:
        raise ConfigurationError("empty evaluation batch")
    return float(-_seq_logprobs(model, t).sum() / _denominator(t, per))


def _draw(model, n_samples, rng):
    if hasattr(model, "flat") and hasattr(model, "hyper"):
        return sample_batch(model, n_samples, rng)
    if hasattr(model, "sample_batch"):
        return model.sample_batch(n_samples, rng)
    raise ConfigurationError(f"cannot sample from {type(model).__name__}")


def motif_frequency(params, motif, n_samples=2000, rng=None):
    """Fraction of sequences sampled from the model that contain the
    motif as a substring, at any sampled length."""
    if n_samples < 1:
        raise ConfigurationError("n_samples must be >= 1")
    if not motif or set(motif) - {"0", "1"}:
        raise ConfigurationError(f"motif must be a nonempty bit string, got {motif!r}")
    rng = rng if rng is not None else stream(0, "motif_frequency")
    draws = _draw(params, n_samples, rng)
    pattern = [int(c) for c in motif]
    hits = contains_pattern(draws.codes, draws.lengths, pattern)
    return float(hits.mean())


def ce_of_plambda(t, gp, logz, logz_stderr, per="token"):
    """Cross-entropy of the normalized model p = P/Z on t, using an
    estimate of log Z: −(1/N) Σ (log P(x) − logZ).  The stderr is the
    logZ uncertainty scaled by |t|/N (the only stochastic term)."""
    if len(t) == 0:
        raise ConfigurationError("empty evaluation batch")
    denom = _denominator(t, per)
    log_pot = gp.log_potential_batch(t)
    ce = float(-(log_pot - logz).sum() / denom)
    return ce, float(logz_stderr * len(t) / denom)


SUMMARY_HEADER = (
    "motif,mask,D,seed,method,H_tok,ce_r,ce_pi,ce_plambda,ce_plambda_se,"
    "mtf_r,mtf_pi,logZ,logZ_se"
)


@dataclass(frozen=True)
class RunSummary:
    """One pipeline run: config echo plus the measured quantities, all
    cross-entropies in nats/token.  h_seq is the same entropy in
    nats/sequence; it is not part of the CSV row."""

    motif: str
    mask: str
    d_size: int
    seed: int
    method: str
    h_tok: float
    ce_r: float
    ce_pi: float
    ce_plambda: float = float("nan")
    ce_plambda_se: float = float("nan")
    mtf_r: float = float("nan")
    mtf_pi: float = float("nan")
    logz: float = float("nan")
    logz_se: float = float("nan")
    h_seq: float = float("nan")

    def __post_init__(self):
        for name in ("h_tok", "ce_r", "ce_pi", "ce_plambda"):
            value = getattr(self, name)
            if not math.isnan(value) and value < 0:
                raise ConfigurationError(f"{name} must be >= 0, got {value}")
        for name in ("mtf_r", "mtf_pi"):
            value = getattr(self, name)
            if not math.isnan(value) and not 0 <= value <= 1:
                raise ConfigurationError(f"{name} must be in [0,1], got {value}")

    def to_row(self):
        return [
            self.motif,
            self.mask,
            self.d_size,
            self.seed,
            self.method,
            repr(self.h_tok),
            repr(self.ce_r),
            repr(self.ce_pi),
            repr(self.ce_plambda),
            repr(self.ce_plambda_se),
            repr(self.mtf_r),
            repr(self.mtf_pi),
            repr(self.logz),
            repr(self.logz_se),
        ]


def write_summaries(path, summaries):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_HEADER.split(","))
        for s in summaries:
            writer.writerow(s.to_row())


def load_summaries(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != SUMMARY_HEADER.split(","):
            raise ConfigurationError(f"unexpected summary header in {path}")
        out = []
        for row in reader:
            motif, mask, d, seed, method = row[:5]
            values = [float(v) for v in row[5:]]
            out.append(RunSummary(motif, mask, int(d), int(seed), method, *values))
    return out


RATIO_COLUMNS = (
    "ce_dpg_over_dis",
    "mtf_dpg_over_dis",
    "ce_dpg_over_r",
    "ce_dpg_over_h",
    "mtf_dpg_over_r",
    "ce_dis_over_r",
    "mtf_dis_over_r",
)


def _div(a, b):
    # 0 denominators (a motif never sampled from r) propagate as inf/nan
    with np.errstate(divide="ignore", invalid="ignore"):
        return float(np.float64(a) / np.float64(b))


def _pair_ratios(dpg, dis):
    return {
        "ce_dpg_over_dis": _div(dpg.ce_pi, dis.ce_pi),
        "mtf_dpg_over_dis": _div(dpg.mtf_pi, dis.mtf_pi),
        "ce_dpg_over_r": _div(dpg.ce_pi, dpg.ce_r),
        "ce_dpg_over_h": _div(dpg.ce_pi, dpg.h_tok),
        "mtf_dpg_over_r": _div(dpg.mtf_pi, dpg.mtf_r),
        "ce_dis_over_r": _div(dis.ce_pi, dis.ce_r),
        "mtf_dis_over_r": _div(dis.mtf_pi, dis.mtf_r),
    }


def ratio_table(summaries, dpg_method="dpg_off", dis_method="distill"):
    """Per-|D| means and standard deviations of the seven cross-method
    ratio columns over (motif, mask, seed) pairs of one dpg-style and
    one distillation run.  A zero denominator (e.g. a motif never
    sampled from r) propagates as inf.  Unpaired cells are excluded
    with a warning; other methods are ignored."""
    cells = {}
    for s in summaries:
        if s.method not in (dpg_method, dis_method):
            continue
        key = (s.motif, s.mask, s.seed, s.d_size)
        if cells.setdefault(key, {}).get(s.method) is not None:
            raise ConfigurationError(f"duplicate {s.method} run for {key}")
        cells[key][s.method] = s
    unpaired = sorted(k for k, v in cells.items() if len(v) < 2)
    if unpaired:
        warnings.warn(f"excluding unpaired runs: {unpaired}", stacklevel=2)
    by_d = {}
    for key, pair in cells.items():
        if len(pair) == 2:
            by_d.setdefault(key[3], []).append(
                _pair_ratios(pair[dpg_method], pair[dis_method])
            )
    rows = []
    for d in sorted(by_d):
        ratios = by_d[d]
        row = {"D": d, "n_pairs": len(ratios)}
        for col in RATIO_COLUMNS:
            values = np.array([r[col] for r in ratios])
            row[col] = float(values.mean())
            row["sd_" + col] = (
                float(values.std(ddof=1)) if len(values) > 1 else float("nan")
            )
        rows.append(row)
    return rows


def write_ratio_table(path, rows):
    header = (
        ["D"]
        + list(RATIO_COLUMNS)
        + ["sd_" + c for c in RATIO_COLUMNS]
        + ["n_pairs"]
    )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([row[c] if c == "D" or c == "n_pairs" else repr(row[c]) for c in header])
