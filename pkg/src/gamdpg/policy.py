"""Autoregressive policy over {0, 1, EOS}: a single-layer gated
recurrent cell with exact log-probabilities, ancestral sampling, and
reverse-mode gradients, all in double-precision numpy.

Parameters live in one flat vector; the named weight matrices are
reshaped views into it, so finite-difference checks and SGD updates
address the same memory.  Gradients are returned as flat vectors of the
same length.
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import TrainingError
from .rng import stream
from .sequences import EOS, SeqBatch

_BOS = 3  # pseudo-symbol index: zero input vector at the first step


@dataclass(frozen=True)
class PolicyHyper:
    d_in: int = 3
    h: int = 32
    max_gen_len: int = 60


def _layout(hyper):
    d, h = hyper.d_in, hyper.h
    shapes = [
        ("emb", (3, d)),
        ("Wz", (d, h)),
        ("Wr", (d, h)),
        ("Wh", (d, h)),
        ("Uz", (h, h)),
        ("Ur", (h, h)),
        ("Uh", (h, h)),
        ("bz", (h,)),
        ("br", (h,)),
        ("bh", (h,)),
        ("Wo", (h, 3)),
        ("bo", (3,)),
    ]
    offsets = {}
    pos = 0
    for name, shape in shapes:
        size = int(np.prod(shape))
        offsets[name] = (pos, pos + size, shape)
        pos += size
    return offsets, pos


class PolicyParams:
    """Flat float64 parameter vector with named matrix views."""

    def __init__(self, hyper, flat):
        offsets, total = _layout(hyper)
        flat = np.ascontiguousarray(flat, dtype=np.float64)
        if flat.shape != (total,):
            raise ValueError(f"expected {total} parameters, got {flat.shape}")
        self.hyper = hyper
        self.flat = flat
        for name, (a, b, shape) in offsets.items():
            setattr(self, name, flat[a:b].reshape(shape))

    @property
    def n_params(self):
        return self.flat.size

    def copy(self):
        return PolicyParams(self.hyper, self.flat.copy())

    def all_finite(self):
        return bool(np.all(np.isfinite(self.flat)))


def n_params(hyper):
    return _layout(hyper)[1]


def init_policy(hyper, rng):
    """Uniform init in [-0.1, 0.1]."""
    return PolicyParams(hyper, rng.uniform(-0.1, 0.1, size=n_params(hyper)))


def zero_grad(params):
    return np.zeros_like(params.flat)


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _input_tables(params):
    """Per-symbol rows of emb @ W for each gate; row _BOS is the zero
    input used at the first step."""
    tables = []
    for w in (params.Wz, params.Wr, params.Wh):
        ew = np.zeros((4, w.shape[1]))
        ew[:3] = params.emb @ w
        tables.append(ew)
    return tables


def _log_softmax(logits):
    m = logits.max(axis=-1, keepdims=True)
    z = logits - m
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


class StepState:
    """Incremental decoding state: hidden vectors plus the per-symbol
    input tables of a frozen parameter snapshot."""

    def __init__(self, params, size):
        self.params = params
        self.h = np.zeros((size, params.hyper.h))
        self.prev = np.full(size, _BOS, dtype=np.int64)
        self.ewz, self.ewr, self.ewh = _input_tables(params)

    def _advance_hidden(self, h, prev):
        p = self.params
        z = _sigmoid(self.ewz[prev] + h @ p.Uz + p.bz)
        r = _sigmoid(self.ewr[prev] + h @ p.Ur + p.br)
        c = np.tanh(self.ewh[prev] + (r * h) @ p.Uh + p.bh)
        return (1.0 - z) * h + z * c

    def step_logprobs(self):
        """Log next-symbol distribution (size, 3) WITHOUT advancing."""
        self.h = self._advance_hidden(self.h, self.prev)
        self.prev = None  # consumed; feed() must follow
        logits = self.h @ self.params.Wo + self.params.bo
        return _log_softmax(logits)

    def feed(self, symbols):
        self.prev = np.asarray(symbols, dtype=np.int64)

    def select(self, keep):
        self.h = self.h[keep]
        if self.prev is not None:
            self.prev = self.prev[keep]


def logprob_batch(params, batch):
    """log π(x) per sequence: payload symbols then EOS (no EOS term on
    truncated sequences)."""
    targets = batch.symbols_matrix()
    mask = batch.step_mask()
    n, t_max = targets.shape
    state = StepState(params, n)
    out = np.zeros(n)
    rows = np.arange(n)
    for t in range(t_max):
        lp = state.step_logprobs()
        out += np.where(mask[:, t], lp[rows, targets[:, t]], 0.0)
        state.feed(targets[:, t])
    return out


def logprob(params, x):
    return float(logprob_batch(params, SeqBatch.single(x))[0])


def weighted_grad_sum(params, batch, weights):
    """Σ_i w_i ∇_θ log π(x_i) as a flat vector, plus per-sequence
    log-probabilities from the same forward pass."""
    p = params
    d, h = p.hyper.d_in, p.hyper.h
    targets = batch.symbols_matrix()
    mask = batch.step_mask()
    n, t_max = targets.shape
    weights = np.asarray(weights, dtype=np.float64)

    ewz, ewr, ewh = _input_tables(p)
    prev = np.full(n, _BOS, dtype=np.int64)
    hs = np.zeros((t_max + 1, n, h))
    zs = np.empty((t_max, n, h))
    rs = np.empty((t_max, n, h))
    cs = np.empty((t_max, n, h))
    probs = np.empty((t_max, n, 3))
    prevs = np.empty((t_max, n), dtype=np.int64)
    logp = np.zeros(n)
    rows = np.arange(n)

    for t in range(t_max):
        hprev = hs[t]
        z = _sigmoid(ewz[prev] + hprev @ p.Uz + p.bz)
        r = _sigmoid(ewr[prev] + hprev @ p.Ur + p.br)
        c = np.tanh(ewh[prev] + (r * hprev) @ p.Uh + p.bh)
        hs[t + 1] = (1.0 - z) * hprev + z * c
        zs[t], rs[t], cs[t], prevs[t] = z, r, c, prev
        lsm = _log_softmax(hs[t + 1] @ p.Wo + p.bo)
        probs[t] = np.exp(lsm)
        logp += np.where(mask[:, t], lsm[rows, targets[:, t]], 0.0)
        prev = targets[:, t]

    grad = PolicyParams(p.hyper, np.zeros(p.n_params))
    s_z = np.zeros((4, h))
    s_r = np.zeros((4, h))
    s_c = np.zeros((4, h))
    dh_next = np.zeros((n, h))
    for t in range(t_max - 1, -1, -1):
        dlogits = -probs[t] * (weights * mask[:, t])[:, None]
        dlogits[rows, targets[:, t]] += weights * mask[:, t]
        grad.Wo += hs[t + 1].T @ dlogits
        grad.bo += dlogits.sum(axis=0)
        dh = dh_next + dlogits @ p.Wo.T
        hprev, z, r, c = hs[t], zs[t], rs[t], cs[t]
        dz = dh * (c - hprev)
        dc = dh * z
        dh_prev = dh * (1.0 - z)
        da_c = dc * (1.0 - c * c)
        g = da_c @ p.Uh.T
        dh_prev += g * r
        da_r = (g * hprev) * r * (1.0 - r)
        da_z = dz * z * (1.0 - z)
        grad.Uh += (r * hprev).T @ da_c
        grad.Ur += hprev.T @ da_r
        grad.Uz += hprev.T @ da_z
        grad.bh += da_c.sum(axis=0)
        grad.br += da_r.sum(axis=0)
        grad.bz += da_z.sum(axis=0)
        np.add.at(s_z, prevs[t], da_z)
        np.add.at(s_r, prevs[t], da_r)
        np.add.at(s_c, prevs[t], da_c)
        dh_next = dh_prev + da_z @ p.Uz.T + da_r @ p.Ur.T

    grad.Wz += p.emb.T @ s_z[:3]
    grad.Wr += p.emb.T @ s_r[:3]
    grad.Wh += p.emb.T @ s_c[:3]
    grad.emb += s_z[:3] @ p.Wz.T + s_r[:3] @ p.Wr.T + s_c[:3] @ p.Wh.T
    return grad.flat, logp


def grad_logprob(params, x):
    """Exact ∇_θ log π(x), flat."""
    g, _ = weighted_grad_sum(params, SeqBatch.single(x), np.ones(1))
    return g


def sample_batch(params, size, rng):
    """Ancestral samples; sequences hitting max_gen_len without EOS are
    flagged truncated.  Finished rows are compacted away each step."""
    cap = params.hyper.max_gen_len
    state = StepState(params, size)
    alive = np.arange(size)
    sym_mat = np.full((size, cap), EOS, dtype=np.int8)
    lengths = np.full(size, cap, dtype=np.int64)
    done = np.zeros(size, dtype=bool)
    for t in range(cap):
        lp = state.step_logprobs()
        cum = np.cumsum(np.exp(lp), axis=1)
        u = rng.random(alive.size) * cum[:, -1]
        sym = (u[:, None] > cum).sum(axis=1)
        sym_mat[alive, t] = sym
        hit_eos = sym == EOS
        lengths[alive[hit_eos]] = t
        done[alive[hit_eos]] = True
        keep = ~hit_eos
        alive = alive[keep]
        if alive.size == 0:
            break
        state.select(keep)
        state.feed(sym[keep])
    shifts = np.arange(cap, dtype=np.uint64)
    bits = (sym_mat == 1).astype(np.uint64)
    bits[np.arange(cap)[None, :] >= lengths[:, None]] = 0
    codes = (bits << shifts[None, :]).sum(axis=1, dtype=np.uint64)
    return SeqBatch(codes, lengths, ~done)


def sample(params, rng):
    return sample_batch(params, 1, rng)[0]


def _per_token_ce(params, batch, chunk=2048):
    total = 0.0
    for a in range(0, len(batch), chunk):
        total += logprob_batch(params, batch[a : a + chunk]).sum()
    return -total / batch.token_counts().sum()


@dataclass(frozen=True)
class AmTrainConfig:
    lr: float = 0.05
    momentum: float = 0.9
    batch_size: int = 64
    max_epochs: int = 120
    patience: int = 12  # stop after this many epochs without V improvement
    decay_after: int = 4  # halve lr after this many stale epochs
    lr_decay: float = 0.5
    min_delta: float = 1e-4


def train_am(d, v, hyper=None, config=None, rng=None, init_params=None, trace=None):
    """Mini-batch SGD with momentum on empirical cross-entropy over D,
    early-stopped and selected on CE(V).  Returns best-on-V parameters.

    `trace`, if given, is a list that receives one dict per epoch.
    """
    hyper = hyper or PolicyHyper()
    config = config or AmTrainConfig()
    rng = rng if rng is not None else stream(0, "train_am")
    params = (init_params or init_policy(hyper, rng)).copy()
    velocity = np.zeros(params.n_params)
    lr = config.lr
    best_flat = params.flat.copy()
    best_ce = _per_token_ce(params, v)
    stale = 0
    for epoch in range(config.max_epochs):
        order = rng.permutation(len(d))
        for a in range(0, len(d), config.batch_size):
            idx = order[a : a + config.batch_size]
            batch = d[idx]
            tokens = batch.token_counts().sum()
            grad, logp = weighted_grad_sum(params, batch, np.ones(len(idx)))
            if not np.all(np.isfinite(logp)):
                raise TrainingError(
                    "non-finite loss",
                    diagnostics={"epoch": epoch, "lr": lr, "v_ce": best_ce},
                )
            velocity = config.momentum * velocity + grad / tokens
            params.flat += lr * velocity  # ascent on logprob
        v_ce = _per_token_ce(params, v)
        if trace is not None:
            trace.append({"epoch": epoch, "v_ce": v_ce, "lr": lr})
        if not np.isfinite(v_ce):
            raise TrainingError(
                "non-finite validation loss",
                diagnostics={"epoch": epoch, "lr": lr, "v_ce": v_ce},
            )
        if v_ce < best_ce - config.min_delta:
            best_ce = v_ce
            best_flat = params.flat.copy()
            stale = 0
        else:
            stale += 1
            if stale % config.decay_after == 0:
                lr *= config.lr_decay
            if stale >= config.patience:
                break
    return PolicyParams(hyper, best_flat)


CHECKPOINT_VERSION = 1


def save_policy(params, path, manifest=None):
    """Versioned blob of the flat view + hyper header; an optional JSON
    manifest is written next to it."""
    np.savez(
        path,
        version=np.int64(CHECKPOINT_VERSION),
        flat=params.flat,
        d_in=np.int64(params.hyper.d_in),
        h=np.int64(params.hyper.h),
        max_gen_len=np.int64(params.hyper.max_gen_len),
    )
    if manifest is not None:
        target = str(path)
        if not target.endswith(".npz"):
            target += ".npz"
        with open(target[: -len(".npz")] + ".manifest.json", "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)


def load_policy(path):
    with np.load(path) as blob:
        if int(blob["version"]) != CHECKPOINT_VERSION:
            raise ValueError(f"unknown checkpoint version {blob['version']}")
        hyper = PolicyHyper(
            d_in=int(blob["d_in"]),
            h=int(blob["h"]),
            max_gen_len=int(blob["max_gen_len"]),
        )
        return PolicyParams(hyper, blob["flat"])
