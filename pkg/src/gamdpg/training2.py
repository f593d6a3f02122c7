"""Training-2: project an unnormalized potential P onto a normalized
policy π_θ.

Four routes: distillation (supervised training on exact samples from
p = P/Z), off-policy distributional policy gradient (episodes from a
frozen proposal q, importance weights P/q, proposal swapped to π_θ when
π_θ overtakes it on validation), its on-policy variant (q ≡ π_θ,
unstable by design), and the plain REINFORCE baseline that maximizes
expected reward and is expected to collapse onto a few short
sequences.

Importance weights are handled in log space and max-normalized (the
unknown 1/Z only rescales the learning rate).
"""

import json
import math
import time
from dataclasses import dataclass

import numpy as np

from .errors import TrainingError
from .policy import logprob_batch, sample_batch, train_am, weighted_grad_sum
from .rng import stream
from .sequences import SeqBatch
from .truth import TruthModel


@dataclass(frozen=True)
class PotentialHandle:
    """A pure unnormalized log-score over sequences; -inf only for
    hard-filter potentials."""

    log_potential_batch: callable
    description: str

    def log_potential(self, x):
        return float(self.log_potential_batch(SeqBatch.single(x))[0])


def gam_handle(gp):
    return PotentialHandle(gp.log_potential_batch, f"gam:{gp.mask}")


def truth_handle(motif, n):
    """The exact unnormalized process: white-noise mass times the hard
    motif filter."""
    model = TruthModel(motif, n)
    return PotentialHandle(model.log_potential_batch, "wn_f")


def scaled_policy_handle(params, log_c=0.0):
    """P = c·q for a frozen policy q; a fixed point for Training-2."""

    def log_p(batch):
        return logprob_batch(params, batch) + log_c

    return PotentialHandle(log_p, "scaled_policy")


@dataclass(frozen=True)
class Dpg2Config:
    iterations: int = 30
    episodes: int = 5000  # per iteration
    lr: float = 0.01
    batch_episodes: int = 64
    # "iteration" keeps weights comparable across gradient steps (one max
    # per collected episode batch; differs from exact P/q by a constant
    # that only rescales lr).  "batch" renormalizes every gradient step,
    # which erases rare-event signal when most steps see no high-weight
    # episode.  "none" uses raw weights.
    weight_norm: str = "iteration"
    weight_clip: float = None  # optional upper clip on normalized weights
    ce_chunk: int = 4096


@dataclass
class Training2Report:
    rows: list
    swaps: int
    episodes_total: int
    wall_clock: float


def _per_token_ce(params, batch, chunk):
    total = 0.0
    for a in range(0, len(batch), chunk):
        total += logprob_batch(params, batch[a : a + chunk]).sum()
    return -total / batch.token_counts().sum()


def _apply_weighted_steps(pi, episodes, log_w, config):
    """One pass of SGD steps over episode batches with max-normalized
    importance weights.  Returns (mean normalized weight, ess)."""
    n = len(episodes)
    finite = np.isfinite(log_w)
    if not finite.any():
        return 0.0, 0.0
    ref_global = float(log_w[finite].max())
    w_all = np.exp(np.where(finite, log_w - ref_global, -np.inf))
    ess = float(w_all.sum() ** 2 / (w_all @ w_all))
    for a in range(0, n, config.batch_episodes):
        b = slice(a, min(a + config.batch_episodes, n))
        lw = log_w[b]
        if config.weight_norm == "batch":
            ref = float(np.max(lw))
            if not np.isfinite(ref):
                continue
        elif config.weight_norm == "iteration":
            ref = ref_global
        else:
            ref = 0.0
        w = np.exp(np.where(np.isfinite(lw), lw - ref, -np.inf))
        if config.weight_clip is not None:
            w = np.minimum(w, config.weight_clip)
        live = w > 1e-8
        if not live.any():
            continue
        grad, _ = weighted_grad_sum(pi, episodes[b][live], w[live])
        if not np.all(np.isfinite(grad)):
            raise TrainingError(
                "non-finite policy gradient",
                diagnostics={"batch_start": a, "max_weight": float(w.max())},
            )
        pi.flat += config.lr * grad
    return float(w_all.mean()), ess


def _write_trace(trace_path, rows):
    if trace_path is None:
        return
    with open(trace_path, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")


def dpg_off(potential, q0, v, config=None, rng=None, trace_path=None):
    """Off-policy distributional policy gradient.

    Per iteration: episodes from the frozen proposal q, gradient steps
    on π_θ with weights P/q, then one superiority check — if π_θ beats
    q on validation CE, q becomes a frozen copy of π_θ.  π_θ warm
    starts from q0.  Returns (best-on-V params, Training2Report).
    """
    config = config or Dpg2Config()
    rng = rng if rng is not None else stream(0, "dpg_off")
    started = time.time()
    q = q0.copy()
    pi = q0.copy()
    ce_v_q = _per_token_ce(q, v, config.ce_chunk)
    best = (ce_v_q, q0.copy())
    rows = []
    swaps = 0
    for it in range(config.iterations):
        episodes = sample_batch(q, config.episodes, rng)
        log_w = potential.log_potential_batch(episodes) - logprob_batch(q, episodes)
        mean_w, ess = _apply_weighted_steps(pi, episodes, log_w, config)
        ce_v_pi = _per_token_ce(pi, v, config.ce_chunk)
        # Algorithm line: adopt π_θ as proposal only on strict CE(V) improvement,
        # so the recorded ce_v_q sequence is nonincreasing by construction
        swapped = bool(ce_v_pi < ce_v_q)
        if swapped:
            q = pi.copy()
            ce_v_q = ce_v_pi
            swaps += 1
        if ce_v_pi < best[0]:
            best = (ce_v_pi, pi.copy())
        rows.append(
            {
                "iter": it,
                "ce_v_pi": round(float(ce_v_pi), 6),
                "ce_v_q": round(float(ce_v_q), 6),
                "swapped": swapped,
                "mean_weight": round(float(mean_w), 6),
                "ess": round(float(ess), 2),
            }
        )
    _write_trace(trace_path, rows)
    report = Training2Report(
        rows, swaps, config.iterations * config.episodes, time.time() - started
    )
    return best[1], report


def dpg_on(potential, theta0, v, config=None, rng=None, trace_path=None):
    """On-policy variant: episodes come from the evolving π_θ itself and
    weights are P/π_θ.  Kept for the instability comparison."""
    config = config or Dpg2Config()
    rng = rng if rng is not None else stream(0, "dpg_on")
    started = time.time()
    pi = theta0.copy()
    best = (_per_token_ce(pi, v, config.ce_chunk), theta0.copy())
    step_config = Dpg2Config(
        lr=config.lr,
        batch_episodes=config.batch_episodes,
        weight_norm=config.weight_norm,
        weight_clip=config.weight_clip,
    )
    rows = []
    for it in range(config.iterations):
        for a in range(0, config.episodes, config.batch_episodes):
            size = min(config.batch_episodes, config.episodes - a)
            episodes = sample_batch(pi, size, rng)
            log_w = potential.log_potential_batch(episodes) - logprob_batch(
                pi, episodes
            )
            _apply_weighted_steps(pi, episodes, log_w, step_config)
        ce_v_pi = _per_token_ce(pi, v, config.ce_chunk)
        if ce_v_pi < best[0]:
            best = (ce_v_pi, pi.copy())
        rows.append(
            {
                "iter": it,
                "ce_v_pi": round(float(ce_v_pi), 6),
                "ce_v_q": round(float(ce_v_pi), 6),
                "swapped": False,
                "mean_weight": None,
                "ess": None,
            }
        )
    _write_trace(trace_path, rows)
    report = Training2Report(
        rows, 0, config.iterations * config.episodes, time.time() - started
    )
    return best[1], report


@dataclass(frozen=True)
class ReinforceConfig:
    iterations: int = 30
    episodes: int = 5000
    lr: float = 0.01
    batch_episodes: int = 64
    reward: str = "potential"  # "potential" (exp logP) | "log_potential"
    diag_samples: int = 2000


def reinforce_pg(potential, theta0, config=None, rng=None):
    """Plain REINFORCE on reward R(x): reward-maximization, not
    distribution matching.  Expected to concentrate mass on a few short
    high-reward sequences; diagnostics record that collapse.

    Rewards are max-normalized per batch so the raw potential scale
    (e^{-n ln 2} and below) cannot freeze learning.
    """
    config = config or ReinforceConfig()
    rng = rng if rng is not None else stream(0, "reinforce")
    pi = theta0.copy()
    for _ in range(config.iterations):
        for a in range(0, config.episodes, config.batch_episodes):
            size = min(config.batch_episodes, config.episodes - a)
            episodes = sample_batch(pi, size, rng)
            log_p = potential.log_potential_batch(episodes)
            finite = np.isfinite(log_p)
            if not finite.any():
                continue
            if config.reward == "potential":
                ref = float(log_p[finite].max())
                rewards = np.exp(np.where(finite, log_p - ref, -np.inf))
            else:
                rewards = np.where(finite, log_p, 0.0)
                scale = float(np.abs(rewards).max())
                if scale > 0:
                    rewards = rewards / scale
            grad, _ = weighted_grad_sum(pi, episodes, rewards)
            if not np.all(np.isfinite(grad)):
                raise TrainingError(
                    "non-finite policy gradient",
                    diagnostics={"reward": config.reward},
                )
            pi.flat += config.lr * grad
    draws = sample_batch(pi, config.diag_samples, rng)
    distinct = len({(int(c), int(l)) for c, l in zip(draws.codes, draws.lengths)})
    diagnostics = {
        "mean_length": float(draws.lengths.mean()),
        "distinct_samples": distinct,
        "diag_samples": config.diag_samples,
    }
    return pi, diagnostics


def distill(sampler, k, v, hyper=None, config=None, rng=None, trace=None):
    """Supervised projection: draw K exact samples from p once, then
    train a fresh policy on them like any dataset (epoch reuse acts as
    experience replay)."""
    rng = rng if rng is not None else stream(0, "distill")
    samples = sampler(k, rng)
    return train_am(samples, v, hyper=hyper, config=config, rng=rng, trace=trace)
