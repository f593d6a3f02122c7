"""The unnormalized model logP(x) = log r(x) + ⟨λ, φ(x)⟩ and its
moment-matching fit.

Model feature moments come from self-normalized importance sampling
(weights exp⟨λ,φ⟩ on proposals from r) or from exact rejection
sampling under a sound bound β.  λ is fitted by ascending the
likelihood gradient, which is the gap between data moments and model
moments; the |D| factor of the exact gradient is absorbed into the
learning rate.  All weight handling is in log space with
max-subtraction.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, RejectionInfeasibleError
from .features import data_moment, parse_mask, phi_batch
from .policy import logprob_batch, sample_batch
from .rng import stream
from .sequences import SeqBatch


class GamPotential:
    """logP(x) = log r(x) + λ·φ(x); r frozen, λ in registry order."""

    def __init__(self, r, lam, mask, motif, max_len):
        lam = np.asarray(lam, dtype=np.float64)
        if lam.shape != (mask.num_active,):
            raise ConfigurationError(
                f"lambda has {lam.shape} entries, mask {mask} needs {mask.num_active}"
            )
        self.r = r
        self.lam = lam
        self.mask = mask
        self.motif = motif
        self.max_len = max_len

    def phi(self, batch):
        return phi_batch(batch, self.mask, self.motif, self.max_len)

    def log_weight_batch(self, batch):
        """λ·φ(x): the log importance ratio against r."""
        return self.phi(batch) @ self.lam

    def log_potential_batch(self, batch):
        return logprob_batch(self.r, batch) + self.log_weight_batch(batch)

    def log_potential(self, x):
        return float(self.log_potential_batch(SeqBatch.single(x))[0])

    def with_lambda(self, lam):
        return GamPotential(self.r, lam, self.mask, self.motif, self.max_len)


@dataclass
class MomentEstimate:
    value: np.ndarray
    stderr: np.ndarray
    n_samples: int
    effective_sample_size: float


def snis_from_values(phi_vals, log_w):
    """Self-normalized weighted moment of φ rows with log weights."""
    m = float(np.max(log_w))
    if not np.isfinite(m):
        raise FloatingPointError("all importance weights are zero")
    w = np.exp(log_w - m)
    total = w.sum()
    norm = w / total
    value = norm @ phi_vals
    # delta-method variance of the ratio estimator
    resid = phi_vals - value
    stderr = np.sqrt(((norm[:, None] * resid) ** 2).sum(axis=0))
    ess = total**2 / (w @ w)
    return MomentEstimate(value, stderr, phi_vals.shape[0], float(ess))


def snis_moment(gp, n_samples, rng):
    """E_{p_λ} φ estimated on n_samples proposals from r."""
    if n_samples < 2:
        raise ConfigurationError("snis needs at least 2 samples")
    batch = sample_batch(gp.r, n_samples, rng)
    phi_vals = gp.phi(batch)
    return snis_from_values(phi_vals, phi_vals @ gp.lam)


def log_upper_bound_beta(lam, mask, max_len, max_gen_len=60):
    """log β with e^{λ·φ(x)} ≤ β for every sequence.

    Binary features contribute their positive parts.  The two length
    components are inter-dependent (v = M²), so their joint bound is an
    exact scan over the achievable lengths ℓ ∈ {0..max_gen_len}.
    """
    names = mask.active_names
    log_beta = 0.0
    for j, name in enumerate(names):
        if name not in ("M", "v"):
            log_beta += max(float(lam[j]), 0.0)
    if mask.length_on:
        lam_m = float(lam[names.index("M")])
        lam_v = float(lam[names.index("v")])
        m_vals = np.arange(max_gen_len + 1) / max_len
        log_beta += float(np.max(lam_m * m_vals + lam_v * m_vals**2))
    return log_beta


def upper_bound_beta(lam, mask, max_len, max_gen_len=60):
    return math.exp(log_upper_bound_beta(lam, mask, max_len, max_gen_len))


def rejection_sample(
    gp,
    beta,
    k,
    rng,
    acceptance_floor=1e-4,
    probe_size=20000,
    max_proposals=100_000_000,
):
    """k exact samples from p_λ: propose from r, accept with probability
    P_λ(x)/(β·r(x)) = e^{λ·φ(x)}/β.

    A probe batch estimates the acceptance rate first; below the floor
    the draw is refused with advice to use SNIS estimation or direct
    policy projection instead.
    """
    log_beta = math.log(beta)
    accepted = []
    n_proposed = 0
    n_accepted = 0

    def propose(size):
        nonlocal n_proposed, n_accepted
        batch = sample_batch(gp.r, size, rng)
        log_rho = gp.log_weight_batch(batch) - log_beta
        take = np.log(rng.random(size)) < log_rho
        n_proposed += size
        n_accepted += int(take.sum())
        accepted.append(batch[take])

    propose(max(probe_size, 2))
    rate = n_accepted / n_proposed
    if rate < acceptance_floor:
        raise RejectionInfeasibleError(
            f"acceptance rate {rate:.2e} below floor {acceptance_floor:.0e}; "
            "use snis moment estimation or project the potential directly"
        )
    while n_accepted < k:
        remaining = k - n_accepted
        chunk = int(min(max(remaining / max(rate, 1e-9), 10000), 2_000_000))
        if n_proposed + chunk > max_proposals:
            raise RejectionInfeasibleError(
                f"proposal budget {max_proposals} exhausted at "
                f"{n_accepted}/{k} accepted"
            )
        propose(chunk)
    out = accepted[0]
    for part in accepted[1:]:
        out = out.concat(part)
    return out[np.arange(k)], n_accepted / n_proposed


def estimate_logZ(gp, n_samples, rng):
    """log Z = log E_{x∼r} e^{λ·φ(x)} by log-mean-exp over r samples;
    stderr by the delta method on the linear-space mean."""
    if n_samples < 100:
        raise ConfigurationError("logZ estimation needs at least 100 samples")
    batch = sample_batch(gp.r, n_samples, rng)
    log_w = gp.log_weight_batch(batch)
    m = float(np.max(log_w))
    w = np.exp(log_w - m)
    mean = w.mean()
    logz = m + math.log(mean)
    rel_se = w.std(ddof=1) / (mean * math.sqrt(n_samples))
    return logz, float(rel_se)


@dataclass(frozen=True)
class LambdaTrainConfig:
    method: str = "snis"
    lr: float = 0.1
    max_iters: int = 3000
    tol: float = 0.01  # stop when ‖data moment − model moment‖_∞ dips below
    snis_pool: int = 50000  # proposals from r shared across steps
    refresh_every: int = 250  # steps between pool refreshes
    rs_samples: int = 2000  # exact samples per step for method="rs"
    rs_acceptance_floor: float = 1e-4


@dataclass
class LambdaFit:
    lam: np.ndarray
    trace: list
    converged: bool
    best_gap: float


def train_lambda(d, r, mask, motif, max_len, config=None, rng=None, trace_path=None):
    """Fit λ so model moments match data moments.

    Ascends λ ← λ + lr·(E_D φ − Ê_{p_λ} φ).  method="snis" reweights a
    pool of r proposals, refreshed periodically; method="rs" draws
    exact rejection samples each step, recomputing β from the current λ
    (β depends on λ, so the bound cannot be reused).  Returns best λ by
    gap with a convergence flag; never raises on plain non-convergence.
    """
    config = config or LambdaTrainConfig()
    rng = rng if rng is not None else stream(0, "train_lambda")
    if config.method not in ("snis", "rs"):
        raise ConfigurationError(f"unknown Training-1 method {config.method!r}")
    target = data_moment(d, mask, motif, max_len)
    lam = np.zeros(mask.num_active)
    best = LambdaFit(lam.copy(), [], False, math.inf)
    pool_phi = None

    for it in range(config.max_iters):
        gp = GamPotential(r, lam, mask, motif, max_len)
        if config.method == "snis":
            if pool_phi is None or it % config.refresh_every == 0:
                pool = sample_batch(r, config.snis_pool, rng)
                pool_phi = phi_batch(pool, mask, motif, max_len)
            est = snis_from_values(pool_phi, pool_phi @ lam)
        else:
            beta = upper_bound_beta(lam, mask, max_len, r.hyper.max_gen_len)
            samples, _ = rejection_sample(
                gp,
                beta,
                config.rs_samples,
                rng,
                acceptance_floor=config.rs_acceptance_floor,
            )
            sample_phi = phi_batch(samples, mask, motif, max_len)
            est = MomentEstimate(
                sample_phi.mean(axis=0),
                sample_phi.std(axis=0, ddof=1) / math.sqrt(config.rs_samples),
                config.rs_samples,
                float(config.rs_samples),
            )
        gap = target - est.value
        gap_inf = float(np.max(np.abs(gap)))
        best.trace.append(
            {
                "iter": it,
                "gap": [round(g, 6) for g in gap.tolist()],
                "gap_inf": round(gap_inf, 6),
                "ess": round(est.effective_sample_size, 2),
            }
        )
        if gap_inf < best.best_gap:
            best.best_gap = gap_inf
            best.lam = lam.copy()
        if gap_inf < config.tol:
            best.converged = True
            break
        lam = lam + config.lr * gap

    if trace_path is not None:
        with open(trace_path, "w") as fh:
            for row in best.trace:
                fh.write(json.dumps(row) + "\n")
    return best


def save_lambda(path, fit_or_lam, mask, motif):
    """Plain text: mask, motif, then one `feature_name value` per line."""
    lam = fit_or_lam.lam if isinstance(fit_or_lam, LambdaFit) else fit_or_lam
    with open(path, "w") as fh:
        fh.write(f"mask {mask}\n")
        fh.write(f"motif {motif}\n")
        for name, value in zip(mask.active_names, lam):
            fh.write(f"{name} {float(value)!r}\n")


def load_lambda(path):
    """Returns (lambda, mask, motif).  The two header lines come first;
    the remaining lines are feature_name/value pairs in registry order
    (a feature may share the literal name `motif`, so headers are
    positional)."""
    with open(path) as fh:
        lines = [line.strip() for line in fh if line.strip()]
    if len(lines) < 2 or not lines[0].startswith("mask ") or not lines[1].startswith(
        "motif "
    ):
        raise ConfigurationError(f"{path} is not a lambda checkpoint")
    mask = parse_mask(lines[0].split(" ", 1)[1])
    motif = lines[1].split(" ", 1)[1]
    values = {}
    for line in lines[2:]:
        key, _, text = line.partition(" ")
        values[key] = float(text)
    lam = np.array([values[name] for name in mask.active_names])
    return lam, mask, motif
