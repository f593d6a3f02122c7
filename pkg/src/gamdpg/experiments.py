"""End-to-end experiment orchestration: one config point runs splits →
base AM → moment fitting → projection methods → metrics, with every
artifact (checkpoints, traces, summary rows) under one directory.
Sweeps run the cartesian grid, skip points already completed under the
same manifest hash, and aggregate the per-point rows into one CSV plus
the paired-method ratio table.
"""

import hashlib
import json
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from itertools import product
from pathlib import Path

from .ebm import (
    GamPotential,
    LambdaTrainConfig,
    estimate_logZ,
    rejection_sample,
    save_lambda,
    train_lambda,
    upper_bound_beta,
)
from .errors import ConfigurationError
from .evaluation import (
    RunSummary,
    ce_of_plambda,
    cross_entropy,
    load_summaries,
    motif_frequency,
    ratio_table,
    write_ratio_table,
    write_summaries,
)
from .features import parse_mask
from .policy import (
    AmTrainConfig,
    PolicyHyper,
    load_policy,
    save_policy,
    train_am,
)
from .rng import stream
from .sequences import MAX_PACKED_LEN
from .training2 import (
    Dpg2Config,
    ReinforceConfig,
    distill,
    dpg_off,
    dpg_on,
    gam_handle,
    reinforce_pg,
    truth_handle,
)
from .truth import TruthModel, make_splits, true_entropy, true_entropy_per_token

T1_METHODS = ("snis", "rs")
T2_METHODS = ("distill", "dpg_off", "dpg_on", "pg")
POTENTIAL_SOURCES = ("gam", "wn_f")

DEFAULT_MOTIFS = ("1000101000101", "1011100111001", "10001011111000")


@dataclass(frozen=True)
class ExperimentConfig:
    """Grid plus every hyperparameter that affects results.  The t1
    field selects the moment-fitting method and overrides lam.method."""

    motifs: tuple = DEFAULT_MOTIFS
    n: int = 30
    masks: tuple = ("1001111", "Mv1001111")
    d_grid: tuple = (500, 1000, 5000, 10000, 20000)
    v_size: int = 500
    t_size: int = 5000
    seeds: tuple = (1234, 4444)
    t1: str = "snis"
    t2: tuple = ("distill", "dpg_off")
    potential_source: str = "gam"
    hidden: int = 32
    max_gen_len: int = 60
    am: AmTrainConfig = AmTrainConfig()
    lam: LambdaTrainConfig = LambdaTrainConfig()
    dpg: Dpg2Config = Dpg2Config()
    pg: ReinforceConfig = ReinforceConfig()
    distill_k: int = 10000
    # distillation trains a fresh policy, so it usually wants a more
    # patient stopping schedule than the one that fits r; None reuses am
    distill_am: AmTrainConfig = None
    mtf_samples: int = 2000
    mtf_r_samples: int = 20000
    logz_samples: int = 100000

    def __post_init__(self):
        for motif in self.motifs:
            if not motif or set(motif) - {"0", "1"}:
                raise ConfigurationError(f"bad motif {motif!r}")
            if len(motif) > self.n:
                raise ConfigurationError(f"motif {motif!r} longer than n={self.n}")
        if not 0 < self.n <= MAX_PACKED_LEN:
            raise ConfigurationError(f"n must be in 1..{MAX_PACKED_LEN}")
        for mask in self.masks:
            parse_mask(mask)
        for name, values in (
            ("d_grid", self.d_grid),
            ("seeds", self.seeds),
            ("motifs", self.motifs),
            ("masks", self.masks),
            ("t2", self.t2),
        ):
            if not values:
                raise ConfigurationError(f"{name} must be nonempty")
        for value in (*self.d_grid, self.v_size, self.t_size):
            if int(value) <= 0:
                raise ConfigurationError("split sizes must be positive")
        if self.t1 not in T1_METHODS:
            raise ConfigurationError(f"t1 must be one of {T1_METHODS}")
        unknown = set(self.t2) - set(T2_METHODS)
        if unknown:
            raise ConfigurationError(f"unknown t2 methods {sorted(unknown)}")
        if self.potential_source not in POTENTIAL_SOURCES:
            raise ConfigurationError(
                f"potential_source must be one of {POTENTIAL_SOURCES}"
            )
        if self.max_gen_len < self.n:
            raise ConfigurationError("max_gen_len must cover n")

    @property
    def hyper(self):
        return PolicyHyper(d_in=3, h=self.hidden, max_gen_len=self.max_gen_len)


@dataclass(frozen=True)
class Point:
    motif: str
    mask: str
    d_size: int
    seed: int

    @property
    def ident(self):
        return f"{self.motif}_{self.mask}_d{self.d_size}_s{self.seed}"


def sweep_points(config):
    return [
        Point(motif, mask, d, seed)
        for motif, mask, d, seed in product(
            config.motifs, config.masks, config.d_grid, config.seeds
        )
    ]


def manifest_hash(config):
    """Digest over every result-affecting hyperparameter; lam.method is
    reported as the effective t1 choice."""
    blob = asdict(config)
    blob["lam"]["method"] = config.t1
    return hashlib.sha256(
        json.dumps(blob, sort_keys=True).encode()
    ).hexdigest()


def _atomic_save_policy(params, path):
    fd, tmp = tempfile.mkstemp(suffix=".npz", dir=os.path.dirname(path))
    os.close(fd)
    try:
        save_policy(params, tmp)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def _shared_r(config, point, out_dir):
    """Train (or reload) the base AM for (motif, |D|, seed).  The mask
    plays no role here, so mask variants of a point share the file."""
    key = {
        "motif": point.motif,
        "n": config.n,
        "d_size": point.d_size,
        "seed": point.seed,
        "v_size": config.v_size,
        "hidden": config.hidden,
        "max_gen_len": config.max_gen_len,
        "am": asdict(config.am),
    }
    digest = hashlib.sha256(json.dumps(key, sort_keys=True).encode()).hexdigest()
    shared = Path(out_dir) / "shared"
    shared.mkdir(parents=True, exist_ok=True)
    path = shared / f"r_{point.motif}_d{point.d_size}_s{point.seed}_{digest[:12]}.npz"
    if path.exists():
        return load_policy(path)
    d, v, _ = make_splits(
        point.motif, config.n, point.d_size, config.v_size, config.t_size,
        seed=point.seed,
    )
    r = train_am(
        d, v,
        hyper=config.hyper,
        config=config.am,
        rng=stream(point.seed, "train_r", point.motif, config.n, point.d_size),
    )
    _atomic_save_policy(r, path)
    return r


def _fit_potential(config, point, r, d, point_dir):
    """Returns (handle, sampler, logz, logz_se, gp_or_none)."""
    mask = parse_mask(point.mask)
    if config.potential_source == "wn_f":
        model = TruthModel(point.motif, config.n)
        return (
            truth_handle(point.motif, config.n),
            model.sample_batch,
            model.entropy,
            0.0,
            None,
        )
    lam_config = replace(config.lam, method=config.t1)
    fit = train_lambda(
        d, r, mask, point.motif, config.n,
        config=lam_config,
        rng=stream(
            point.seed, "t1", config.t1, point.mask, point.motif, config.n,
            point.d_size,
        ),
        trace_path=point_dir / "t1_trace.jsonl",
    )
    save_lambda(point_dir / "lambda.txt", fit, mask, point.motif)
    gp = GamPotential(r, fit.lam, mask, point.motif, config.n)
    logz, logz_se = estimate_logZ(
        gp,
        config.logz_samples,
        stream(point.seed, "eval", "logz", point.mask, point.motif, config.n,
               point.d_size),
    )

    def sampler(k, rng):
        beta = upper_bound_beta(gp.lam, mask, config.n, config.max_gen_len)
        samples, _ = rejection_sample(gp, beta, k, rng)
        return samples

    return gam_handle(gp), sampler, logz, logz_se, gp


def _project(config, point, method, handle, sampler, r, v, point_dir):
    """Run one Training-2 method; returns the trained policy."""
    rng = stream(point.seed, "t2", method, point.motif, config.n, point.d_size)
    trace_path = point_dir / f"t2_{method}_trace.jsonl"
    if method == "distill":
        trace = []
        pi = distill(
            sampler, config.distill_k, v,
            hyper=config.hyper, config=config.distill_am or config.am,
            rng=rng, trace=trace,
        )
        with open(trace_path, "w") as fh:
            for row in trace:
                fh.write(json.dumps(row) + "\n")
    elif method == "dpg_off":
        pi, _ = dpg_off(handle, r, v, config.dpg, rng, trace_path=trace_path)
    elif method == "dpg_on":
        pi, _ = dpg_on(handle, r, v, config.dpg, rng, trace_path=trace_path)
    else:  # pg
        pi, diag = reinforce_pg(handle, r, config.pg, rng)
        with open(point_dir / "pg_diagnostics.json", "w") as fh:
            json.dump(diag, fh, indent=2, sort_keys=True)
    save_policy(pi, point_dir / f"policy_{method}.npz")
    return pi


def run_experiment(config, point, out_dir):
    """One grid point end to end; returns its RunSummary rows (one per
    projection method).  On failure a machine-readable error record is
    written before the exception propagates."""
    out_dir = Path(out_dir)
    point_dir = out_dir / "points" / point.ident
    point_dir.mkdir(parents=True, exist_ok=True)
    started = time.time()
    try:
        d, v, t = make_splits(
            point.motif, config.n, point.d_size, config.v_size, config.t_size,
            seed=point.seed,
        )
        r = _shared_r(config, point, out_dir)
        h_tok = true_entropy_per_token(point.motif, config.n)
        ce_r = cross_entropy(t, r)
        mtf_r = motif_frequency(
            r, point.motif, config.mtf_r_samples,
            stream(point.seed, "eval", "mtf_r", point.motif, config.n,
                   point.d_size),
        )
        handle, sampler, logz, logz_se, gp = _fit_potential(
            config, point, r, d, point_dir
        )
        if gp is None:
            ce_pl, ce_pl_se = cross_entropy(t, TruthModel(point.motif, config.n)), 0.0
        else:
            ce_pl, ce_pl_se = ce_of_plambda(t, gp, logz, logz_se)
        rows = []
        for method in config.t2:
            pi = _project(config, point, method, handle, sampler, r, v, point_dir)
            rows.append(
                RunSummary(
                    motif=point.motif,
                    mask=point.mask,
                    d_size=point.d_size,
                    seed=point.seed,
                    method=method,
                    h_tok=h_tok,
                    ce_r=ce_r,
                    ce_pi=cross_entropy(t, pi),
                    ce_plambda=ce_pl,
                    ce_plambda_se=ce_pl_se,
                    mtf_r=mtf_r,
                    mtf_pi=motif_frequency(
                        pi, point.motif, config.mtf_samples,
                        stream(point.seed, "eval", "mtf_pi", method,
                               point.motif, config.n, point.d_size),
                    ),
                    logz=logz,
                    logz_se=logz_se,
                    h_seq=true_entropy(point.motif, config.n),
                )
            )
    except Exception as err:
        with open(point_dir / "error.json", "w") as fh:
            json.dump(
                {
                    "point": asdict(point),
                    "error": type(err).__name__,
                    "message": str(err),
                    "wall_clock": round(time.time() - started, 3),
                },
                fh, indent=2, sort_keys=True,
            )
        raise
    write_summaries(point_dir / "summary.csv", rows)
    with open(point_dir / "manifest.json", "w") as fh:
        json.dump(
            {
                "hash": manifest_hash(config),
                "point": asdict(point),
                "status": "done",
                "wall_clock": round(time.time() - started, 3),
            },
            fh, indent=2, sort_keys=True,
        )
    return rows


def _completed_rows(config, point, out_dir):
    """Rows of a previously finished point, or None if it must run."""
    point_dir = Path(out_dir) / "points" / point.ident
    manifest = point_dir / "manifest.json"
    if not manifest.exists():
        return None
    try:
        with open(manifest) as fh:
            meta = json.load(fh)
        if meta.get("status") != "done" or meta.get("hash") != manifest_hash(config):
            return None
        return load_summaries(point_dir / "summary.csv")
    except (OSError, ValueError, ConfigurationError):
        return None


def run_sweep(config, out_dir, workers=1, dry_run=False):
    """Cartesian sweep with resume; returns (summaries, ratio rows,
    failures).  Per-point failures are recorded and the sweep goes on."""
    points = sweep_points(config)
    if dry_run:
        return points, [], []
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    by_point = {}
    pending = []
    for point in points:
        rows = _completed_rows(config, point, out_dir)
        if rows is None:
            pending.append(point)
        else:
            by_point[point] = rows
    failures = []
    if workers > 1 and len(pending) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            jobs = [(config, point, out_dir) for point in pending]
            iterator = pool.map(_run_point_safe, jobs)
            for point, rows, error in iterator:
                if error is not None:
                    failures.append((point, error))
                else:
                    by_point[point] = rows
    else:
        for point in pending:
            try:
                by_point[point] = run_experiment(config, point, out_dir)
            except Exception as err:
                failures.append((point, f"{type(err).__name__}: {err}"))
    summaries = [row for point in points if point in by_point for row in by_point[point]]
    write_summaries(out_dir / "summary.csv", summaries)
    ratios = ratio_table(summaries) if len(config.t2) > 1 else []
    if ratios:
        write_ratio_table(out_dir / "ratios.csv", ratios)
    return summaries, ratios, failures


def _run_point_safe(args):
    config, point, out_dir = args
    try:
        return point, run_experiment(config, point, out_dir), None
    except Exception as err:
        return point, None, f"{type(err).__name__}: {err}"
