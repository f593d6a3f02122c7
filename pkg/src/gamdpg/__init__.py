"""GAM training pipeline: energy-based sequence models fitted by moment
matching and projected onto autoregressive policies."""

from .ebm import (
    GamPotential,
    LambdaFit,
    LambdaTrainConfig,
    estimate_logZ,
    load_lambda,
    rejection_sample,
    save_lambda,
    snis_moment,
    train_lambda,
    upper_bound_beta,
)
from .errors import (
    ConfigurationError,
    InfeasibleProcessError,
    RejectionInfeasibleError,
    TrainingError,
)
from .evaluation import (
    RunSummary,
    ce_of_plambda,
    cross_entropy,
    load_summaries,
    motif_frequency,
    ratio_table,
    write_summaries,
)
from .experiments import (
    ExperimentConfig,
    Point,
    manifest_hash,
    run_experiment,
    run_sweep,
    sweep_points,
)
from .features import BINARY_FEATURE_NAMES, LENGTH_FEATURE_NAMES, parse_mask, phi_batch
from .policy import (
    AmTrainConfig,
    PolicyHyper,
    PolicyParams,
    grad_logprob,
    init_policy,
    load_policy,
    logprob,
    logprob_batch,
    sample_batch,
    save_policy,
    train_am,
    weighted_grad_sum,
)
from .rng import stream
from .sequences import SeqBatch, Sequence
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

__version__ = "0.1.0"

__all__ = [
    "AmTrainConfig",
    "BINARY_FEATURE_NAMES",
    "ConfigurationError",
    "Dpg2Config",
    "ExperimentConfig",
    "GamPotential",
    "InfeasibleProcessError",
    "LENGTH_FEATURE_NAMES",
    "LambdaFit",
    "LambdaTrainConfig",
    "Point",
    "PolicyHyper",
    "PolicyParams",
    "ReinforceConfig",
    "RejectionInfeasibleError",
    "RunSummary",
    "SeqBatch",
    "Sequence",
    "TrainingError",
    "TruthModel",
    "ce_of_plambda",
    "cross_entropy",
    "distill",
    "dpg_off",
    "dpg_on",
    "estimate_logZ",
    "gam_handle",
    "grad_logprob",
    "init_policy",
    "load_lambda",
    "load_policy",
    "load_summaries",
    "logprob",
    "logprob_batch",
    "make_splits",
    "manifest_hash",
    "motif_frequency",
    "parse_mask",
    "phi_batch",
    "ratio_table",
    "reinforce_pg",
    "rejection_sample",
    "run_experiment",
    "run_sweep",
    "sample_batch",
    "save_lambda",
    "save_policy",
    "snis_moment",
    "stream",
    "sweep_points",
    "train_am",
    "train_lambda",
    "true_entropy",
    "true_entropy_per_token",
    "truth_handle",
    "upper_bound_beta",
    "weighted_grad_sum",
    "write_summaries",
]
