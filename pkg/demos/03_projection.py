#!/usr/bin/env python3
"""
Stage two: turning the unnormalized model back into a policy.

P_lambda scores sequences but cannot generate them directly. This
script projects it onto an autoregressive policy three ways and prints
one cross-entropy table:

  distill   draw exact samples once (rejection), fit a fresh policy
  dpg_off   importance-weighted updates against a frozen proposal,
            keeping whichever of proposal/policy currently scores
            better on held-out data
  pg        plain REINFORCE on the potential as reward, included as a
            cautionary control: reward maximization collapses onto a
            handful of high-reward strings instead of matching the
            distribution

A final section swaps in the exact truth potential to show dpg_off
converging to the true entropy when the target is representable.
"""

from gamdpg.ebm import GamPotential, estimate_logZ, rejection_sample, train_lambda, upper_bound_beta
from gamdpg.evaluation import ce_of_plambda, cross_entropy, motif_frequency
from gamdpg.features import parse_mask
from gamdpg.policy import AmTrainConfig, PolicyHyper, init_policy, train_am
from gamdpg.rng import stream
from gamdpg.training2 import (
    Dpg2Config,
    ReinforceConfig,
    distill,
    dpg_off,
    gam_handle,
    reinforce_pg,
    truth_handle,
)
from gamdpg.truth import make_splits, true_entropy_per_token

MOTIF = "101"
N = 8
MASK = parse_mask("1001111")
SEED = 99


def main():
    # a deliberately data-starved base policy: stage two is only
    # interesting when r has room left to improve
    d, v, t = make_splits(MOTIF, N, d_size=350, v_size=200, t_size=1000, seed=SEED)
    hyper = PolicyHyper(d_in=3, h=8, max_gen_len=N + 1)
    h_tok = true_entropy_per_token(MOTIF, N)

    r = train_am(d, v, hyper=hyper,
                 config=AmTrainConfig(max_epochs=60, patience=10),
                 rng=stream(SEED, "demo", "r"))
    fit = train_lambda(d, r, MASK, MOTIF, N, rng=stream(SEED, "demo", "lam"))
    gp = GamPotential(r, fit.lam, MASK, MOTIF, N)
    logz, logz_se = estimate_logZ(gp, 50000, stream(SEED, "demo", "logz"))
    ce_pl, _ = ce_of_plambda(t, gp, logz, logz_se)

    # distillation: one batch of exact samples, then plain supervised fit
    beta = upper_bound_beta(fit.lam, MASK, N, max_gen_len=N + 1)
    sampler = lambda k, rng: rejection_sample(gp, beta, k, rng)[0]
    pi_dis = distill(sampler, 8000, v, hyper=hyper,
                     config=AmTrainConfig(max_epochs=60, patience=10),
                     rng=stream(SEED, "demo", "distill"))

    # off-policy gradient: no exact samples needed, r is the proposal.
    # the exponential weights want a gentler step size than the
    # hard-filter potential below
    pi_dpg, report = dpg_off(gam_handle(gp), r, v,
                             config=Dpg2Config(iterations=20, episodes=2000, lr=0.02),
                             rng=stream(SEED, "demo", "dpg"))

    # REINFORCE control
    pi_pg, diag = reinforce_pg(gam_handle(gp), init_policy(hyper, stream(SEED, "demo", "pg0")),
                               config=ReinforceConfig(iterations=15, episodes=2000, lr=0.05),
                               rng=stream(SEED, "demo", "pg"))

    rows = [
        ("true entropy", h_tok, None),
        ("r (base policy)", cross_entropy(t, r), r),
        ("p_lambda (scored)", ce_pl, None),
        ("distill", cross_entropy(t, pi_dis), pi_dis),
        ("dpg_off", cross_entropy(t, pi_dpg), pi_dpg),
        ("pg", cross_entropy(t, pi_pg), pi_pg),
    ]
    print(f"{'model':<20}{'CE(T) nats/tok':>16}{'motif freq':>12}")
    for name, ce, params in rows:
        freq = ("" if params is None else
                f"{motif_frequency(params, MOTIF, 2000, stream(SEED, 'demo', 'mtf', name)):>12.3f}")
        print(f"{name:<20}{ce:>16.4f}{freq}")
    print(f"\ndpg_off kept the policy over the proposal {report.swaps} times "
          f"({report.episodes_total} episodes total)")
    print(f"pg collapse: {diag['distinct_samples']} distinct strings in "
          f"{diag['diag_samples']} draws, mean length {diag['mean_length']:.1f}")

    ce_r, ce_dis, ce_dpg, ce_pg = rows[1][1], rows[3][1], rows[4][1], rows[5][1]
    assert ce_dis < ce_r and ce_dpg < ce_r, "both projections should beat r"
    assert ce_pg > ce_r, "reward maximization should not match the distribution"

    print()
    print("exact potential, same machinery")
    print("-" * 52)
    # the filter itself as potential: -n ln2 on accepting strings.
    # dpg_off projects it to a policy whose CE approaches the entropy.
    # fresh splits and a wider net; at this scale the run-to-run spread
    # is large, so the seed is part of the recipe
    seed2 = 1234
    d2, v2, t2 = make_splits(MOTIF, N, d_size=500, v_size=200, t_size=2000, seed=seed2)
    wide = PolicyHyper(d_in=3, h=16, max_gen_len=16)
    r2 = train_am(d2, v2, hyper=wide,
                  config=AmTrainConfig(max_epochs=60, patience=10),
                  rng=stream(seed2, "demo", "r2"))
    pi_t, rep2 = dpg_off(truth_handle(MOTIF, N), r2, v2,
                         config=Dpg2Config(iterations=45, episodes=3000, lr=0.02),
                         rng=stream(seed2, "demo", "dpg-truth"))
    ce_t = cross_entropy(t2, pi_t)
    print(f"CE(T, r)               = {cross_entropy(t2, r2):.4f}")
    print(f"CE(T, projected truth) = {ce_t:.4f} vs entropy {h_tok:.4f} "
          f"(gap {ce_t - h_tok:+.4f}, {rep2.swaps} proposal swaps)")
    assert ce_t - h_tok < 0.05


if __name__ == "__main__":
    main()
