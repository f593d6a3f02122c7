"""Grid definitions shared by the acceptance tests and their runner.

The acceptance checks aggregate full sweeps (3 motifs x 3 seeds per
|D|), which take hours cold.  tools/run_acceptance.py runs the same
sweeps out of process and is safe to kill and restart; once its artifact
cache is warm, tests/test_acceptance.py re-reads everything in seconds.
This module is the single source of truth for the sweep configs so the
two entry points always agree on the manifest hash.

Sweeps are split by projection method, one sweep per (|D|, method):
at small |D| the policy-gradient projection alone needs most of the
per-point runtime budget, so it gets its own points rather than sharing
them with distillation.  The split costs nothing statistically: the
base policy, the fitted tilt, and every evaluation stream are keyed by
(seed, purpose, motif, n, |D|), so paired rows across sweeps see
bit-identical inputs.  Each sweep writes under its own subdirectory of
RUNS_DIR.
"""

import json
import os
from functools import lru_cache
from pathlib import Path

from gamdpg.experiments import ExperimentConfig, run_sweep, sweep_points
from gamdpg.training2 import Dpg2Config

RUNS_DIR = Path(
    os.environ.get(
        "GAMDPG_RUNS_DIR",
        Path(__file__).resolve().parent.parent / "runs" / "acceptance",
    )
)

SEEDS = (1234, 4444, 7777)

# Projection schedules sized per data regime.  Small |D| gives the tilt
# a large motif coefficient, so the frozen proposal rarely produces a
# high-weight episode; progress snowballs only after the first proposal
# swaps, and reaching them for the rarest motif needs a long run with
# many episodes per iteration.  At large |D| the tilt is mild and the
# short default schedule already lands on the target.
DPG_BY_D = {
    500: Dpg2Config(iterations=160, episodes=20000, lr=0.03),
    1000: Dpg2Config(iterations=120, episodes=20000, lr=0.03),
    5000: Dpg2Config(),
    10000: Dpg2Config(),
    20000: Dpg2Config(),
}


def _config(d_size, t2, masks=("1001111",)):
    return ExperimentConfig(
        masks=masks,
        d_grid=(d_size,),
        seeds=SEEDS,
        t2=t2,
        dpg=DPG_BY_D[d_size],
    )


SWEEPS = {
    "d500_dis": _config(500, ("distill",)),
    "d500_dpg": _config(500, ("dpg_off",)),
    "d1000_dis": _config(1000, ("distill",)),
    "d1000_dpg": _config(1000, ("dpg_off",)),
    "d1000_pg": _config(1000, ("pg",)),
    "d5000_dis": _config(5000, ("distill",)),
    "d5000_dpg": _config(5000, ("dpg_off",)),
    "d10000_dis": _config(10000, ("distill",)),
    "d10000_dpg": _config(10000, ("dpg_off",)),
    "d20000_dis": _config(20000, ("distill",)),
    "d20000_dpg": _config(20000, ("dpg_off",)),
    "mv1000_dis": _config(1000, ("distill",), masks=("Mv1001111",)),
    "mv1000_dpg": _config(1000, ("dpg_off",), masks=("Mv1001111",)),
}

# Most criteria read the 500/1000/20000 sweeps; run those first so a
# partially finished cache already answers the load-bearing checks.
SWEEP_ORDER = (
    "d500_dis", "d500_dpg", "d1000_dis", "d1000_dpg", "d1000_pg",
    "mv1000_dis", "mv1000_dpg", "d20000_dis", "d20000_dpg",
    "d5000_dis", "d5000_dpg", "d10000_dis", "d10000_dpg",
)

_METHOD_SUFFIX = {"distill": "dis", "dpg_off": "dpg", "pg": "pg"}


def sweep_name(d_label, method):
    return f"{d_label}_{_METHOD_SUFFIX[method]}"


@lru_cache(maxsize=None)
def sweep_rows(name):
    """Summaries for one sweep, running whatever is not cached yet."""
    summaries, _, failures = run_sweep(SWEEPS[name], RUNS_DIR / name)
    if failures:
        raise RuntimeError(f"sweep {name} had point failures: {failures}")
    return tuple(summaries)


def point_walls(name):
    """Recorded wall-clock seconds per completed point of a sweep."""
    walls = []
    for point in sweep_points(SWEEPS[name]):
        manifest = RUNS_DIR / name / "points" / point.ident / "manifest.json"
        with open(manifest) as fh:
            walls.append(float(json.load(fh)["wall_clock"]))
    return walls
