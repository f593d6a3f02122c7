#!/usr/bin/env python3
"""Run (or resume) the acceptance sweeps sequentially.

Completed points are skipped by manifest hash, so this script is safe to
kill and restart at any time.  Once it finishes, tests/test_acceptance.py
reads the cached artifacts instead of recomputing them.
"""

import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))

import acceptance_grid


def main():
    names = sys.argv[1:] or acceptance_grid.SWEEP_ORDER
    unknown = [n for n in names if n not in acceptance_grid.SWEEPS]
    if unknown:
        sys.exit(f"unknown sweeps: {unknown}; pick from {sorted(acceptance_grid.SWEEPS)}")
    print(f"output root: {acceptance_grid.RUNS_DIR}", flush=True)
    for name in names:
        t0 = time.time()
        rows = acceptance_grid.sweep_rows(name)
        print(
            f"{name}: {len(rows)} summary rows, {time.time() - t0:.0f}s",
            flush=True,
        )
    print("requested sweeps complete", flush=True)


if __name__ == "__main__":
    main()
