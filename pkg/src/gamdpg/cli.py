"""Command-line entry point: run one experiment point or a sweep.

Configuration precedence is flag > config file > built-in default.  The
config file is flat ``key = value`` text; sub-config fields use a group
prefix (``am_lr``, ``lam_max_iters``, ``dpg_episodes``, ``pg_lr``).
Grid-valued keys take comma-separated lists.  Exit codes: 0 success,
2 configuration error, 3 runtime failure (partial results kept).
"""

import argparse
import os
import sys
from dataclasses import fields, replace
from pathlib import Path

from .errors import ConfigurationError
from .evaluation import SUMMARY_HEADER
from .experiments import (
    ExperimentConfig,
    Point,
    manifest_hash,
    run_experiment,
    run_sweep,
)

OUTPUT_ROOT_ENV = "GAMDPG_OUTPUT_ROOT"

_GROUPS = ("am", "lam", "dpg", "pg")
_FLAG_TO_KEY = {
    "motif": "motifs",
    "d_size": "d_grid",
    "seed": "seeds",
    "mask": "masks",
    "t1": "t1",
    "t2": "t2",
    "potential": "potential_source",
}


def _coerce_scalar(raw, like):
    if like is None:
        return None if raw.lower() in ("none", "null") else float(raw)
    kind = type(like)
    if kind is bool:
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ConfigurationError(f"expected a boolean, got {raw!r}")
    try:
        return kind(raw)
    except ValueError as err:
        raise ConfigurationError(f"bad value {raw!r}: {err}") from None


def _coerce(name, raw, defaults):
    value = getattr(defaults, name)
    if isinstance(value, tuple):
        parts = [p.strip() for p in str(raw).split(",") if p.strip()]
        if not parts:
            raise ConfigurationError(f"{name} needs at least one value")
        like = value[0] if value else ""
        return tuple(_coerce_scalar(p, like) for p in parts)
    return _coerce_scalar(str(raw).strip(), value)


def parse_config_file(path):
    """Flat key = value lines; '#' starts a comment."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigurationError(f"cannot read config file: {err}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected key = value")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def build_config(pairs):
    """ExperimentConfig from a {key: raw string} mapping."""
    defaults = ExperimentConfig()
    top = {}
    grouped = {g: {} for g in _GROUPS}
    field_names = {f.name for f in fields(ExperimentConfig)}
    for key, raw in pairs.items():
        group, _, rest = key.partition("_")
        if group in _GROUPS and rest:
            sub = getattr(defaults, group)
            if rest not in {f.name for f in fields(sub)}:
                raise ConfigurationError(f"unknown config key {key!r}")
            if key == "lam_method":
                raise ConfigurationError("set t1 instead of lam_method")
            grouped[group][rest] = _coerce(rest, raw, sub)
        elif key in field_names:
            top[key] = _coerce(key, raw, defaults)
        else:
            raise ConfigurationError(f"unknown config key {key!r}")
    for group, values in grouped.items():
        if values:
            top[group] = replace(getattr(defaults, group), **values)
    return ExperimentConfig(**top)


def resolve_out_dir(flag_value):
    if flag_value:
        return Path(flag_value)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    return Path(root) if root else Path("runs")


def _add_common(parser):
    parser.add_argument("--config", help="flat key = value config file")
    parser.add_argument("--motif", help="motif bit string(s), comma separated")
    parser.add_argument("--d-size", dest="d_size", help="training set size(s)")
    parser.add_argument("--seed", help="seed(s)")
    parser.add_argument("--mask", help="feature mask(s), e.g. 1001111 or Mv1001111")
    parser.add_argument("--t1", help="moment fitting method: snis or rs")
    parser.add_argument("--t2", help="projection methods, comma separated")
    parser.add_argument(
        "--potential", help="potential source for projection: gam or wn_f"
    )
    parser.add_argument(
        "--out-dir", dest="out_dir",
        help=f"output directory (default ${OUTPUT_ROOT_ENV} or ./runs)",
    )


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gamdpg",
        description="Two-stage sequence model training: fit an unnormalized "
        "model by moment matching, then project it onto an autoregressive "
        "policy.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a single grid point")
    _add_common(run)
    sweep = sub.add_parser("sweep", help="run the full cartesian grid")
    _add_common(sweep)
    sweep.add_argument("--workers", type=int, default=1)
    sweep.add_argument(
        "--dry-run", dest="dry_run", action="store_true",
        help="print the point list without executing",
    )
    return parser


def _config_from_args(args):
    pairs = parse_config_file(args.config) if args.config else {}
    for flag, key in _FLAG_TO_KEY.items():
        value = getattr(args, flag, None)
        if value is not None:
            pairs[key] = value
    return build_config(pairs)


def _print_rows(rows):
    print(SUMMARY_HEADER)
    for row in rows:
        print(",".join(str(v) for v in row.to_row()))


def _cmd_run(args):
    config = _config_from_args(args)
    singletons = [
        ("motifs", "--motif"), ("masks", "--mask"),
        ("d_grid", "--d-size"), ("seeds", "--seed"),
    ]
    for name, flag in singletons:
        if len(getattr(config, name)) != 1:
            raise ConfigurationError(f"run needs exactly one {flag} value")
    point = Point(
        config.motifs[0], config.masks[0], config.d_grid[0], config.seeds[0]
    )
    rows = run_experiment(config, point, resolve_out_dir(args.out_dir))
    _print_rows(rows)
    return 0


def _cmd_sweep(args):
    config = _config_from_args(args)
    out_dir = resolve_out_dir(args.out_dir)
    if args.dry_run:
        points, _, _ = run_sweep(config, out_dir, dry_run=True)
        print(f"manifest {manifest_hash(config)}")
        for point in points:
            print(point.ident)
        print(f"{len(points)} points")
        return 0
    summaries, ratios, failures = run_sweep(config, out_dir, workers=args.workers)
    print(f"{len(summaries)} summary rows -> {out_dir / 'summary.csv'}")
    if ratios:
        print(f"ratio table -> {out_dir / 'ratios.csv'}")
    for point, message in failures:
        print(f"FAILED {point.ident}: {message}", file=sys.stderr)
    return 3 if failures else 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_sweep(args)
    except ConfigurationError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 2
    except Exception as err:  # runtime failure, partial artifacts kept
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
