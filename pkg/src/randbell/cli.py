"""Command line entry point: ``randbell <subcommand> [flags]``.

Exit codes: 0 success, 2 configuration error, 3 size-limit error,
4 bound check failure under ``--assert-bounds``.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys

from .coplanar import OptimizerConfig
from .core import LOG_BASE, prop_bound, szk_bound, tail_probability
from .errors import BellError, ConfigError, SizeLimitError
from .harness import CampaignConfig, bounds_satisfied, emit_results, run_campaign

EXIT_CONFIG = 2
EXIT_SIZE = 3
EXIT_BOUNDS = 4

CAMPAIGNS = {
    "coplanar-mc": "coplanar_mc",
    "ww-mc": "ww_mc",
    "expectation-mc": "expectation_mc",
    "lhv": "lhv_sweep",
    "mk-baseline": "mk_baseline",
}


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int)
    p.add_argument("--r", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int, dest="master_seed")
    p.add_argument("--scheme", choices=["uniform", "random_normalized", "explicit"])
    p.add_argument("--starts", type=int)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--out", dest="output_path")
    p.add_argument("--format", choices=["csv", "json"], default="json")
    p.add_argument("--config", help="JSON file with campaign settings; flags override it")
    p.add_argument("--assert-bounds", action="store_true",
                   help="exit 4 if the empirical pass fraction is below the predicted fraction")
    p.add_argument("--timing", action="store_true", help="emit per-trial wall time (breaks byte determinism)")
    p.add_argument("--lhv", action="store_true", default=None, help="also compute the classical bound per trial")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="randbell", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in CAMPAIGNS:
        p = sub.add_parser(name)
        _common(p)
        if name == "ww-mc":
            p.add_argument("--exhaustive", action="store_true", default=None)
        if name == "expectation-mc":
            p.add_argument("--state", choices=["ghz", "random", "eigen"])
    b = sub.add_parser("bound", help="print closed-form bounds for (n, r)")
    b.add_argument("--n", type=int, required=True)
    b.add_argument("--r", type=int, default=2)
    return parser


def config_from_args(kind: str, args: argparse.Namespace) -> CampaignConfig:
    settings: dict = {}
    if args.config:
        try:
            with open(args.config) as fh:
                settings = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
    settings.pop("type", None)
    settings["kind"] = kind
    for key in ("n", "r", "trials", "master_seed", "scheme", "threads", "output_path", "lhv"):
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    for key in ("exhaustive", "state"):
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    opt = dict(settings.get("optimizer") or {})
    if args.starts is not None:
        opt["starts"] = args.starts
    if args.max_iters is not None:
        opt["max_iters"] = args.max_iters
    settings["optimizer"] = OptimizerConfig.from_dict(opt)
    if "n" not in settings:
        raise ConfigError("--n is required (flag or config file)")
    return CampaignConfig.from_dict(settings)


def _bounds(n: int, r: int) -> dict:
    out = {
        "n": n,
        "r": r,
        "log_base": LOG_BASE,
        "prop1": prop_bound("prop1", n, r),
        "prop2": prop_bound("prop2", n, r),
        "szk_prop1": szk_bound(r * n, n, 1.0),
        "tail_probability": tail_probability(n, r),
        "mk_reference": 2.0 ** ((n - 1) / 2),
    }
    if r == 2:
        out["prop3"] = prop_bound("prop3", n, r)
        out["ww_direct_szk"] = 9.0 * math.sqrt(n * math.log(2.0))
    return out


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        if args.command == "bound":
            print(json.dumps(_bounds(args.n, args.r), indent=2))
            return 0
        cfg = config_from_args(CAMPAIGNS[args.command], args)
        summary, records = run_campaign(cfg)
        if cfg.output_path:
            emit_results(summary, records, args.format, cfg.output_path, include_timing=args.timing)
        print(json.dumps(summary.to_dict(), indent=2, sort_keys=True))
        if args.assert_bounds and not bounds_satisfied(summary):
            print("bound check failed", file=sys.stderr)
            return EXIT_BOUNDS
        return 0
    except SizeLimitError as exc:
        print(f"size limit: {exc}", file=sys.stderr)
        return EXIT_SIZE
    except (ConfigError, BellError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
