"""Command-line driver.

    lrlat <subcommand> --config CONFIG.yaml --out DIR [--threads N]

Subcommands: dispersion, lr-scan, dyson, converge, oracle-check.  Exit codes:
0 success, 2 config error, 3 numeric guard error, 4 I/O error.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

import yaml

from .config import load_yaml, parse_config
from .errors import ConfigError, LrlatError
from .experiments import run_experiment

SUBCOMMANDS = {
    "dispersion": "dispersion",
    "lr-scan": "lightcone",
    "dyson": "dyson",
    "converge": "converge",
    "oracle-check": "oracle",
}

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("lrlat")


def _setup_logging():
    level = os.environ.get("LRLAT_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.ERROR), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lrlat", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, kind in SUBCOMMANDS.items():
        p = sub.add_parser(name, help=f"run a {kind} experiment")
        p.add_argument("--config", required=True, help="YAML/JSON experiment config")
        p.add_argument("--out", required=True, help="output directory for CSV + JSON sidecar")
        p.add_argument("--threads", type=int, default=1, help="scan parallelism (0 = auto)")
    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    kind = SUBCOMMANDS[args.command]
    try:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"lrlat: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        try:
            raw = load_yaml(text)
        except yaml.YAMLError:
            raw = None
        if isinstance(raw, dict) and "kind" not in raw:
            text = yaml.safe_dump({"kind": kind, **raw}, sort_keys=False)
        cfg = parse_config(text)
        if cfg.kind != kind:
            raise ConfigError(f"config kind {cfg.kind!r} does not match subcommand {args.command!r}")
    except ConfigError as exc:
        for v in exc.violations:
            print(f"lrlat: config error: {v}", file=sys.stderr)
        return EXIT_CONFIG
    workers = args.threads if args.threads > 0 else (os.cpu_count() or 1)
    try:
        records, status = run_experiment(cfg, args.out, workers=workers)
    except ConfigError as exc:
        print(f"lrlat: config error during {args.command}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LrlatError as exc:
        print(f"lrlat: numeric guard error during {args.command}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"lrlat: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    log.info("%s: %d rows written to %s", args.command, len(records), args.out)
    return status


if __name__ == "__main__":
    sys.exit(main())
