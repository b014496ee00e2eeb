"""Command line: ``python -m smoothmax {run,validate,summarize,oracle}``."""
from __future__ import annotations

import argparse
import logging
import sys

from .errors import NumericError, ValidationError
from .harness import EXIT_NUMERIC, EXIT_OK, EXIT_VALIDATION, load_config, run_experiment, summarize
from .oracles import ORACLES


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="smoothmax", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run the experiment described by a YAML config")
    p.add_argument("config")
    p.add_argument("--seed", type=int, default=None, help="override the field seed")
    p = sub.add_parser("validate", help="parse and validate a config without running it")
    p.add_argument("config")
    p.add_argument("--seed", type=int, default=None)
    p = sub.add_parser("summarize", help="write summary.md for a results directory")
    p.add_argument("directory")
    p = sub.add_parser("oracle", help="run a built-in oracle check")
    p.add_argument("name", choices=sorted(ORACLES) + ["all"])
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "validate":
            cfg = load_config(args.config, args.seed)
            print(f"ok: {cfg.kind}, seed {cfg.seed}")
            return EXIT_OK
        if args.command == "run":
            cfg = load_config(args.config, args.seed)
            out = run_experiment(cfg)
            if out.status != EXIT_OK:
                print(f"numeric failure: {out.error}; partial rows in {out.csv_path}", file=sys.stderr)
                return out.status
            print(out.csv_path)
            print(out.manifest_path)
            return EXIT_OK
        if args.command == "summarize":
            print(summarize(args.directory))
            return EXIT_OK
        names = sorted(ORACLES) if args.name == "all" else [args.name]
        failed = 0
        for name in names:
            ok, msg = ORACLES[name]()
            failed += not ok
            print(f"{'PASS' if ok else 'FAIL'} {name}: {msg}")
        return 1 if failed else EXIT_OK
    except ValidationError as exc:
        print(f"validation error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericError as exc:
        print(f"numeric error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
