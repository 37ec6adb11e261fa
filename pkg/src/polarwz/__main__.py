"""Command line: ``python -m polarwz {construct,run,sweep,verify}``.

Exit codes: 0 success, 1 verification failure, 2 configuration error.
"""
from __future__ import annotations

import argparse
import logging
import sys

from . import harness, verify
from .errors import CacheMissError


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="polarwz", description=__doc__.splitlines()[0])
    p.add_argument("--seed", type=int, default=None, help="master seed (overrides the config)")
    p.add_argument("--threads", type=int, default=None, help="worker processes for trials")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("construct", help="build code sets and write the cache")
    c.add_argument("--config", required=True)
    c.add_argument("--out", default="codes.json")

    r = sub.add_parser("run", help="simulate sessions, one CSV row per trial")
    r.add_argument("--config", required=True)
    r.add_argument("--cache", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--trials", type=int, default=None)

    s = sub.add_parser("sweep", help="aggregate sessions over a list of sigma_z2")
    s.add_argument("--config", required=True)
    s.add_argument("--cache", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--plot", default=None)
    s.add_argument("--trials", type=int, default=None)

    v = sub.add_parser("verify", help="run oracle suites")
    v.add_argument("--suite", action="append", choices=sorted(verify.SUITES),
                   help="suite to run (repeatable); default all")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "verify":
            checks = verify.run_suites(args.suite, seed=args.seed or 0)
            for chk in checks:
                print(chk.line())
            failed = sum(not c.ok for c in checks)
            print(f"{len(checks) - failed}/{len(checks)} checks passed")
            return 1 if failed else 0

        cfg = harness.load_config(args.config, seed=args.seed, threads=args.threads,
                                  trials=getattr(args, "trials", None))
        if args.command == "construct":
            code = harness.cmd_construct(cfg, args.out)
            for rc in code.rounds:
                print(f"round {rc.k}: payload {rc.sets.payload_bits} bits, "
                      f"map-decoded {int(rc.sets.i2.sum())}, shared {int(rc.sets.f1.sum())}")
            print(f"wrote {args.out}")
        elif args.command == "run":
            results = harness.cmd_run(cfg, args.cache, args.out)
            for sz2 in cfg.sigma_z2:
                s = harness.summarize([r for r in results if r.sigma_z2 == sz2])
                print(f"sigma_z2={sz2}: {s}")
        else:
            for row in harness.cmd_sweep(cfg, args.cache, args.out, args.plot):
                print(", ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}" for k, v in row.items()))
    except (harness.ConfigError, CacheMissError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
