"""scxbench: run one stress trial and print its report."""

from __future__ import annotations

import argparse
import sys

from .bench import STRUCTURES, PrefillTimeout, TrialConfig, emit_report, run_trial


def _on_off(v: str) -> bool:
    v = v.lower()
    if v not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected on or off")
    return v == "on"


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="scxbench",
        description="Prefill a concurrent structure, hammer it with worker threads, "
                    "then check the checksum law and the structure's invariants.")
    p.add_argument("--ds", choices=STRUCTURES, default="chromatic")
    p.add_argument("--threads", type=int, default=4)
    p.add_argument("--keyrange", type=int, default=10_000)
    p.add_argument("--insert", type=float, default=50.0, metavar="PCT")
    p.add_argument("--delete", type=float, default=50.0, metavar="PCT")
    p.add_argument("--successor", type=float, default=0.0, metavar="PCT")
    p.add_argument("--seconds", type=float, default=1.0)
    p.add_argument("--ops", type=int, default=None,
                   help="fixed operations per thread instead of a time limit")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k-threshold", type=int, default=4,
                   help="violations per path tolerated by chromatic-k and ravl-k")
    p.add_argument("--a", type=int, default=6)
    p.add_argument("--b", type=int, default=16)
    p.add_argument("--kcas-k", type=int, default=16)
    p.add_argument("--array-size", type=int, default=1 << 20)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--validate", type=_on_off, default=True, metavar="{on,off}")
    p.add_argument("--reclaim", type=_on_off, default=True, metavar="{on,off}")
    p.add_argument("--log-ops", metavar="FILE",
                   help="write the operation stream (single thread only) to FILE")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("scxbench: --threads must be at least 1", file=sys.stderr)
        return 2
    if args.log_ops and args.threads != 1:
        print("scxbench: --log-ops needs --threads 1", file=sys.stderr)
        return 2
    cfg = TrialConfig(
        ds=args.ds, threads=args.threads, keyrange=args.keyrange, insert_pct=args.insert,
        delete_pct=args.delete, successor_pct=args.successor, seconds=args.seconds,
        ops=args.ops, seed=args.seed, k_threshold=args.k_threshold, a=args.a, b=args.b,
        kcas_k=args.kcas_k, array_size=args.array_size, validate=args.validate,
        reclaim=args.reclaim, log_ops=bool(args.log_ops))
    try:
        rep = run_trial(cfg)
    except (ValueError, PrefillTimeout) as e:
        print(f"scxbench: {e}", file=sys.stderr)
        return 2
    print(emit_report(rep, args.format))
    if args.log_ops:
        with open(args.log_ops, "w") as f:
            for op, k in rep.op_log:
                f.write(f"{op} {k}\n")
    for e in rep.errors:
        print(f"scxbench: {e}", file=sys.stderr)
    return 0 if rep.checksum_ok and rep.valid and not rep.errors else 1


if __name__ == "__main__":
    sys.exit(main())
