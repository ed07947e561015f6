"""Command-line entry point: one subcommand per scenario kind.

Every subcommand takes --config <path>, --out <dir>, --seed <u64> and
exits 0 iff all tolerances configured for the scenario pass.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigError
from .scenarios import load_config, run, validate

_SUBCOMMAND_KINDS = {
    "envelope": ("envelope",),
    "track": ("track",),
    "evolve": ("evolve-lab", "evolve-normalized"),
    "transform": ("transform",),
    "verify": ("verify-equivalence",),
    "pauli": ("verify-pauli",),
    "spectrum": ("spectrum",),
    "lr-check": ("lewis-riesenfeld",),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ermakov-lab",
        description="Envelope, tracking, and wave-equation scenarios in "
        "lab and normalized frames",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, kinds in _SUBCOMMAND_KINDS.items():
        p = sub.add_parser(name, help=f"run a {' / '.join(kinds)} scenario")
        p.add_argument("--config", required=True, help="scenario TOML file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="seed for random states")
        p.add_argument(
            "--validate-only",
            action="store_true",
            help="report config diagnostics without running",
        )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    kinds = _SUBCOMMAND_KINDS[args.command]
    try:
        cfg = load_config(
            args.config,
            kind=kinds[0] if len(kinds) == 1 else None,
            out_dir=args.out,
            seed=args.seed,
        )
        if cfg.kind not in kinds:
            print(
                f"error: config kind {cfg.kind!r} is not valid for "
                f"subcommand {args.command!r}",
                file=sys.stderr,
            )
            return 2
        diags = validate(cfg)
        if args.validate_only:
            for d in diags:
                print(f"diagnostic: {d}")
            print("config ok" if not diags else f"{len(diags)} diagnostic(s)")
            return 0 if not diags else 2
        if diags:
            for d in diags:
                print(f"error: {d}", file=sys.stderr)
            return 2
        report = run(cfg)
    except ConfigError as exc:
        for d in exc.diagnostics:
            print(f"error: {d}", file=sys.stderr)
        return 2
    for line in report.summary_lines():
        print(line)
    print(f"report: {report.outputs[-1]}")
    return 0 if report.passed else 1


if __name__ == "__main__":
    raise SystemExit(main())
