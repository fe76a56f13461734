"""``bsl`` command line: survival probabilities, searches, scaling sweeps, plots, verify."""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .experiments import DEFAULT_SEED, ExperimentConfig, default_jobs, run_experiment
from .plot import PlotSpec, emit_plot
from .report import parse_csv, render, write_text
from .search import DEFAULT_BUDGET
from .tree_oracle import MASK64

SEED_ENV = "BSL_SEED"


def parse_seed(text: str) -> int:
    """Decimal or 0x-prefixed hexadecimal unsigned 64-bit integer."""
    t = text.strip().lower()
    try:
        v = int(t, 16) if t.startswith("0x") else int(t, 10)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}: use decimal or 0x-hex") from None
    if not 0 <= v <= MASK64:
        raise argparse.ArgumentTypeError(f"seed {text!r} is outside the unsigned 64-bit range")
    return v


def resolve_seed(flag: int | None, env: dict | None = None) -> int:
    """Seed precedence: explicit flag, then $BSL_SEED, then the built-in default."""
    if flag is not None:
        return flag
    env = os.environ if env is None else env
    raw = env.get(SEED_ENV)
    if raw:
        try:
            return parse_seed(raw)
        except argparse.ArgumentTypeError as exc:
            raise SystemExit(f"bsl: {SEED_ENV}: {exc}") from None
    return DEFAULT_SEED


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bsl", description="Search cost for nearly optimal paths in a Bernoulli-labelled binary tree.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp, trials=True):
        sp.add_argument("--seed", type=parse_seed, default=None, help="master seed (decimal or 0x-hex); default $BSL_SEED or 0x5EED")
        if trials:
            sp.add_argument("--trials", type=int, default=1)
        sp.add_argument("--jobs", type=int, default=None, help="worker processes (default: number of cores)")
        sp.add_argument("--out", default=None, help="output file (default: stdout)")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")

    sp = sub.add_parser("rho", help="survival probability rho(p; eps, n)")
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--eps", type=float, required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--method", choices=("dp", "mc", "gf"), default="dp")
    common(sp)

    sp = sub.add_parser("search", help="run IDFS or greedy look-ahead on seeded trees")
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--eps", type=float, required=True)
    sp.add_argument("--r", type=float, default=0.5)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--algo", choices=("idfs", "greedy"), default="idfs")
    sp.add_argument("--lookahead", type=int, default=8)
    sp.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    sp.add_argument("--record", action="store_true", help="keep the examined order and report the good-vertex audit")
    common(sp)

    sp = sub.add_parser("scaling", help="IDFS cost over an (eps, n) grid")
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--eps-list", type=_float_list, required=True)
    sp.add_argument("--n-list", type=_int_list, required=True)
    sp.add_argument("--r", type=float, default=0.5)
    sp.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    common(sp)

    sp = sub.add_parser("verify", help="run the acceptance checks")
    sp.add_argument("--seed", type=parse_seed, default=None)
    sp.add_argument("--jobs", type=int, default=None)
    sp.add_argument("--out", default=None, help="also write the report to this file")

    sp = sub.add_parser("plot", help="SVG plot of columns from a CSV report")
    sp.add_argument("--in", dest="infile", required=True)
    sp.add_argument("--x", required=True)
    sp.add_argument("--y", required=True, help="column or comma-separated columns")
    sp.add_argument("--logx", action="store_true")
    sp.add_argument("--logy", action="store_true")
    sp.add_argument("--title", default="")
    sp.add_argument("--out", required=True)
    return ap


def config_from_args(args) -> ExperimentConfig:
    seed = resolve_seed(args.seed)
    d = {"command": args.command, "seed": seed, "output": args.out, "format": args.format, "trials": args.trials}
    for name in ("p", "eps", "n", "r", "method", "algo", "lookahead", "budget", "record", "eps_list", "n_list"):
        if hasattr(args, name):
            d[name] = getattr(args, name)
    return ExperimentConfig(**d)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    jobs = getattr(args, "jobs", None) or default_jobs()

    if args.command == "verify":
        from .verify import verify_suite

        report, ok = verify_suite(resolve_seed(args.seed), jobs)
        sys.stdout.write(report)
        if args.out:
            write_text(args.out, report)
        return 0 if ok else 1

    if args.command == "plot":
        try:
            _, _, rows = parse_csv(Path(args.infile).read_text(encoding="utf-8"))
            spec = PlotSpec(args.x, [c for c in args.y.split(",") if c], args.logx, args.logy, args.title)
            write_text(args.out, emit_plot(rows, spec))
        except (OSError, ValueError) as exc:
            print(f"bsl plot: {exc}", file=sys.stderr)
            return 2
        return 0

    try:
        cfg = config_from_args(args).validate()
        columns, rows = run_experiment(cfg, jobs)
    except ValueError as exc:
        print(f"bsl {args.command}: {exc}", file=sys.stderr)
        return 2
    write_text(cfg.output, render(columns, rows, cfg.format, cfg.header()))
    return 0


if __name__ == "__main__":
    sys.exit(main())
