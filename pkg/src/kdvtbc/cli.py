"""Command-line entry point.

Subcommands

    simulate  <config>                       run once, write snapshots/traces
    converge  <config> --vary N --values ... convergence table and figure
    kernels   <config> --dump <path>         boundary-kernel cache file
    reference <config> --times ...           reference solution snapshots

Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 I/O error.
"""

import argparse
import sys

from .assembly import BandwidthViolation
from .harness import (
    ConfigError,
    NonConstantAdvection,
    dump_kernels,
    read_config,
    reference_snapshots,
    run_convergence,
    run_experiment,
)
from .petrov_galerkin import SingularBasisSystem, SingularLiftSystem
from .stepper import SupportViolation
from .ztbc import KernelAccuracyError, SignPatternViolation

_NUMERICAL_ERRORS = (
    SupportViolation,
    SignPatternViolation,
    KernelAccuracyError,
    BandwidthViolation,
    SingularBasisSystem,
    SingularLiftSystem,
    NonConstantAdvection,
    ArithmeticError,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kdvtbc",
        description="Spectral splitting solver for the linearized KdV "
                    "equation with transparent boundary conditions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one simulation")
    sim.add_argument("config")
    sim.add_argument("--no-figures", action="store_true",
                     help="skip PNG rendering")

    conv = sub.add_parser("converge", help="run a convergence sweep")
    conv.add_argument("config")
    conv.add_argument("--vary", choices=("N", "M"), required=True)
    conv.add_argument("--values", nargs="+", type=int, required=True)
    conv.add_argument("--workers", type=int, default=4)
    conv.add_argument("--no-figures", action="store_true")

    ker = sub.add_parser("kernels", help="dump the boundary-kernel cache")
    ker.add_argument("config")
    ker.add_argument("--dump", required=True, metavar="PATH")

    ref = sub.add_parser("reference", help="write reference snapshots")
    ref.add_argument("config")
    ref.add_argument("--times", nargs="+", type=float, required=True)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = read_config(args.config)
        if args.command == "simulate":
            paths = run_experiment(cfg, render=not args.no_figures)
            result = paths.pop("result")
            d = result.diagnostics
            print(f"wrote {len(paths)} files to {cfg.output_dir}")
            print(f"stability ratio {d['guard_ratio']:.3e} "
                  f"({'ok' if d['guard_ok'] else 'VIOLATED'}), "
                  f"norm growth {d['norm_growth']:.3f}, "
                  f"{d['wall_clock_s']:.2f}s")
        elif args.command == "converge":
            paths = run_convergence(cfg, args.vary, args.values,
                                    render=not args.no_figures,
                                    workers=args.workers)
            slope_name = "alpha" if args.vary == "N" else "beta"
            for i, v in enumerate(args.values):
                slope = "" if i == 0 else f"  {slope_name}={paths['slopes'][i-1]:.4g}"
                print(f"{args.vary}={v}: err={paths['errors'][i]:.4e}{slope}")
            print(f"table: {paths['table']}")
        elif args.command == "kernels":
            path = dump_kernels(cfg, args.dump)
            print(f"kernel cache written to {path}")
        elif args.command == "reference":
            paths = reference_snapshots(cfg, args.times)
            for t in sorted(paths):
                print(f"t={t:g}: {paths[t]}")
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
