"""Command-line entry point for the Monte Carlo sweeps.

Exit codes: 0 on success, 2 on configuration errors, 1 on runtime failures.
"""

from __future__ import annotations

import argparse
import sys

from .errors import MoestError, ParameterError
from .experiments import (
    load_config,
    parse_algo_list,
    parse_dims,
    parse_float_list,
    parse_int_list,
    run_mismatch_sweep,
    run_path_sweep,
    run_snr_sweep,
    summarize,
    write_csv,
)

_X_FIELDS = {"snr-sweep": "snr_db", "path-sweep": "c", "mismatch-sweep": "c_hat"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="moest",
        description=(
            "Monte Carlo NMSE experiments for reflected-channel estimation: "
            "rank-constrained manifold optimization vs. plain alternating "
            "least squares."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("snr-sweep", "NMSE versus SNR at a fixed number of paths"),
        ("path-sweep", "NMSE versus the true number of paths"),
        ("mismatch-sweep", "NMSE versus the assumed number of paths"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", metavar="FILE", help="key=value config file")
        cmd.add_argument("--seed", type=int)
        cmd.add_argument("--trials", type=int)
        cmd.add_argument(
            "--snr", type=parse_float_list, metavar="DB[,DB...]",
            help="comma-separated SNR points in dB",
        )
        cmd.add_argument(
            "--dims", type=parse_dims, metavar="NRxNTxNI",
            help="receive x transmit x surface element counts, e.g. 16x36x64",
        )
        cmd.add_argument("--blocks", type=int, help="training blocks B (default NI)")
        cmd.add_argument("--pilot-len", type=int, help="pilot length T (default NT)")
        cmd.add_argument(
            "--paths", type=parse_int_list, metavar="C[,C...]",
            help="true path count (comma list only for path-sweep)",
        )
        cmd.add_argument(
            "--assumed-paths", type=parse_int_list, metavar="CH[,CH...]",
            help="assumed path count(s); the mismatch-sweep axis",
        )
        cmd.add_argument(
            "--algo", type=parse_algo_list, metavar="NAME[,NAME...]",
            help="subset of mo-est,alt-ls",
        )
        cmd.add_argument("--restarts", type=int, help="random restarts for mo-est")
        cmd.add_argument(
            "--noiseless", action="store_true", default=None,
            help="disable observation noise",
        )
        cmd.add_argument("--mode", choices=("model", "e2e"))
        cmd.add_argument("--workers", type=int, help="parallel trial workers")
        cmd.add_argument("--out", required=True, metavar="CSV", help="output CSV path")
        cmd.add_argument(
            "--plot", metavar="IMAGE",
            help="also render the mean-NMSE curves to this file",
        )
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    keys = (
        "seed", "trials", "snr", "dims", "blocks", "pilot_len", "paths",
        "assumed_paths", "algo", "restarts", "noiseless", "mode", "workers",
    )
    return {k: getattr(args, k) for k in keys}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config, _overrides(args))
        if args.command == "snr-sweep":
            rows = run_snr_sweep(config)
        elif args.command == "path-sweep":
            rows = run_path_sweep(config)
        else:
            rows = run_mismatch_sweep(config)
    except ParameterError as exc:
        print(f"moest: config error: {exc}", file=sys.stderr)
        return 2
    except (MoestError, OSError) as exc:
        print(f"moest: {exc}", file=sys.stderr)
        return 1

    x_field = _X_FIELDS[args.command]
    try:
        write_csv(rows, args.out)
        if args.plot:
            from .plotting import plot_sweep

            plot_sweep(rows, args.plot, x_field)
    except (MoestError, OSError) as exc:
        print(f"moest: {exc}", file=sys.stderr)
        return 1

    print(f"wrote {len(rows)} rows to {args.out}")
    for algo, x, _, mean_db in summarize(rows, x_field):
        print(f"  {algo:7s} {x_field}={x:g}: mean NMSE {mean_db:.2f} dB")
    return 0


if __name__ == "__main__":
    sys.exit(main())
