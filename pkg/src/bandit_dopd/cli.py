"""Command-line interface.

Examples
--------
::

    bandit-dopd run --preset desk --seed 3 --out runs/desk
    bandit-dopd run --config exp.yaml --mode full-info --tau0 0
    bandit-dopd sweep --preset desk --param tau0 --values 0,4,8 --seeds 1,2,3 --out runs/sweep

Exit codes: 0 success, 2 configuration error, 3 assumption-check abort
(connectivity or invariant), 4 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Optional, Sequence

from bandit_dopd import __version__
from bandit_dopd.config import parse_config
from bandit_dopd.exceptions import ConfigError, ConnectivityError, InvariantViolation, ParameterError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ASSUMPTION = 3
EXIT_IO = 4

log = logging.getLogger("bandit_dopd")


def _key_value(text: str) -> tuple[str, str]:
    key, sep, value = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    return key.strip(), value.strip()


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="FILE", help="flat YAML key-value config file")
    p.add_argument("--preset", metavar="NAME", help="named preset: desk or paper-sec4")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--mode", choices=("bandit", "full-info"), help="feedback model")
    p.add_argument("--tau0", type=float, help="trigger scale tau0 (tau_t = tau0 / t^theta3)")
    p.add_argument("--T", dest="T", type=int, metavar="T", help="horizon")
    p.add_argument("--out", metavar="DIR", help="output directory")
    p.add_argument("--debug-invariants", action="store_true", default=None,
                   help="check algorithm invariants every round and abort on breach")
    p.add_argument("--no-trigger", action="store_true", help="broadcast every round")
    p.add_argument("--static-comparator", action="store_true", default=None,
                   help="compute static-comparator regret")
    p.add_argument("--dynamic-comparator", action="store_true", default=None,
                   help="compute dynamic-comparator regret (one solve per round)")
    p.add_argument("--set", dest="overrides", action="append", type=_key_value, default=[], metavar="KEY=VALUE",
                   help="override any config key, e.g. --set graph.p_edge=0.2 (repeatable)")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bandit-dopd",
        description="Event-triggered distributed bandit online primal-dual simulator.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment")
    _add_config_args(run)

    sw = sub.add_parser("sweep", help="run a parameter sweep over several seeds")
    _add_config_args(sw)
    sw.add_argument("--param", required=True, choices=("tau0", "theta", "c", "kappa"))
    sw.add_argument("--values", required=True, type=_float_list, help="comma-separated values")
    sw.add_argument("--seeds", required=True, type=_int_list, help="comma-separated seeds")
    sw.add_argument("--workers", type=int, help="worker processes (also capped by BANDIT_DOPD_THREADS)")
    return parser


def config_from_args(args: argparse.Namespace):
    overrides = dict(args.overrides)
    overrides.update({
        "seed": args.seed,
        "mode": args.mode,
        "trigger.tau0": args.tau0,
        "T": args.T,
        "out": args.out,
        "debug_invariants": args.debug_invariants,
        "compute_static_comparator": args.static_comparator,
        "compute_dynamic_comparator": args.dynamic_comparator,
    })
    if args.no_trigger:
        overrides["trigger.kind"] = "none"
    return parse_config(args.config, args.preset, overrides)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    # Imported here so `--help` stays fast.
    from bandit_dopd.harness import run_experiment, sweep

    try:
        config = config_from_args(args)
        if args.command == "run":
            result = run_experiment(config)
            print(f"wrote {config.out}/metrics.csv ({result.T} rounds, "
                  f"{int(result.cum_triggers[-1])} triggers)")
        else:
            root = sweep(config, args.param, args.values, args.seeds, workers=args.workers)
            print(f"wrote {root}/aggregate.csv")
    except (ConfigError, ParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConnectivityError, InvariantViolation) as exc:
        print(f"assumption check failed: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
