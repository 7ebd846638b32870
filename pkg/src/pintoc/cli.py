"""Command-line front end.

Two subcommands:

* ``pintoc bench`` runs the horizon-scaling swing-up benchmark and writes
  one CSV row per (horizon, repetition),
* ``pintoc mpc`` runs the closed-loop simulation and writes the trajectory
  log.

Options come from a flat ``key = value`` config file, overridden by CLI
flags.  Exit codes: 0 on success, 1 on configuration errors, 2 when
``--strict`` is set and any benchmark row (or MPC step) failed to converge.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from .bench import RunConfig, emit_plotdata, run_benchmark, run_mpc

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_UNCONVERGED = 2

_FIELD_TYPES = {f.name: f for f in dataclasses.fields(RunConfig)}


class ConfigError(Exception):
    pass


def _parse_scalar(text: str):
    text = text.strip()
    lowered = text.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    if lowered in ("none", ""):
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text.strip("'\"")


def _parse_value(key: str, text: str):
    if key in ("horizons", "mpc_start"):
        parts = [p for p in text.replace(",", " ").split() if p]
        return tuple(_parse_scalar(p) for p in parts)
    return _parse_scalar(text)


def read_config_file(path: str | Path) -> dict:
    """Flat ``key = value`` format; blank lines and # comments ignored."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, text = (part.strip() for part in line.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{path}:{lineno}: unknown option {key!r}")
        values[key] = _parse_value(key, text)
    return values


def build_config(args: argparse.Namespace) -> RunConfig:
    values: dict = {}
    if args.config:
        values.update(read_config_file(args.config))
    for key in _FIELD_TYPES:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    try:
        return RunConfig(**values)
    except (TypeError, ValueError) as err:
        raise ConfigError(str(err)) from err


def _comma_ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(p) for p in text.replace(",", " ").split())
    except ValueError as err:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {text!r}") from err


def _comma_floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(p) for p in text.replace(",", " ").split())
    except ValueError as err:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text!r}") from err


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key = value config file")
    parser.add_argument("--system", choices=("pendulum", "cartpole"))
    parser.add_argument("--solver", choices=("barrier", "admm"))
    parser.add_argument("--executor", choices=("sequential", "parallel"))
    parser.add_argument("--dt", type=float, help="fixed step size in seconds")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out", help="output CSV path")
    parser.add_argument("--strict", action="store_true",
                        help="exit with code 2 if anything failed to converge")
    parser.add_argument("--plot-data", dest="plot_data", metavar="DIR",
                        help="also write plot-ready tables to DIR")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pintoc",
        description="Parallel-in-time Newton solvers: benchmarks and MPC simulation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    bench = sub.add_parser("bench", help="horizon-scaling benchmark")
    _add_common(bench)
    bench.add_argument("--horizons", type=_comma_ints,
                       help="comma-separated horizon list, e.g. 20,100,500")
    bench.add_argument("--total-time", dest="total_time", type=float,
                       help="plan duration in seconds when --dt is not given")
    bench.add_argument("--reps", dest="repetitions", type=int)

    mpc = sub.add_parser("mpc", help="closed-loop MPC simulation")
    _add_common(mpc)
    mpc.add_argument("--mpc-horizon", dest="mpc_horizon", type=int)
    mpc.add_argument("--sim-time", dest="sim_time", type=float)
    mpc.add_argument("--frequency", type=float)
    mpc.add_argument("--target-position", dest="target_position", type=float)
    mpc.add_argument("--mpc-start", dest="mpc_start", type=_comma_floats,
                     help="comma-separated initial plant state")
    return parser


def _cmd_bench(config: RunConfig, args) -> int:
    records = run_benchmark(config)
    n_bad = sum(1 for r in records if not r.converged)
    if config.out:
        print(f"wrote {len(records)} rows to {config.out}")
    for rec in records:
        print(f"  {rec.system} {rec.solver} {rec.executor} N={rec.horizon} "
              f"rep={rec.rep}: {rec.wall_s:.3f}s outer={rec.outer_iters} "
              f"inner={rec.inner_iters} converged={rec.converged}")
    if args.plot_data:
        for path in emit_plotdata(records, args.plot_data):
            print(f"plot data: {path}")
    if n_bad:
        print(f"{n_bad} of {len(records)} runs did not converge")
        if args.strict:
            return EXIT_UNCONVERGED
    return EXIT_OK


def _cmd_mpc(config: RunConfig, args) -> int:
    log = run_mpc(config)
    if config.out:
        log.write_csv(config.out)
        print(f"wrote {log.steps} steps to {config.out}")
    n_bad = int(np.count_nonzero(~log.converged)) if log.steps else 0
    final = ", ".join(f"{v:.4f}" for v in log.states[-1])
    print(f"{config.system} MPC: {log.steps} steps at {config.frequency:.0f} Hz, "
          f"final state ({final}), mean solve "
          f"{float(log.solve_s.mean()):.4f}s, unconverged steps: {n_bad}")
    if args.plot_data:
        for path in emit_plotdata(log, args.plot_data):
            print(f"plot data: {path}")
    if n_bad and args.strict:
        return EXIT_UNCONVERGED
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        config = build_config(args)
    except (ConfigError, OSError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "bench":
        return _cmd_bench(config, args)
    return _cmd_mpc(config, args)


if __name__ == "__main__":
    sys.exit(main())
