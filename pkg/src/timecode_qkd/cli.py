"""Command-line front end: ``run`` a single session or ``sweep`` one parameter."""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .serialization import (
    SUMMARY_COLUMNS,
    SWEEP_COLUMNS,
    ConfigError,
    config_from_dict,
    load_config_dict,
    report_row,
    report_to_json,
    rows_to_csv,
    set_param,
)
from .session import run_session

SWEEP_PARAMS = ("intercept_fraction", "eve.pulse_duration", "channel.transmittance", "n_pulses")
SWEEP_SEED_STRIDE = 10**6
EVE_CHOICES = ("none", "resend_full", "resend_short")


def _apply_overrides(data: dict, args) -> dict:
    if args.seed is not None:
        data = set_param(data, "seed", args.seed)
    if args.pulses is not None:
        data = set_param(data, "n_pulses", args.pulses)
    if args.eve is not None:
        current = data.get("eve", {})
        if current.get("strategy") != args.eve:
            data = dict(data, eve={"strategy": args.eve})
    return data


def _write_atomic(path: str | None, text: str) -> None:
    """Write the whole file or nothing."""
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def cmd_run(args) -> int:
    data = _apply_overrides(load_config_dict(args.config), args)
    cfg = config_from_dict(data)
    report = run_session(cfg, workers=args.workers)
    if args.format == "json":
        text = report_to_json(report)
    else:
        text = rows_to_csv([report_row(report)], SUMMARY_COLUMNS)
    _write_atomic(args.out, text)
    return 0


def sweep_values(start: float, stop: float, steps: int, param: str) -> list:
    values = np.linspace(start, stop, steps).tolist()
    if param == "n_pulses":
        return [int(round(v)) for v in values]
    return values


def cmd_sweep(args) -> int:
    if args.param not in SWEEP_PARAMS:
        raise ConfigError(f"--param: must be one of {', '.join(SWEEP_PARAMS)}, got {args.param!r}")
    if args.steps < 2:
        raise ConfigError(f"--steps: need at least 2 steps, got {args.steps}")
    if args.reps < 1:
        raise ConfigError(f"--reps: need at least 1 repetition, got {args.reps}")
    if getattr(args, "from") > args.to:
        raise ConfigError("--from must not exceed --to")
    base = _apply_overrides(load_config_dict(args.config), args)
    if args.param == "eve.pulse_duration" and base.get("eve", {}).get("strategy") != "resend_short":
        raise ConfigError("eve.pulse_duration: sweeping it requires eve.strategy = resend_short")
    base_seed = config_from_dict(base).seed

    jobs = []
    for step, value in enumerate(sweep_values(getattr(args, "from"), args.to, args.steps, args.param)):
        for rep in range(args.reps):
            seed = base_seed + step * SWEEP_SEED_STRIDE + rep
            data = set_param(set_param(base, args.param, value), "seed", seed)
            jobs.append((value, config_from_dict(data)))

    def run_one(job):
        value, cfg = job
        row = report_row(run_session(cfg))
        row["parameter_value"] = value
        return row

    if args.workers > 1:
        with ThreadPoolExecutor(max_workers=args.workers) as pool:
            rows = list(pool.map(run_one, jobs))
    else:
        rows = [run_one(j) for j in jobs]
    _write_atomic(args.out, rows_to_csv(rows, SWEEP_COLUMNS))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="timecode-qkd", description="Time-coding QKD Monte Carlo simulator.")
    sub = p.add_subparsers(dest="cmd", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="session config (JSON)")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--pulses", type=int, default=None, help="override n_pulses")
        sp.add_argument("--eve", choices=EVE_CHOICES, default=None, help="override eve.strategy")
        sp.add_argument("--workers", type=int, default=1, help="worker threads")

    r = sub.add_parser("run", help="run one session and write its report")
    common(r)
    r.add_argument("--out", default=None, help="output file (default: stdout)")
    r.add_argument("--format", choices=("json", "csv"), default="json")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="sweep one parameter and write a CSV table")
    common(s)
    s.add_argument("--param", required=True, help=f"one of: {', '.join(SWEEP_PARAMS)}")
    s.add_argument("--from", type=float, required=True)
    s.add_argument("--to", type=float, required=True)
    s.add_argument("--steps", type=int, required=True)
    s.add_argument("--reps", type=int, default=1)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.workers < 1:
        print("error: --workers must be at least 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
