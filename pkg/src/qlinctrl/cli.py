"""Command line entry point.

Exit codes: 0 success, 1 failed verification or checkpoint, 2 usage error
or non-Hurwitz loop (``analyze``), 3 invalid initial covariance
(``simulate``), 4 unreadable or invalid scenario file.
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import example
from .entanglement import InvalidCovarianceError, log_negativity, verify_no_go
from .scenario import (
    ConfigError,
    NotHurwitzError,
    analyze,
    example_config,
    load_config,
    simulate,
    write_csv,
)

log = logging.getLogger("qlinctrl")

EXIT_FAIL, EXIT_USAGE, EXIT_INVALID_COV, EXIT_CONFIG = 1, 2, 3, 4


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _write_json(path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2) + "\n")


def _write_run(prefix, rows, summary):
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    with open(f"{prefix}.csv", "w", newline="") as fh:
        write_csv(rows, fh)
    _write_json(Path(f"{prefix}.summary.json"), summary)


def cmd_analyze(args):
    cfg = load_config(args.config)
    try:
        summary = analyze(cfg)
    except NotHurwitzError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = json.dumps(summary, indent=2)
    if args.json:
        Path(args.json).write_text(text + "\n")
    print(text)
    return 0


def cmd_simulate(args):
    cfg = load_config(args.config)
    try:
        _, rows, summary = simulate(cfg)
    except InvalidCovarianceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID_COV
    prefix = args.out or cfg.output
    _write_run(prefix, rows, summary)
    print(json.dumps(summary, indent=2))
    return 0


def cmd_verify(args, fault=None):
    report = verify_no_go(args.seed, args.trials, steps=args.steps, fault=fault)
    print(json.dumps(report.summary(), indent=2))
    if not report.ok:
        for failure in report.failures[:3]:
            print(json.dumps(failure), file=sys.stderr)
        return EXIT_FAIL
    return 0


def _checkpoints(cl, runs):
    """Named pass/fail checks against the reference two-cavity example."""
    ent_rows, ent_summary = runs["entangled"]
    sep_rows, _ = runs["separable"]
    E_ent = np.array([r[1] for r in ent_rows])
    E_sep = np.array([r[1] for r in sep_rows])
    hit = np.nonzero(E_ent <= 1e-9)[0]
    first_zero = int(hit[0]) if hit.size else None
    return {
        "closed_loop_matrices_match_printed": example.matches_printed(cl),
        "initial_E_N_is_0.1054": abs(log_negativity(example.ENTANGLED_P0).E_N - 0.1054) <= 1e-3,
        "entangled_curve_non_increasing": bool(np.all(np.diff(E_ent) <= 1e-9)),
        "entangled_curve_reaches_zero": first_zero is not None,
        "entangled_curve_stays_zero": first_zero is not None and bool(np.all(E_ent[first_zero:] <= 1e-9)),
        "separable_curve_stays_zero": bool(np.all(E_sep <= 1e-9)),
        "sudden_death_time_finite": ent_summary["sudden_death_time"] is not None,
    }


def cmd_example_paper(args):
    out = Path(args.out)
    cl = example.closed_loop()
    runs = {}
    for initial in ("entangled", "separable"):
        cfg = example_config(initial)
        _, rows, summary = simulate(cfg)
        runs[initial] = (rows, summary)
        _write_run(out / f"example1_{initial}", rows, summary)
    checks = _checkpoints(cl, runs)
    steady = analyze(example_config("entangled"))
    checks["steady_state_separable"] = steady["verdict"] == "separable"
    summary = {
        "checkpoints": checks,
        "steady_state": steady,
        "entangled": runs["entangled"][1],
        "separable": runs["separable"][1],
    }
    _write_json(out / "example1_summary.json", summary)
    for name, ok in checks.items():
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    return 0 if all(checks.values()) else EXIT_FAIL


def build_parser():
    parser = argparse.ArgumentParser(
        prog="qlinctrl",
        description="Covariance-level analysis of quantum plants under classical linear feedback.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="steady-state separability of a scenario")
    p.add_argument("config")
    p.add_argument("--json", help="also write the summary to this file")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="transient covariance run with CSV output")
    p.add_argument("config")
    p.add_argument("--out", help="output prefix (default: the scenario's output.prefix)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="randomized no-go check over random loops")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--trials", type=_positive_int, default=100)
    p.add_argument("--steps", type=_positive_int, default=200)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("example-paper", help="reproduce the two-cavity example")
    p.add_argument("--out", default="example1_out")
    p.set_defaults(func=cmd_example_paper)
    return parser


def main(argv=None, _fault=None):
    logging.basicConfig(
        level=os.environ.get("QLINCTRL_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        if args.func is cmd_verify:
            return cmd_verify(args, fault=_fault)
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
