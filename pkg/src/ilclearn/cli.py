"""Command-line entry point.

    ilclearn run <config> [--seed N] [--trials T] [--out DIR]
    ilclearn gains <config> [--out FILE]
    ilclearn compare <logA.csv> <logB.csv>
    ilclearn report <run_dir>

`run` executes the configured campaign and writes CSV logs and metadata;
`gains` synthesizes and prints the model-based update gains; `compare`
reduces two trial logs to their headline numbers and deltas; `report`
renders PNG figures into a finished run directory, next to the CSVs.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np
import yaml

from .harness import (ConfigError, compare_runs, load_config, run_experiment,
                      summarize)
from .lti import UnstableLoopError, closed_loop_maps
from .noilc import SynthesisError, synthesize_gains
from .records import read_trial_log
from .trajectory import build_basis, identity_basis, third_order_reference


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ilclearn",
        description="Model-based and model-free feedforward learning on a "
                    "simulated closed-loop motion system.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the experiment described by a config file")
    p_run.add_argument("config")
    p_run.add_argument("--seed", type=int, action="append", default=None,
                       help="override the config seed list (repeatable)")
    p_run.add_argument("--trials", type=int, default=None,
                       help="override the number of trials")
    p_run.add_argument("--out", default=None, help="override the output directory")

    p_gains = sub.add_parser("gains", help="print the model-based gains and margin")
    p_gains.add_argument("config")
    p_gains.add_argument("--out", default=None,
                         help="also write Q and L to this CSV file")

    p_cmp = sub.add_parser("compare", help="compare two trial-log CSV files")
    p_cmp.add_argument("log_a")
    p_cmp.add_argument("log_b")

    p_rep = sub.add_parser("report", help="render figures into a run directory")
    p_rep.add_argument("run_dir")
    return parser


def _cmd_run(args) -> int:
    config = load_config(args.config)
    result = run_experiment(config, out_dir=args.out, seeds=args.seed,
                            num_trials=args.trials)
    print("run written to %s" % result.out_dir)
    if result.gains is not None:
        print("  noilc: convergence margin %.6g, final cost %.6g"
              % (result.gains.convergence_margin, result.noilc_records[-1].cost))
    for seed in sorted(result.acilc_records):
        recs = result.acilc_records[seed]
        if seed in result.acilc_failures:
            print("  acilc seed %d: DIVERGED at trial %d"
                  % (seed, result.acilc_failures[seed]))
        elif recs:
            print("  acilc seed %d: final cost %.6g" % (seed, recs[-1].cost))
    return 0


def _cmd_gains(args) -> int:
    config = load_config(args.config)
    system = closed_loop_maps(config.plant, config.controller, config.horizon)
    profile = third_order_reference(config.segments, config.plant.sample_time,
                                    config.horizon)
    basis = build_basis(profile) if config.basis_kind == "derivative" \
        else identity_basis(config.horizon)
    gains = synthesize_gains(system.j, basis.psi, config.weighting)
    np.set_printoptions(precision=8, suppress=False)
    print("m = %d, horizon = %d" % (gains.m, gains.horizon))
    print("convergence margin = %.12g" % gains.convergence_margin)
    print("Q =")
    print(gains.q)
    if gains.horizon <= 20:
        print("L =")
        print(gains.l)
    else:
        print("L: %d-by-%d (write with --out to inspect)" % gains.l.shape)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["block", "row"] + ["c%d" % k for k in range(gains.horizon)])
            for i, row in enumerate(gains.q):
                writer.writerow(["Q", i] + [repr(float(v)) for v in row])
            for i, row in enumerate(gains.l):
                writer.writerow(["L", i] + [repr(float(v)) for v in row])
        print("gains written to %s" % args.out)
    return 0


def _find_horizon(log_path):
    meta = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(log_path))),
                        "metadata.yaml")
    if os.path.exists(meta):
        with open(meta) as fh:
            data = yaml.safe_load(fh)
        try:
            return int(data["config"]["horizon_samples"])
        except (KeyError, TypeError, ValueError):
            return None
    return None


def _cmd_compare(args) -> int:
    log_a = read_trial_log(args.log_a)
    log_b = read_trial_log(args.log_b)
    h_a, h_b = _find_horizon(args.log_a), _find_horizon(args.log_b)
    if h_a is not None and h_b is not None and h_a != h_b:
        print("error: runs use different horizons (%d vs %d)" % (h_a, h_b),
              file=sys.stderr)
        return 2
    sum_a, sum_b, deltas = compare_runs(log_a, log_b)
    for name, summ in (("A", sum_a), ("B", sum_b)):
        print("%s: %d trials, final cost %.6g, min cost %.6g, converged at "
              "trial %d, final upsilon %s"
              % (name, len(log_a if name == "A" else log_b), summ.final_cost,
                 summ.min_cost, summ.convergence_trial,
                 np.array2string(summ.final_upsilon, precision=6)))
    print("final cost ratio B/A = %.6g" % deltas["final_cost_ratio"])
    print("final upsilon difference B-A = %s"
          % np.array2string(deltas["final_upsilon_diff"], precision=6))
    return 0


def _cmd_report(args) -> int:
    from .plots import render_run_report
    written = render_run_report(args.run_dir)
    for path in written:
        print("wrote %s" % path)
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {"run": _cmd_run, "gains": _cmd_gains,
                "compare": _cmd_compare, "report": _cmd_report}
    try:
        return handlers[args.command](args)
    except (ConfigError, SynthesisError, UnstableLoopError, FileNotFoundError,
            ValueError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
