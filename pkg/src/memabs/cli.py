"""Command-line entry point.

Subcommands::

    memabs simulate       write a sampled trajectory as CSV
    memabs abstract       estimate a memory-Markov model and save it
    memabs propagate      print the marginal cell distribution at a horizon
    memabs tv             TV-vs-horizon curve for the first configured memory
    memabs bounds         measured TV joined with the two-regime bounds
    memabs case1          fixed partition, memories compared (CSV)
    memabs case2          equal-budget partition/memory trade-off (CSV)
    memabs rotation-demo  conditional probabilities showing memory matters
    memabs plots CSVFILE  emit a gnuplot script for a results CSV

Shared flags: --config FILE (INI schema, see memabs.config), --seed N,
--out PATH, --profile {paper,ci}.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .abstraction import build_abstraction, marginal_at_horizon, save_model
from .config import ExperimentConfig, default_config, load_config
from .experiments import (Table, emit_plots, run_bounds, run_case1,
                          run_case2, run_rotation_demo, tv_curve)
from .systems import simulate_trajectory


def _load(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else default_config()
    if args.profile:
        config = config.with_profile(args.profile)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    return config


def _emit(args, table: Table, default_name: str) -> None:
    out = args.out or default_name
    table.write(out)
    print(f"wrote {out}")


def _cmd_simulate(args) -> int:
    config = _load(args)
    system = config.build_system()
    states = simulate_trajectory(system, config.horizon, config.seed)
    header = ["k"] + [f"x{i}" for i in range(system.dimension)]
    rows = [[k] + [float(v) for v in state] for k, state in enumerate(states)]
    _emit(args, Table(header=header, rows=rows), "trajectory.csv")
    return 0


def _cmd_abstract(args) -> int:
    config = _load(args)
    abstraction = build_abstraction(
        config.build_system(), config.build_partition(), config.memories[0],
        trace_length=config.trace_length,
        initial_samples=config.initial_samples, seed=config.seed)
    out = args.out or "model.txt"
    save_model(abstraction.model, out)
    model = abstraction.model
    print(f"wrote {out} (n={model.n}, ell={model.ell}, "
          f"{model.stored_nonzeros} stored transitions, "
          f"{model.unobserved_row_fraction:.1%} rows unobserved)")
    return 0


def _cmd_propagate(args) -> int:
    config = _load(args)
    abstraction = build_abstraction(
        config.build_system(), config.build_partition(), config.memories[0],
        trace_length=config.trace_length,
        initial_samples=config.initial_samples, seed=config.seed)
    marginal = marginal_at_horizon(abstraction.model, abstraction.initial_joint,
                                   config.horizon)
    header = ["cell", "probability"]
    rows = [[int(c), float(p)] for c, p in enumerate(marginal)]
    _emit(args, Table(header=header, rows=rows), "marginal.csv")
    return 0


def _cmd_tv(args) -> int:
    config = _load(args)
    curve = tv_curve(config.build_system(), config.build_partition(),
                     config.memories[0], config, config.seed)
    header = ["k", "tv", "stderr"]
    rows = [[k, curve.tv[k], curve.stderr[k]]
            for k in range(config.horizon + 1)]
    _emit(args, Table(header=header, rows=rows), "tv.csv")
    return 0


def _cmd_bounds(args) -> int:
    config = _load(args)
    _emit(args, run_bounds(config), "bounds.csv")
    return 0


def _cmd_case1(args) -> int:
    config = _load(args)
    _emit(args, run_case1(config), "case1.csv")
    return 0


def _cmd_case2(args) -> int:
    config = _load(args)
    _emit(args, run_case2(config), "case2.csv")
    return 0


def _cmd_rotation_demo(args) -> int:
    config = _load(args)
    if config.system_kind != "rotation":
        config = replace(config, system_kind="rotation", system_params=None)
    report = run_rotation_demo(config)
    print(f"trace transitions: {report.trace_length}")
    print(f"P[next in A1 | now in A2] = {report.p_one_step:.6f} "
          f"({report.count_a2_then_a1}/{report.count_a2})")
    print(f"P[next in A1 | now in A2, before in A1] = {report.p_two_step:.6f} "
          f"({report.count_a1_a2_then_a1}/{report.count_a1_a2})")
    return 0


def _cmd_plots(args) -> int:
    script_path = args.out or Path(args.csv).with_suffix(".gp")
    emit_plots(args.csv, script_path)
    print(f"wrote {script_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="memabs",
        description="memory-Markov abstractions of stochastic systems")
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "simulate": _cmd_simulate,
        "abstract": _cmd_abstract,
        "propagate": _cmd_propagate,
        "tv": _cmd_tv,
        "bounds": _cmd_bounds,
        "case1": _cmd_case1,
        "case2": _cmd_case2,
        "rotation-demo": _cmd_rotation_demo,
        "plots": _cmd_plots,
    }
    for name, func in commands.items():
        p = sub.add_parser(name)
        p.add_argument("--config", help="path to an INI config file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="output file path")
        p.add_argument("--profile", choices=("paper", "ci"),
                       help="sampling-budget profile")
        if name == "plots":
            p.add_argument("csv", help="results CSV to plot")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
