# SPDX-FileCopyrightText: 2023-present Aravinda Rao <maniacalace@gmail.com>
# SPDX-License-Identifier: MIT

"""The `matrix-consensus` command.

    matrix-consensus check <scenario>
    matrix-consensus params <scenario>
    matrix-consensus run <scenario> [--out DIR] [--plots] [--seed N]
    matrix-consensus compare <scenario> [--seed N]
    matrix-consensus sweep <scenario> [--seeds N] [--jobs J]

`<scenario>` is a path to a TOML scenario file or the name of a bundled scenario.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import logging
import sys
from collections.abc import Sequence

import numpy as np

from matrix_consensus import __version__
from matrix_consensus.core.analysis import (
    bipartite_disagreement,
    leader_tracking_error,
    zeno_report,
)
from matrix_consensus.core.control import ParamViolationError, gain_table
from matrix_consensus.core.matgraph import (
    check_assumption1,
    check_assumption2,
    find_gauge,
)
from matrix_consensus.core.sim import (
    NonFiniteStateError,
    NoSaturationEpochError,
    SimulationRecord,
    ZenoGuardTrippedError,
)
from matrix_consensus.core.utils import fmt_vector
from matrix_consensus.log_utils import init_log, logger
from matrix_consensus.output import write_outputs
from matrix_consensus.plotting import EmptySeriesError, PlotKind, render_plot
from matrix_consensus.scenario import (
    BUNDLED_SCENARIOS,
    Scenario,
    ScenarioParseError,
    ScenarioValidationError,
    dump_scenario,
    load_scenario,
    parse_scenario,
    run_scenario,
)
from matrix_consensus.utils.process import cpu_seconds, default_worker_count


HANDLED_ERRORS = (
    ScenarioParseError,
    ScenarioValidationError,
    ParamViolationError,
    NonFiniteStateError,
    ZenoGuardTrippedError,
    NoSaturationEpochError,
    EmptySeriesError,
    OSError,
)
VERDICTS = {True: "satisfied", False: "violated"}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    init_log(level)

    try:
        return args.handler(args)
    except HANDLED_ERRORS as err:
        logger.error(f"`{args.command}` failed: {err}")
        print(f"matrix-consensus: error: {err}", file=sys.stderr)
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="matrix-consensus",
        description="Event-triggered bipartite consensus on matrix-weighted signed "
        "networks under actuator saturation.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument(
        "-v",
        "--verbose",
        action="count",
        default=0,
        help="Log progress to stderr. Repeat for debug output.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    bundled = ", ".join(BUNDLED_SCENARIOS)
    scenario_help = f"Path to a scenario file, or a bundled scenario: {bundled}"

    check = subparsers.add_parser(
        "check",
        help="Validate a scenario; print its partition, structural checks and gains.",
    )
    check.add_argument("scenario", help=scenario_help)
    check.set_defaults(handler=cmd_check)

    params = subparsers.add_parser(
        "params", help="Print the per-agent trigger gains of a scenario."
    )
    params.add_argument("scenario", help=scenario_help)
    params.set_defaults(handler=cmd_params)

    run = subparsers.add_parser(
        "run", help="Simulate a scenario and write CSV files and a summary."
    )
    run.add_argument("scenario", help=scenario_help)
    run.add_argument("--out", default="out", help="Output directory (default: out).")
    run.add_argument(
        "--plots", action="store_true", help="Also render every plot kind as SVG."
    )
    run.add_argument("--seed", type=int, help="Override the scenario's seed.")
    run.set_defaults(handler=cmd_run)

    compare = subparsers.add_parser(
        "compare",
        help="Run the event-triggered scenario next to its continuous counterpart.",
    )
    compare.add_argument("scenario", help=scenario_help)
    compare.add_argument("--seed", type=int, help="Override the scenario's seed.")
    compare.set_defaults(handler=cmd_compare)

    sweep = subparsers.add_parser(
        "sweep", help="Run a scenario over consecutive seeds in a process pool."
    )
    sweep.add_argument("scenario", help=scenario_help)
    sweep.add_argument(
        "--seeds", type=_positive_int, default=10, help="Number of seeds (default: 10)."
    )
    sweep.add_argument(
        "--jobs",
        type=_positive_int,
        default=None,
        help="Worker processes (default: number of physical cores).",
    )
    sweep.set_defaults(handler=cmd_sweep)

    return parser


def cmd_check(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    network = scenario.network
    gauge = find_gauge(network)
    pos, neg = gauge.partition()

    print(f"scenario: {args.scenario}")
    print(f"mode: {scenario.mode}")
    print(f"agents: {network.n}, dimension: {network.d}, edges: {len(network.edges)}")
    print("structurally balanced: yes")
    print(f"partition: {_fmt_nodes(pos)} / {_fmt_nodes(neg)}")
    null_space_ok = check_assumption1(network, gauge)
    print(f"null-space condition: {VERDICTS[null_space_ok]}")
    if network.has_leaders:
        coverage_ok = check_assumption2(network, tol=scenario.weight_tol)
        print(f"leader coverage condition: {VERDICTS[coverage_ok]}")
        print(f"leader input w0: {fmt_vector(network.w0)}")
    else:
        print("leader coverage condition: n/a (no leaders)")

    _print_gains(scenario, leader_follower=False)
    if network.has_leaders:
        _print_gains(scenario, leader_follower=True)
    return 0


def cmd_params(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    _print_gains(scenario, leader_follower=scenario.mode.has_leaders)
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    if args.seed is not None:
        scenario = scenario.with_seed(args.seed)

    record = run_scenario(scenario)
    paths = write_outputs(record, args.out)

    if args.plots:
        for kind in PlotKind:
            try:
                paths.append(render_plot(record, kind, f"{args.out}/{kind}.svg"))
            except EmptySeriesError as err:
                logger.warning(f"Skipping the {kind} plot: {err}")

    print(f"{_final_metric_label(record)}: {_final_metric(record):.6g}")
    print(f"events: {len(record.events)}")
    for path in paths:
        print(f"wrote {path}")
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    if args.seed is not None:
        scenario = scenario.with_seed(args.seed)
    if not scenario.mode.is_event_triggered:
        raise ScenarioValidationError(
            f"`compare` needs an event-triggered scenario; got mode `{scenario.mode}`."
        )
    baseline = scenario.with_mode(scenario.mode.continuous_counterpart)

    start = cpu_seconds()
    event_record = run_scenario(scenario)
    event_cpu = cpu_seconds() - start

    start = cpu_seconds()
    continuous_record = run_scenario(baseline)
    continuous_cpu = cpu_seconds() - start

    diff = 0.0
    if not event_record.is_empty:
        diff = float(
            np.max(np.abs(event_record.states[-1] - continuous_record.states[-1]))
        )

    print(f"modes: {scenario.mode} vs {baseline.mode}")
    print(f"{'':<22}{'event-triggered':>18}{'continuous':>18}")
    print(
        f"{'events/samples':<22}{len(event_record.events):>18}"
        f"{continuous_record.times.size:>18}"
    )
    print(
        f"{_final_metric_label(event_record):<22}"
        f"{_final_metric(event_record):>18.6g}{_final_metric(continuous_record):>18.6g}"
    )
    print(f"{'cpu seconds':<22}{event_cpu:>18.3f}{continuous_cpu:>18.3f}")
    print(f"max final-state difference: {diff:.6g}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    scenario = load_scenario(args.scenario)
    text = dump_scenario(scenario)
    seeds = [scenario.seed + k for k in range(args.seeds)]
    jobs = min(args.jobs or default_worker_count(), len(seeds))
    logger.info(f"Sweeping {len(seeds)} seeds with {jobs} workers")

    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
        results = list(pool.map(_sweep_one, [text] * len(seeds), seeds))

    label = "tracking_error" if scenario.mode.has_leaders else "disagreement"
    print(f"{'seed':>6} {label:>16} {'events':>8} {'min_gap':>12}")
    for seed, metric, events, min_gap in results:
        gap = "-" if min_gap is None else f"{min_gap:.6g}"
        print(f"{seed:>6} {metric:>16.6g} {events:>8} {gap:>12}")

    gaps = [r[3] for r in results if r[3] is not None]
    print(f"worst {label}: {max(r[1] for r in results):.6g}")
    print(f"total events: {sum(r[2] for r in results)}")
    print(f"min gap: {min(gaps):.6g}" if gaps else "min gap: -")
    return 0


def _sweep_one(text: str, seed: int) -> tuple[int, float, int, float | None]:
    record = run_scenario(parse_scenario(text).with_seed(seed))
    report = zeno_report(record)
    return (seed, _final_metric(record), len(record.events), report.min_gap)


def _final_metric(record: SimulationRecord) -> float:
    if record.is_empty:
        return 0.0
    final = record.states[-1]
    if record.mode.has_leaders:
        return leader_tracking_error(final, record.network.w0)
    return bipartite_disagreement(final, record.network)


def _final_metric_label(record: SimulationRecord) -> str:
    return "final tracking error" if record.mode.has_leaders else "final disagreement"


def _print_gains(scenario: Scenario, *, leader_follower: bool):
    label = "omega" if leader_follower else "varpi"
    gains = gain_table(scenario.network, leader_follower=leader_follower)
    print(f"{'agent':>5} {label:>12}")
    for i, gain in enumerate(gains):
        print(f"{i + 1:>5} {gain:>12.2f}")


def _fmt_nodes(nodes: list[int]) -> str:
    return "{" + ", ".join(str(i + 1) for i in nodes) + "}"


def _positive_int(value: str) -> int:
    number = int(value)
    if number < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer; got {value}")
    return number
