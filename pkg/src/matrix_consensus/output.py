# SPDX-FileCopyrightText: 2023-present Aravinda Rao <maniacalace@gmail.com>
# SPDX-License-Identifier: MIT

"""CSV and plain-text persistence of simulation records.

Every file is a pure function of the record: numbers are written with `fmt_float()`
and lines end in LF, so re-running a seeded scenario reproduces the files byte for
byte.
"""

from __future__ import annotations

import csv
from collections.abc import Iterable
from pathlib import Path

from matrix_consensus.core.analysis import (
    bipartite_disagreement,
    gauged_average,
    leader_tracking_error,
    predict_consensus_value,
    zeno_report,
)
from matrix_consensus.core.sim import SimulationRecord
from matrix_consensus.core.utils import fmt_float
from matrix_consensus.log_utils import logger


TRAJECTORY_FILE = "trajectory.csv"
CONTROLS_FILE = "controls.csv"
EVENTS_FILE = "events.csv"
PSI_FILE = "psi.csv"
SUMMARY_FILE = "summary.txt"


def component_headers(prefix: str, n: int, d: int) -> list[str]:
    """`t` followed by agent-major component columns, eg. `x1_1, x1_2, ..., x5_3`."""
    return ["t", *(f"{prefix}{i + 1}_{k + 1}" for i in range(n) for k in range(d))]


def write_outputs(record: SimulationRecord, out_dir: str | Path) -> list[Path]:
    """Write the full file set for `record` into `out_dir`, creating it if needed.

    Filesystem errors propagate unchanged.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    n, d = record.n, record.d
    S = record.times.size

    written = [
        _write_csv(
            out_dir / TRAJECTORY_FILE,
            component_headers("x", n, d),
            _sample_rows(record, record.states.reshape(S, n * d)),
        ),
        _write_csv(
            out_dir / CONTROLS_FILE,
            component_headers("u", n, d),
            _sample_rows(record, record.controls.reshape(S, n * d)),
        ),
        _write_csv(
            out_dir / EVENTS_FILE,
            ["agent", "time"],
            ([str(agent + 1), fmt_float(t)] for agent, t in record.events),
        ),
        _write_csv(
            out_dir / PSI_FILE,
            ["t", *(f"psi{i + 1}" for i in range(record.psi.shape[1]))],
            _sample_rows(record, record.psi),
        ),
    ]

    summary_path = out_dir / SUMMARY_FILE
    summary_path.write_text(format_summary(record), encoding="utf-8", newline="\n")
    written.append(summary_path)

    logger.info(f"Wrote {len(written)} files to {out_dir}")
    return written


def format_summary(record: SimulationRecord) -> str:
    lines = [
        f"mode: {record.mode}",
        f"agents: {record.n}",
        f"dimension: {record.d}",
        f"samples: {record.times.size}",
    ]
    if record.is_empty:
        return "\n".join(lines) + "\n"

    final = record.states[-1]
    disagreement = bipartite_disagreement(final, record.network)
    lines += [
        f"t_end: {fmt_float(float(record.times[-1]))}",
        f"t_sf: {'none' if record.t_sf is None else fmt_float(record.t_sf)}",
        f"final_disagreement: {fmt_float(disagreement)}",
        f"final_gauged_average: {_fmt_vec(gauged_average(final, record.gauge))}",
    ]
    if record.mode.has_leaders:
        error = leader_tracking_error(final, record.network.w0)
        lines.append(f"final_tracking_error: {fmt_float(error)}")
    else:
        predicted = predict_consensus_value(record)
        lines.append(f"predicted_consensus_value: {_fmt_vec(predicted)}")

    partition = record.gauge.partition()
    lines.append(
        "partition: "
        + " / ".join(
            "{" + ", ".join(str(i + 1) for i in part) + "}" for part in partition
        )
    )

    report = zeno_report(record)
    lines.append(f"total_events: {len(record.events)}")
    for agent in report.agents:
        min_gap = "none" if agent.min_gap is None else fmt_float(agent.min_gap)
        bound = "none" if agent.lower_bound is None else fmt_float(agent.lower_bound)
        lines.append(
            f"agent {agent.agent + 1}: events={agent.event_count} "
            f"min_gap={min_gap} zeno_lower_bound={bound}"
        )
    return "\n".join(lines) + "\n"


def _fmt_vec(values: Iterable[float]) -> str:
    return "[" + ", ".join(fmt_float(float(v)) for v in values) + "]"


def _sample_rows(record: SimulationRecord, values) -> Iterable[list[str]]:
    for t, row in zip(record.times, values, strict=True):
        yield [fmt_float(float(t)), *(fmt_float(float(v)) for v in row)]


def _write_csv(path: Path, header: list[str], rows: Iterable[list[str]]) -> Path:
    with path.open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path
