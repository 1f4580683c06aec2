# SPDX-FileCopyrightText: 2023-present Aravinda Rao <maniacalace@gmail.com>
# SPDX-License-Identifier: MIT

"""Static SVG plots of a finished run."""

from __future__ import annotations

from pathlib import Path

import matplotlib


matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from strenum import StrEnum  # noqa: E402

from matrix_consensus import theme  # noqa: E402
from matrix_consensus.core.analysis import (  # noqa: E402
    gauged_average,
    predict_consensus_value,
)
from matrix_consensus.core.sim import SimulationRecord  # noqa: E402
from matrix_consensus.log_utils import logger  # noqa: E402


# Keep the SVG byte-deterministic.
SVG_METADATA = {"Date": None}
matplotlib.rcParams["svg.hashsalt"] = "matrix-consensus"
PANEL_SIZE = (7.0, 2.2)


class EmptySeriesError(Exception):
    pass


class PlotKind(StrEnum):
    states = "states"
    controls = "controls"
    events = "events"
    psi = "psi"


def render_plot(
    record: SimulationRecord, kind: PlotKind | str, out_path: str | Path
) -> Path:
    """Render one kind of plot for `record` as an SVG file at `out_path`.

    `states` and `controls` get one panel per state dimension with one line per agent;
    `events` gets one raster row per agent; `psi` gets one line per agent. A solid
    vertical line marks T_sf whenever the run saturated.

    Raises:
        `EmptySeriesError`: if `record` holds nothing to plot for `kind`.
    """
    kind = PlotKind(kind)
    out_path = Path(out_path)

    match kind:
        case PlotKind.states | PlotKind.controls:
            fig = _component_plot(record, kind)
        case PlotKind.events:
            fig = _event_raster(record)
        case PlotKind.psi:
            fig = _psi_plot(record)

    try:
        out_path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(out_path, format="svg", metadata=SVG_METADATA)
    finally:
        plt.close(fig)

    logger.info(f"Wrote {kind} plot to {out_path}")
    return out_path


def _component_plot(record: SimulationRecord, kind: PlotKind):
    if record.is_empty:
        raise EmptySeriesError(f"No samples to plot for `{kind}`.")

    values = record.states if kind == PlotKind.states else record.controls
    symbol = "x" if kind == PlotKind.states else "u"
    overlay_average = kind == PlotKind.states and not record.mode.has_leaders
    average = gauged_average(values, record.gauge) if overlay_average else None
    prediction = predict_consensus_value(record) if overlay_average else None

    d = record.d
    fig, axes = plt.subplots(
        d, 1, sharex=True, squeeze=False, figsize=(PANEL_SIZE[0], PANEL_SIZE[1] * d)
    )
    for k in range(d):
        ax = axes[k][0]
        for i in range(record.n):
            ax.plot(
                record.times,
                values[:, i, k],
                color=theme.agent_color(i),
                linewidth=1.2,
                label=f"agent {i + 1}",
            )
        if average is not None and prediction is not None:
            for sign in (1, -1):
                ax.plot(
                    record.times,
                    sign * average[:, k],
                    color=theme.AVERAGE_COLOR,
                    linestyle="--",
                    linewidth=1.0,
                )
            # ± predicted consensus value at the horizon
            ax.plot(
                [record.times[-1]] * 2,
                [prediction[k], -prediction[k]],
                color=theme.MARKER_COLOR,
                linestyle="none",
                marker="x",
                markersize=7,
                gid="consensus_prediction",
            )
        _mark_t_sf(ax, record)
        ax.set_ylabel(f"{symbol}_i,{k + 1}")
        ax.grid(visible=True, alpha=0.3)

    axes[-1][0].set_xlabel("t [s]")
    axes[0][0].legend(loc="upper right", fontsize="small", ncol=min(record.n, 5))
    fig.tight_layout()
    return fig


def _event_raster(record: SimulationRecord):
    if not record.events:
        raise EmptySeriesError("The run has no trigger events to plot.")

    n = record.n
    fig, ax = plt.subplots(figsize=(PANEL_SIZE[0], 0.5 * n + 1.2))
    positions = [record.events_of(i) for i in range(n)]
    ax.eventplot(
        positions,
        lineoffsets=np.arange(1, n + 1),
        linelengths=0.7,
        colors=[theme.agent_color(i) for i in range(n)],
    )
    _mark_t_sf(ax, record)
    ax.set_yticks(np.arange(1, n + 1), [str(i + 1) for i in range(n)])
    ax.set_ylim(0.4, n + 0.6)
    ax.set_xlabel("t [s]")
    ax.set_ylabel("agent")
    fig.tight_layout()
    return fig


def _psi_plot(record: SimulationRecord):
    if record.is_empty or record.psi.shape[1] == 0:
        raise EmptySeriesError("No ψ samples to plot; continuous runs have none.")

    fig, ax = plt.subplots(figsize=(PANEL_SIZE[0], PANEL_SIZE[1] * 1.5))
    for i in range(record.psi.shape[1]):
        ax.plot(
            record.times,
            record.psi[:, i],
            color=theme.agent_color(i),
            linewidth=1.2,
            label=f"agent {i + 1}",
        )
    _mark_t_sf(ax, record)
    ax.set_yscale("log")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("ψ_i")
    ax.legend(loc="upper right", fontsize="small")
    ax.grid(visible=True, alpha=0.3)
    fig.tight_layout()
    return fig


def _mark_t_sf(ax, record: SimulationRecord):
    if record.t_sf is not None:
        ax.axvline(record.t_sf, color=theme.MARKER_COLOR, linewidth=1.0, gid="t_sf")
