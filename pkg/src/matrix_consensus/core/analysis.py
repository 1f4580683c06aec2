# SPDX-FileCopyrightText: 2023-present Aravinda Rao <maniacalace@gmail.com>
# SPDX-License-Identifier: MIT

"""Metrics computed over finished runs."""

from __future__ import annotations

import dataclasses

import numpy as np

from matrix_consensus.core.control import (
    control_operator,
    stack_params,
    trigger_excess,
)
from matrix_consensus.core.matgraph import (
    Gauge,
    MatrixWeightedNetwork,
    gauge_matrix,
    lambda_max_abs,
    laplacian,
    leader_laplacian,
)
from matrix_consensus.core.sim import NoSaturationEpochError, SimulationRecord


def bipartite_disagreement(x: np.ndarray, G: MatrixWeightedNetwork) -> float:
    """max over edges of ‖x_i - sgn(A_ij) x_j‖."""
    x = np.asarray(x, dtype=float)
    worst = 0.0
    for i, j, W in G.iter_edges():
        worst = max(worst, float(np.linalg.norm(x[i] - W.sign * x[j])))
    return worst


def gauged_average(x: np.ndarray, gauge: Gauge) -> np.ndarray:
    """(1/n) Σ σ_i x_i. Accepts a single `n×d` snapshot or a stack of them."""
    x = np.asarray(x, dtype=float)
    return np.einsum("...id,i->...d", x, gauge.as_array()) / gauge.n


def leader_tracking_error(x: np.ndarray, w0: np.ndarray) -> float:
    """max_i ‖|x_i| - |w0|‖, with absolute values taken componentwise."""
    x = np.asarray(x, dtype=float)
    return float(np.max(np.linalg.norm(np.abs(x) - np.abs(w0), axis=-1)))


def predict_consensus_value(
    record: SimulationRecord, gauge: Gauge | None = None, *, strict: bool = False
) -> np.ndarray:
    """The gauged average of the states at T_sf, which is what every σ_i x_i converges
    to once the controls leave saturation for good.

    Without any saturation epoch the gauged average is conserved from t=0, so x(0) is
    used instead, unless `strict` is set.

    Raises:
        `NoSaturationEpochError`: if `strict` and the run never saturated.
    """
    if record.is_empty:
        raise ValueError("`record` has no samples.")
    gauge = gauge or record.gauge

    if record.t_sf is None:
        if strict:
            raise NoSaturationEpochError("Controls never saturated during the run.")
        return gauged_average(record.states[0], gauge)
    return gauged_average(record.states[record.sample_index(record.t_sf)], gauge)


def lyapunov_series(record: SimulationRecord) -> np.ndarray:
    """V = xᵀLx + Σψ for leaderless modes; ξᵀL_Bξ + Σψ with ξ = x - D*(1 ⊗ w0) for
    leader-follower modes. One value per sample.
    """
    G = record.network
    if record.is_empty:
        return np.zeros(0)
    flat = record.states.reshape(record.times.size, -1)
    if record.mode.has_leaders:
        M = leader_laplacian(G)
        target = gauge_matrix(record.gauge, G.d) @ np.tile(G.w0, G.n)
        flat = flat - target
    else:
        M = laplacian(G)

    quadratic = np.einsum("si,ij,sj->s", flat, M, flat)
    return quadratic + record.psi.sum(axis=1)


def psi_lower_bound(record: SimulationRecord) -> np.ndarray:
    """ψ_i(0)·exp(-(β_i + δ_i/θ_i) t), per sample and agent."""
    if record.params is None:
        raise ValueError("Continuous-mode records carry no trigger parameters.")
    p = stack_params(record.params)
    rate = p.beta + p.delta / p.theta
    return p.psi0[None, :] * np.exp(-np.outer(record.times, rate))


def trigger_excess_series(record: SimulationRecord) -> np.ndarray:
    """The trigger excess re-evaluated at every sample, per agent."""
    if record.params is None:
        raise ValueError("Continuous-mode records carry no trigger parameters.")
    G = record.network
    if record.is_empty:
        return np.zeros((0, G.n))
    K, b = control_operator(G, leader_follower=record.mode.has_leaders)
    S = record.times.size
    u_hat = (-record.broadcasts.reshape(S, -1) @ K.T + b).reshape(S, G.n, G.d)
    excess = trigger_excess(
        record.broadcasts - record.states,
        u_hat,
        record.psi,
        stack_params(record.params),
        record.delta_sat,
    )
    return np.asarray(excess)


def inter_event_gaps(record: SimulationRecord, agent: int) -> np.ndarray:
    return np.diff(record.events_of(agent))


@dataclasses.dataclass(frozen=True)
class AgentZenoSummary:
    agent: int
    event_count: int
    min_gap: float | None
    lower_bound: float | None


@dataclasses.dataclass(frozen=True)
class ZenoReport:
    agents: list[AgentZenoSummary]
    m0: float
    horizon: float

    @property
    def total_events(self) -> int:
        return sum(a.event_count for a in self.agents)

    @property
    def min_gap(self) -> float | None:
        gaps = [a.min_gap for a in self.agents if a.min_gap is not None]
        return min(gaps) if gaps else None

    @property
    def is_empty(self) -> bool:
        return not self.agents


def zeno_report(record: SimulationRecord) -> ZenoReport:
    """Per-agent event counts and minimum inter-event gaps, next to the analytic lower
    bound on the gaps over the run's horizon T:

        sqrt(ψ_i(0) / (θ_i·gain_i)) · exp(-(β_i + δ_i/θ_i)·T/2) / rate_i
        rate_i = 2·M0·Σ_j λ_d(|A_ij|)

    with M0 the largest observed ‖x_i‖. Leader edges add
    Σ_l λ_d(|B_il|)·(M0 + ‖w0‖) to `rate_i`.
    """
    horizon = 0.0
    m0 = 0.0
    if not record.is_empty:
        horizon = float(record.times[-1])
        m0 = float(np.max(np.linalg.norm(record.states, axis=-1)))
    if record.params is None:
        return ZenoReport(agents=[], m0=m0, horizon=horizon)

    G = record.network
    w0_norm = float(np.linalg.norm(G.w0)) if record.mode.has_leaders else 0.0
    counts = record.event_counts
    summaries = []
    for i, p in enumerate(record.params):
        gaps = inter_event_gaps(record, i)
        min_gap = float(np.min(gaps)) if gaps.size else None

        edges = [W for j in G.neighbors(i) if (W := G.edge(i, j)) is not None]
        rate = 2 * m0 * sum(lambda_max_abs(W) for W in edges)
        if record.mode.has_leaders:
            leader_lams = [lambda_max_abs(B) for _, B in G.leader_edges_of(i)]
            rate += sum(leader_lams) * (m0 + w0_norm)

        lower_bound = None
        if rate > 0 and p.gain > 0:
            decay = np.exp(-0.5 * (p.beta + p.delta / p.theta) * horizon)
            lower_bound = float(np.sqrt(p.psi0 / (p.theta * p.gain)) * decay / rate)

        summaries.append(
            AgentZenoSummary(
                agent=i,
                event_count=int(counts[i]),
                min_gap=min_gap,
                lower_bound=lower_bound,
            )
        )
    return ZenoReport(agents=summaries, m0=m0, horizon=horizon)
