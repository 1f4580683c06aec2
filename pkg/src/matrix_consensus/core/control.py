# SPDX-FileCopyrightText: 2023-present Aravinda Rao <maniacalace@gmail.com>
# SPDX-License-Identifier: MIT

"""Saturated consensus control laws, the dynamic trigger rule and its gains."""

from __future__ import annotations

import dataclasses
from collections.abc import Sequence
from typing import Any

import numpy as np

from matrix_consensus.core.matgraph import (
    MatrixWeightedNetwork,
    abs_weight,
    lambda_max_abs,
    laplacian,
    leader_input_matrix,
    leader_laplacian,
)


GAIN_RTOL = 1e-9


class ParamViolationError(Exception):
    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


@dataclasses.dataclass(frozen=True)
class SaturationLevel:
    delta_sat: float

    def __post_init__(self):
        if not self.delta_sat > 0:
            raise ValueError(f"`delta_sat` must be positive; got {self.delta_sat}.")


@dataclasses.dataclass(frozen=True)
class TriggerParams:
    """Per-agent trigger design parameters.

    `gain` is ϖ_i for leaderless networks and ω_i for leader-follower networks.
    """

    rho: float
    delta: float
    beta: float
    theta: float
    psi0: float
    gain: float = 0.0

    def violations(self, agent: int | None = None) -> list[str]:
        prefix = "" if agent is None else f"agent {agent + 1}: "
        problems = []
        if not (0 <= self.rho < 1):
            problems.append(f"{prefix}rho={self.rho} must lie in [0, 1)")
        if not (0 <= self.delta <= 1):
            problems.append(f"{prefix}delta={self.delta} must lie in [0, 1]")
        if not self.beta > 0:
            problems.append(f"{prefix}beta={self.beta} must be positive")
        if not self.psi0 > 0:
            problems.append(f"{prefix}psi0={self.psi0} must be positive")
        if self.beta > 0 and not self.theta > (1 - self.delta) / self.beta:
            problems.append(
                f"{prefix}theta={self.theta} must exceed (1 - delta) / beta = "
                f"{(1 - self.delta) / self.beta:.6g}"
            )
        if not self.gain >= 0:
            problems.append(f"{prefix}gain={self.gain} must be nonnegative")
        return problems

    def as_dict(self) -> dict[str, float]:
        return dataclasses.asdict(self)


@dataclasses.dataclass(frozen=True)
class ParamArrays:
    """`TriggerParams` of all agents, stacked field-wise into length-n arrays."""

    rho: np.ndarray
    delta: np.ndarray
    beta: np.ndarray
    theta: np.ndarray
    psi0: np.ndarray
    gain: np.ndarray


def stack_params(params: Sequence[TriggerParams]) -> ParamArrays:
    fields = [f.name for f in dataclasses.fields(TriggerParams)]
    return ParamArrays(
        **{k: np.array([getattr(p, k) for p in params], dtype=float) for k in fields}
    )


def with_gain(params: TriggerParams, gain: float) -> TriggerParams:
    return dataclasses.replace(params, gain=gain)


def saturate(h: Any, level: SaturationLevel | float) -> np.ndarray:
    """Componentwise sgn(h)·min(|h|, Δ)."""
    delta_sat = level.delta_sat if isinstance(level, SaturationLevel) else level
    if not delta_sat > 0:
        raise ValueError(f"Saturation level must be positive; got {delta_sat}.")
    return np.clip(np.asarray(h, dtype=float), -delta_sat, delta_sat)


def control_leaderless(
    i: int, xhat: np.ndarray, G: MatrixWeightedNetwork
) -> np.ndarray:
    """û_i = -Σ_j |A_ij|(x̂_i - sgn(A_ij) x̂_j) over the neighbors of `i`."""
    xhat = np.asarray(xhat, dtype=float)
    u = np.zeros(G.d)
    for j in G.neighbors(i):
        W = G.edge(i, j)
        assert W is not None
        u -= abs_weight(W) @ (xhat[i] - W.sign * xhat[j])
    return u


def control_leader_follower(
    i: int,
    xhat: np.ndarray,
    G: MatrixWeightedNetwork,
    w: np.ndarray | None = None,
) -> np.ndarray:
    """The leaderless law plus -Σ_l |B_il|(x̂_i - sgn(B_il) w_l) for the leader edges
    of `i`. `w` defaults to the network's own inputs.
    """
    xhat = np.asarray(xhat, dtype=float)
    w = G.inputs if w is None else np.asarray(w, dtype=float)
    q = control_leaderless(i, xhat, G)
    for inp, B in G.leader_edges_of(i):
        assert w is not None
        q -= abs_weight(B) @ (xhat[i] - B.sign * w[inp])
    return q


def control_operator(
    G: MatrixWeightedNetwork, *, leader_follower: bool = False
) -> tuple[np.ndarray, np.ndarray]:
    """`(K, b)` such that the stacked control is `-K x̂ + b` for flattened states."""
    if not leader_follower:
        return (laplacian(G), np.zeros(G.n * G.d))
    if not G.has_leaders:
        raise ValueError("Leader-follower control needs leader edges and inputs.")
    inputs = G.inputs
    assert inputs is not None
    return (leader_laplacian(G), leader_input_matrix(G) @ inputs.reshape(-1))


def stacked_control(
    xhat: np.ndarray, G: MatrixWeightedNetwork, *, leader_follower: bool = False
) -> np.ndarray:
    """-L x̂, or -L_B x̂ + B w, reshaped to one row per agent."""
    K, b = control_operator(G, leader_follower=leader_follower)
    flat = np.asarray(xhat, dtype=float).reshape(-1)
    return (-K @ flat + b).reshape(G.n, G.d)


def _gain(lams: list[float], leader_lams: list[float], n: int) -> float:
    total = sum(lams) + sum(leader_lams)
    return n * total**2 + n * sum(lam**2 for lam in lams)


def compute_varpi(G: MatrixWeightedNetwork, i: int) -> float:
    """ϖ_i = n(Σ_j λ_d(|A_ij|))² + nΣ_j λ_d²(|A_ij|), with `n` the agent count."""
    lams = [lambda_max_abs(W) for W in _neighbor_weights(G, i)]
    return _gain(lams, [], G.n)


def compute_omega(G: MatrixWeightedNetwork, i: int) -> float:
    """ω_i = n(Σ_j λ_d(|A_ij|) + Σ_l λ_d(|B_il|))² + nΣ_j λ_d²(|A_ij|)."""
    lams = [lambda_max_abs(W) for W in _neighbor_weights(G, i)]
    leader_lams = [lambda_max_abs(B) for _, B in G.leader_edges_of(i)]
    return _gain(lams, leader_lams, G.n)


def gain_table(
    G: MatrixWeightedNetwork, *, leader_follower: bool = False
) -> list[float]:
    compute = compute_omega if leader_follower else compute_varpi
    return [compute(G, i) for i in range(G.n)]


def _neighbor_weights(G: MatrixWeightedNetwork, i: int):
    for j in G.neighbors(i):
        W = G.edge(i, j)
        assert W is not None
        yield W


def _util(u_hat: np.ndarray, delta_sat: float) -> np.ndarray:
    return np.sum(u_hat * saturate(u_hat, delta_sat), axis=-1)


def trigger_excess(
    e: Any,
    u_hat: Any,
    psi: Any,
    params: TriggerParams | ParamArrays,
    level: SaturationLevel | float,
) -> np.ndarray | float:
    """θ(gain·‖e‖² - ρ ûᵀsat(û)) - ψ. An event fires once this is strictly positive.

    Works on a single agent (vectors of length d with scalar params) or on all agents
    at once (n×d arrays with `ParamArrays`).
    """
    delta_sat = level.delta_sat if isinstance(level, SaturationLevel) else level
    e = np.asarray(e, dtype=float)
    u_hat = np.asarray(u_hat, dtype=float)
    err_sq = np.sum(e * e, axis=-1)
    excess = (
        params.theta * (params.gain * err_sq - params.rho * _util(u_hat, delta_sat))
        - psi
    )
    return excess if np.ndim(excess) else float(excess)


def psi_rate(
    e: Any,
    u_hat: Any,
    psi: Any,
    params: TriggerParams | ParamArrays,
    level: SaturationLevel | float,
) -> np.ndarray | float:
    """-βψ + δ(ρ ûᵀsat(û) - gain·‖e‖²)."""
    delta_sat = level.delta_sat if isinstance(level, SaturationLevel) else level
    e = np.asarray(e, dtype=float)
    u_hat = np.asarray(u_hat, dtype=float)
    err_sq = np.sum(e * e, axis=-1)
    rate = -params.beta * np.asarray(psi, dtype=float) + params.delta * (
        params.rho * _util(u_hat, delta_sat) - params.gain * err_sq
    )
    return rate if np.ndim(rate) else float(rate)


def validate_params(
    params: Sequence[TriggerParams],
    G: MatrixWeightedNetwork,
    *,
    leader_follower: bool = False,
):
    """Check every agent's parameter ranges and that its gain matches ϖ_i (or ω_i).

    Raises:
        `ParamViolationError`: listing every failed constraint.
    """
    if len(params) != G.n:
        raise ParamViolationError(
            [f"expected parameters for {G.n} agents; got {len(params)}"]
        )

    expected = gain_table(G, leader_follower=leader_follower)
    label = "omega" if leader_follower else "varpi"
    violations = []
    for i, (p, gain) in enumerate(zip(params, expected, strict=True)):
        violations.extend(p.violations(i))
        if abs(p.gain - gain) > GAIN_RTOL * max(abs(gain), 1.0):
            violations.append(
                f"agent {i + 1}: gain={p.gain!r} does not match {label}={gain!r}"
            )

    if violations:
        raise ParamViolationError(violations)
