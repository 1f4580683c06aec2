# SPDX-FileCopyrightText: 2023-present Aravinda Rao <maniacalace@gmail.com>
# SPDX-License-Identifier: MIT

import numpy as np
import pytest

import tests.data.networks
from matrix_consensus.core.control import TriggerParams, gain_table
from matrix_consensus.core.matgraph import MatrixWeightedNetwork
from matrix_consensus.core.sim import SimulationRecord
from matrix_consensus.scenario import parse_scenario, run_scenario


@pytest.fixture()
def g1() -> MatrixWeightedNetwork:
    return tests.data.networks.make_g1()


@pytest.fixture()
def g1_leaders() -> MatrixWeightedNetwork:
    return tests.data.networks.make_g1(with_leaders=True)


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(20231)


@pytest.fixture()
def make_params():
    def _make_params(
        G: MatrixWeightedNetwork,
        *,
        leader_follower: bool = False,
        rho: float = 0.9,
        delta: float = 1.0,
        beta: float = 1.0,
        theta: float = 0.5,
        psi0: float = 0.5,
    ) -> list[TriggerParams]:
        gains = gain_table(G, leader_follower=leader_follower)
        return [
            TriggerParams(
                rho=rho, delta=delta, beta=beta, theta=theta, psi0=psi0, gain=gain
            )
            for gain in gains
        ]

    return _make_params


@pytest.fixture()
def make_record():
    """Run the small 3-agent path scenario from fixed initial states."""

    def _make_record(
        mode: str = "event_leaderless",
        *,
        t_end: float = 0.5,
        delta_sat: float = 0.5,
    ) -> SimulationRecord:
        init = (
            '\n[sim.init]\nkind = "explicit"\n'
            "states = [[1.0, 0.0], [0.0, 0.0], [-1.0, 0.5]]\n"
        )
        text = tests.data.networks.small_scenario_toml(
            mode=mode, t_end=t_end, extra_sim=init
        ).replace("delta_sat = 0.5\n", f"delta_sat = {delta_sat}\n")
        return run_scenario(parse_scenario(text))

    return _make_record
