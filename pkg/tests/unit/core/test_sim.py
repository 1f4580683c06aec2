# SPDX-FileCopyrightText: 2023-present Aravinda Rao <maniacalace@gmail.com>
# SPDX-License-Identifier: MIT


from unittest import mock

import numpy as np
import pytest

from matrix_consensus.core.analysis import (
    gauged_average,
    lyapunov_series,
    psi_lower_bound,
    trigger_excess_series,
)
from matrix_consensus.core.control import TriggerParams
from matrix_consensus.core.matgraph import MatrixWeightedNetwork, WeightMatrix
from matrix_consensus.core.sim import (
    NonFiniteStateError,
    SimConfig,
    SimEvent,
    SimMode,
    SimState,
    Simulator,
    ZenoGuardTrippedError,
    sample_grid,
)
from tests.data.networks import make_path, make_scalar_leader_path


# Two scalar agents joined by a unit edge. Right after the t=0 broadcast from
# x0 = (1, -1) both agents move at speed 2 and, with rho = delta = 0, theta = 1,
# gain = 4 and psi(0) = 0.01, both triggers cross zero where 16tÂ² = 0.01Â·exp(-t).
PAIR_CROSSING = 0.0246932


@pytest.fixture()
def pair() -> MatrixWeightedNetwork:
    return MatrixWeightedNetwork(2, 1, {(0, 1): WeightMatrix.scalar(1.0, 1)})


@pytest.fixture()
def pair_params() -> list[TriggerParams]:
    return [TriggerParams(0.0, 0.0, 1.0, 1.0, 0.01, gain=4.0)] * 2


@pytest.fixture()
def make_simulator():
    def _make_simulator(
        G: MatrixWeightedNetwork,
        mode: SimMode = SimMode.event_leaderless,
        params=None,
        **config_kwargs,
    ) -> Simulator:
        config_kwargs.setdefault("delta_sat", 0.5)
        config_kwargs.setdefault("t_end", 0.5)
        return Simulator(G, SimConfig(mode=mode, **config_kwargs), params)

    return _make_simulator


@pytest.fixture()
def path3() -> MatrixWeightedNetwork:
    return make_path([1, -1])


@pytest.fixture()
def path3_x0() -> np.ndarray:
    return np.array([[1.0, 0.0], [0.0, 0.0], [-1.0, 0.5]])


class TestSimMode:
    def test_properties(self):
        assert SimMode.event_leader_follower.is_event_triggered
        assert SimMode.event_leader_follower.has_leaders
        assert not SimMode.continuous_leaderless.is_event_triggered
        assert not SimMode.continuous_leaderless.has_leaders

    @pytest.mark.parametrize(
        ("mode", "expected"),
        [
            (SimMode.event_leaderless, SimMode.continuous_leaderless),
            (SimMode.event_leader_follower, SimMode.continuous_leader_follower),
            (SimMode.continuous_leaderless, SimMode.continuous_leaderless),
        ],
    )
    def test_continuous_counterpart(self, mode, expected):
        assert mode.continuous_counterpart == expected


class TestSimConfig:
    @pytest.mark.parametrize(
        ("overrides", "fragment"),
        [
            ({"delta_sat": 0.0}, "delta_sat"),
            ({"t_end": -1.0}, "t_end"),
            ({"dt": 0.0}, "dt"),
            ({"sample_dt": -0.01}, "sample_dt"),
            ({"refine_tol": 1e-2, "dt": 1e-3}, "refine_tol"),
        ],
    )
    def test_invalid_values(self, overrides, fragment):
        kwargs = {"mode": SimMode.event_leaderless, "delta_sat": 0.5, "t_end": 1.0}
        kwargs |= overrides

        with pytest.raises(ValueError, match=fragment):
            SimConfig(**kwargs)


class TestSampleGrid:
    def test_regular_grid(self):
        assert np.allclose(sample_grid(0.05, 0.01), [0, 0.01, 0.02, 0.03, 0.04, 0.05])

    def test_off_grid_end_is_appended(self):
        assert np.allclose(sample_grid(0.025, 0.01), [0, 0.01, 0.02, 0.025])

    def test_zero_horizon_is_empty(self):
        assert sample_grid(0.0, 0.01).size == 0

    def test_last_sample_is_exactly_t_end(self):
        assert sample_grid(6.0, 0.01)[-1] == 6.0
        assert sample_grid(6.0, 0.01).size == 601


class TestSimulatorSetup:
    def test_leader_mode_needs_leaders(self, path3, make_simulator):
        with pytest.raises(ValueError, match="leader"):
            make_simulator(path3, SimMode.continuous_leader_follower)

    def test_event_mode_needs_params(self, path3, make_simulator):
        with pytest.raises(ValueError, match="params"):
            make_simulator(path3, SimMode.event_leaderless, params=None)

    def test_initial_state_shape_is_checked(self, path3, make_simulator):
        sim = make_simulator(path3, SimMode.continuous_leaderless)

        with pytest.raises(ValueError, match=r"\(3, 2\)"):
            sim.initial_state(np.zeros((2, 2)))

    def test_gauge_defaults_to_leader_gauge(self, make_simulator):
        G = make_scalar_leader_path()
        sim = make_simulator(G, SimMode.continuous_leader_follower)

        assert sim.gauge.signs == (1, 1, -1)


class TestIntegrateInterval:
    def test_continuous_linear_decay(self, pair, make_simulator):
        sim = make_simulator(
            pair, SimMode.continuous_leaderless, delta_sat=100.0, t_end=1.0
        )
        state = sim.initial_state(np.array([[1.0], [-1.0]]))

        for k in range(1, 501):
            state = sim.integrate_interval(state, k * 1e-3)

        # x1 - x2 decays as 2Â·exp(-2t).
        assert state.x[0, 0] - state.x[1, 0] == pytest.approx(2 * np.exp(-1.0))
        assert np.array_equal(state.xhat, state.x)

    def test_event_mode_holds_broadcasts(
        self, pair, pair_params, make_simulator
    ):
        sim = make_simulator(pair, params=pair_params, delta_sat=10.0)
        state = sim.initial_state(np.array([[1.0], [-1.0]]))

        nxt = sim.integrate_interval(state, 0.01)

        assert np.allclose(nxt.x, [[0.98], [-0.98]])
        assert np.array_equal(nxt.xhat, state.xhat)
        assert nxt.psi == pytest.approx(0.01 * np.exp(-0.01) * np.ones(2))

    def test_single_leader_follower_step_matches_closed_form(self, make_simulator):
        # One agent tied to its input through B = I: dx/dt = w0 - x while unsaturated.
        w0 = np.array([0.3, 0.3])
        G = MatrixWeightedNetwork(
            1, 2, {}, {(0, 0): WeightMatrix.scalar(1.0, 2)}, np.array([w0])
        )
        sim = make_simulator(G, SimMode.continuous_leader_follower, delta_sat=1e6)
        x0 = np.array([[1.0, -0.5]])

        nxt = sim.integrate_interval(sim.initial_state(x0), 0.01)

        expected = w0 + (x0[0] - w0) * np.exp(-0.01)
        assert np.allclose(nxt.x[0], expected, rtol=0, atol=1e-8)

    def test_going_backwards_is_rejected(self, pair, make_simulator):
        sim = make_simulator(pair, SimMode.continuous_leaderless)
        state = sim.initial_state(np.zeros((2, 1)))

        with pytest.raises(ValueError, match="t_next"):
            sim.integrate_interval(state, -0.1)

    def test_non_finite_state_is_reported(self, pair, make_simulator):
        sim = make_simulator(pair, SimMode.continuous_leaderless)
        state = sim.initial_state(np.array([[np.inf], [0.0]]))

        with pytest.raises(NonFiniteStateError):
            sim.integrate_interval(state, 0.001)


class TestDetectEvent:
    def test_refines_to_the_crossing(self, pair, pair_params, make_simulator):
        sim = make_simulator(pair, params=pair_params, delta_sat=10.0, dt=0.05)
        state = sim.initial_state(np.array([[1.0], [-1.0]]))

        hit = sim.detect_event(state, 0.03)

        assert hit is not None
        agents, t_event = hit
        assert agents == [0, 1]
        assert t_event == pytest.approx(PAIR_CROSSING, abs=2e-6)

    def test_no_event_before_the_crossing(self, pair, pair_params, make_simulator):
        sim = make_simulator(pair, params=pair_params, delta_sat=10.0)
        state = sim.initial_state(np.array([[1.0], [-1.0]]))

        assert sim.detect_event(state, 0.02) is None

    def test_continuous_modes_never_trigger(self, pair, make_simulator):
        sim = make_simulator(pair, SimMode.continuous_leaderless)
        state = sim.initial_state(np.array([[1.0], [-1.0]]))

        assert sim.detect_event(state, 0.1) is None


class TestApplyEvents:
    def test_resets_error_of_firing_agents_only(self, path3, make_params):
        sim = Simulator(
            path3,
            SimConfig(SimMode.event_leaderless, delta_sat=0.5, t_end=1.0),
            make_params(path3),
        )
        state = SimState.initial(np.zeros((3, 2)), np.full(3, 0.5))
        state.x = np.ones((3, 2))

        nxt = sim.apply_events(state, [1], 0.25)

        assert np.array_equal(nxt.xhat[1], [1.0, 1.0])
        assert np.array_equal(nxt.xhat[0], [0.0, 0.0])
        assert nxt.event_count.tolist() == [0, 1, 0]
        assert nxt.last_event_time.tolist() == [0.0, 0.25, 0.0]
        runtimes = nxt.runtimes()
        assert [rt.event_count for rt in runtimes] == [0, 1, 0]
        assert [rt.last_event_time for rt in runtimes] == [0.0, 0.25, 0.0]
        assert [rt.psi for rt in runtimes] == [0.5, 0.5, 0.5]
        assert np.array_equal(runtimes[1].error, [0.0, 0.0])
        assert np.array_equal(runtimes[0].error, [-1.0, -1.0])


class TestRun:
    def test_zero_horizon_gives_empty_record(
        self, path3, path3_x0, make_params, make_simulator
    ):
        sim = make_simulator(path3, params=make_params(path3), t_end=0.0)

        record = sim.run(path3_x0)

        assert record.is_empty
        assert record.events == []
        assert record.states.shape == (0, 3, 2)
        assert record.t_sf is None

    def test_all_agents_broadcast_at_start(
        self, path3, path3_x0, make_params, make_simulator
    ):
        record = make_simulator(path3, params=make_params(path3)).run(path3_x0)

        assert record.events[:3] == [(0, 0.0), (1, 0.0), (2, 0.0)]
        assert np.array_equal(record.broadcasts[0], path3_x0)

    def test_record_shapes(self, path3, path3_x0, make_params, make_simulator):
        record = make_simulator(path3, params=make_params(path3)).run(path3_x0)

        assert record.times.shape == (51,)
        assert record.states.shape == (51, 3, 2)
        assert record.controls.shape == (51, 3, 2)
        assert record.psi.shape == (51, 3)
        assert record.saturation_active.shape == (51,)
        assert record.times[-1] == 0.5
        assert np.array_equal(record.states[0], path3_x0)
        assert np.max(np.abs(record.controls)) <= 0.5

    def test_events_are_chronological_and_counted(
        self, path3, path3_x0, make_params, make_simulator
    ):
        record = make_simulator(path3, params=make_params(path3), t_end=2.0).run(
            path3_x0
        )

        times = [t for _, t in record.events]
        assert times == sorted(times)
        assert record.event_counts.sum() == len(record.events)
        assert len(record.events) > 3

    def test_pair_fires_at_the_crossing(self, pair, pair_params, make_simulator):
        record = make_simulator(
            pair, params=pair_params, delta_sat=10.0, t_end=0.05
        ).run(np.array([[1.0], [-1.0]]))

        assert [a for a, _ in record.events[2:4]] == [0, 1]
        assert record.events[2][1] == pytest.approx(PAIR_CROSSING, abs=2e-6)
        assert record.t_sf is None

    def test_saturated_run_reports_t_sf(
        self, path3, path3_x0, make_params, make_simulator
    ):
        record = make_simulator(path3, params=make_params(path3)).run(path3_x0)

        assert record.saturation_active[0]
        assert record.t_sf is not None
        assert record.t_sf in record.times

    def test_trigger_stays_satisfied_at_samples(
        self, path3, path3_x0, make_params, make_simulator
    ):
        record = make_simulator(path3, params=make_params(path3), t_end=2.0).run(
            path3_x0
        )

        assert np.max(trigger_excess_series(record)) <= 1e-4

    def test_psi_stays_above_its_lower_bound(
        self, path3, path3_x0, make_params, make_simulator
    ):
        record = make_simulator(path3, params=make_params(path3), t_end=2.0).run(
            path3_x0
        )

        assert np.all(record.psi >= psi_lower_bound(record) - 1e-6)
        assert np.all(record.psi > 0)

    def test_lyapunov_function_does_not_increase(
        self, path3, path3_x0, make_params, make_simulator
    ):
        record = make_simulator(path3, params=make_params(path3), t_end=2.0).run(
            path3_x0
        )

        V = lyapunov_series(record)
        assert np.all(np.diff(V) <= 1e-6)

    def test_gauged_average_is_conserved_without_saturation(
        self, path3, path3_x0, make_params, make_simulator
    ):
        record = make_simulator(
            path3, params=make_params(path3), delta_sat=100.0, t_end=1.0
        ).run(path3_x0)

        assert record.t_sf is None
        averages = gauged_average(record.states, record.gauge)
        assert np.max(np.abs(averages - averages[0])) < 1e-6

    def test_continuous_run_has_no_events_or_psi(
        self, path3, path3_x0, make_simulator
    ):
        record = make_simulator(path3, SimMode.continuous_leaderless).run(path3_x0)

        assert record.events == []
        assert record.params is None
        assert record.psi.shape == (51, 0)
        assert np.array_equal(record.broadcasts, record.states)

    def test_halving_dt_barely_moves_a_continuous_run(self, g1, rng, make_simulator):
        x0 = rng.uniform(-1.0, 1.0, size=(5, 3))

        final = [
            make_simulator(g1, SimMode.continuous_leaderless, t_end=2.0, dt=dt)
            .run(x0)
            .states[-1]
            for dt in (1e-3, 5e-4)
        ]

        assert np.max(np.abs(final[0] - final[1])) < 1e-6

    def test_deterministic(self, path3, path3_x0, make_params, make_simulator):
        params = make_params(path3)
        a = make_simulator(path3, params=params).run(path3_x0)
        b = make_simulator(path3, params=params).run(path3_x0)

        assert a.events == b.events
        assert np.array_equal(a.states, b.states)

    def test_zeno_guard(self, path3, path3_x0, make_params, make_simulator):
        sim = make_simulator(
            path3, params=make_params(path3), t_end=1.0, max_events_per_second=1
        )

        with pytest.raises(ZenoGuardTrippedError) as exc_info:
            sim.run(path3_x0)

        assert 0 < exc_info.value.t <= 1.0


class TestSubscriptions:
    def test_sample_and_broadcast_callbacks(
        self, path3, path3_x0, make_params, make_simulator
    ):
        sim = make_simulator(path3, params=make_params(path3), t_end=0.05)
        on_sample = mock.Mock()
        on_broadcast = mock.Mock()
        sim.subscribe(SimEvent.sample, on_sample)
        sim.subscribe(SimEvent.broadcast, on_broadcast)

        record = sim.run(path3_x0)

        assert on_sample.call_count == record.times.size
        assert on_sample.mock_calls[0] == mock.call(0, 0.0)
        assert on_broadcast.mock_calls[0] == mock.call([0, 1, 2], 0.0)
        fired = sum(len(c.args[0]) for c in on_broadcast.mock_calls)
        assert fired == len(record.events)

    def test_unsubscribe(self, path3, path3_x0, make_params, make_simulator):
        sim = make_simulator(path3, params=make_params(path3), t_end=0.05)
        callback = mock.Mock()
        subscription_id = sim.subscribe(SimEvent.sample, callback)

        sim.unsubscribe(subscription_id)
        sim.run(path3_x0)

        callback.assert_not_called()
