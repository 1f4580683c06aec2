# SPDX-FileCopyrightText: 2023-present Aravinda Rao <maniacalace@gmail.com>
# SPDX-License-Identifier: MIT

"""The hybrid simulation loop.

Between events every agent integrates its state (and its auxiliary ψ in the
event-triggered modes) with a fixed-step 4th-order Runge-Kutta stepper while the
broadcast states x̂ are held. At the end of every step the trigger rule is checked; a
positive excess is refined by bisection to the earliest crossing, the firing agents
broadcast, and integration resumes from that instant.
"""

from __future__ import annotations

import collections
import dataclasses
import uuid
from collections.abc import Callable, Sequence

import numpy as np
import scipy.optimize
from strenum import StrEnum

from matrix_consensus.core.control import (
    ParamArrays,
    TriggerParams,
    control_operator,
    psi_rate,
    saturate,
    stack_params,
    trigger_excess,
)
from matrix_consensus.core.matgraph import (
    Gauge,
    MatrixWeightedNetwork,
    find_gauge,
    find_leader_gauge,
)
from matrix_consensus.log_utils import logger


SATURATION_ATOL = 1e-9
ZENO_WINDOW = 1.0


class NonFiniteStateError(Exception):
    pass


class ZenoGuardTrippedError(Exception):
    def __init__(self, agent: int, t: float, limit: float):
        super().__init__(
            f"Agent {agent + 1} exceeded {limit:g} events within {ZENO_WINDOW:g}s "
            f"at t={t:.9g}"
        )
        self.agent = agent
        self.t = t


class NoSaturationEpochError(Exception):
    pass


class SimMode(StrEnum):
    event_leaderless = "event_leaderless"
    event_leader_follower = "event_leader_follower"
    continuous_leaderless = "continuous_leaderless"
    continuous_leader_follower = "continuous_leader_follower"

    @property
    def is_event_triggered(self) -> bool:
        cls = self.__class__
        return self in [cls.event_leaderless, cls.event_leader_follower]

    @property
    def has_leaders(self) -> bool:
        cls = self.__class__
        return self in [cls.event_leader_follower, cls.continuous_leader_follower]

    @property
    def continuous_counterpart(self) -> SimMode:
        cls = self.__class__
        return (
            cls.continuous_leader_follower
            if self.has_leaders
            else cls.continuous_leaderless
        )


class SimEvent(StrEnum):
    broadcast = "broadcast"
    sample = "sample"


@dataclasses.dataclass
class AgentRuntime:
    x: np.ndarray
    xhat: np.ndarray
    psi: float
    last_event_time: float = 0.0
    event_count: int = 0

    @property
    def error(self) -> np.ndarray:
        return self.xhat - self.x


@dataclasses.dataclass
class SimState:
    """Runtime state of all agents at time `t`, stored as stacked arrays."""

    t: float
    x: np.ndarray
    xhat: np.ndarray
    psi: np.ndarray
    last_event_time: np.ndarray
    event_count: np.ndarray

    @classmethod
    def initial(cls, x0: np.ndarray, psi0: np.ndarray) -> SimState:
        n = x0.shape[0]
        return cls(
            t=0.0,
            x=x0.copy(),
            xhat=x0.copy(),
            psi=psi0.copy(),
            last_event_time=np.zeros(n),
            event_count=np.zeros(n, dtype=int),
        )

    def runtimes(self) -> list[AgentRuntime]:
        psi = self.psi if self.psi.size else np.zeros(self.x.shape[0])
        return [
            AgentRuntime(
                x=self.x[i].copy(),
                xhat=self.xhat[i].copy(),
                psi=float(psi[i]),
                last_event_time=float(self.last_event_time[i]),
                event_count=int(self.event_count[i]),
            )
            for i in range(self.x.shape[0])
        ]

    def copy(self) -> SimState:
        return SimState(
            t=self.t,
            x=self.x.copy(),
            xhat=self.xhat.copy(),
            psi=self.psi.copy(),
            last_event_time=self.last_event_time.copy(),
            event_count=self.event_count.copy(),
        )


@dataclasses.dataclass(frozen=True)
class SimConfig:
    mode: SimMode
    delta_sat: float
    t_end: float
    dt: float = 1e-3
    sample_dt: float = 0.01
    refine_tol: float = 1e-6
    max_events_per_second: float = 1e4

    def __post_init__(self):
        if not self.delta_sat > 0:
            raise ValueError("`delta_sat` must be positive.")
        if not self.t_end >= 0:
            raise ValueError("`t_end` must be nonnegative.")
        for name in ["dt", "sample_dt", "refine_tol", "max_events_per_second"]:
            if not getattr(self, name) > 0:
                raise ValueError(f"`{name}` must be positive.")
        if self.refine_tol >= self.dt:
            raise ValueError("`refine_tol` must be smaller than `dt`.")


@dataclasses.dataclass
class SimulationRecord:
    mode: SimMode
    network: MatrixWeightedNetwork
    params: list[TriggerParams] | None
    delta_sat: float
    gauge: Gauge
    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray
    broadcasts: np.ndarray
    psi: np.ndarray
    events: list[tuple[int, float]]
    saturation_active: np.ndarray
    t_sf: float | None

    @property
    def n(self) -> int:
        return self.network.n

    @property
    def d(self) -> int:
        return self.network.d

    @property
    def is_empty(self) -> bool:
        return self.times.size == 0

    @property
    def event_counts(self) -> np.ndarray:
        counts = np.zeros(self.n, dtype=int)
        for agent, _ in self.events:
            counts[agent] += 1
        return counts

    def events_of(self, agent: int) -> np.ndarray:
        return np.array([t for a, t in self.events if a == agent])

    def sample_index(self, t: float) -> int:
        """Index of the last sample at or before `t`."""
        return max(int(np.searchsorted(self.times, t, side="right")) - 1, 0)


class Simulator:
    """Runs one network under one configuration.

    Subscribers receive `SimEvent.broadcast` with `(agents, t)` after each applied set
    of simultaneous events, and `SimEvent.sample` with `(index, t)` after each recorded
    sample.
    """

    SimEventCallback = Callable[..., None]

    def __init__(
        self,
        network: MatrixWeightedNetwork,
        config: SimConfig,
        params: Sequence[TriggerParams] | None = None,
        gauge: Gauge | None = None,
    ):
        mode = config.mode
        if mode.has_leaders and not network.has_leaders:
            raise ValueError(f"Mode `{mode}` needs leader edges and inputs.")
        if mode.is_event_triggered:
            if params is None or len(params) != network.n:
                raise ValueError(
                    f"Mode `{mode}` needs `params` for each of the {network.n} agents."
                )

        self._network = network
        self._config = config
        self._mode = mode
        self._params = list(params) if params is not None else None
        self._stacked: ParamArrays | None = (
            stack_params(self._params) if mode.is_event_triggered and params else None
        )
        if gauge is None:
            find = find_leader_gauge if mode.has_leaders else find_gauge
            gauge = find(network)
        self._gauge = gauge
        self._K, self._b = control_operator(network, leader_follower=mode.has_leaders)
        self._n = network.n
        self._d = network.d

        self._event_subscribers: collections.defaultdict[
            SimEvent, dict[str, Simulator.SimEventCallback]
        ] = collections.defaultdict(dict)

    @property
    def config(self) -> SimConfig:
        return self._config

    @property
    def gauge(self) -> Gauge:
        return self._gauge

    def subscribe(self, event: SimEvent, callback: Simulator.SimEventCallback) -> str:
        subscription_id = uuid.uuid4().hex
        self._event_subscribers[event][subscription_id] = callback
        return subscription_id

    def unsubscribe(self, subscription_id: str):
        for subscribers in self._event_subscribers.values():
            if subscription_id in subscribers:
                del subscribers[subscription_id]
                return

    def initial_state(self, x0: np.ndarray) -> SimState:
        x0 = np.asarray(x0, dtype=float)
        if x0.shape != (self._n, self._d):
            raise ValueError(
                f"`x0` must have shape ({self._n}, {self._d}); got {x0.shape}."
            )
        psi0 = self._stacked.psi0 if self._stacked is not None else np.zeros(0)
        return SimState.initial(x0, psi0)

    def control_input(self, state: SimState) -> np.ndarray:
        """The unsaturated control û (or u in continuous modes), one row per agent."""
        source = state.xhat if self._mode.is_event_triggered else state.x
        return (-self._K @ source.reshape(-1) + self._b).reshape(self._n, self._d)

    def excess(self, state: SimState) -> np.ndarray:
        """Trigger excess of every agent. Empty in continuous modes."""
        if self._stacked is None:
            return np.zeros(0)
        return np.asarray(
            trigger_excess(
                state.xhat - state.x,
                self.control_input(state),
                state.psi,
                self._stacked,
                self._config.delta_sat,
            )
        )

    def integrate_interval(self, state: SimState, t_next: float) -> SimState:
        """Advance by one RK4 step from `state.t` to `t_next` with x̂ held constant.

        Raises:
            `NonFiniteStateError`: if any state or ψ component becomes non-finite.
        """
        h = t_next - state.t
        if h < 0:
            raise ValueError("`t_next` must not precede `state.t`.")

        nx_ = self._n * self._d
        y0 = np.concatenate([state.x.reshape(-1), state.psi])
        derivative = self._derivative_fn(state)

        k1 = derivative(y0)
        k2 = derivative(y0 + 0.5 * h * k1)
        k3 = derivative(y0 + 0.5 * h * k2)
        k4 = derivative(y0 + h * k3)
        y1 = y0 + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)

        if not np.all(np.isfinite(y1)):
            raise NonFiniteStateError(f"Non-finite state after stepping to t={t_next}")

        nxt = state.copy()
        nxt.t = t_next
        nxt.x = y1[:nx_].reshape(self._n, self._d)
        nxt.psi = y1[nx_:]
        if not self._mode.is_event_triggered:
            nxt.xhat = nxt.x.copy()
        return nxt

    def detect_event(
        self, state: SimState, t_next: float
    ) -> tuple[list[int], float] | None:
        """Check whether any trigger excess turns positive on `[state.t, t_next]`.

        If so, the earliest crossing is refined by bisection to within `refine_tol`
        and returned together with the agents whose excess is nonnegative there. Agents
        crossing within one `refine_tol` after the first are treated as simultaneous.
        """
        if not self._mode.is_event_triggered:
            return None

        h = t_next - state.t
        end_excess = self.excess(self.integrate_interval(state, t_next))
        if np.max(end_excess) <= 0:
            return None

        refine_tol = self._config.refine_tol
        xtol = refine_tol / 2

        def max_excess(s: float) -> float:
            trial = self.integrate_interval(state, state.t + s)
            return float(np.max(self.excess(trial)))

        if max_excess(0.0) > 0:
            root = 0.0
        else:
            root = scipy.optimize.bisect(max_excess, 0.0, h, xtol=xtol)
        h_fire = min(root + xtol, h)
        h_window = min(h_fire + refine_tol, h)

        at_fire = self.excess(self.integrate_interval(state, state.t + h_fire))
        at_window = self.excess(self.integrate_interval(state, state.t + h_window))
        agents = np.flatnonzero((at_fire >= 0) | (at_window >= 0)).tolist()
        if not agents:
            logger.warning(
                f"Bisection near t={state.t + h_fire:.9g} found no firing agent; "
                "falling back to the step end."
            )
            agents = np.flatnonzero(end_excess > 0).tolist()
            h_fire = h

        t_event = t_next if h_fire == h else state.t + h_fire
        logger.debug(f"Event refined to t={t_event:.9g} for agents {agents}")
        return (agents, t_event)

    def apply_events(
        self, state: SimState, agents: Sequence[int], t_event: float
    ) -> SimState:
        """Broadcast the current state of each agent in `agents`, resetting its
        measurement error.
        """
        nxt = state.copy()
        idx = list(agents)
        nxt.xhat[idx] = nxt.x[idx]
        nxt.event_count[idx] += 1
        nxt.last_event_time[idx] = t_event
        return nxt

    def run(self, x0: np.ndarray) -> SimulationRecord:
        """Simulate from `x0` over `[0, t_end]`.

        Raises:
            `ZenoGuardTrippedError`: if an agent fires more than
                `max_events_per_second` times within any 1 s window.
            `NonFiniteStateError`: if the integration diverges.
        """
        config = self._config
        state = self.initial_state(x0)
        sample_times = sample_grid(config.t_end, config.sample_dt)

        logger.info(
            f"Run started: mode={self._mode}, n={self._n}, d={self._d}, "
            f"t_end={config.t_end}"
        )

        recorder = _Recorder(len(sample_times), self._n, self._d, state.psi.size)
        events: list[tuple[int, float]] = []
        zeno_windows: dict[int, collections.deque[float]] = collections.defaultdict(
            collections.deque
        )

        if sample_times.size == 0:
            return self._build_record(recorder, events)

        if self._mode.is_event_triggered:
            state = self._fire(state, list(range(self._n)), events, zeno_windows)

        saturated = self._is_saturated(state)
        self._record(recorder, state, saturated=saturated)

        k = 1
        saturated = False
        while k < sample_times.size:
            t_sample = sample_times[k]
            target = state.t + config.dt
            if target >= t_sample - 1e-12:
                target = t_sample

            saturated |= self._is_saturated(state)

            nxt = self.integrate_interval(state, target)
            hit = None
            if self._mode.is_event_triggered and np.max(self.excess(nxt)) > 0:
                hit = self.detect_event(state, target)

            if hit is not None:
                agents, t_event = hit
                state = self.integrate_interval(state, t_event)
                state = self._fire(state, agents, events, zeno_windows)
                saturated |= self._is_saturated(state)
                if state.t < t_sample:
                    continue
            else:
                state = nxt

            if state.t == t_sample:
                saturated |= self._is_saturated(state)
                self._record(recorder, state, saturated=saturated)
                k += 1
                saturated = False

        record = self._build_record(recorder, events)
        logger.info(
            f"Run finished: {len(events)} events, T_sf={record.t_sf}, "
            f"{sample_times.size} samples"
        )
        return record

    def _fire(
        self,
        state: SimState,
        agents: list[int],
        events: list[tuple[int, float]],
        zeno_windows: dict[int, collections.deque[float]],
    ) -> SimState:
        # Neighbor broadcasts change û, so re-check everyone at the same instant until
        # nobody is left with a positive excess.
        t = state.t
        while agents:
            state = self.apply_events(state, agents, t)
            for agent in agents:
                events.append((agent, t))
                window = zeno_windows[agent]
                window.append(t)
                while t - window[0] > ZENO_WINDOW:
                    window.popleft()
                if len(window) > self._config.max_events_per_second:
                    raise ZenoGuardTrippedError(
                        agent, t, self._config.max_events_per_second
                    )
            self._notify_subscribers(SimEvent.broadcast, list(agents), t)
            agents = np.flatnonzero(self.excess(state) > 0).tolist()
        return state

    def _derivative_fn(self, state: SimState) -> Callable[[np.ndarray], np.ndarray]:
        n, d = self._n, self._d
        K, b = self._K, self._b
        delta_sat = self._config.delta_sat

        if not self._mode.is_event_triggered:

            def continuous(y: np.ndarray) -> np.ndarray:
                return saturate(-K @ y + b, delta_sat)

            return continuous

        stacked = self._stacked
        assert stacked is not None
        xhat = state.xhat
        u_hat = self.control_input(state)
        velocity = saturate(u_hat, delta_sat).reshape(-1)
        nx_ = n * d

        def event_triggered(y: np.ndarray) -> np.ndarray:
            x = y[:nx_].reshape(n, d)
            rate = psi_rate(xhat - x, u_hat, y[nx_:], stacked, delta_sat)
            return np.concatenate([velocity, np.asarray(rate)])

        return event_triggered

    def _is_saturated(self, state: SimState) -> bool:
        u = self.control_input(state)
        return bool(np.any(np.abs(u) >= self._config.delta_sat - SATURATION_ATOL))

    def _record(self, recorder: _Recorder, state: SimState, *, saturated: bool):
        index = recorder.append(
            state,
            saturate(self.control_input(state), self._config.delta_sat),
            saturated=saturated,
        )
        self._notify_subscribers(SimEvent.sample, index, state.t)

    def _build_record(
        self, recorder: _Recorder, events: list[tuple[int, float]]
    ) -> SimulationRecord:
        saturation_active = recorder.saturation_active
        t_sf = None
        if np.any(saturation_active):
            t_sf = float(recorder.times[np.flatnonzero(saturation_active)[-1]])
        return SimulationRecord(
            mode=self._mode,
            network=self._network,
            params=self._params if self._mode.is_event_triggered else None,
            delta_sat=self._config.delta_sat,
            gauge=self._gauge,
            times=recorder.times,
            states=recorder.states,
            controls=recorder.controls,
            broadcasts=recorder.broadcasts,
            psi=recorder.psi,
            events=events,
            saturation_active=saturation_active,
            t_sf=t_sf,
        )

    def _notify_subscribers(self, event: SimEvent, *args):
        for callback in self._event_subscribers[event].values():
            callback(*args)


class _Recorder:
    def __init__(self, size: int, n: int, d: int, n_psi: int):
        self.times = np.zeros(size)
        self.states = np.zeros((size, n, d))
        self.controls = np.zeros((size, n, d))
        self.broadcasts = np.zeros((size, n, d))
        self.psi = np.zeros((size, n_psi))
        self.saturation_active = np.zeros(size, dtype=bool)
        self._next = 0

    def append(
        self, state: SimState, controls: np.ndarray, *, saturated: bool
    ) -> int:
        k = self._next
        self.times[k] = state.t
        self.states[k] = state.x
        self.controls[k] = controls
        self.broadcasts[k] = state.xhat
        self.psi[k] = state.psi
        self.saturation_active[k] = saturated
        self._next += 1
        return k


def sample_grid(t_end: float, sample_dt: float) -> np.ndarray:
    """Multiples of `sample_dt` up to `t_end`, plus `t_end` itself when it falls off
    the grid. Empty when `t_end` is 0.
    """
    if t_end <= 0:
        return np.zeros(0)
    count = int(np.floor(t_end / sample_dt + 1e-9))
    times = np.arange(count + 1) * sample_dt
    times = times[times <= t_end + 1e-12]
    times[-1] = min(times[-1], t_end)
    if t_end - times[-1] > 1e-12:
        times = np.append(times, t_end)
    return times
