# SPDX-FileCopyrightText: 2023-present Aravinda Rao <maniacalace@gmail.com>
# SPDX-License-Identifier: MIT

"""Scenario files: a TOML description of a network, its trigger parameters and the
simulation settings.

Nodes and inputs are numbered from 1 in scenario files and 0-based in memory.
"""

from __future__ import annotations

import dataclasses
import importlib.resources
import re
import sys
from pathlib import Path
from typing import Any

import numpy as np
import tomli_w


if sys.version_info >= (3, 11):
    import tomllib
else:  # no cov
    import tomli as tomllib

from matrix_consensus.core.control import (
    ParamViolationError,
    TriggerParams,
    gain_table,
    validate_params,
)
from matrix_consensus.core.matgraph import (
    DEFAULT_WEIGHT_TOL,
    Gauge,
    IndefiniteWeightError,
    MatrixWeightedNetwork,
    StructurallyImbalancedError,
    WeightMatrix,
    check_assumption1,
    check_assumption2,
    find_gauge,
    find_leader_gauge,
)
from matrix_consensus.core.sim import (
    SimConfig,
    SimMode,
    SimulationRecord,
    Simulator,
)
from matrix_consensus.core.utils import per_agent
from matrix_consensus.log_utils import logger
from matrix_consensus.utils.config import ConfigOption
from matrix_consensus.validation import (
    validate_init_kind,
    validate_mode,
    validate_nonnegative_int,
    validate_nonnegative_number,
    validate_number,
    validate_number_or_list,
    validate_positive_int,
    validate_positive_number,
)


BUNDLED_SCENARIOS = ("g1_leaderless", "g1_leader_follower")
SYMMETRY_ATOL = 1e-9
PARAM_FIELDS = ("rho", "delta", "beta", "theta", "psi0")


class ScenarioParseError(Exception):
    def __init__(self, msg: str, field: str | None = None, line: int | None = None):
        location = f" (line {line})" if line is not None else ""
        super().__init__(f"{msg}{location}")
        self.field = field
        self.line = line


class ScenarioValidationError(Exception):
    pass


network_options = [
    ConfigOption(
        "n",
        ConfigOption.UNSET,
        "Number of agents.",
        validator=validate_positive_int,
    ),
    ConfigOption(
        "d",
        ConfigOption.UNSET,
        "State dimension of every agent; all weights are d×d.",
        validator=validate_positive_int,
    ),
    ConfigOption(
        "weight_tol",
        DEFAULT_WEIGHT_TOL,
        """
        Relative tolerance for classifying edge weights. Eigenvalues within
        `weight_tol * max(spectral_radius, 1)` of zero count as zero, which is what
        separates semidefinite weights from definite ones. Matrices printed with two
        decimals need around `1e-2`.
        """,
        validator=validate_nonnegative_number,
    ),
]

params_options = [
    ConfigOption(
        "rho",
        ConfigOption.UNSET,
        "Weight of the control-effort term in the trigger rule, in [0, 1).",
        validator=validate_number_or_list,
    ),
    ConfigOption(
        "delta",
        ConfigOption.UNSET,
        "Coupling of the trigger slack into the auxiliary ψ dynamics, in [0, 1].",
        validator=validate_number_or_list,
    ),
    ConfigOption(
        "beta",
        ConfigOption.UNSET,
        "Decay rate of the auxiliary ψ; must be positive.",
        validator=validate_number_or_list,
    ),
    ConfigOption(
        "theta",
        ConfigOption.UNSET,
        "Scaling of the trigger rule; must exceed (1 - delta) / beta.",
        validator=validate_number_or_list,
    ),
    ConfigOption(
        "psi0",
        ConfigOption.UNSET,
        "Initial value of the auxiliary ψ; must be positive.",
        validator=validate_number_or_list,
    ),
]

sim_options = [
    ConfigOption(
        "mode",
        ConfigOption.UNSET,
        f"Simulation mode. One of {[str(m) for m in SimMode]}.",
        validator=validate_mode,
    ),
    ConfigOption(
        "delta_sat",
        ConfigOption.UNSET,
        "Actuator saturation level Δ; every control component is clipped to [-Δ, Δ].",
        validator=validate_positive_number,
    ),
    ConfigOption(
        "t_end",
        ConfigOption.UNSET,
        "Simulated horizon in seconds. `0` gives an empty run.",
        validator=validate_nonnegative_number,
    ),
    ConfigOption(
        "dt",
        1e-3,
        "Fixed integrator step in seconds.",
        validator=validate_positive_number,
    ),
    ConfigOption(
        "sample_dt",
        0.01,
        "Spacing of recorded samples in seconds.",
        validator=validate_positive_number,
    ),
    ConfigOption(
        "refine_tol",
        1e-6,
        "Bisection tolerance in seconds for locating trigger events.",
        validator=validate_positive_number,
    ),
    ConfigOption(
        "seed",
        0,
        "Seed for the random initial conditions.",
        validator=validate_nonnegative_int,
    ),
    ConfigOption(
        "max_events_per_second",
        1e4,
        "Zeno guard. A run fails once any agent fires more often than this within a 1 s window.",  # noqa: E501
        validator=validate_positive_number,
    ),
]

init_options = [
    ConfigOption(
        "kind",
        "uniform",
        "`uniform` draws every state component from [low, high] with the seed; "
        "`explicit` takes `states`.",
        validator=validate_init_kind,
    ),
    ConfigOption("low", -1.0, "Lower bound for `uniform`.", validator=validate_number),
    ConfigOption("high", 1.0, "Upper bound for `uniform`.", validator=validate_number),
    ConfigOption(
        "states",
        None,
        "One length-d list per agent, for `explicit`.",
        default_value_label="(none)",
    ),
]


@dataclasses.dataclass(frozen=True)
class InitSpec:
    kind: str = "uniform"
    low: float = -1.0
    high: float = 1.0
    states: tuple[tuple[float, ...], ...] | None = None

    def as_dict(self) -> dict[str, Any]:
        state: dict[str, Any] = {"kind": self.kind}
        if self.kind == "uniform":
            state |= {"low": self.low, "high": self.high}
        else:
            assert self.states is not None
            state["states"] = [list(row) for row in self.states]
        return state


@dataclasses.dataclass(frozen=True, eq=False)
class Scenario:
    network: MatrixWeightedNetwork
    mode: SimMode
    delta_sat: float
    t_end: float
    params: tuple[TriggerParams, ...] | None
    gauge: Gauge
    weight_tol: float = DEFAULT_WEIGHT_TOL
    dt: float = 1e-3
    sample_dt: float = 0.01
    refine_tol: float = 1e-6
    seed: int = 0
    max_events_per_second: float = 1e4
    init: InitSpec = dataclasses.field(default_factory=InitSpec)

    def sim_config(self) -> SimConfig:
        return SimConfig(
            mode=self.mode,
            delta_sat=self.delta_sat,
            t_end=self.t_end,
            dt=self.dt,
            sample_dt=self.sample_dt,
            refine_tol=self.refine_tol,
            max_events_per_second=self.max_events_per_second,
        )

    def initial_states(self) -> np.ndarray:
        n, d = self.network.n, self.network.d
        if self.init.kind == "explicit":
            assert self.init.states is not None
            return np.array(self.init.states, dtype=float)
        rng = np.random.default_rng(self.seed)
        return rng.uniform(self.init.low, self.init.high, size=(n, d))

    def with_seed(self, seed: int) -> Scenario:
        return dataclasses.replace(self, seed=seed)

    def with_mode(self, mode: SimMode | str) -> Scenario:
        """Same network and parameters under another mode. Gains and the network
        checks are redone for the new mode.
        """
        mode = SimMode(mode)
        gauge = _check_network(self.network, mode, self.weight_tol)
        params = None
        if self.params is not None:
            raw = {k: [getattr(p, k) for p in self.params] for k in PARAM_FIELDS}
            params = _build_params(self.network, mode, raw)
        elif mode.is_event_triggered:
            raise ScenarioValidationError(f"Mode `{mode}` needs a [params] section.")
        return dataclasses.replace(self, mode=mode, params=params, gauge=gauge)

    def simulator(self) -> Simulator:
        return Simulator(self.network, self.sim_config(), self.params, self.gauge)

    def as_dict(self) -> dict[str, Any]:
        return {
            "network": self.network.as_dict(),
            "weight_tol": self.weight_tol,
            "mode": str(self.mode),
            "delta_sat": self.delta_sat,
            "t_end": self.t_end,
            "dt": self.dt,
            "sample_dt": self.sample_dt,
            "refine_tol": self.refine_tol,
            "seed": self.seed,
            "max_events_per_second": self.max_events_per_second,
            "params": (
                None if self.params is None else [p.as_dict() for p in self.params]
            ),
            "gauge": list(self.gauge.signs),
            "init": self.init.as_dict(),
        }

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Scenario):
            return NotImplemented
        return self.as_dict() == other.as_dict()

    __hash__ = None  # type: ignore[assignment]


def run_scenario(scenario: Scenario) -> SimulationRecord:
    return scenario.simulator().run(scenario.initial_states())


def load_scenario(ref: str | Path) -> Scenario:
    """Load a scenario from a file path, or else by the name of a bundled scenario."""
    path = Path(ref)
    if path.is_file():
        logger.info(f"Loading scenario from {path}")
        return parse_scenario(path.read_text(encoding="utf-8"))

    name = path.name.removesuffix(".toml")
    if name in BUNDLED_SCENARIOS and path.parent == Path("."):
        logger.info(f"Loading bundled scenario `{name}`")
        return parse_scenario(bundled_scenario_text(name))

    raise FileNotFoundError(f"No such scenario file or bundled scenario: '{ref}'")


def bundled_scenario_text(name: str) -> str:
    resource = importlib.resources.files("matrix_consensus") / "scenarios"
    return (resource / f"{name}.toml").read_text(encoding="utf-8")


def parse_scenario(text: str) -> Scenario:
    """Strictly parse and eagerly validate a scenario.

    Raises:
        `ScenarioParseError`: for malformed TOML, unknown keys, missing or mistyped
            values.
        `ScenarioValidationError`: for indefinite weights, structural imbalance, a
            failed null-space or leader-coverage check, or trigger parameters out of
            range.
    """
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as err:
        line = getattr(err, "lineno", None) or _decode_error_line(str(err))
        raise ScenarioParseError(f"Invalid TOML: {err}", line=line) from err

    parser = _Parser(text)
    parser.check_keys(data, {"network", "leaders", "params", "sim"}, "")

    network_section = parser.section(data, "network", required=True)
    net = parser.resolve(network_section, network_options, "network", extra={"edge"})
    n, d, weight_tol = net["n"], net["d"], float(net["weight_tol"])

    sim_section = parser.section(data, "sim", required=True)
    sim = parser.resolve(sim_section, sim_options, "sim", extra={"init"})
    mode = SimMode(sim["mode"])
    init = parser.parse_init(parser.section(sim_section, "init"), n, d)

    edges = parser.parse_edges(network_section.get("edge", []), n, d, weight_tol)
    leader_edges, inputs = parser.parse_leaders(
        parser.section(data, "leaders"), n, d, weight_tol
    )

    try:
        network = MatrixWeightedNetwork(n, d, edges, leader_edges, inputs)
    except ValueError as err:
        raise ScenarioValidationError(str(err)) from err

    gauge = _check_network(network, mode, weight_tol)

    params = None
    if "params" in data:
        raw = parser.resolve(parser.section(data, "params"), params_options, "params")
        per_agent_raw = {}
        for key in PARAM_FIELDS:
            try:
                per_agent_raw[key] = per_agent(raw[key], n, key).tolist()
            except ValueError as err:
                raise ScenarioParseError(
                    str(err), field=f"params.{key}", line=parser.line_of(key)
                ) from err
        params = _build_params(network, mode, per_agent_raw)
    elif mode.is_event_triggered:
        raise ScenarioValidationError(f"Mode `{mode}` needs a [params] section.")

    scenario = Scenario(
        network=network,
        mode=mode,
        delta_sat=float(sim["delta_sat"]),
        t_end=float(sim["t_end"]),
        params=params,
        gauge=gauge,
        weight_tol=weight_tol,
        dt=float(sim["dt"]),
        sample_dt=float(sim["sample_dt"]),
        refine_tol=float(sim["refine_tol"]),
        seed=int(sim["seed"]),
        max_events_per_second=float(sim["max_events_per_second"]),
        init=init,
    )
    try:
        scenario.sim_config()
    except ValueError as err:
        raise ScenarioValidationError(str(err)) from err

    logger.info(f"Scenario validated: {network!r}, mode={mode}")
    return scenario


def dump_scenario(scenario: Scenario) -> str:
    """Serialize `scenario` back to TOML. `parse_scenario()` of the result gives an
    equal scenario.
    """
    network = scenario.network
    data: dict[str, Any] = {
        "network": {
            "n": network.n,
            "d": network.d,
            "weight_tol": scenario.weight_tol,
            "edge": [
                {"i": i + 1, "j": j + 1, "matrix": W.entries.tolist()}
                for i, j, W in network.iter_edges()
            ],
        },
    }

    inputs = network.inputs
    if inputs is not None:
        data["leaders"] = {
            "input": inputs.tolist(),
            "leader_edge": [
                {"node": i + 1, "input": inp + 1, "matrix": B.entries.tolist()}
                for (i, inp), B in network.leader_edges.items()
            ],
        }

    if scenario.params is not None:
        params = {}
        for key in PARAM_FIELDS:
            values = [getattr(p, key) for p in scenario.params]
            params[key] = values[0] if len(set(values)) == 1 else values
        data["params"] = params

    data["sim"] = {
        "mode": str(scenario.mode),
        "delta_sat": scenario.delta_sat,
        "t_end": scenario.t_end,
        "dt": scenario.dt,
        "sample_dt": scenario.sample_dt,
        "refine_tol": scenario.refine_tol,
        "seed": scenario.seed,
        "max_events_per_second": scenario.max_events_per_second,
        "init": scenario.init.as_dict(),
    }
    return tomli_w.dumps(data)


def _check_network(
    network: MatrixWeightedNetwork, mode: SimMode, weight_tol: float
) -> Gauge:
    try:
        gauge = find_gauge(network)
    except StructurallyImbalancedError as err:
        raise ScenarioValidationError(
            f"Network is structurally imbalanced: {err}"
        ) from err

    if not check_assumption1(network, gauge):
        raise ScenarioValidationError(
            "Null-space check failed: the gauged Laplacian's null space is not "
            "range(1_n ⊗ I_d). The network may be disconnected, or semidefinite "
            "weights may leave extra null directions."
        )

    if not mode.has_leaders:
        return gauge

    if not network.has_leaders:
        raise ScenarioValidationError(
            f"Mode `{mode}` needs a [leaders] section with inputs and leader edges."
        )
    if not check_assumption2(network, tol=weight_tol):
        raise ScenarioValidationError(
            "Leader-coverage check failed: the graph augmented with the inputs must "
            "be structurally balanced and the summed |B_il| must be positive definite."
        )
    return find_leader_gauge(network)


def _build_params(
    network: MatrixWeightedNetwork, mode: SimMode, raw: dict[str, list[float]]
) -> tuple[TriggerParams, ...]:
    gains = gain_table(network, leader_follower=mode.has_leaders)
    params = tuple(
        TriggerParams(
            **{key: float(raw[key][i]) for key in PARAM_FIELDS}, gain=gains[i]
        )
        for i in range(network.n)
    )
    try:
        validate_params(params, network, leader_follower=mode.has_leaders)
    except ParamViolationError as err:
        raise ScenarioValidationError(
            "Trigger parameters out of range: " + "; ".join(err.violations)
        ) from err
    return params


def _decode_error_line(message: str) -> int | None:
    match = re.search(r"line (\d+)", message)
    return int(match.group(1)) if match else None


class _Parser:
    """Walks the decoded TOML document. Errors point back at the source line where the
    offending key (or array-of-tables entry) was written.
    """

    def __init__(self, text: str):
        self._text = text

    def line_of(
        self, key: str | None, table: str | None = None, occurrence: int = 0
    ) -> int | None:
        start = 0
        if table is not None:
            header = rf"^\s*\[\[\s*{re.escape(table)}\s*\]\]"
            headers = list(re.finditer(header, self._text, flags=re.MULTILINE))
            if len(headers) <= occurrence:
                return None
            start = headers[occurrence].start()
        if key is not None:
            pattern = re.compile(rf"^\s*{re.escape(key)}\s*=", flags=re.MULTILINE)
            match = pattern.search(self._text, start)
            if match is not None:
                return self._text.count("\n", 0, match.start()) + 1
        if table is not None:
            return self._text.count("\n", 0, start) + 1
        return None

    def error(
        self,
        msg: str,
        field: str,
        key: str | None = None,
        table: str | None = None,
        occurrence: int = 0,
    ) -> ScenarioParseError:
        if key is None and table is None:
            key = field.rsplit(".", 1)[-1]
        return ScenarioParseError(
            msg, field=field, line=self.line_of(key, table, occurrence)
        )

    def check_keys(
        self,
        section: dict,
        known: set[str],
        path: str,
        table: str | None = None,
        occurrence: int = 0,
    ):
        for key in section:
            if key not in known:
                field = f"{path}.{key}" if path else key
                raise self.error(
                    f"Unknown key `{field}`.", field, key, table, occurrence
                )

    def section(self, parent: dict, name: str, *, required: bool = False) -> dict:
        if name not in parent:
            if required:
                raise ScenarioParseError(f"Missing [{name}] section.", field=name)
            return {}
        value = parent[name]
        if not isinstance(value, dict):
            raise self.error(f"`{name}` must be a table.", name)
        return value

    def resolve(
        self,
        section: dict,
        options: list[ConfigOption],
        path: str,
        extra: set[str] | None = None,
    ) -> dict[str, Any]:
        self.check_keys(section, {o.name for o in options} | (extra or set()), path)
        values = {}
        for option in options:
            value, err_msg = option.resolve(section)
            if err_msg is not None:
                raise self.error(f"[{path}] {err_msg}", f"{path}.{option.name}")
            values[option.name] = value
        return values

    def parse_init(self, section: dict, n: int, d: int) -> InitSpec:
        values = self.resolve(section, init_options, "sim.init")
        if values["kind"] == "uniform":
            low, high = float(values["low"]), float(values["high"])
            if low > high:
                raise self.error("`low` must not exceed `high`.", "sim.init.low")
            return InitSpec(kind="uniform", low=low, high=high)

        states = values["states"]
        if states is None:
            raise self.error(
                "`states` is required for explicit initial conditions.",
                "sim.init.states",
                key="kind",
            )
        arr = self._matrix(states, (n, d), "sim.init.states")
        return InitSpec(
            kind="explicit", states=tuple(tuple(float(v) for v in row) for row in arr)
        )

    def parse_edges(
        self, entries: Any, n: int, d: int, weight_tol: float
    ) -> dict[tuple[int, int], WeightMatrix]:
        table = "network.edge"
        if not isinstance(entries, list):
            raise self.error("`edge` must be an array of tables.", table, "edge")
        edges = {}
        for k, entry in enumerate(entries):
            field = f"{table}[{k}]"
            if not isinstance(entry, dict):
                raise self.error("Edge must be a table.", field, None, table, k)
            self.check_keys(entry, {"i", "j", "matrix", "weight"}, field, table, k)
            i = self._index(entry, "i", n, field, table, k)
            j = self._index(entry, "j", n, field, table, k)
            if i == j:
                raise self.error(f"Self-loop on node {i + 1}.", field, "j", table, k)
            key = (min(i, j), max(i, j))
            if key in edges:
                raise self.error(
                    f"Duplicate edge ({key[0] + 1}, {key[1] + 1}).",
                    field,
                    None,
                    table,
                    k,
                )
            edges[key] = self._weight(entry, d, weight_tol, field, table, k)
        return edges

    def parse_leaders(
        self, section: dict, n: int, d: int, weight_tol: float
    ) -> tuple[dict[tuple[int, int], WeightMatrix] | None, np.ndarray | None]:
        if not section:
            return (None, None)
        self.check_keys(section, {"input", "leader_edge"}, "leaders")
        if "input" not in section:
            raise ScenarioParseError(
                "`leaders.input` vectors are required.", field="leaders.input"
            )

        raw_inputs = section["input"]
        if not isinstance(raw_inputs, list) or not raw_inputs:
            raise self.error("`input` must be a list of vectors.", "leaders.input")
        inputs = self._matrix(raw_inputs, (len(raw_inputs), d), "leaders.input")
        m = inputs.shape[0]

        table = "leaders.leader_edge"
        entries = section.get("leader_edge", [])
        if not isinstance(entries, list) or not entries:
            raise ScenarioParseError(
                "At least one `leader_edge` is required.", field=table
            )
        leader_edges = {}
        for k, entry in enumerate(entries):
            field = f"{table}[{k}]"
            if not isinstance(entry, dict):
                raise self.error("Leader edge must be a table.", field, None, table, k)
            known = {"node", "input", "matrix", "weight"}
            self.check_keys(entry, known, field, table, k)
            i = self._index(entry, "node", n, field, table, k)
            inp = self._index(entry, "input", m, field, table, k)
            if (i, inp) in leader_edges:
                raise self.error(
                    f"Duplicate leader edge ({i + 1}, w{inp + 1}).",
                    field,
                    None,
                    table,
                    k,
                )
            leader_edges[(i, inp)] = self._weight(entry, d, weight_tol, field, table, k)
        return (leader_edges, inputs)

    def _index(
        self, entry: dict, key: str, count: int, field: str, table: str, k: int
    ) -> int:
        value = entry.get(key)
        if not isinstance(value, int) or isinstance(value, bool):
            raise self.error(
                f"`{key}` must be an integer.", f"{field}.{key}", key, table, k
            )
        if not (1 <= value <= count):
            raise self.error(
                f"`{key}`={value} is out of range 1..{count}.",
                f"{field}.{key}",
                key,
                table,
                k,
            )
        return value - 1

    def _weight(
        self,
        entry: dict,
        d: int,
        weight_tol: float,
        field: str,
        table: str,
        k: int,
    ) -> WeightMatrix:
        if ("matrix" in entry) == ("weight" in entry):
            raise self.error(
                "Exactly one of `matrix` or `weight` must be given.",
                field,
                None,
                table,
                k,
            )
        try:
            if "weight" in entry:
                a = entry["weight"]
                is_valid, err_msg = validate_number("weight", a)
                if not is_valid:
                    raise self.error(
                        str(err_msg), f"{field}.weight", "weight", table, k
                    )
                return WeightMatrix.scalar(float(a), d, weight_tol)

            M = self._matrix(entry["matrix"], (d, d), f"{field}.matrix", table, k)
            if np.max(np.abs(M - M.T)) > SYMMETRY_ATOL:
                raise self.error(
                    "`matrix` must be symmetric.", f"{field}.matrix", "matrix", table, k
                )
            return WeightMatrix.from_entries((M + M.T) / 2, weight_tol)
        except IndefiniteWeightError as err:
            raise ScenarioValidationError(f"{field}: {err}") from err

    def _matrix(
        self,
        value: Any,
        shape: tuple[int, int],
        field: str,
        table: str | None = None,
        k: int = 0,
    ) -> np.ndarray:
        key = field.rsplit(".", 1)[-1]
        rows, cols = shape
        if (
            not isinstance(value, list)
            or len(value) != rows
            or any(not isinstance(row, list) or len(row) != cols for row in value)
        ):
            raise self.error(
                f"`{key}` must be {rows} rows of {cols} numbers.", field, key, table, k
            )
        for row in value:
            for v in row:
                is_valid, _ = validate_number(key, v)
                if not is_valid:
                    raise self.error(
                        f"`{key}` must hold finite numbers.", field, key, table, k
                    )
        return np.array(value, dtype=float)
