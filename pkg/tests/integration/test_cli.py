# SPDX-FileCopyrightText: 2023-present Aravinda Rao <maniacalace@gmail.com>
# SPDX-License-Identifier: MIT

import re

import pytest

from matrix_consensus import __version__
from matrix_consensus.cli import main
from matrix_consensus.core.sim import sample_grid
from matrix_consensus.scenario import load_scenario
from tests.data.networks import G1_OMEGA, G1_VARPI


def gain_rows(out: str) -> list[float]:
    return [float(m[1]) for m in re.finditer(r"^\s+\d\s+([\d.]+)$", out, re.MULTILINE)]


class TestCheck:
    def test_leaderless(self, cli):
        result = cli("check", "g1_leaderless")

        assert result.code == 0
        assert "partition: {1, 2, 5} / {3, 4}\n" in result.out
        assert "structurally balanced: yes\n" in result.out
        assert "null-space condition: satisfied\n" in result.out
        assert "leader coverage condition: n/a (no leaders)\n" in result.out
        assert "agents: 5, dimension: 3, edges: 6\n" in result.out
        assert gain_rows(result.out) == pytest.approx(G1_VARPI, rel=1e-2)

    def test_leader_follower(self, cli):
        result = cli("check", "g1_leader_follower")

        assert result.code == 0
        assert "leader coverage condition: satisfied\n" in result.out
        assert "leader input w0: [0.2, 0.4, 0.6]\n" in result.out
        assert "omega" in result.out
        gains = gain_rows(result.out)
        assert gains[:5] == pytest.approx(G1_VARPI, rel=1e-2)
        assert gains[5:] == pytest.approx(G1_OMEGA, rel=1e-2)

    def test_file(self, cli, scenario_file):
        result = cli("check", scenario_file())

        assert result.code == 0
        assert "partition: {1, 2} / {3}\n" in result.out


class TestParams:
    @pytest.mark.parametrize(
        ("name", "label", "expected"),
        [
            ("g1_leaderless", "varpi", G1_VARPI),
            ("g1_leader_follower", "omega", G1_OMEGA),
        ],
    )
    def test_gain_table(self, cli, name, label, expected):
        result = cli("params", name)

        assert result.code == 0
        assert result.out.splitlines()[0].split() == ["agent", label]
        assert gain_rows(result.out) == pytest.approx(expected, rel=1e-2)


class TestRun:
    def test_writes_outputs(self, cli, scenario_file, tmp_path):
        out_dir = tmp_path / "out"

        result = cli("run", scenario_file(), "--out", out_dir)

        assert result.code == 0
        assert re.search(r"^final disagreement: \S+$", result.out, re.MULTILINE)
        assert re.search(r"^events: \d+$", result.out, re.MULTILINE)
        assert result.out.count("wrote ") == 5
        for name in ["trajectory", "controls", "events", "psi"]:
            assert (out_dir / f"{name}.csv").is_file()
        assert (out_dir / "summary.txt").is_file()
        assert not list(out_dir.glob("*.svg"))

    def test_leader_follower_reports_tracking_error(self, cli, scenario_file, tmp_path):
        path = scenario_file(mode="event_leader_follower")

        result = cli("run", path, "--out", tmp_path / "out")

        assert result.code == 0
        assert "final tracking error: " in result.out

    def test_default_out_dir(self, cli, scenario_file, tmp_path, monkeypatch):
        path = scenario_file()
        monkeypatch.chdir(tmp_path)

        assert cli("run", path).code == 0
        assert (tmp_path / "out" / "trajectory.csv").is_file()

    def test_plots(self, cli, scenario_file, tmp_path):
        out_dir = tmp_path / "out"

        result = cli("run", scenario_file(), "--out", out_dir, "--plots")

        assert result.code == 0
        svgs = sorted(p.name for p in out_dir.glob("*.svg"))
        assert svgs == ["controls.svg", "events.svg", "psi.svg", "states.svg"]

    def test_continuous_run_skips_trigger_plots(self, cli, scenario_file, tmp_path):
        out_dir = tmp_path / "out"
        path = scenario_file(mode="continuous_leaderless")

        result = cli("run", path, "--out", out_dir, "--plots")

        assert result.code == 0
        assert "events: 0\n" in result.out
        assert sorted(p.name for p in out_dir.glob("*.svg")) == [
            "controls.svg",
            "states.svg",
        ]
        assert "Skipping the events plot" in result.err

    def test_seed_override(self, cli, scenario_file, tmp_path):
        path = scenario_file()

        cli("run", path, "--out", tmp_path / "a", "--seed", "7")
        cli("run", path, "--out", tmp_path / "b", "--seed", "7")
        cli("run", path, "--out", tmp_path / "c")

        def trajectory(name):
            return (tmp_path / name / "trajectory.csv").read_bytes()

        assert trajectory("a") == trajectory("b")
        assert trajectory("a") != trajectory("c")


class TestCompare:
    def test_event_scenario(self, cli, scenario_file):
        path = scenario_file()
        config = load_scenario(path).sim_config()

        result = cli("compare", path)

        assert result.code == 0
        assert "modes: event_leaderless vs continuous_leaderless\n" in result.out
        row = re.search(r"^events/samples\s+(\d+)\s+(\d+)$", result.out, re.MULTILINE)
        assert row is not None
        assert int(row[1]) > 0
        assert int(row[2]) == sample_grid(config.t_end, config.sample_dt).size
        assert "cpu seconds" in result.out
        assert "max final-state difference: " in result.out

    def test_continuous_scenario_is_rejected(self, cli, scenario_file):
        result = cli("compare", scenario_file(mode="continuous_leaderless"))

        assert result.code == 1
        assert "needs an event-triggered scenario" in result.err


class TestSweep:
    def test_sweep(self, cli, scenario_file):
        path = scenario_file(t_end=0.2)

        result = cli("sweep", path, "--seeds", "2", "--jobs", "2")

        assert result.code == 0
        lines = result.out.splitlines()
        assert lines[0].split() == ["seed", "disagreement", "events", "min_gap"]
        assert [line.split()[0] for line in lines[1:3]] == ["3", "4"]
        assert lines[3].startswith("worst disagreement: ")
        assert lines[4].startswith("total events: ")


class TestErrors:
    def test_missing_scenario(self, cli):
        result = cli("check", "missing.toml")

        assert result.code == 1
        assert "matrix-consensus: error: No such scenario file" in result.err
        assert result.out == ""

    def test_invalid_params(self, cli, scenario_file):
        params = "rho = 1.0\ndelta = 1.0\nbeta = 1.0\ntheta = 0.5\npsi0 = 0.5\n"

        result = cli("run", scenario_file(params=params))

        assert result.code == 1
        assert "Trigger parameters out of range" in result.err

    def test_parse_error_names_the_line(self, cli, scenario_file):
        path = scenario_file(extra_sim="colour = 1\n")

        result = cli("check", path)

        assert result.code == 1
        assert re.search(r"Unknown key `sim.colour`\. \(line \d+\)", result.err)

    @pytest.mark.parametrize(
        "argv",
        [
            [],
            ["frobnicate"],
            ["run"],
            ["sweep", "g1_leaderless", "--seeds", "0"],
            ["run", "g1_leaderless", "--seed", "abc"],
        ],
    )
    def test_usage_errors(self, argv, capsys):
        with pytest.raises(SystemExit) as exc_info:
            main(argv)

        assert exc_info.value.code == 2
        assert "usage: matrix-consensus" in capsys.readouterr().err

    def test_version(self, capsys):
        with pytest.raises(SystemExit) as exc_info:
            main(["--version"])

        assert exc_info.value.code == 0
        assert capsys.readouterr().out.strip() == __version__


def test_module_entry_point(cli_subprocess, tmp_path):
    result = cli_subprocess("check", "g1_leaderless", cwd=tmp_path)

    assert result.code == 0
    assert "partition: {1, 2, 5} / {3, 4}" in result.out
