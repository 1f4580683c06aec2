# SPDX-FileCopyrightText: 2023-present Aravinda Rao <maniacalace@gmail.com>
# SPDX-License-Identifier: MIT

import dataclasses
import subprocess
import sys

import pytest

from matrix_consensus.cli import main
from tests.data.networks import small_scenario_toml


@dataclasses.dataclass
class CliResult:
    code: int
    out: str
    err: str


@pytest.fixture()
def scenario_file(tmp_path):
    """Write `small_scenario_toml(**kwargs)` into `tmp_path`."""

    def _scenario_file(name: str = "small.toml", **kwargs):
        path = tmp_path / name
        path.write_text(small_scenario_toml(**kwargs), encoding="utf-8")
        return path

    return _scenario_file


@pytest.fixture()
def cli(capsys):
    """Invoke `main()` in-process and capture what it prints."""

    def _cli(*argv) -> CliResult:
        code = main([str(a) for a in argv])
        captured = capsys.readouterr()
        return CliResult(code, captured.out, captured.err)

    return _cli


@pytest.fixture()
def cli_subprocess():
    """Invoke `python -m matrix_consensus` in a fresh interpreter."""

    def _cli_subprocess(*argv, cwd=None) -> CliResult:
        proc = subprocess.run(  # noqa: S603
            [sys.executable, "-m", "matrix_consensus", *[str(a) for a in argv]],
            capture_output=True,
            text=True,
            cwd=cwd,
            timeout=120,
        )
        return CliResult(proc.returncode, proc.stdout, proc.stderr)

    return _cli_subprocess
