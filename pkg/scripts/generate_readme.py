# SPDX-FileCopyrightText: 2023-present Aravinda Rao <maniacalace@gmail.com>
# SPDX-License-Identifier: MIT


# pyright: reportPrivateUsage=false


import argparse
import pathlib

import jinja2

from matrix_consensus.cli import build_parser
from matrix_consensus.scenario import (
    init_options,
    network_options,
    params_options,
    sim_options,
)
from matrix_consensus.utils.config import ConfigOption


t_readme_path = pathlib.Path("templates/README.template.md")
readme_path = pathlib.Path("README.md")


def main():
    t_readme = jinja2.Template(t_readme_path.read_text())

    readme = t_readme.render(
        {
            "option_sections": [
                {"name": "network", "options": get_config_options(network_options)},
                {"name": "params", "options": get_config_options(params_options)},
                {"name": "sim", "options": get_config_options(sim_options)},
                {"name": "sim.init", "options": get_config_options(init_options)},
            ],
            "commands": get_commands(build_parser()),
        }
    )

    readme_path.write_text(readme)


def get_config_options(options: list[ConfigOption]) -> list:
    config_options = []

    for option in options:
        if not option.description:
            raise ValueError(
                f"The `{option.name}` scenario option is missing documentation"
            )

        config_options.append(
            {
                "name": option.name,
                "default": option.doc_default(),
                "description": _one_line(option.description),
            }
        )

    return config_options


def get_commands(parser: argparse.ArgumentParser) -> list:
    subparsers = next(
        a for a in parser._actions if isinstance(a, argparse._SubParsersAction)
    )
    commands = []
    for choice in subparsers._choices_actions:
        if not choice.help:
            raise ValueError(f"The `{choice.dest}` command is missing documentation")
        sub = subparsers.choices[choice.dest]
        usage = sub.format_usage().removeprefix("usage: ").strip()
        commands.append(
            {"name": choice.dest, "usage": _one_line(usage), "help": choice.help}
        )
    return commands


def _one_line(text: str) -> str:
    # Markdown table cells can't hold newlines.
    return " ".join(text.split()).replace("|", "\\|")


if __name__ == "__main__":
    main()
